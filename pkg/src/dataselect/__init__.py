"""Learned data selection for transfer learning."""

__version__ = "0.1.0"
