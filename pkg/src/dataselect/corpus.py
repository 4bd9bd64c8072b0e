"""Corpus ingestion: tokenization, loaders, vocabulary and validation splits."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)


class CorpusFormatError(ValueError):
    """Raised when an input file does not follow the expected line format."""

    def __init__(self, path, lineno, message):
        self.path = str(path)
        self.lineno = lineno
        super().__init__(f"{path}:{lineno}: {message}")


@dataclass(frozen=True)
class Example:
    """One training unit: a review or a tagged sentence.

    ``label`` is ``0``/``1`` for sentiment, a tuple of tags for tagging, or
    ``None`` for unlabeled text.
    """

    id: str
    tokens: tuple[str, ...]
    label: int | tuple[str, ...] | None = None
    domain: str = ""

    def __post_init__(self):
        if not self.tokens:
            raise ValueError(f"example {self.id!r} has no tokens")
        if isinstance(self.label, tuple) and len(self.label) != len(self.tokens):
            raise ValueError(
                f"example {self.id!r}: {len(self.label)} tags for {len(self.tokens)} tokens"
            )

    @property
    def is_tagged(self) -> bool:
        return isinstance(self.label, tuple)


@dataclass(frozen=True)
class DomainCorpus:
    domain: str
    labeled: tuple[Example, ...] = ()
    unlabeled: tuple[Example, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "labeled", tuple(self.labeled))
        object.__setattr__(self, "unlabeled", tuple(self.unlabeled))
        for ex in self.labeled + self.unlabeled:
            if ex.domain != self.domain:
                raise ValueError(f"example {ex.id!r} belongs to {ex.domain!r}, not {self.domain!r}")
        ids = Counter(ex.id for ex in self.labeled + self.unlabeled)
        dupes = sorted(i for i, c in ids.items() if c > 1)
        if dupes:
            raise ValueError(f"duplicate example ids in {self.domain!r}: {dupes[:5]}")

    def with_unlabeled(self, unlabeled: Iterable[Example]) -> "DomainCorpus":
        return DomainCorpus(self.domain, self.labeled, tuple(unlabeled))

    def all_examples(self) -> tuple[Example, ...]:
        return self.labeled + self.unlabeled


@dataclass(frozen=True)
class Vocabulary:
    """Ordered word types with dense indices and corpus probabilities."""

    types: tuple[str, ...]
    probs: np.ndarray
    index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.shape != (len(self.types),):
            raise ValueError("one probability per type is required")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "index", {w: i for i, w in enumerate(self.types)})

    def __len__(self):
        return len(self.types)

    def __contains__(self, word):
        return word in self.index

    def prob(self, word: str) -> float | None:
        i = self.index.get(word)
        return None if i is None else float(self.probs[i])

    def indices(self, tokens: Iterable[str]) -> np.ndarray:
        """Indices of the in-vocabulary tokens; OOV tokens are dropped."""
        idx = self.index
        return np.fromiter((idx[t] for t in tokens if t in idx), dtype=np.int64)


@dataclass(frozen=True)
class Split:
    validation: tuple[Example, ...]
    pool: tuple[Example, ...]


def tokenize(text: str, lowercase: bool = True) -> list[str]:
    if lowercase:
        text = text.lower()
    return text.split()


def _domain_from(path, domain):
    return domain if domain is not None else Path(path).stem.split(".")[0]


def load_labeled_reviews(path, domain: str | None = None, lowercase: bool = True) -> DomainCorpus:
    """Read ``<label>\\t<text>`` lines with label in {0, 1}."""
    domain = _domain_from(path, domain)
    examples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            if "\t" not in line:
                raise CorpusFormatError(path, lineno, "expected '<label>\\t<text>'")
            label, text = line.split("\t", 1)
            if label.strip() not in ("0", "1"):
                raise CorpusFormatError(path, lineno, f"label must be 0 or 1, got {label!r}")
            tokens = tokenize(text, lowercase)
            if not tokens:
                raise CorpusFormatError(path, lineno, "empty text")
            examples.append(
                Example(f"{domain}-{len(examples)}", tuple(tokens), int(label), domain)
            )
    return DomainCorpus(domain, examples)


def load_tagged_conll(path, domain: str | None = None, lowercase: bool = False) -> DomainCorpus:
    """Read two-column ``token\\ttag`` blocks separated by blank lines."""
    domain = _domain_from(path, domain)
    examples = []
    tokens, tags = [], []

    def flush():
        if tokens:
            examples.append(
                Example(f"{domain}-{len(examples)}", tuple(tokens), tuple(tags), domain)
            )
            tokens.clear()
            tags.clear()

    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip():
                flush()
                continue
            cols = line.split("\t")
            if len(cols) != 2 or not cols[0] or not cols[1]:
                raise CorpusFormatError(path, lineno, f"expected 2 tab-separated columns, got {len(cols)}")
            tokens.append(cols[0].lower() if lowercase else cols[0])
            tags.append(cols[1])
    flush()
    return DomainCorpus(domain, examples)


def load_unlabeled_text(path, domain: str | None = None, lowercase: bool = True) -> list[Example]:
    """One raw text (review or sentence) per line; blank lines skipped."""
    domain = _domain_from(path, domain)
    examples = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            tokens = tokenize(line, lowercase)
            if tokens:
                examples.append(Example(f"{domain}-u{len(examples)}", tuple(tokens), None, domain))
    return examples


def write_labeled_reviews(examples: Iterable[Example], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(f"{int(ex.label)}\t{' '.join(ex.tokens)}\n")


def write_tagged_conll(examples: Iterable[Example], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            for tok, tag in zip(ex.tokens, ex.label):
                fh.write(f"{tok}\t{tag}\n")
            fh.write("\n")


def write_unlabeled_text(examples: Iterable[Example], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(" ".join(ex.tokens) + "\n")


def write_examples(examples: Sequence[Example], path) -> None:
    """Write labeled examples in whichever loader format matches their labels."""
    if examples and examples[0].is_tagged:
        write_tagged_conll(examples, path)
    else:
        write_labeled_reviews(examples, path)


def build_vocabulary(corpora: Sequence[DomainCorpus], max_size: int = 10_000) -> Vocabulary:
    """Keep the ``max_size`` most frequent types; ties go to the lexicographically smaller type."""
    if max_size <= 0:
        raise ValueError("max_size must be positive")
    if not corpora:
        raise ValueError("at least one corpus is required")
    counts = Counter()
    for corpus in corpora:
        for ex in corpus.all_examples():
            counts.update(ex.tokens)
    if not counts:
        raise ValueError("corpora contain no tokens")
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:max_size]
    freq = np.array([c for _, c in ranked], dtype=np.float64)
    return Vocabulary(tuple(w for w, _ in ranked), freq / freq.sum())


def split_validation(corpus: DomainCorpus, size: int, seed: int) -> Split:
    """Uniformly sample ``size`` labeled examples as validation; the rest form the pool."""
    labeled = corpus.labeled
    if size < 0 or size > len(labeled):
        raise ValueError(
            f"cannot take {size} validation examples from {len(labeled)} labeled in {corpus.domain!r}"
        )
    rng = np.random.default_rng(seed)
    chosen = set(rng.choice(len(labeled), size=size, replace=False).tolist())
    validation = tuple(ex for i, ex in enumerate(labeled) if i in chosen)
    pool = tuple(ex for i, ex in enumerate(labeled) if i not in chosen)
    return Split(validation, pool)
