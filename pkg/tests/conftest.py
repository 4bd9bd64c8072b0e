import numpy as np
import pytest

from dataselect.corpus import DomainCorpus, Example, Vocabulary
from dataselect.synthetic import make_sentiment_benchmark, make_tagging_benchmark


def vocab_of(words, probs=None):
    words = tuple(words)
    if probs is None:
        probs = np.full(len(words), 1.0 / len(words))
    return Vocabulary(words, np.asarray(probs, dtype=np.float64))


def ex(id_, text, label=None, domain=""):
    return Example(id_, tuple(text.split()), label, domain)


@pytest.fixture(scope="session")
def small_sentiment():
    return make_sentiment_benchmark(seed=0, per_source=120, target_labeled=160, unlabeled=40)


@pytest.fixture(scope="session")
def small_tagging():
    return make_tagging_benchmark(seed=0, per_source=60, target_labeled=80, unlabeled=20)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


__all__ = ["vocab_of", "ex", "DomainCorpus"]


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
