"""Example and domain representations: term distributions, LDA topics, embeddings."""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import Vocabulary

INFERENCE_SWEEPS = 20


def term_distribution(tokens: Iterable[str], vocab: Vocabulary) -> np.ndarray:
    """Relative frequency over ``vocab`` of the in-vocabulary tokens."""
    idx = vocab.indices(tokens)
    if idx.size == 0:
        raise ValueError("no in-vocabulary tokens")
    counts = np.bincount(idx, minlength=len(vocab)).astype(np.float64)
    return counts / counts.sum()


def domain_representation(examples: Iterable, vocab: Vocabulary) -> np.ndarray:
    """Term distribution over the concatenated tokens of a domain's labeled + unlabeled text."""
    return term_distribution((tok for ex in examples for tok in ex.tokens), vocab)


@dataclass
class LdaModel:
    """Collapsed-Gibbs LDA; ``topic_word`` holds the final sweep's counts (K x |V|)."""

    topic_word: np.ndarray
    alpha: float
    beta: float
    seed: int
    vocab_types: tuple[str, ...] = ()
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self._index = {w: i for i, w in enumerate(self.vocab_types)}

    @property
    def n_topics(self) -> int:
        return self.topic_word.shape[0]

    def topic_word_distributions(self) -> np.ndarray:
        tw = self.topic_word + self.beta
        return tw / tw.sum(axis=1, keepdims=True)

    def save(self, path) -> None:
        np.savez(
            path,
            topic_word=self.topic_word,
            alpha=self.alpha,
            beta=self.beta,
            seed=self.seed,
            vocab_types=np.array(self.vocab_types, dtype=object),
        )

    @classmethod
    def load(cls, path) -> "LdaModel":
        with np.load(path, allow_pickle=True) as data:
            return cls(
                data["topic_word"],
                float(data["alpha"]),
                float(data["beta"]),
                int(data["seed"]),
                tuple(data["vocab_types"].tolist()),
            )


def _gibbs_sweep(doc_words, doc_topics, doc_topic, topic_word, topic_total, alpha, beta, vbeta, rng):
    for d, (words, topics) in enumerate(zip(doc_words, doc_topics)):
        ndk = doc_topic[d]
        uniforms = rng.random(len(words))
        for i, w in enumerate(words):
            k = topics[i]
            ndk[k] -= 1
            topic_word[k, w] -= 1
            topic_total[k] -= 1
            p = (ndk + alpha) * (topic_word[:, w] + beta) / (topic_total + vbeta)
            cdf = np.cumsum(p)
            k = int(np.searchsorted(cdf, uniforms[i] * cdf[-1], side="right"))
            k = min(k, len(cdf) - 1)
            topics[i] = k
            ndk[k] += 1
            topic_word[k, w] += 1
            topic_total[k] += 1


def train_lda(
    documents: Sequence[Sequence[str]],
    vocab: Vocabulary,
    n_topics: int = 50,
    iterations: int = 10,
    seed: int = 0,
    alpha: float | None = None,
    beta: float = 0.01,
) -> LdaModel:
    """Fit LDA by collapsed Gibbs sampling, sweeping documents in corpus order.

    ``alpha`` defaults to 50 / K. OOV tokens are dropped; documents left empty
    are skipped.
    """
    if n_topics < 1:
        raise ValueError("n_topics must be >= 1")
    if alpha is None:
        alpha = 50.0 / n_topics
    doc_words = [vocab.indices(doc) for doc in documents]
    doc_words = [w for w in doc_words if w.size]
    if not doc_words:
        raise ValueError("LDA needs at least one document with in-vocabulary tokens")

    rng = np.random.default_rng(seed)
    V = len(vocab)
    topic_word = np.zeros((n_topics, V), dtype=np.float64)
    doc_topic = np.zeros((len(doc_words), n_topics), dtype=np.float64)
    doc_topics = []
    for d, words in enumerate(doc_words):
        z = rng.integers(n_topics, size=words.size)
        doc_topics.append(z)
        np.add.at(doc_topic[d], z, 1)
        np.add.at(topic_word, (z, words), 1)
    topic_total = topic_word.sum(axis=1)

    for _ in range(iterations):
        _gibbs_sweep(doc_words, doc_topics, doc_topic, topic_word, topic_total,
                     alpha, beta, V * beta, rng)
    return LdaModel(topic_word, float(alpha), float(beta), seed, vocab.types)


def infer_topics(model: LdaModel, tokens: Sequence[str], sweeps: int = INFERENCE_SWEEPS,
                 seed: int | None = None) -> np.ndarray:
    """Fold-in Gibbs inference with the topic-word counts held fixed.

    Returns alpha-smoothed topic proportions of the final sweep. A document
    with no known words gets the uniform distribution. The sampler is seeded
    from the model seed and the token sequence, so repeated calls agree.
    """
    K = model.n_topics
    words = np.fromiter((model._index[t] for t in tokens if t in model._index), dtype=np.int64)
    if words.size == 0:
        return np.full(K, 1.0 / K)
    if K == 1:
        return np.ones(1)
    if seed is None:
        seed = model.seed
    rng = np.random.default_rng([seed, zlib.crc32(" ".join(tokens).encode("utf-8"))])

    phi = model.topic_word_distributions()[:, words]  # K x n
    z = rng.integers(K, size=words.size)
    ndk = np.bincount(z, minlength=K).astype(np.float64)
    for _ in range(sweeps):
        uniforms = rng.random(words.size)
        for i in range(words.size):
            ndk[z[i]] -= 1
            cdf = np.cumsum((ndk + model.alpha) * phi[:, i])
            k = min(int(np.searchsorted(cdf, uniforms[i] * cdf[-1], side="right")), K - 1)
            z[i] = k
            ndk[k] += 1
    theta = ndk + model.alpha
    return theta / theta.sum()


@dataclass
class EmbeddingTable:
    vectors: dict[str, np.ndarray]
    dim: int
    smoothing: float = 1e-3

    def __post_init__(self):
        if self.smoothing <= 0:
            raise ValueError("smoothing factor must be positive")

    def __len__(self):
        return len(self.vectors)

    def __contains__(self, word):
        return word in self.vectors

    def get(self, word):
        return self.vectors.get(word)

    def scaled(self, factor: float) -> "EmbeddingTable":
        return EmbeddingTable({w: v * factor for w, v in self.vectors.items()}, self.dim, self.smoothing)


def load_embeddings(path, smoothing: float = 1e-3, lowercase: bool = False) -> EmbeddingTable:
    """Read ``word v1 ... vd`` lines (GloVe text format); later duplicates win."""
    vectors: dict[str, np.ndarray] = {}
    dim = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.rstrip().split(" ")
            if len(parts) < 2:
                continue
            word, values = parts[0], parts[1:]
            if dim == 0:
                dim = len(values)
            elif len(values) != dim:
                raise ValueError(f"{Path(path)}:{lineno}: expected {dim} values, got {len(values)}")
            try:
                vec = np.array(values, dtype=np.float64)
            except ValueError as err:
                raise ValueError(f"{Path(path)}:{lineno}: {err}") from None
            vectors[word.lower() if lowercase else word] = vec
    return EmbeddingTable(vectors, dim, smoothing)


def embed_example(tokens: Sequence[str], table: EmbeddingTable, vocab: Vocabulary) -> np.ndarray:
    """Average of embeddings weighted by sqrt(a / p(w)).

    Tokens missing an embedding or a vocabulary probability are skipped and
    do not count towards the average.
    """
    total = np.zeros(table.dim)
    n = 0
    a = table.smoothing
    for tok in tokens:
        vec = table.get(tok)
        p = vocab.prob(tok)
        if vec is None or p is None:
            continue
        total += vec * np.sqrt(a / p)
        n += 1
    if n == 0:
        raise ValueError("no token has both an embedding and a vocabulary probability")
    return total / n
