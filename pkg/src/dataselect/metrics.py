"""Similarity and diversity features, the normalized feature matrix, and linear scoring."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .corpus import Vocabulary
from .representations import EmbeddingTable, LdaModel, embed_example, infer_topics, term_distribution

FEATURE_VERSION = 1
DEFAULT_EPSILON = 1e-10

REPRESENTATIONS = ("term", "topic", "embedding")
DISTRIBUTION_MEASURES = ("js", "renyi", "bhattacharyya", "cosine", "euclidean", "variational")
GEOMETRIC_MEASURES = ("cosine", "euclidean", "variational")
DIVERSITY_MEASURES = ("types", "ttr", "entropy", "simpson", "renyi_entropy", "quadratic_entropy")


def _check_pair(p, q):
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError(f"dimension mismatch: {p.shape} vs {q.shape}")
    return p, q


def _smooth(p, epsilon):
    p = p + epsilon
    return p / p.sum()


def kl_divergence(p, q) -> float:
    """KL(p || q) in nats; terms with p_i = 0 contribute nothing."""
    p, q = _check_pair(p, q)
    mask = p > 0
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


def jensen_shannon(p, q) -> float:
    p, q = _check_pair(p, q)
    m = 0.5 * (p + q)
    value = 0.5 * (kl_divergence(p, m) + kl_divergence(q, m))
    return min(max(value, 0.0), math.log(2.0))


def renyi_divergence(p, q, alpha: float = 0.99, epsilon: float = DEFAULT_EPSILON) -> float:
    """Renyi divergence of order ``alpha`` between epsilon-smoothed ``p`` and ``q``."""
    if alpha == 1:
        raise ValueError("alpha must differ from 1")
    p, q = _check_pair(p, q)
    p, q = _smooth(p, epsilon), _smooth(q, epsilon)
    return float(np.log(np.sum(p**alpha * q ** (1.0 - alpha))) / (alpha - 1.0))


def bhattacharyya(p, q, epsilon: float = DEFAULT_EPSILON) -> float:
    """Log of the Bhattacharyya coefficient (0 for identical inputs, negative otherwise).

    Disjoint supports would give -inf; the value is clamped at ``ln(epsilon)``.
    """
    p, q = _check_pair(p, q)
    coefficient = float(np.sum(np.sqrt(p * q)))
    floor = math.log(epsilon)
    if coefficient <= 0:
        return floor
    return min(max(math.log(coefficient), floor), 0.0)


def cosine_similarity(u, v) -> float:
    u, v = _check_pair(u, v)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise ValueError("cosine similarity is undefined for a zero vector")
    return float(np.clip(u @ v / (nu * nv), -1.0, 1.0))


def euclidean_distance(u, v) -> float:
    u, v = _check_pair(u, v)
    return float(np.linalg.norm(u - v))


def variational_distance(u, v) -> float:
    u, v = _check_pair(u, v)
    return float(np.abs(u - v).sum())


def shannon_entropy(p) -> float:
    p = np.asarray(p, dtype=np.float64)
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


def simpson_index(p) -> float:
    p = np.asarray(p, dtype=np.float64)
    return float(-np.sum(p**2))


def renyi_entropy(p, alpha: float = 0.99) -> float:
    """``log(sum p^alpha) / (alpha - 1)``: the textbook Renyi entropy with its sign flipped."""
    if alpha == 1:
        raise ValueError("alpha must differ from 1")
    p = np.asarray(p, dtype=np.float64)
    p = p[p > 0]
    return float(np.log(np.sum(p**alpha)) / (alpha - 1.0))


def quadratic_entropy(types: Sequence[str], p, table: EmbeddingTable | None) -> float:
    """Sum over type pairs of cos(v_i, v_j) p_i p_j; pairs lacking embeddings are skipped."""
    if table is None:
        return 0.0
    keep = [i for i, t in enumerate(types) if t in table]
    if not keep:
        return 0.0
    vecs = np.stack([table.get(types[i]) for i in keep])
    norms = np.linalg.norm(vecs, axis=1)
    nonzero = norms > 0
    vecs = vecs[nonzero] / norms[nonzero, None]
    w = np.asarray(p, dtype=np.float64)[keep][nonzero]
    return float(w @ (vecs @ vecs.T) @ w)


def diversity_features(tokens: Sequence[str], vocab: Vocabulary, table: EmbeddingTable | None = None,
                       alpha: float = 0.99) -> np.ndarray:
    """(#types, type-token ratio, entropy, Simpson, Renyi entropy, quadratic entropy).

    Counts use all tokens. The probability-based measures use the corpus
    probabilities of the example's in-vocabulary types, renormalized over
    those types.
    """
    if not tokens:
        raise ValueError("tokens must be non-empty")
    distinct = sorted(set(tokens))
    in_vocab = [t for t in distinct if t in vocab]
    if not in_vocab:
        raise ValueError("no in-vocabulary types")
    p = np.array([vocab.prob(t) for t in in_vocab])
    p = p / p.sum()
    return np.array([
        len(distinct),
        len(distinct) / len(tokens),
        shannon_entropy(p),
        simpson_index(p),
        renyi_entropy(p, alpha),
        quadratic_entropy(in_vocab, p, table),
    ])


def similarity_features(example_repr, target_repr, kind: str, alpha: float = 0.99,
                        epsilon: float = DEFAULT_EPSILON) -> np.ndarray:
    """Six measures for term/topic distributions, the three geometric ones for embeddings."""
    if kind not in REPRESENTATIONS:
        raise ValueError(f"unknown representation kind {kind!r}")
    p, q = _check_pair(example_repr, target_repr)
    geometric = [cosine_similarity(p, q), euclidean_distance(p, q), variational_distance(p, q)]
    if kind == "embedding":
        return np.array(geometric)
    return np.array([
        jensen_shannon(p, q),
        renyi_divergence(p, q, alpha, epsilon),
        bhattacharyya(p, q, epsilon),
        *geometric,
    ])


@dataclass(frozen=True)
class FeatureConfig:
    """Which representations and feature families make up the columns.

    ``columns`` optionally restricts the matrix to a subset of the full
    column list; ``negate`` names columns whose raw values are multiplied
    by -1 before normalization.
    """

    representations: tuple[str, ...] = ("term",)
    similarity: bool = True
    diversity: bool = True
    renyi_alpha: float = 0.99
    epsilon: float = DEFAULT_EPSILON
    columns: tuple[str, ...] | None = None
    negate: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "representations", tuple(self.representations))
        object.__setattr__(self, "negate", tuple(self.negate))
        if self.columns is not None:
            object.__setattr__(self, "columns", tuple(self.columns))
        unknown = set(self.representations) - set(REPRESENTATIONS)
        if unknown:
            raise ValueError(f"unknown representations: {sorted(unknown)}")
        if not (self.similarity and self.representations) and not self.diversity:
            raise ValueError("at least one feature family must be enabled")
        if self.renyi_alpha == 1:
            raise ValueError("renyi_alpha must differ from 1")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        full = self.all_columns()
        for name in (self.columns or ()) + self.negate:
            if name not in full:
                raise ValueError(f"unknown feature column {name!r}")

    def all_columns(self) -> list[str]:
        names = []
        if self.similarity:
            for kind in REPRESENTATIONS:
                if kind in self.representations:
                    measures = GEOMETRIC_MEASURES if kind == "embedding" else DISTRIBUTION_MEASURES
                    names += [f"{kind}:{m}" for m in measures]
        if self.diversity:
            names += [f"div:{m}" for m in DIVERSITY_MEASURES]
        return names

    def column_names(self) -> list[str]:
        full = self.all_columns()
        if self.columns is None:
            return full
        return [c for c in full if c in self.columns]

    @property
    def needs(self) -> set[str]:
        """Representations the selected columns depend on."""
        needs = {c.split(":")[0] for c in self.column_names()}
        return needs & set(REPRESENTATIONS)

    def identifier(self) -> str:
        """Stable id over everything that determines column meaning and order."""
        payload = json.dumps({
            "version": FEATURE_VERSION,
            "columns": self.column_names(),
            "negate": sorted(self.negate),
            "alpha": self.renyi_alpha,
            "epsilon": self.epsilon,
        }, sort_keys=True)
        return f"v{FEATURE_VERSION}-" + hashlib.sha1(payload.encode()).hexdigest()[:12]

    def to_dict(self) -> dict:
        return {
            "representations": list(self.representations),
            "similarity": self.similarity,
            "diversity": self.diversity,
            "renyi_alpha": self.renyi_alpha,
            "epsilon": self.epsilon,
            "columns": None if self.columns is None else list(self.columns),
            "negate": list(self.negate),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "FeatureConfig":
        data = dict(data)
        if data.get("columns") is not None:
            data["columns"] = tuple(data["columns"])
        return cls(**data)


@dataclass
class FeatureMatrix:
    """Z-normalized features: ``values`` is n x l, rows aligned with ``ids``."""

    values: np.ndarray
    columns: tuple[str, ...]
    mean: np.ndarray
    std: np.ndarray
    ids: tuple[str, ...] = ()
    config_id: str = ""
    raw: np.ndarray | None = field(default=None, repr=False)

    @property
    def shape(self):
        return self.values.shape

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(f"# config_id={self.config_id}\n")
            writer = csv.writer(fh, delimiter="\t")
            writer.writerow(["id", *self.columns])
            for row_id, row in zip(self.ids, self.values):
                writer.writerow([row_id, *(repr(float(v)) for v in row)])

    @classmethod
    def from_csv(cls, path) -> "FeatureMatrix":
        with open(path, encoding="utf-8") as fh:
            header = fh.readline()
            config_id = header.strip().partition("config_id=")[2]
            reader = csv.reader(fh, delimiter="\t")
            columns = tuple(next(reader)[1:])
            ids, rows = [], []
            for row in reader:
                ids.append(row[0])
                rows.append([float(v) for v in row[1:]])
        values = np.array(rows, dtype=np.float64).reshape(len(rows), len(columns))
        return cls(values, columns, values.mean(axis=0), values.std(axis=0), tuple(ids), config_id)


def z_normalize(raw: np.ndarray):
    """Column-wise standardization; constant columns become all zeros."""
    raw = np.asarray(raw, dtype=np.float64)
    mean = raw.mean(axis=0)
    centered = raw - mean
    std = np.sqrt((centered**2).mean(axis=0))
    scale = np.where(std > 1e-12 * np.maximum(1.0, np.abs(mean)), std, np.inf)
    return centered / scale, mean, std


@dataclass
class TargetRepresentations:
    """Target-domain representations plus the models used to build example representations."""

    vocab: Vocabulary
    term: np.ndarray | None = None
    topic: np.ndarray | None = None
    embedding: np.ndarray | None = None
    lda: LdaModel | None = None
    embeddings: EmbeddingTable | None = None

    def get(self, kind):
        return getattr(self, kind)


def example_representation(tokens, kind, target: TargetRepresentations):
    if kind == "term":
        return term_distribution(tokens, target.vocab)
    if kind == "topic":
        if target.lda is None:
            raise ValueError("topic features need an LDA model")
        return infer_topics(target.lda, tokens)
    if kind == "embedding":
        if target.embeddings is None:
            raise ValueError("embedding features need an embedding table")
        return embed_example(tokens, target.embeddings, target.vocab)
    raise ValueError(f"unknown representation kind {kind!r}")


def raw_features(tokens, target: TargetRepresentations, config: FeatureConfig) -> np.ndarray:
    """All enabled feature values of one example, before column selection."""
    values = []
    if config.similarity:
        for kind in REPRESENTATIONS:
            if kind not in config.representations:
                continue
            target_repr = target.get(kind)
            if target_repr is None:
                raise ValueError(f"target representation {kind!r} is missing")
            rep = example_representation(tokens, kind, target)
            values.append(similarity_features(rep, target_repr, kind, config.renyi_alpha, config.epsilon))
    if config.diversity:
        values.append(diversity_features(tokens, target.vocab, target.embeddings, config.renyi_alpha))
    return np.concatenate(values)


def build_feature_matrix(examples: Sequence, target: TargetRepresentations,
                         config: FeatureConfig) -> FeatureMatrix:
    """Compute every example's features in frozen column order and z-normalize over the pool."""
    full = config.all_columns()
    names = config.column_names()
    keep = [full.index(c) for c in names]
    sign = np.array([-1.0 if c in config.negate else 1.0 for c in names])
    raw = np.empty((len(examples), len(names)))
    for i, ex in enumerate(examples):
        try:
            row = raw_features(ex.tokens, target, config)[keep] * sign
        except ValueError as err:
            raise ValueError(f"example {ex.id!r}: {err}") from None
        bad = ~np.isfinite(row)
        if bad.any():
            raise ValueError(f"example {ex.id!r}: non-finite feature {names[int(np.argmax(bad))]!r}")
        raw[i] = row
    values, mean, std = z_normalize(raw)
    return FeatureMatrix(values, tuple(names), mean, std, tuple(ex.id for ex in examples),
                         config.identifier(), raw)


def score_examples(matrix, w) -> np.ndarray:
    """Linear score S = phi(X) . w; higher is more desirable."""
    values = matrix.values if isinstance(matrix, FeatureMatrix) else np.asarray(matrix, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64).ravel()
    if values.ndim != 2 or values.shape[1] != w.size:
        raise ValueError(f"matrix has {values.shape[-1]} columns, weights have {w.size}")
    return values @ w
