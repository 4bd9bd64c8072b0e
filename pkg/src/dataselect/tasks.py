"""Cheap downstream models that supply the selection objective.

Sentiment uses tf-idf unigram+bigram features with a hinge-loss linear
model; POS tagging uses a greedy averaged structured perceptron. Other
models can be plugged in through :func:`external_evaluator`.
"""

from __future__ import annotations

import logging
import math
import shlex
import subprocess
import tempfile
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from sklearn.linear_model import SGDClassifier

from .corpus import Example, write_examples

log = logging.getLogger(__name__)


def _ngrams(tokens):
    yield from tokens
    for a, b in zip(tokens, tokens[1:]):
        yield f"{a} {b}"


@dataclass
class TfidfVectorizer:
    """Unigram + bigram inventory with idf = ln(N / (1 + df)) + 1."""

    inventory: dict[str, int]
    df: np.ndarray
    n_docs: int

    @property
    def idf(self) -> np.ndarray:
        return np.log(self.n_docs / (1.0 + self.df)) + 1.0

    def transform(self, docs: Sequence[Sequence[str]]) -> sp.csr_matrix:
        """Raw n-gram counts times idf, each row l2-normalized."""
        rows, cols, vals = [], [], []
        for r, tokens in enumerate(docs):
            counts = Counter(g for g in _ngrams(list(tokens)) if g in self.inventory)
            for gram, c in counts.items():
                rows.append(r)
                cols.append(self.inventory[gram])
                vals.append(c)
        X = sp.csr_matrix((vals, (rows, cols)), shape=(len(docs), len(self.inventory)), dtype=np.float64)
        X = X @ sp.diags(self.idf)
        norms = np.sqrt(np.asarray(X.multiply(X).sum(axis=1)).ravel())
        norms[norms == 0] = 1.0
        return sp.csr_matrix(sp.diags(1.0 / norms) @ X)


def fit_tfidf(docs: Sequence[Sequence[str]], max_features: int = 10_000) -> TfidfVectorizer:
    """Keep the ``max_features`` most frequent n-grams (ties lexicographic)."""
    if not docs:
        raise ValueError("fit_tfidf needs at least one document")
    tf = Counter()
    df = Counter()
    for tokens in docs:
        grams = list(_ngrams(list(tokens)))
        tf.update(grams)
        df.update(set(grams))
    kept = sorted(tf, key=lambda g: (-tf[g], g))[:max_features]
    inventory = {g: i for i, g in enumerate(kept)}
    return TfidfVectorizer(inventory, np.array([df[g] for g in kept], dtype=np.float64), len(docs))


@dataclass
class LinearClassifier:
    vectorizer: TfidfVectorizer
    coef: np.ndarray
    intercept: float
    classes: np.ndarray
    hyper: dict = field(default_factory=dict)

    def decision_function(self, docs) -> np.ndarray:
        X = self.vectorizer.transform(docs)
        return X @ self.coef + self.intercept

    def predict(self, docs) -> np.ndarray:
        return np.where(self.decision_function(docs) > 0, self.classes[1], self.classes[0])


def train_sentiment(examples: Sequence[Example], vectorizer: TfidfVectorizer | None = None,
                    epochs: int = 20, alpha: float = 1e-4, seed: int = 0,
                    max_features: int = 10_000) -> LinearClassifier:
    """Averaged hinge-loss SGD (a linear SVM) on tf-idf features.

    Examples are put in id order first, so the model depends only on the
    training set, not on the order it was given in.
    """
    examples = sorted(examples, key=lambda ex: ex.id)
    labels = np.array([ex.label for ex in examples])
    if len(set(labels.tolist())) < 2:
        raise ValueError("sentiment training needs examples of both classes")
    docs = [ex.tokens for ex in examples]
    if vectorizer is None:
        vectorizer = fit_tfidf(docs, max_features)
    clf = SGDClassifier(loss="hinge", alpha=alpha, max_iter=epochs, tol=None, average=True,
                        shuffle=True, random_state=seed)
    clf.fit(vectorizer.transform(docs), labels)
    hyper = {"epochs": epochs, "alpha": alpha, "seed": seed}
    return LinearClassifier(vectorizer, clf.coef_.ravel().copy(), float(clf.intercept_[0]), clf.classes_, hyper)


START = "<s>"


def _shape_features(word):
    feats = []
    if word[:1].isupper():
        feats.append("cap")
    if word.isupper() and len(word) > 1:
        feats.append("allcaps")
    if any(ch.isdigit() for ch in word):
        feats.append("digit")
    if "-" in word:
        feats.append("hyphen")
    return feats


def tagger_features(tokens: Sequence[str], i: int, prev_tag: str, prev2_tag: str) -> list[str]:
    """Feature strings for position ``i`` given the previously predicted tags."""
    word = tokens[i]
    low = word.lower()
    prev_w = tokens[i - 1].lower() if i > 0 else START
    next_w = tokens[i + 1].lower() if i + 1 < len(tokens) else "</s>"
    feats = [
        "bias",
        f"w={word}",
        f"lw={low}",
        f"pw={prev_w}",
        f"nw={next_w}",
        f"pt={prev_tag}",
        f"pt2={prev2_tag} {prev_tag}",
        f"pt+w={prev_tag} {low}",
    ]
    for k in (1, 2, 3):
        if len(low) >= k:
            feats.append(f"p{k}={low[:k]}")
            feats.append(f"s{k}={low[-k:]}")
    feats.extend(f"shape={s}" for s in _shape_features(word))
    return feats


@dataclass
class PerceptronTagger:
    """Greedy left-to-right tagger with averaged perceptron weights."""

    weights: dict[str, dict[str, float]]
    tags: tuple[str, ...]
    config: dict = field(default_factory=dict)

    def _best(self, feats):
        scores = defaultdict(float)
        for f in feats:
            for tag, w in self.weights.get(f, {}).items():
                scores[tag] += w
        # highest score, then tag inventory order
        return max(self.tags, key=lambda t: scores[t])

    def tag(self, tokens: Sequence[str]) -> list[str]:
        out = []
        p1 = p2 = START
        for i in range(len(tokens)):
            t = self._best(tagger_features(tokens, i, p1, p2))
            out.append(t)
            p2, p1 = p1, t
        return out


class _AveragedWeights:
    def __init__(self):
        self.w = defaultdict(lambda: defaultdict(float))
        self.totals = defaultdict(float)
        self.stamps = defaultdict(int)
        self.clock = 0

    def score(self, feats, tags):
        scores = dict.fromkeys(tags, 0.0)
        for f in feats:
            row = self.w.get(f)
            if row:
                for tag, v in row.items():
                    scores[tag] += v
        return scores

    def update(self, feats, truth, guess, rate):
        for f in feats:
            for tag, delta in ((truth, rate), (guess, -rate)):
                key = (f, tag)
                self.totals[key] += (self.clock - self.stamps[key]) * self.w[f][tag]
                self.stamps[key] = self.clock
                self.w[f][tag] += delta

    def averaged(self):
        out = defaultdict(dict)
        clock = max(self.clock, 1)
        for f, row in self.w.items():
            for tag, v in row.items():
                key = (f, tag)
                total = self.totals[key] + (self.clock - self.stamps[key]) * v
                avg = total / clock
                if avg:
                    out[f][tag] = avg
        return dict(out)


def train_tagger(sentences: Sequence[Example], iterations: int = 5, learning_rate: float = 0.2,
                 seed: int = 0, history: list | None = None) -> PerceptronTagger:
    """Train the greedy structured perceptron; sentence order is reshuffled each pass.

    As with the sentiment model, input order does not matter: sentences are
    sorted by id before the seeded shuffles.

    If ``history`` is a list, the averaged tagger's training accuracy after
    every pass is appended to it.
    """
    if not sentences:
        raise ValueError("tagger training needs at least one sentence")
    sentences = sorted(sentences, key=lambda ex: ex.id)
    tag_counts = Counter(t for s in sentences for t in s.label)
    tags = tuple(sorted(tag_counts, key=lambda t: (-tag_counts[t], t)))
    model = _AveragedWeights()
    rng = np.random.default_rng(seed)
    order = np.arange(len(sentences))
    for _ in range(iterations):
        rng.shuffle(order)
        for idx in order:
            sent = sentences[int(idx)]
            p1 = p2 = START
            for i, truth in enumerate(sent.label):
                feats = tagger_features(sent.tokens, i, p1, p2)
                scores = model.score(feats, tags)
                guess = max(tags, key=lambda t: scores[t])
                model.clock += 1
                if guess != truth:
                    model.update(feats, truth, guess, learning_rate)
                p2, p1 = p1, guess
        if history is not None:
            snapshot = PerceptronTagger(model.averaged(), tags)
            history.append(tagging_accuracy(snapshot, sentences))
    config = {"iterations": iterations, "learning_rate": learning_rate, "seed": seed}
    return PerceptronTagger(model.averaged(), tags, config)


def sentiment_accuracy(model: LinearClassifier, examples: Sequence[Example]) -> float:
    if not examples:
        raise ValueError("evaluation set is empty")
    pred = model.predict([ex.tokens for ex in examples])
    return float(np.mean(pred == np.array([ex.label for ex in examples])))


def tagging_accuracy(model: PerceptronTagger, sentences: Sequence[Example]) -> float:
    """Fraction of correctly tagged tokens across all sentences."""
    correct = total = 0
    for sent in sentences:
        pred = model.tag(sent.tokens)
        correct += sum(p == g for p, g in zip(pred, sent.label))
        total += len(sent.tokens)
    if total == 0:
        raise ValueError("evaluation set is empty")
    return correct / total


@dataclass(frozen=True)
class Objective:
    kind: str  # "sentiment" | "pos" | "external"
    examples: tuple[Example, ...]

    def __post_init__(self):
        if not self.examples:
            raise ValueError("evaluation set is empty")


def evaluate(objective: Objective, model) -> float:
    if objective.kind == "sentiment":
        if not isinstance(model, LinearClassifier):
            raise TypeError("sentiment objective needs a LinearClassifier")
        return sentiment_accuracy(model, objective.examples)
    if objective.kind == "pos":
        if not isinstance(model, PerceptronTagger):
            raise TypeError("pos objective needs a PerceptronTagger")
        return tagging_accuracy(model, objective.examples)
    raise ValueError(f"cannot evaluate objective kind {objective.kind!r} with a built-in model")


class SentimentTask:
    kind = "sentiment"
    stratify = True

    def __init__(self, seed=0, epochs=20, alpha=1e-4, max_features=10_000):
        self.seed = seed
        self.epochs = epochs
        self.alpha = alpha
        self.max_features = max_features

    def train(self, examples):
        return train_sentiment(examples, epochs=self.epochs, alpha=self.alpha, seed=self.seed,
                               max_features=self.max_features)

    def score(self, train, evaluation) -> float:
        return evaluate(Objective("sentiment", tuple(evaluation)), self.train(train))


class TaggingTask:
    kind = "pos"
    stratify = False

    def __init__(self, seed=0, iterations=5, learning_rate=0.2):
        self.seed = seed
        self.iterations = iterations
        self.learning_rate = learning_rate

    def train(self, sentences):
        return train_tagger(sentences, self.iterations, self.learning_rate, self.seed)

    def score(self, train, evaluation) -> float:
        return evaluate(Objective("pos", tuple(evaluation)), self.train(train))


class ExternalEvaluatorError(RuntimeError):
    pass


def external_evaluator(command: str, workdir=None, timeout: float | None = None):
    """Build an evaluator that shells out to a user-supplied model.

    ``command`` is formatted with ``{train}`` and ``{validation}`` paths; the
    files use the loader formats (reviews or CoNLL). The command must print a
    single number, the objective value, on stdout.
    """
    if "{train}" not in command or "{validation}" not in command:
        raise ValueError("command template needs {train} and {validation} placeholders")

    def run(train: Sequence[Example], validation: Sequence[Example]) -> float:
        with tempfile.TemporaryDirectory(dir=workdir) as tmp:
            train_path = Path(tmp) / "train.txt"
            val_path = Path(tmp) / "validation.txt"
            write_examples(list(train), train_path)
            write_examples(list(validation), val_path)
            cmd = command.format(train=shlex.quote(str(train_path)), validation=shlex.quote(str(val_path)))
            proc = subprocess.run(cmd, shell=True, capture_output=True, text=True, timeout=timeout)
        if proc.returncode != 0:
            raise ExternalEvaluatorError(
                f"command exited with {proc.returncode}\nstdout: {proc.stdout}\nstderr: {proc.stderr}"
            )
        try:
            value = float(proc.stdout.strip().split()[-1])
        except (ValueError, IndexError):
            raise ExternalEvaluatorError(f"could not parse a number from output: {proc.stdout!r}") from None
        if not math.isfinite(value):
            raise ExternalEvaluatorError(f"non-finite objective value {value}")
        return value

    return run


class ExternalTask:
    kind = "external"

    def __init__(self, command: str, stratify: bool = False, workdir=None):
        self.command = command
        self.stratify = stratify
        self._run = external_evaluator(command, workdir)

    def score(self, train, evaluation) -> float:
        return self._run(train, evaluation)


def make_task(kind: str, seed: int = 0, command: str | None = None, **kwargs):
    if kind == "sentiment":
        return SentimentTask(seed=seed, **kwargs)
    if kind == "pos":
        return TaggingTask(seed=seed, **kwargs)
    if kind == "external":
        if not command:
            raise ValueError("external task needs a command template")
        return ExternalTask(command, **kwargs)
    raise ValueError(f"unknown task kind {kind!r}")
