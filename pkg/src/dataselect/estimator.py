"""scikit-learn style wrappers around feature extraction and learned selection."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .bayesopt import BoConfig, optimize
from .corpus import DomainCorpus, Example, build_vocabulary
from .metrics import FeatureConfig, TargetRepresentations, build_feature_matrix, score_examples
from .representations import embed_example, infer_topics, term_distribution, train_lda
from .selection import select_top_n


def _as_examples(X, prefix="x"):
    out = []
    for i, x in enumerate(X):
        if isinstance(x, Example):
            out.append(x)
        elif isinstance(x, str):
            out.append(Example(f"{prefix}{i}", tuple(x.split())))
        else:
            out.append(Example(f"{prefix}{i}", tuple(x)))
    return out


class DataSelectionFeaturizer(TransformerMixin, BaseEstimator):
    """Turn documents into z-normalized similarity/diversity features against a target domain.

    ``fit`` builds the vocabulary (and LDA model if topic features are
    enabled) from ``X`` plus ``target`` and computes the target
    representations. ``transform`` normalizes with the statistics of the
    documents it is given, so weights learned on one pool apply to another.

    Documents may be :class:`~dataselect.corpus.Example` objects, token
    sequences, or whitespace-tokenized strings.
    """

    def __init__(self, representations=("term",), similarity=True, diversity=True,
                 renyi_alpha=0.99, epsilon=1e-10, vocab_size=10_000, n_topics=50,
                 lda_iterations=10, embeddings=None, random_state=0):
        self.representations = representations
        self.similarity = similarity
        self.diversity = diversity
        self.renyi_alpha = renyi_alpha
        self.epsilon = epsilon
        self.vocab_size = vocab_size
        self.n_topics = n_topics
        self.lda_iterations = lda_iterations
        self.embeddings = embeddings
        self.random_state = random_state

    def _config(self):
        return FeatureConfig(tuple(self.representations), self.similarity, self.diversity,
                             self.renyi_alpha, self.epsilon)

    def fit(self, X, y=None, target=None):
        if target is None:
            raise ValueError("fit needs the target-domain documents via target=")
        pool = _as_examples(X, "x")
        tgt = _as_examples(target, "t")
        config = self._config()
        corpora = [DomainCorpus("", [Example(e.id, e.tokens) for e in pool]),
                   DomainCorpus("", [Example(e.id, e.tokens) for e in tgt])]
        vocab = build_vocabulary(corpora, self.vocab_size)
        target_tokens = [t for e in tgt for t in e.tokens]
        reprs = TargetRepresentations(vocab, term=term_distribution(target_tokens, vocab),
                                      embeddings=self.embeddings)
        if "topic" in config.needs:
            reprs.lda = train_lda([e.tokens for e in pool + tgt], vocab, self.n_topics,
                                  self.lda_iterations, self.random_state)
            reprs.topic = infer_topics(reprs.lda, target_tokens)
        if "embedding" in config.needs:
            if self.embeddings is None:
                raise ValueError("embedding features need an EmbeddingTable")
            reprs.embedding = embed_example(target_tokens, self.embeddings, vocab)
        self.config_ = config
        self.vocabulary_ = vocab
        self.target_ = reprs
        self.n_features_out_ = len(config.column_names())
        return self

    def feature_matrix(self, X):
        check_is_fitted(self, "target_")
        return build_feature_matrix(_as_examples(X), self.target_, self.config_)

    def transform(self, X):
        return self.feature_matrix(X).values

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "config_")
        return np.array(self.config_.column_names(), dtype=object)


class LearnedDataSelector(BaseEstimator):
    """Learn linear selection weights in [-1, 1]^l by Bayesian optimization.

    ``fit(X, y, objective=...)`` takes a feature matrix and a callable
    mapping an array of selected row indices to the objective value
    (higher is better). ``y`` is only used for stratified selection.
    """

    def __init__(self, n_select=1600, n_iter=300, n_initial=10, n_candidates=5000,
                 stratify=False, random_state=0):
        self.n_select = n_select
        self.n_iter = n_iter
        self.n_initial = n_initial
        self.n_candidates = n_candidates
        self.stratify = stratify
        self.random_state = random_state

    def fit(self, X, y=None, objective=None):
        if objective is None:
            raise ValueError("fit needs an objective callable")
        X = check_array(X, dtype=np.float64)
        labels = None
        if self.stratify:
            if y is None:
                raise ValueError("stratified selection needs labels")
            labels = list(np.asarray(y).tolist())

        def evaluate(w):
            idx = select_top_n(score_examples(X, w), self.n_select, labels).indices
            return objective(np.asarray(idx, dtype=np.int64))

        config = BoConfig(iterations=self.n_iter, initial=self.n_initial,
                          candidates=self.n_candidates, seed=self.random_state)
        best, history = optimize(evaluate, X.shape[1], config)
        self.weights_ = best.x
        self.best_score_ = best.y
        self.history_ = history
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        check_is_fitted(self, "weights_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return score_examples(X, self.weights_)

    def select(self, X, y=None, n_select=None):
        """Row indices of the selected examples, best first."""
        n = self.n_select if n_select is None else n_select
        labels = list(np.asarray(y).tolist()) if (self.stratify and y is not None) else None
        return np.asarray(select_top_n(self.decision_function(X), n, labels).indices, dtype=np.int64)
