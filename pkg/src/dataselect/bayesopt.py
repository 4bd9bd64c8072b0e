"""Gaussian-process Bayesian optimization with expected improvement over [-1, 1]^l."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError
from scipy.optimize import minimize
from scipy.special import ndtr

from .metrics import score_examples
from .selection import select_top_n

log = logging.getLogger(__name__)

MAX_JITTER = 1e-6
MIN_NOISE = 1e-6
_SQRT5 = math.sqrt(5.0)


@dataclass(frozen=True)
class Observation:
    x: np.ndarray
    y: float
    flagged: bool = False


@dataclass
class ObservationSet:
    observations: list[Observation] = field(default_factory=list)

    def append(self, obs: Observation) -> None:
        self.observations.append(obs)

    def __len__(self):
        return len(self.observations)

    def __iter__(self):
        return iter(self.observations)

    def __getitem__(self, i):
        return self.observations[i]

    @property
    def X(self) -> np.ndarray:
        return np.array([o.x for o in self.observations], dtype=np.float64)

    @property
    def y(self) -> np.ndarray:
        return np.array([o.y for o in self.observations], dtype=np.float64)

    def best(self, maximize: bool = True) -> Observation:
        y = self.y if maximize else -self.y
        return self.observations[int(np.argmax(y))]

    def best_so_far(self, maximize: bool = True) -> np.ndarray:
        acc = np.maximum.accumulate if maximize else np.minimum.accumulate
        return acc(self.y)

    def to_tsv(self, path, maximize: bool = True) -> None:
        best = self.best_so_far(maximize)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("iteration\tw\ty\tbest_so_far\tflagged\n")
            for i, (obs, b) in enumerate(zip(self.observations, best), 1):
                w = ",".join(repr(float(v)) for v in obs.x)
                fh.write(f"{i}\t{w}\t{float(obs.y)!r}\t{float(b)!r}\t{int(obs.flagged)}\n")

    @classmethod
    def from_tsv(cls, path) -> "ObservationSet":
        history = cls()
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().rstrip("\n").split("\t")
            if header[:3] != ["iteration", "w", "y"]:
                raise ValueError(f"{path}: not a history file")
            for line in fh:
                cols = line.rstrip("\n").split("\t")
                if len(cols) < 3:
                    continue
                x = np.array([float(v) for v in cols[1].split(",")]) if cols[1] else np.zeros(0)
                flagged = len(cols) > 4 and cols[4] == "1"
                history.append(Observation(x, float(cols[2]), flagged))
        return history


@dataclass(frozen=True)
class KernelParams:
    lengthscale: float = 0.5
    signal_variance: float = 1.0
    noise_variance: float = 1e-3

    def __post_init__(self):
        if self.lengthscale <= 0 or self.signal_variance <= 0 or self.noise_variance < 0:
            raise ValueError("kernel hyperparameters must be positive")


def matern52(A, B, lengthscale, signal_variance):
    """Isotropic Matern-5/2 covariance between the rows of A and B."""
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    sq = (A**2).sum(1)[:, None] + (B**2).sum(1)[None, :] - 2.0 * A @ B.T
    r = np.sqrt(np.maximum(sq, 0.0)) / lengthscale
    return signal_variance * (1.0 + _SQRT5 * r + 5.0 / 3.0 * r**2) * np.exp(-_SQRT5 * r)


@dataclass
class GpModel:
    """Zero-mean GP over standardized targets."""

    X: np.ndarray
    y: np.ndarray
    params: KernelParams
    y_mean: float
    y_std: float
    chol: tuple
    alpha: np.ndarray
    jitter: float = 0.0

    def posterior(self, x, standardized: bool = False):
        """Predictive mean and variance at the rows of ``x`` (de-standardized by default)."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        k = matern52(x, self.X, self.params.lengthscale, self.params.signal_variance)
        mean = k @ self.alpha
        v = cho_solve(self.chol, k.T)
        var = np.maximum(self.params.signal_variance - np.einsum("ij,ji->i", k, v), 0.0)
        if standardized:
            return mean, var
        return mean * self.y_std + self.y_mean, var * self.y_std**2

    def log_marginal_likelihood(self) -> float:
        return _lml_from_chol(self.chol, self.alpha, self._z())

    def _z(self):
        return (self.y - self.y_mean) / self.y_std


def _lml_from_chol(chol, alpha, z):
    L = chol[0]
    return float(-0.5 * z @ alpha - np.log(np.diag(L)).sum() - 0.5 * z.size * math.log(2 * math.pi))


def _factor(K):
    """Cholesky of K, adding diagonal jitter up to MAX_JITTER if needed."""
    n = K.shape[0]
    for jitter in (0.0, 1e-12, 1e-10, 1e-8, MAX_JITTER):
        try:
            return cho_factor(K + jitter * np.eye(n), lower=True), jitter
        except LinAlgError:
            continue
    raise LinAlgError("kernel matrix is not positive definite even with jitter")


def gp_fit(observations, params: KernelParams = KernelParams()) -> GpModel:
    """Condition the GP on ``observations`` (an ObservationSet or an (X, y) pair)."""
    if isinstance(observations, ObservationSet):
        X, y = observations.X, observations.y
    else:
        X, y = observations
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        y = np.asarray(y, dtype=np.float64).ravel()
    if y.size == 0:
        raise ValueError("the GP needs at least one observation")
    if X.shape[0] != y.size:
        raise ValueError("inputs and targets differ in length")
    y_mean = float(y.mean())
    y_std = float(y.std())
    if not y_std > 0:
        y_std = 1.0
    z = (y - y_mean) / y_std
    K = matern52(X, X, params.lengthscale, params.signal_variance) + params.noise_variance * np.eye(y.size)
    chol, jitter = _factor(K)
    alpha = cho_solve(chol, z)
    return GpModel(X, y, params, y_mean, y_std, chol, alpha, jitter)


def gp_posterior(model: GpModel | None, x):
    """Scalar mean and variance at a single input."""
    if model is None:
        raise ValueError("GP model is not fitted")
    mean, var = model.posterior(np.asarray(x, dtype=np.float64).reshape(1, -1))
    return float(mean[0]), float(var[0])


def _neg_lml(log_params, X, z):
    ls, sv, nv = np.exp(log_params)
    K = matern52(X, X, ls, sv) + (nv + MIN_NOISE) * np.eye(z.size)
    try:
        chol = cho_factor(K, lower=True)
    except LinAlgError:
        return 1e25
    alpha = cho_solve(chol, z)
    return -_lml_from_chol(chol, alpha, z)


def fit_hyperparameters(X, y, rng: np.random.Generator, n_starts: int = 32,
                        n_refine: int = 3) -> KernelParams:
    """Maximize the log marginal likelihood from random multi-starts in log space."""
    X = np.atleast_2d(X)
    y = np.asarray(y, dtype=np.float64)
    std = y.std()
    z = (y - y.mean()) / (std if std > 0 else 1.0)
    dim = X.shape[1]
    lo = np.log([0.05 * math.sqrt(dim), 0.1, 1e-6])
    hi = np.log([4.0 * math.sqrt(dim), 10.0, 1.0])
    starts = rng.uniform(lo, hi, size=(n_starts, 3))
    scores = np.array([_neg_lml(s, X, z) for s in starts])
    best_x, best_f = starts[int(np.argmin(scores))], float(scores.min())
    for s in starts[np.argsort(scores, kind="stable")[:n_refine]]:
        res = minimize(_neg_lml, s, args=(X, z), method="L-BFGS-B", bounds=list(zip(lo, hi)))
        if res.fun < best_f:
            best_x, best_f = res.x, float(res.fun)
    ls, sv, nv = np.exp(best_x)
    return KernelParams(float(ls), float(sv), float(nv + MIN_NOISE))


def expected_improvement(mean, variance, best_observed, maximize: bool = True):
    """Closed-form EI; with zero variance it is the plain improvement max(gain, 0)."""
    mean = np.asarray(mean, dtype=np.float64)
    sigma = np.sqrt(np.maximum(np.asarray(variance, dtype=np.float64), 0.0))
    gain = mean - best_observed if maximize else best_observed - mean
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        z = np.where(sigma > 0, gain / np.where(sigma > 0, sigma, 1.0), 0.0)
        pdf = np.exp(-0.5 * z**2) / math.sqrt(2 * math.pi)
    ei = np.where(sigma > 0, sigma * (z * ndtr(z) + pdf), np.maximum(gain, 0.0))
    ei = np.maximum(ei, 0.0)
    return float(ei) if ei.ndim == 0 else ei


@dataclass(frozen=True)
class BoConfig:
    iterations: int = 300
    initial: int = 10
    candidates: int = 5000
    local_candidates: int = 50
    local_scale: float = 0.1
    refit_every: int = 10
    maximize: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.initial < 1:
            raise ValueError("at least one initial design is required")
        if self.iterations < self.initial:
            raise ValueError("iterations must be at least the number of initial designs")
        if self.candidates < 1:
            raise ValueError("candidates must be >= 1")

    def replace(self, **changes) -> "BoConfig":
        from dataclasses import replace
        return replace(self, **changes)


def propose_next(model: GpModel, bounds, config: BoConfig, rng: np.random.Generator,
                 candidates: np.ndarray | None = None) -> np.ndarray:
    """Pick the candidate with maximal EI; ties go to the lowest candidate index.

    Candidates are uniform draws in the box followed by Gaussian
    perturbations of the incumbent, unless given explicitly.
    """
    lo, hi = (np.asarray(b, dtype=np.float64) for b in bounds)
    if candidates is None:
        dim = lo.size
        uniform = rng.uniform(lo, hi, size=(config.candidates, dim))
        incumbent = model.X[int(np.argmax(model.y if config.maximize else -model.y))]
        local = incumbent + config.local_scale * (hi - lo) / 2 * rng.standard_normal((config.local_candidates, dim))
        candidates = np.clip(np.vstack([uniform, local]), lo, hi)
    mean, var = model.posterior(candidates)
    best = model.y.max() if config.maximize else model.y.min()
    ei = expected_improvement(mean, var, best, config.maximize)
    return np.array(candidates[int(np.argmax(ei))], dtype=np.float64)


def optimize(objective: Callable[[np.ndarray], float], dim: int, config: BoConfig = BoConfig(),
             bounds=None, callback=None):
    """Run the BO loop for ``config.iterations`` total objective evaluations.

    Returns the best observation and the full history. Non-finite objective
    values are replaced by (worst so far - one standard deviation) and flagged.
    """
    if bounds is None:
        bounds = (-np.ones(dim), np.ones(dim))
    lo, hi = (np.asarray(b, dtype=np.float64) for b in bounds)
    rng = np.random.default_rng(config.seed)
    history = ObservationSet()
    sign = 1.0 if config.maximize else -1.0
    params = KernelParams()
    model = None

    for t in range(config.iterations):
        if t < config.initial:
            x = rng.uniform(lo, hi)
        else:
            if model is None or (t - config.initial) % config.refit_every == 0:
                params = fit_hyperparameters(history.X, history.y, rng)
            model = gp_fit(history, params)
            x = propose_next(model, (lo, hi), config, rng)
        y = objective(x)
        flagged = False
        if y is None or not np.isfinite(y):
            flagged = True
            ys = history.y
            if ys.size:
                worst = ys.min() if config.maximize else ys.max()
                y = float(worst - sign * (ys.std() if ys.size > 1 else 1.0))
            else:
                y = -sign * 1.0
            log.warning("objective returned a non-finite value at iteration %d; recorded %g", t + 1, y)
        obs = Observation(np.array(x, dtype=np.float64), float(y), flagged)
        history.append(obs)
        if callback is not None:
            callback(t, obs)
    return history.best(config.maximize), history


def data_selection_objective(pool: Sequence, feature_matrix, n: int, task, validation: Sequence,
                             stratify: bool | None = None, cache: bool = True):
    """Black-box objective: score the pool with w, train on the top n, return validation J.

    ``task`` needs a ``score(train_examples, eval_examples) -> float`` method
    (see :mod:`dataselect.tasks`). Evaluations are memoized on the selected
    index set, which is sound because the task is deterministic per seed.
    """
    if n > len(pool):
        raise ValueError(f"cannot select {n} of {len(pool)} pool examples")
    values = getattr(feature_matrix, "values", feature_matrix)
    if values.shape[0] != len(pool):
        raise ValueError("feature matrix rows do not match the pool")
    if stratify is None:
        stratify = getattr(task, "stratify", False)
    labels = [ex.label for ex in pool] if stratify else None
    memo: dict[tuple, float] = {}

    def evaluate(w):
        selection = select_top_n(score_examples(values, w), n, labels, ids=[ex.id for ex in pool])
        evaluate.last_selection = selection
        key = tuple(sorted(selection.indices))
        if cache and key in memo:
            return memo[key]
        value = float(task.score([pool[i] for i in selection.indices], validation))
        memo[key] = value
        return value

    evaluate.last_selection = None
    return evaluate
