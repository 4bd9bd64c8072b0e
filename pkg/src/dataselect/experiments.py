"""Experiment drivers: learned selection, baselines, and weight transfer."""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .bayesopt import BoConfig, ObservationSet, data_selection_objective, optimize
from .corpus import DomainCorpus, Vocabulary, build_vocabulary, split_validation
from .metrics import FeatureConfig, FeatureMatrix, TargetRepresentations, build_feature_matrix, score_examples
from .representations import EmbeddingTable, domain_representation, embed_example, infer_topics, train_lda
from .selection import (
    SelectionResult,
    baseline_js_domain,
    baseline_js_examples,
    baseline_random,
    select_top_n,
)
from .tasks import make_task

log = logging.getLogger(__name__)

DEFAULT_N = {"sentiment": 1600, "pos": 2000}
METHODS = ("random", "js-examples", "js-domain", "learned", "all-source", "transfer")


@dataclass(frozen=True)
class ExperimentConfig:
    domains: Mapping[str, DomainCorpus]
    target: str
    task: str = "sentiment"
    features: FeatureConfig = FeatureConfig()
    bo: BoConfig = BoConfig()
    n: int | None = None
    validation_size: int = 100
    seeds: tuple[int, ...] = (0,)
    vocab_size: int = 10_000
    lda_topics: int = 50
    lda_iterations: int = 10
    lda_seed: int = 0
    lda_target_only: bool = False
    embeddings: EmbeddingTable | None = None
    task_command: str | None = None
    jobs: int = 1

    def __post_init__(self):
        if self.target not in self.domains:
            raise ValueError(f"target domain {self.target!r} not among {sorted(self.domains)}")
        if len(self.domains) < 2:
            raise ValueError("need at least one source domain besides the target")
        if not self.seeds:
            raise ValueError("at least one seed is required")

    @property
    def n_select(self) -> int:
        return self.n if self.n is not None else DEFAULT_N.get(self.task, 1600)

    @property
    def sources(self) -> list[str]:
        return sorted(d for d in self.domains if d != self.target)

    def make_task(self, seed):
        return make_task(self.task, seed=seed, command=self.task_command)

    def replace(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)


@dataclass
class ExperimentReport:
    target: str
    method: str
    values: list[float]
    seeds: list[int]
    runs: list[dict] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.values:
            raise ValueError("a report needs at least one run")

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    @property
    def variance(self) -> float | None:
        return float(np.var(self.values, ddof=1)) if len(self.values) > 1 else None

    def selections(self) -> list[tuple[str, ...]]:
        return [tuple(run["selected"]) for run in self.runs]

    def rows(self) -> list[dict]:
        return [
            {"target": self.target, "method": self.method, "seed": seed, "value": value,
             **{k: v for k, v in run.items() if k not in ("selected", "weights")}}
            for seed, value, run in zip(self.seeds, self.values, self.runs or [{}] * len(self.values))
        ]

    def to_dict(self) -> dict:
        return {
            "target": self.target, "method": self.method, "values": self.values, "seeds": self.seeds,
            "mean": self.mean, "variance": self.variance, "runs": self.runs, "metadata": self.metadata,
        }

    def write(self, directory, stem: str | None = None) -> dict:
        """Write ``<stem>.json`` (full record), ``<stem>.tsv`` (row per run) and ``<stem>.txt``."""
        from pathlib import Path

        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        stem = stem or f"{self.target}_{self.method}"
        paths = {ext: directory / f"{stem}.{ext}" for ext in ("json", "tsv", "txt")}
        paths["json"].write_text(json.dumps(self.to_dict(), indent=2, default=_json_default))
        with open(paths["tsv"], "w", encoding="utf-8") as fh:
            fh.write("target\tmethod\tseed\tvalue\n")
            for seed, value in zip(self.seeds, self.values):
                fh.write(f"{self.target}\t{self.method}\t{seed}\t{float(value)!r}\n")
        paths["txt"].write_text(self.table() + "\n")
        return paths

    def table(self) -> str:
        var = "-" if self.variance is None else f"{self.variance * 1e4:.2f}"
        lines = [f"{'target':<14}{'method':<22}{'runs':>5}{'mean(%)':>10}{'var(%^2)':>10}",
                 f"{self.target:<14}{self.method:<22}{len(self.values):>5}{self.mean * 100:>10.2f}{var:>10}"]
        return "\n".join(lines)


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    raise TypeError(f"not serializable: {type(obj)}")


@dataclass
class WeightArtifact:
    weights: np.ndarray
    columns: tuple[str, ...]
    feature_config: FeatureConfig
    seed: int
    validation_score: float
    provenance: dict = field(default_factory=dict)

    @property
    def feature_config_id(self) -> str:
        return self.feature_config.identifier()

    def save(self, path) -> None:
        data = {
            "weights": [float(v) for v in self.weights],
            "columns": list(self.columns),
            "feature_config": self.feature_config.to_dict(),
            "feature_config_id": self.feature_config_id,
            "seed": self.seed,
            "validation_score": self.validation_score,
            "provenance": self.provenance,
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(data, fh, indent=2, default=_json_default)

    @classmethod
    def load(cls, path) -> "WeightArtifact":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        config = FeatureConfig.from_dict(data["feature_config"])
        if config.identifier() != data["feature_config_id"]:
            raise ValueError(f"{path}: feature config does not match its recorded identifier")
        return cls(np.array(data["weights"], dtype=np.float64), tuple(data["columns"]), config,
                   int(data["seed"]), float(data["validation_score"]), data.get("provenance", {}))


@dataclass(frozen=True)
class TransferSpec:
    source: dict
    target: dict
    feature_config_id: str


@dataclass
class Context:
    """Seed-independent state of a setting: vocabulary, pool, target representations, features."""

    vocab: Vocabulary
    pool: tuple
    target: TargetRepresentations
    matrix: FeatureMatrix | None


def _usable(ex, target: TargetRepresentations, needs) -> bool:
    if not any(t in target.vocab for t in ex.tokens):
        return False
    if "embedding" in needs:
        try:
            embed_example(ex.tokens, target.embeddings, target.vocab)
        except ValueError:
            return False
    return True


def lda_documents(domains: Mapping[str, DomainCorpus], target: str, target_only: bool = False):
    """Texts the topic model is trained on: source labeled plus all target text by default."""
    if target_only:
        return list(domains[target].all_examples())
    return [ex for d in sorted(domains)
            for ex in (domains[d].all_examples() if d == target else domains[d].labeled)]


def prepare(config: ExperimentConfig, with_features: bool = True, vocab: Vocabulary | None = None,
            lda=None) -> Context:
    """Build the shared state of a setting; ``vocab`` and ``lda`` may come from an ingest cache."""
    domains = config.domains
    if vocab is None:
        vocab = build_vocabulary([domains[d] for d in sorted(domains)], config.vocab_size)
    target_corpus = domains[config.target]
    target_text = target_corpus.all_examples()
    needs = config.features.needs if with_features else set()
    reprs = TargetRepresentations(vocab, term=domain_representation(target_text, vocab),
                                  embeddings=config.embeddings)
    if "topic" in needs:
        if lda is None:
            docs = lda_documents(domains, config.target, config.lda_target_only)
            lda = train_lda([ex.tokens for ex in docs], vocab, config.lda_topics,
                            config.lda_iterations, config.lda_seed)
        reprs.lda = lda
        reprs.topic = infer_topics(lda, [t for ex in target_text for t in ex.tokens])
    if "embedding" in needs:
        if config.embeddings is None:
            raise ValueError("embedding features need an embedding table")
        reprs.embedding = embed_example([t for ex in target_text for t in ex.tokens],
                                        config.embeddings, vocab)
    pool = [ex for d in config.sources for ex in domains[d].labeled]
    kept = tuple(ex for ex in pool if _usable(ex, reprs, needs))
    if len(kept) < len(pool):
        log.info("dropped %d pool examples without usable representations", len(pool) - len(kept))
    matrix = build_feature_matrix(kept, reprs, config.features) if with_features else None
    return Context(vocab, kept, reprs, matrix)


def _split(config: ExperimentConfig, seed: int):
    split = split_validation(config.domains[config.target], config.validation_size, seed)
    if not split.pool:
        raise ValueError("no target examples left for testing after the validation split")
    return split.validation, split.pool


def _train_and_test(config, pool, indices, seed, test):
    task = config.make_task(seed)
    return float(task.score([pool[i] for i in indices], test))


def _learned_run(config: ExperimentConfig, ctx: Context, seed: int) -> dict:
    start = time.perf_counter()
    validation, test = _split(config, seed)
    task = config.make_task(seed)
    objective = data_selection_objective(ctx.pool, ctx.matrix, config.n_select, task, validation)
    best, history = optimize(objective, ctx.matrix.shape[1], config.bo.replace(seed=seed))
    labels = [ex.label for ex in ctx.pool] if getattr(task, "stratify", False) else None
    selection = select_top_n(score_examples(ctx.matrix, best.x), config.n_select, labels,
                             ids=[ex.id for ex in ctx.pool])
    value = _train_and_test(config, ctx.pool, selection.indices, seed, test)
    # wall time is logged, not reported, so reports stay bit-reproducible
    log.info("seed %d: learned selection took %.1fs", seed, time.perf_counter() - start)
    return {
        "value": value,
        "validation": best.y,
        "weights": best.x.tolist(),
        "selected": list(selection.ids),
        "history": history,
    }


def _map_seeds(fn, config, ctx, seeds):
    if config.jobs > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            return list(pool.map(fn, [config] * len(seeds), [ctx] * len(seeds), seeds))
    return [fn(config, ctx, s) for s in seeds]


def run_learned_selection(config: ExperimentConfig, ctx: Context | None = None):
    """Learn weights by BO per seed, then report test accuracy of the top-n under the best weights.

    Returns ``(report, artifacts, histories)``: one weight artifact and one
    BO history per seed.
    """
    ctx = ctx or prepare(config)
    runs = _map_seeds(_learned_run, config, ctx, list(config.seeds))
    histories: list[ObservationSet] = [run.pop("history") for run in runs]
    artifacts = [
        WeightArtifact(np.array(run["weights"]), ctx.matrix.columns, config.features, seed,
                       run["validation"], {"target": config.target, "task": config.task,
                                           "model": _model_name(config), "sources": config.sources})
        for seed, run in zip(config.seeds, runs)
    ]
    report = ExperimentReport(config.target, "learned", [r["value"] for r in runs], list(config.seeds),
                              runs, {"features": config.features.column_names(),
                                     "feature_config_id": config.features.identifier(),
                                     "n": config.n_select, "iterations": config.bo.iterations})
    return report, artifacts, histories


def _model_name(config):
    return {"sentiment": "linear-svm", "pos": "perceptron"}.get(config.task, config.task_command or config.task)


def best_artifact(artifacts: Sequence[WeightArtifact]) -> WeightArtifact:
    """Weights with the highest validation score (first on ties)."""
    return max(artifacts, key=lambda a: a.validation_score)


def _baseline_run(method, config, ctx, seed):
    validation, test = _split(config, seed)
    n = config.n_select
    stratify = getattr(config.make_task(seed), "stratify", False)
    if method == "random":
        sel = baseline_random(ctx.pool, n, seed)
    elif method == "js-examples":
        sel = baseline_js_examples(ctx.pool, ctx.target.term, n, ctx.vocab, stratify=stratify)
    elif method == "js-domain":
        sources = {d: config.domains[d] for d in config.sources}
        sel = baseline_js_domain(sources, ctx.target.term, n, seed, ctx.vocab, pool=ctx.pool)
    elif method == "all-source":
        sel = SelectionResult(tuple(range(len(ctx.pool))), tuple(ex.id for ex in ctx.pool))
    else:
        raise ValueError(f"unknown baseline {method!r}")
    value = _train_and_test(config, ctx.pool, sel.indices, seed, test)
    return {"value": value, "selected": list(sel.ids), **{k: v for k, v in sel.provenance.items()
                                                          if k not in ("method", "seed")}}


def run_baseline(config: ExperimentConfig, method: str, ctx: Context | None = None) -> ExperimentReport:
    ctx = ctx or prepare(config, with_features=False)
    runs = [_baseline_run(method, config, ctx, s) for s in config.seeds]
    return ExperimentReport(config.target, method, [r["value"] for r in runs], list(config.seeds), runs,
                            {"n": config.n_select if method != "all-source" else len(ctx.pool)})


def run_all_source(config: ExperimentConfig, ctx: Context | None = None) -> ExperimentReport:
    return run_baseline(config, "all-source", ctx)


def apply_transferred_weights(spec: TransferSpec, weights: WeightArtifact, new_setting: ExperimentConfig,
                              ctx: Context | None = None) -> ExperimentReport:
    """Score the new setting's pool with frozen weights; no optimization is run.

    The feature matrix is rebuilt and z-normalized on the new pool.
    """
    ids = {spec.feature_config_id, weights.feature_config_id, new_setting.features.identifier()}
    if len(ids) != 1:
        raise ValueError(f"feature configurations do not match: {sorted(ids)}")
    ctx = ctx or prepare(new_setting)
    if tuple(ctx.matrix.columns) != tuple(weights.columns):
        raise ValueError("feature columns do not line up with the transferred weights")
    scores = score_examples(ctx.matrix, weights.weights)
    runs = []
    for seed in new_setting.seeds:
        _, test = _split(new_setting, seed)
        task = new_setting.make_task(seed)
        labels = [ex.label for ex in ctx.pool] if getattr(task, "stratify", False) else None
        sel = select_top_n(scores, new_setting.n_select, labels, ids=[ex.id for ex in ctx.pool])
        value = _train_and_test(new_setting, ctx.pool, sel.indices, seed, test)
        runs.append({"value": value, "selected": list(sel.ids)})
    return ExperimentReport(new_setting.target, "transfer", [r["value"] for r in runs],
                            list(new_setting.seeds), runs,
                            {"source": spec.source, "target": spec.target,
                             "feature_config_id": spec.feature_config_id,
                             "weights": weights.weights.tolist()})
