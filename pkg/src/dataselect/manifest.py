"""Dataset manifests: YAML files describing domains, task and run settings."""

from __future__ import annotations

import hashlib
import json
import logging
import pickle
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .bayesopt import BoConfig
from .corpus import (
    DomainCorpus,
    build_vocabulary,
    load_labeled_reviews,
    load_tagged_conll,
    load_unlabeled_text,
)
from .experiments import DEFAULT_N, ExperimentConfig, lda_documents
from .metrics import FeatureConfig
from .representations import LdaModel, load_embeddings, train_lda

log = logging.getLogger(__name__)

DEFAULTS = {
    "task": "sentiment",
    "features": {"representations": ["term"], "similarity": True, "diversity": True, "renyi_alpha": 0.99},
    "bo": {"iterations": 300, "initial": 10, "candidates": 5000},
    "validation_size": 100,
    "seeds": [0],
    "vocab_size": 10_000,
    "lda": {"topics": 50, "iterations": 10, "seed": 0, "target_only": False},
    "embeddings": None,
    "smoothing": 1e-3,
    "lowercase": True,
    "output_dir": "out",
}

FEATURE_ALIASES = {"term": "term", "topic": "topic", "embedding": "embedding", "embeddings": "embedding",
                   "w2v": "embedding", "diversity": "diversity", "div": "diversity"}


class ManifestError(ValueError):
    pass


def parse_feature_spec(spec: str) -> dict:
    """``"term+diversity"`` or ``"term,topic"`` -> feature section of a manifest."""
    parts = [p.strip().lower() for p in spec.replace("+", ",").split(",") if p.strip()]
    unknown = [p for p in parts if p not in FEATURE_ALIASES]
    if unknown:
        raise ManifestError(f"unknown feature set(s): {unknown}")
    names = [FEATURE_ALIASES[p] for p in parts]
    reps = [r for r in ("term", "topic", "embedding") if r in names]
    return {"representations": reps, "similarity": bool(reps), "diversity": "diversity" in names}


@dataclass
class Manifest:
    path: Path
    data: dict
    domain_files: dict = field(default_factory=dict)

    @property
    def task(self) -> str:
        return self.data["task"]

    @property
    def target(self) -> str:
        return self.data["target"]

    @property
    def output_dir(self) -> Path:
        out = Path(self.data["output_dir"])
        return out if out.is_absolute() else self.path.parent / out

    @property
    def cache_dir(self) -> Path:
        return self.output_dir / "cache"

    def feature_config(self) -> FeatureConfig:
        f = dict(self.data["features"])
        return FeatureConfig.from_dict(f)

    def bo_config(self) -> BoConfig:
        """BO settings; a budget below the initial design shrinks the design to fit."""
        bo = dict(self.data["bo"])
        if "iterations" in bo and "initial" in bo:
            bo["initial"] = min(bo["initial"], bo["iterations"])
        return BoConfig(**bo)

    def n(self) -> int:
        return int(self.data.get("n") or DEFAULT_N.get(self.task, 1600))

    def content_hash(self) -> str:
        """Hash of the settings that affect ingested artifacts plus every input file's bytes."""
        h = hashlib.sha256()
        relevant = {k: self.data[k] for k in ("task", "target", "vocab_size", "lda", "smoothing", "lowercase")}
        h.update(json.dumps(relevant, sort_keys=True).encode())
        files = [p for d in sorted(self.domain_files) for p in self.domain_files[d].values() if p]
        if self.data.get("embeddings"):
            files.append(self._resolve(self.data["embeddings"]))
        for p in files:
            h.update(str(p.name).encode())
            h.update(p.read_bytes())
        return h.hexdigest()[:16]

    def _resolve(self, p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.path.parent / p


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def load_manifest(path, overrides: dict | None = None) -> Manifest:
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"manifest not found: {path}")
    raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    data = _merge(DEFAULTS, raw)
    if overrides:
        data = _merge(data, overrides)
        if "features" in overrides:
            data["features"] = _merge(DEFAULTS["features"], overrides["features"])
    if data["task"] not in ("sentiment", "pos", "external"):
        raise ManifestError(f"unknown task {data['task']!r}")
    if data["task"] == "external" and not data.get("command"):
        raise ManifestError("external task needs a 'command' template")
    domains = data.get("domains") or {}
    if not domains:
        raise ManifestError("manifest lists no domains")
    if "target" not in data:
        targets = [d for d, v in domains.items() if isinstance(v, dict) and v.get("target")]
        if len(targets) != 1:
            raise ManifestError("exactly one target domain must be marked")
        data["target"] = targets[0]
    if data["target"] not in domains:
        raise ManifestError(f"target {data['target']!r} is not a listed domain")
    if isinstance(data["seeds"], int):
        data["seeds"] = list(range(data["seeds"]))
    manifest = Manifest(path, data)
    for name, entry in domains.items():
        labeled = manifest._resolve(entry["labeled"])
        unlabeled = manifest._resolve(entry["unlabeled"]) if entry.get("unlabeled") else None
        manifest.domain_files[name] = {"labeled": labeled, "unlabeled": unlabeled}
    return manifest


def check_files(manifest: Manifest) -> None:
    missing = [p for files in manifest.domain_files.values() for p in files.values() if p and not p.exists()]
    if manifest.data.get("embeddings"):
        emb = manifest._resolve(manifest.data["embeddings"])
        if not emb.exists():
            missing.append(emb)
    if missing:
        raise ManifestError("missing file(s): " + ", ".join(str(p) for p in missing))


def load_domains(manifest: Manifest) -> dict[str, DomainCorpus]:
    lowercase = manifest.data["lowercase"]
    tagged = manifest.task == "pos" or manifest.data.get("format") == "conll"
    corpora = {}
    for name in sorted(manifest.domain_files):
        files = manifest.domain_files[name]
        if tagged:
            corpus = load_tagged_conll(files["labeled"], name)
        else:
            corpus = load_labeled_reviews(files["labeled"], name, lowercase)
        if files["unlabeled"]:
            corpus = corpus.with_unlabeled(load_unlabeled_text(files["unlabeled"], name,
                                                               lowercase and not tagged))
        corpora[name] = corpus
    return corpora


@dataclass
class IngestResult:
    directory: Path
    cache_hit: bool
    corpora: dict
    vocab: object
    lda: LdaModel | None
    embeddings: object


def ingest(manifest: Manifest, force: bool = False) -> IngestResult:
    """Parse corpora, build the vocabulary (and LDA / embeddings when needed), cache by content hash."""
    check_files(manifest)
    key = manifest.content_hash()
    directory = manifest.cache_dir / key
    done = directory / "artifacts.pkl"
    if done.exists() and not force:
        log.info("cache hit: %s", directory)
        return IngestResult(directory, True, **_load_artifacts(directory))
    directory.mkdir(parents=True, exist_ok=True)
    corpora = load_domains(manifest)
    vocab = build_vocabulary([corpora[d] for d in sorted(corpora)], manifest.data["vocab_size"])
    needs = manifest.feature_config().needs
    lda = None
    if "topic" in needs:
        lda_cfg = manifest.data["lda"]
        docs = lda_documents(corpora, manifest.target, lda_cfg["target_only"])
        lda = train_lda([ex.tokens for ex in docs], vocab, lda_cfg["topics"], lda_cfg["iterations"],
                        lda_cfg["seed"])
        lda.save(directory / "lda.npz")
    embeddings = None
    if manifest.data.get("embeddings"):
        embeddings = load_embeddings(manifest._resolve(manifest.data["embeddings"]),
                                     manifest.data["smoothing"])
    with open(directory / "artifacts.pkl", "wb") as fh:
        pickle.dump({"corpora": corpora, "vocab": vocab, "embeddings": embeddings}, fh)
    (directory / "vocab.txt").write_text(
        "".join(f"{w}\t{float(p)!r}\n" for w, p in zip(vocab.types, vocab.probs)), encoding="utf-8")
    return IngestResult(directory, False, corpora, vocab, lda, embeddings)


def _load_artifacts(directory: Path) -> dict:
    with open(directory / "artifacts.pkl", "rb") as fh:
        data = pickle.load(fh)
    lda_path = directory / "lda.npz"
    data["lda"] = LdaModel.load(lda_path) if lda_path.exists() else None
    return data


def load_ingested(manifest: Manifest) -> IngestResult:
    check_files(manifest)
    directory = manifest.cache_dir / manifest.content_hash()
    if not (directory / "artifacts.pkl").exists():
        raise ManifestError(f"no ingested artifacts for this manifest; run 'ingest' first ({directory})")
    return IngestResult(directory, True, **_load_artifacts(directory))


def experiment_config(manifest: Manifest, ingested: IngestResult, jobs: int = 1) -> ExperimentConfig:
    d = manifest.data
    return ExperimentConfig(
        domains=ingested.corpora,
        target=manifest.target,
        task=manifest.task,
        features=manifest.feature_config(),
        bo=manifest.bo_config(),
        n=manifest.n(),
        validation_size=d["validation_size"],
        seeds=tuple(int(s) for s in d["seeds"]),
        vocab_size=d["vocab_size"],
        lda_topics=d["lda"]["topics"],
        lda_iterations=d["lda"]["iterations"],
        lda_seed=d["lda"]["seed"],
        lda_target_only=d["lda"]["target_only"],
        embeddings=ingested.embeddings,
        task_command=d.get("command"),
        jobs=jobs,
    )
