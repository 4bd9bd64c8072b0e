"""Command-line interface: ``dataselect {ingest,select,curve,synth}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .bayesopt import ObservationSet
from .experiments import (
    TransferSpec,
    WeightArtifact,
    apply_transferred_weights,
    best_artifact,
    prepare,
    run_baseline,
    run_learned_selection,
)
from .manifest import (
    ManifestError,
    experiment_config,
    ingest,
    load_ingested,
    load_manifest,
    parse_feature_spec,
)

log = logging.getLogger("dataselect")

SELECT_METHODS = ("random", "js-examples", "js-domain", "learned", "all-source", "transfer")


def _overrides(args) -> dict:
    out = {}
    if getattr(args, "iterations", None) is not None:
        out["bo"] = {"iterations": args.iterations}
    if getattr(args, "n", None) is not None:
        out["n"] = args.n
    if getattr(args, "features", None):
        out["features"] = parse_feature_spec(args.features)
    seed = getattr(args, "seed", None)
    runs = getattr(args, "runs", None)
    if seed is not None or runs is not None:
        start = seed if seed is not None else 0
        out["seeds"] = list(range(start, start + (runs or 1)))
    return out


def cmd_ingest(args) -> int:
    manifest = load_manifest(args.manifest, _overrides(args))
    result = ingest(manifest, force=args.force)
    status = "cache hit" if result.cache_hit else "ingested"
    sizes = ", ".join(f"{d}: {len(c.labeled)}+{len(c.unlabeled)}" for d, c in sorted(result.corpora.items()))
    print(f"{status}: {result.directory} ({sizes}; |V|={len(result.vocab)})")
    return 0


def _feature_label(config) -> str:
    parts = list(config.features.representations) if config.features.similarity else []
    if config.features.diversity:
        parts.append("div")
    return "+".join(parts) or "custom"


def cmd_select(args) -> int:
    if args.method == "transfer" and not args.weights:
        print("error: --method transfer requires --weights", file=sys.stderr)
        return 2
    overrides = _overrides(args)
    if args.method == "transfer":
        artifact = WeightArtifact.load(args.weights)
        overrides["features"] = artifact.feature_config.to_dict()
    manifest = load_manifest(args.manifest, overrides)
    ingested = load_ingested(manifest)
    config = experiment_config(manifest, ingested, jobs=args.jobs)
    out = manifest.output_dir
    label = _feature_label(config)
    if args.method == "learned":
        ctx = prepare(config, vocab=ingested.vocab, lda=ingested.lda)
        report, artifacts, histories = run_learned_selection(config, ctx)
        stem = f"{config.target}_learned_{label}"
        for artifact, history in zip(artifacts, histories):
            (out / "weights").mkdir(parents=True, exist_ok=True)
            (out / "history").mkdir(parents=True, exist_ok=True)
            artifact.save(out / "weights" / f"{stem}_seed{artifact.seed}.json")
            history.to_tsv(out / "history" / f"{stem}_seed{artifact.seed}.tsv")
        best_artifact(artifacts).save(out / "weights" / f"{stem}.json")
    elif args.method == "transfer":
        ctx = prepare(config, vocab=ingested.vocab, lda=ingested.lda)
        spec = TransferSpec(artifact.provenance, {"target": config.target, "task": config.task},
                            artifact.feature_config_id)
        report = apply_transferred_weights(spec, artifact, config, ctx)
        source = artifact.provenance.get("target", "unknown")
        stem = f"{config.target}_transfer_from_{source}_{artifact.provenance.get('task', '')}_{label}"
    else:
        ctx = prepare(config, with_features=False, vocab=ingested.vocab)
        report = run_baseline(config, args.method, ctx)
        stem = f"{config.target}_{args.method}"
    paths = report.write(out / "reports", stem)
    print(report.table())
    print(f"report: {paths['json']}")
    return 0


def curve_table(histories: dict[str, ObservationSet]) -> list[list[str]]:
    """Iteration vs. observed and best-so-far value, one column pair per history."""
    length = max(len(h) for h in histories.values())
    header = ["iteration"]
    for name in histories:
        header += [f"{name}:y", f"{name}:best"]
    rows = [header]
    bests = {name: h.best_so_far() for name, h in histories.items()}
    for i in range(length):
        row = [str(i + 1)]
        for name, h in histories.items():
            if i < len(h):
                row += [repr(h[i].y), repr(float(bests[name][i]))]
            else:
                row += ["", ""]
        rows.append(row)
    return rows


def cmd_curve(args) -> int:
    histories = {}
    for path in args.history:
        path = Path(path)
        if not path.exists():
            print(f"error: history not found: {path}", file=sys.stderr)
            return 1
        histories[path.stem] = ObservationSet.from_tsv(path)
    text = "\n".join("\t".join(row) for row in curve_table(histories)) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_synth(args) -> int:
    from .synthetic import make_sentiment_benchmark, make_tagging_benchmark, write_benchmark

    if args.task == "pos":
        corpora = make_tagging_benchmark(args.seed)
        fields = {"n": 200, "validation_size": 50}
    else:
        corpora = make_sentiment_benchmark(args.seed)
        fields = {"n": 200, "validation_size": 100}
    fields.update({"bo": {"iterations": 100, "initial": 10}, "seeds": list(range(5)), "output_dir": "out"})
    path = write_benchmark(corpora, args.directory, args.task, **fields)
    print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dataselect", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def run_flags(p):
        p.add_argument("manifest")
        p.add_argument("--seed", type=int, help="first seed (overrides the manifest)")
        p.add_argument("--runs", type=int, help="number of consecutive seeds starting at --seed")
        p.add_argument("--iterations", type=int, help="BO iterations")
        p.add_argument("--n", type=int, help="number of examples to select")
        p.add_argument("--features", help="feature sets, e.g. 'term+diversity'")

    p = sub.add_parser("ingest", help="parse and cache corpora, vocabulary, LDA and embeddings")
    run_flags(p)
    p.add_argument("--force", action="store_true", help="recompute even on a cache hit")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("select", help="run a selection method and write its report")
    run_flags(p)
    p.add_argument("--method", choices=SELECT_METHODS, required=True)
    p.add_argument("--weights", help="weight artifact for --method transfer")
    p.add_argument("--jobs", type=int, default=1, help="parallel processes across seeds")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("curve", help="best-so-far curves from BO history files")
    p.add_argument("history", nargs="+")
    p.add_argument("--out")
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("synth", help="write a synthetic benchmark and manifest")
    p.add_argument("directory")
    p.add_argument("--task", choices=("sentiment", "pos"), default="sentiment")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ManifestError, ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
