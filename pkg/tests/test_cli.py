import json

import numpy as np
import pytest
import yaml

from dataselect.bayesopt import Observation, ObservationSet
from dataselect.cli import curve_table, main
from dataselect.manifest import (
    DEFAULTS,
    ManifestError,
    load_manifest,
    parse_feature_spec,
)


@pytest.fixture(scope="module")
def bench(tmp_path_factory):
    root = tmp_path_factory.mktemp("bench")
    assert main(["synth", str(root), "--seed", "0"]) == 0
    return root / "manifest.yaml"


def test_synth_manifest(bench):
    data = yaml.safe_load(bench.read_text())
    assert data["target"] == "target" and len(data["domains"]) == 4
    assert data["n"] == 200


def test_ingest_then_cache_hit(bench, capsys):
    assert main(["ingest", str(bench)]) == 0
    first = capsys.readouterr().out
    assert first.startswith("ingested")
    cache = bench.parent / "out" / "cache"
    assert any((d / "artifacts.pkl").exists() for d in cache.iterdir())
    assert main(["ingest", str(bench)]) == 0
    assert capsys.readouterr().out.startswith("cache hit")


def test_missing_unlabeled_file(tmp_path, capsys):
    (tmp_path / "a.tsv").write_text("1\tgood\n0\tbad\n")
    (tmp_path / "t.tsv").write_text("1\tgood\n")
    manifest = {"task": "sentiment", "target": "t",
                "domains": {"a": {"labeled": "a.tsv", "unlabeled": "gone.txt"}, "t": {"labeled": "t.tsv"}}}
    path = tmp_path / "m.yaml"
    path.write_text(yaml.safe_dump(manifest))
    assert main(["ingest", str(path)]) == 1
    assert "gone.txt" in capsys.readouterr().err


def test_format_error_exit_code(tmp_path, capsys):
    (tmp_path / "a.tsv").write_text("1\tgood\n7\tbad\n")
    (tmp_path / "t.tsv").write_text("1\tgood\n")
    manifest = {"task": "sentiment", "target": "t",
                "domains": {"a": {"labeled": "a.tsv"}, "t": {"labeled": "t.tsv"}}}
    path = tmp_path / "m.yaml"
    path.write_text(yaml.safe_dump(manifest))
    assert main(["ingest", str(path)]) == 1
    assert "a.tsv:2" in capsys.readouterr().err


def test_select_requires_ingest(tmp_path, capsys):
    root = tmp_path / "b"
    main(["synth", str(root), "--seed", "1"])
    capsys.readouterr()
    assert main(["select", str(root / "manifest.yaml"), "--method", "random"]) == 1
    assert "ingest" in capsys.readouterr().err


def test_select_random_ten_seeds(bench, capsys):
    main(["ingest", str(bench)])
    assert main(["select", str(bench), "--method", "random", "--seed", "0", "--runs", "10"]) == 0
    out = bench.parent / "out" / "reports"
    report = json.loads((out / "target_random.json").read_text())
    assert len(report["values"]) == 10 and report["variance"] is not None
    assert len((out / "target_random.tsv").read_text().splitlines()) == 11
    assert "mean" in capsys.readouterr().out


def test_select_learned_writes_weights_and_transfer(bench, capsys):
    main(["ingest", str(bench)])
    argv = ["select", str(bench), "--method", "learned", "--iterations", "3", "--runs", "1", "--n", "40"]
    assert main(argv) == 0
    out = bench.parent / "out"
    weights = out / "weights" / "target_learned_term+div.json"
    assert weights.exists()
    assert (out / "history" / "target_learned_term+div_seed0.tsv").exists()
    assert (out / "reports" / "target_learned_term+div.json").exists()
    learned = json.loads((out / "reports" / "target_learned_term+div.json").read_text())

    assert main(["select", str(bench), "--method", "transfer", "--weights", str(weights),
                 "--runs", "1", "--n", "40"]) == 0
    transfers = list((out / "reports").glob("target_transfer_from_target*.json"))
    assert len(transfers) == 1
    transfer = json.loads(transfers[0].read_text())
    assert transfer["runs"][0]["selected"] == learned["runs"][0]["selected"]
    assert transfer["values"] == learned["values"]


def test_transfer_without_weights(bench, capsys):
    assert main(["select", str(bench), "--method", "transfer"]) == 2
    assert "--weights" in capsys.readouterr().err


def _history(n, rng):
    return ObservationSet([Observation(rng.uniform(-1, 1, 2), float(rng.normal())) for _ in range(n)])


def test_curve_table(tmp_path, rng, capsys):
    _history(300, rng).to_tsv(tmp_path / "term.tsv")
    _history(120, rng).to_tsv(tmp_path / "topic.tsv")
    out = tmp_path / "curve.tsv"
    assert main(["curve", str(tmp_path / "term.tsv"), str(tmp_path / "topic.tsv"), "--out", str(out)]) == 0
    rows = [line.split("\t") for line in out.read_text().splitlines()]
    assert rows[0] == ["iteration", "term:y", "term:best", "topic:y", "topic:best"]
    assert len(rows) == 301
    best = np.array([float(r[2]) for r in rows[1:]])
    assert (np.diff(best) >= 0).all()
    assert rows[200][3] == "" and rows[100][3] != ""


def test_curve_single(rng):
    rows = curve_table({"h": _history(300, rng)})
    assert len(rows) == 301 and len(rows[0]) == 3


def test_curve_missing(tmp_path, capsys):
    assert main(["curve", str(tmp_path / "nope.tsv")]) == 1
    assert "nope.tsv" in capsys.readouterr().err


def test_parse_feature_spec():
    assert parse_feature_spec("term+diversity") == {
        "representations": ["term"], "similarity": True, "diversity": True}
    assert parse_feature_spec("div")["similarity"] is False
    assert parse_feature_spec("w2v,topic")["representations"] == ["topic", "embedding"]
    with pytest.raises(ManifestError):
        parse_feature_spec("syntax")


def _write_min(tmp_path, extra=None):
    (tmp_path / "a.tsv").write_text("1\tgood\n0\tbad\n")
    (tmp_path / "b.tsv").write_text("1\tfine\n0\tpoor\n")
    manifest = {"domains": {"a": {"labeled": "a.tsv"}, "b": {"labeled": "b.tsv", "target": True}}}
    manifest.update(extra or {})
    path = tmp_path / "m.yaml"
    path.write_text(yaml.safe_dump(manifest))
    return path


def test_manifest_defaults(tmp_path):
    m = load_manifest(_write_min(tmp_path))
    assert m.target == "b" and m.task == "sentiment"
    assert m.n() == 1600
    assert m.bo_config().iterations == 300
    assert m.data["validation_size"] == 100
    assert m.data["lda"] == DEFAULTS["lda"]
    assert m.feature_config().renyi_alpha == 0.99
    assert load_manifest(_write_min(tmp_path, {"task": "pos"})).n() == 2000


def test_manifest_overrides(tmp_path):
    m = load_manifest(_write_min(tmp_path), {"bo": {"iterations": 7}, "n": 5})
    assert m.bo_config().iterations == 7 and m.bo_config().initial == 7 and m.n() == 5
    assert load_manifest(_write_min(tmp_path), {"bo": {"iterations": 70}}).bo_config().initial == 10


def test_manifest_errors(tmp_path):
    with pytest.raises(ManifestError):
        load_manifest(tmp_path / "none.yaml")
    with pytest.raises(ManifestError):
        load_manifest(_write_min(tmp_path, {"task": "parsing"}))
    path = tmp_path / "two.yaml"
    path.write_text(yaml.safe_dump({"domains": {"a": {"labeled": "a.tsv", "target": True},
                                                "b": {"labeled": "b.tsv", "target": True}}}))
    with pytest.raises(ManifestError):
        load_manifest(path)


def test_content_hash_tracks_files(tmp_path):
    path = _write_min(tmp_path)
    before = load_manifest(path).content_hash()
    assert load_manifest(path).content_hash() == before
    (tmp_path / "a.tsv").write_text("1\tgood\n0\tawful\n")
    assert load_manifest(path).content_hash() != before
