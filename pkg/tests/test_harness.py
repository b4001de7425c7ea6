import csv
import json

import numpy as np
import pytest

from patchgraph.errors import ConfigError, StageError
from patchgraph.graphbuild import build_graph, write_jsonl
from patchgraph.harness import CSV_HEADER, RunConfig, SweepGrid, derive_seed, eval_run, export_command, run_pipeline, run_sweep
from patchgraph.harness.cli import main

TINY = dict(synth_train=40, synth_val=20, synth_test=20, ae_epochs=3, epochs=3, inner_dim=16, clusters=4, record_timing=False)


def tiny(tmp_path, **kw):
    return RunConfig(**{"out": str(tmp_path / "run"), **TINY, **kw})


def test_config_text_roundtrip():
    cfg = RunConfig(patch_size=4, dropout=0.25, layer_type="sageconv", record_timing=False)
    assert RunConfig.from_text(cfg.to_text()) == cfg


def test_config_text_errors():
    with pytest.raises(ConfigError, match="unknown"):
        RunConfig.from_text("nonsense=1")
    with pytest.raises(ConfigError, match="bad value"):
        RunConfig.from_text("patch_size=seven")
    with pytest.raises(ConfigError):
        RunConfig(dropout=0.85).validate()
    with pytest.raises(ConfigError):
        RunConfig(clusters=1).validate()


def test_config_comments_and_blank_lines():
    cfg = RunConfig.from_text("# sweep base\n\npatch_size = 4  # small\nrecord_timing=off\n")
    assert cfg.patch_size == 4 and cfg.record_timing is False


def test_derive_seed_stable_and_distinct():
    assert derive_seed(0, "encoder") == derive_seed(0, "encoder")
    seeds = {derive_seed(s, st) for s in range(3) for st in ("data", "encoder", "kmeans", "gnn")}
    assert len(seeds) == 12
    assert all(0 <= s < 2**63 for s in seeds)


def _snapshot(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir()) if p.is_file()}


def test_pipeline_artifacts_and_determinism(tmp_path):
    cfg = tiny(tmp_path)
    run_pipeline(cfg)
    first = _snapshot(tmp_path / "run")
    for required in ("data.npz", "encoder.bin", "centroids.bin", "model.bin", "metrics_test.json", "manifest.json"):
        assert required in first
    run_pipeline(cfg)
    assert _snapshot(tmp_path / "run") == first
    m = json.loads(first["metrics_test.json"])
    assert set(m) == {"split", "accuracy", "auc", "confusion", "runtime_s"}


def test_eval_reproduces_stored_metrics(tmp_path):
    cfg = tiny(tmp_path)
    stored = run_pipeline(cfg)
    again = eval_run(cfg.out, record_timing=False)
    assert again["test"] == stored["test"]


def test_single_patch_config_error(tmp_path):
    with pytest.raises(StageError, match="at least 4 patches") as e:
        run_pipeline(tiny(tmp_path, patch_size=28))
    assert e.value.stage == "prepare"


def test_manifest_records_config(tmp_path):
    cfg = tiny(tmp_path, seed=5)
    run_pipeline(cfg)
    man = json.loads((tmp_path / "run" / "manifest.json").read_text())
    assert man["config"]["seed"] == 5
    assert man["seeds"]["gnn"] == derive_seed(5, "gnn")
    assert "best validation accuracy" in man["checkpoint_rule"]


def test_sweep_small_grid(tmp_path):
    grid = SweepGrid([7, 14], [4, 6], 1, tiny(tmp_path))
    rows = run_sweep(grid, tmp_path / "s.csv")
    with open(tmp_path / "s.csv") as f:
        table = list(csv.reader(f))
    assert table[0] == CSV_HEADER
    assert len(table) == 5 and len(rows) == 4
    assert [(r[0], r[1]) for r in table[1:]] == [("7", "4"), ("7", "6"), ("14", "4"), ("14", "6")]
    first = (tmp_path / "s.csv").read_bytes()
    run_sweep(grid, tmp_path / "s.csv")
    assert (tmp_path / "s.csv").read_bytes() == first


def test_sweep_records_failures(tmp_path):
    # 400 clusters exceed the 160 training patches available at patch 14
    grid = SweepGrid([14], [4, 400], 1, tiny(tmp_path))
    rows = run_sweep(grid, tmp_path / "s.csv")
    assert rows[0][-1] == ""
    assert "ConfigError" in rows[1][-1] and rows[1][3] == ""


def test_export_command(tmp_path):
    rng = np.random.default_rng(0)
    gs = [build_graph(rng.integers(0, 3, size=(2, 2)), rng.normal(size=(4, 2)), 3, label=1) for _ in range(3)]
    write_jsonl(tmp_path / "g.jsonl", gs)
    files = export_command(tmp_path / "g.jsonl", "dot", tmp_path / "dot")
    assert len(files) == 3 and all(f.suffix == ".dot" for f in files)
    out = export_command(tmp_path / "g.jsonl", "json", tmp_path / "all.jsonl", jsonl=True)
    assert len((tmp_path / "all.jsonl").read_text().splitlines()) == 3 and out == [tmp_path / "all.jsonl"]
    (tmp_path / "empty.jsonl").write_text("")
    assert export_command(tmp_path / "empty.jsonl", "dot", tmp_path / "none") == []


def test_cli_stagewise_matches_run(tmp_path, capsys):
    flags = ["--set", "synth_train=40", "--set", "synth_val=20", "--set", "synth_test=20", "--set", "ae_epochs=3",
             "--epochs", "3", "--inner-dim", "16", "--clusters", "4", "--no-timing"]
    staged = str(tmp_path / "staged")
    for cmd in ("prepare", "train-encoder", "fit-clusters", "build-graphs", "train", "eval"):
        assert main([cmd, "--out", staged, *flags]) == 0
    assert main(["run", "--out", str(tmp_path / "full"), *flags]) == 0
    for n in ("model.bin", "metrics_test.json", "graphs_test.jsonl", "centroids.bin"):
        assert (tmp_path / "staged" / n).read_bytes() == (tmp_path / "full" / n).read_bytes(), n


def test_cli_errors_exit_nonzero(tmp_path, capsys):
    assert main(["run", "--out", str(tmp_path / "r"), "--patch-size", "28", "--no-timing"]) == 2
    assert "4 patches" in capsys.readouterr().err


def test_cli_sweep_and_export(tmp_path, capsys):
    cfg = tmp_path / "base.cfg"
    cfg.write_text("".join(f"{k}={v}\n" for k, v in TINY.items()))
    assert main(["sweep", "--config", str(cfg), "--patch-sizes", "7", "--cluster-values", "4,5", "--csv", str(tmp_path / "s.csv")]) == 0
    assert len((tmp_path / "s.csv").read_text().splitlines()) == 3
    run_pipeline(tiny(tmp_path))
    assert main(["export", "--graphs", str(tmp_path / "run" / "graphs_val.jsonl"), "--format", "dot", "--dest", str(tmp_path / "dots")]) == 0
    assert len(list((tmp_path / "dots").glob("*.dot"))) == 20


def test_parallel_sweep_matches_serial(tmp_path):
    grid = SweepGrid([7, 14], [4], 1, tiny(tmp_path))
    run_sweep(grid, tmp_path / "serial.csv")
    run_sweep(grid, tmp_path / "parallel.csv", jobs=2)
    assert (tmp_path / "serial.csv").read_bytes() == (tmp_path / "parallel.csv").read_bytes()
