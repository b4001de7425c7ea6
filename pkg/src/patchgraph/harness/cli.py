"""Command-line entry point: ``patchgraph <command> [flags]``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..clustering import ClusterModel
from ..encoder import AutoencoderModel
from ..errors import PatchGraphError
from ..gnn.model import GnnModel
from .config import RunConfig, SweepGrid
from .export import export_command
from .pipeline import CENTROIDS, CONFIG, ENCODER, MODEL, Run, eval_run, run_pipeline
from .sweep import run_sweep

_FLAGS = {
    "dataset": str, "patch_size": int, "clusters": int, "connectivity": int, "layer_type": str,
    "layers": int, "inner_dim": int, "dropout": float, "mlp_depth": int, "epochs": int,
    "lr": float, "seed": int, "out": str,
}


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override any config key")
    p.add_argument("--dataset", help='path to a MedMNIST-style .npz archive, or "synth"')
    p.add_argument("--patch-size", type=int)
    p.add_argument("--clusters", type=int)
    p.add_argument("--connectivity", type=int, choices=(4, 8))
    p.add_argument("--layer-type", choices=("edgeconv", "gcnconv", "sageconv"))
    p.add_argument("--layers", type=int)
    p.add_argument("--inner-dim", type=int)
    p.add_argument("--dropout", type=float)
    p.add_argument("--mlp-depth", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--no-timing", action="store_true", help="write runtime_s as 0 for byte-reproducible outputs")


def resolve_config(args, use_run_dir: bool = True) -> RunConfig:
    """Defaults < run directory's config.txt < --config file < --set < flags."""
    file_text = Path(args.config).read_text() if args.config else None
    out = args.out or (RunConfig.from_text(file_text).out if file_text else None)
    cfg = RunConfig()
    if use_run_dir and out and (Path(out) / CONFIG).exists():
        cfg = RunConfig.from_file(Path(out) / CONFIG)
    if file_text:
        cfg = RunConfig.from_text(file_text, cfg)
    sets = {}
    for item in args.set:
        if "=" not in item:
            raise SystemExit(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        sets[k.strip().replace("-", "_")] = v.strip()
    cfg = cfg.update(sets)
    flags = {k: getattr(args, k) for k in _FLAGS if getattr(args, k, None) is not None}
    if args.no_timing:
        flags["record_timing"] = False
    return cfg.update(flags)


def _parse_ints(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="patchgraph", description="Patch-cluster graphs and edge-aware GNN classification.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("prepare", "load or synthesise the dataset into the run directory"),
        ("train-encoder", "train the patch autoencoder on the training split"),
        ("fit-clusters", "fit k-means on training-patch embeddings"),
        ("build-graphs", "convert every image to a cluster-adjacency graph"),
        ("train", "train the graph classifier"),
        ("eval", "recompute metrics from a run's persisted artifacts"),
        ("run", "execute the full pipeline"),
    ]:
        _add_run_flags(sub.add_parser(name, help=help_))
    sw = sub.add_parser("sweep", help="grid sweep over patch size and cluster count")
    _add_run_flags(sw)
    sw.add_argument("--patch-sizes", type=_parse_ints, required=True, help="comma-separated, e.g. 4,7,14")
    sw.add_argument("--cluster-values", type=_parse_ints, required=True, help="comma-separated, e.g. 4,8,16")
    sw.add_argument("--reps", type=int, default=1)
    sw.add_argument("--csv", required=True)
    sw.add_argument("--jobs", type=int, default=1)
    ex = sub.add_parser("export", help="export graphs as DOT/JSON files or JSON-lines")
    ex.add_argument("--graphs", required=True, help="JSON-lines graph corpus (graphs_<split>.jsonl)")
    ex.add_argument("--format", choices=("dot", "json"), default="dot")
    ex.add_argument("--jsonl", action="store_true", help="write one JSON-lines file instead of one file per graph")
    ex.add_argument("--dest", required=True)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return _dispatch(args)
    except PatchGraphError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def _dispatch(args) -> int:
    cmd = args.command
    if cmd == "export":
        files = export_command(args.graphs, args.format, args.dest, jsonl=args.jsonl)
        print(f"wrote {len(files)} file(s)")
        return 0
    if cmd == "sweep":
        base = resolve_config(args, use_run_dir=False)
        grid = SweepGrid(args.patch_sizes, args.cluster_values, args.reps, base)
        rows = run_sweep(grid, args.csv, jobs=args.jobs)
        print(f"wrote {len(rows)} rows to {args.csv}")
        return 0
    cfg = resolve_config(args, use_run_dir=cmd != "run")
    if cmd == "run":
        metrics = run_pipeline(cfg)
        print(json.dumps(metrics["test"]))
        return 0
    run = Run(cfg)
    if cmd == "prepare":
        tr, va, te = run.prepare()
        print(f"train={len(tr)} val={len(va)} test={len(te)} classes={tr.num_classes}")
        return 0
    # stage flags become part of the run's recorded config
    if run.dir.exists():
        run.path(CONFIG).write_text(cfg.to_text())
    train, val, test = run.load_data()
    if cmd == "train-encoder":
        enc = run.train_encoder(train)
        print(f"final epoch mse {enc.history[-1]:.6g}")
    elif cmd == "fit-clusters":
        km = run.fit_clusters(train, AutoencoderModel.load(run.path(ENCODER)))
        print(f"{km.C} clusters, inertia {km.inertia:.6g}")
    elif cmd == "build-graphs":
        enc = AutoencoderModel.load(run.path(ENCODER))
        km = ClusterModel.load(run.path(CENTROIDS))
        out = run.build_graphs((train, val, test), enc, km)
        print(" ".join(f"{k}={len(v)}" for k, v in out.items()))
    elif cmd == "train":
        graphs = {s: run.load_graphs(s) for s in ("train", "val")}
        run.train(graphs, train.num_classes)
        model = GnnModel.load(run.path(MODEL))
        print(json.dumps(run.evaluate(model, graphs["val"], "val")))
    elif cmd == "eval":
        metrics = eval_run(cfg.out, record_timing=cfg.record_timing)
        print(json.dumps(metrics["test"]))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
