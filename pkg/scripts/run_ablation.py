"""Patch-size x cluster-count sweep on the synthetic fixture (or any archive via --dataset).

    python scripts/run_ablation.py --csv runs/ablation.csv --jobs 4

Prints mean test accuracy per cell once the CSV is complete.
"""
import argparse
import csv
from collections import defaultdict

from patchgraph.harness import RunConfig, SweepGrid, run_sweep

if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--csv", default="runs/ablation.csv")
    ap.add_argument("--dataset", default="synth")
    ap.add_argument("--patch-sizes", default="4,7,14")
    ap.add_argument("--clusters", default="4,8,16")
    ap.add_argument("--reps", type=int, default=1)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    grid = SweepGrid(
        [int(x) for x in args.patch_sizes.split(",")],
        [int(x) for x in args.clusters.split(",")],
        args.reps,
        RunConfig(dataset=args.dataset, seed=args.seed),
    )
    run_sweep(grid, args.csv, jobs=args.jobs)
    acc = defaultdict(list)
    with open(args.csv) as f:
        for row in csv.DictReader(f):
            if not row["error"]:
                acc[(int(row["patch_size"]), int(row["clusters"]))].append(float(row["test_acc"]))
    print("patch  clusters  mean_test_acc")
    for (p, c), v in sorted(acc.items()):
        print(f"{p:5d}  {c:8d}  {sum(v) / len(v):.4f}")
