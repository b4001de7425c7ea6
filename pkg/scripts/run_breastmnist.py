"""Scaled-down BreastMNIST run at the native 28x28 resolution, patch 7.

Download ``breastmnist.npz`` (MedMNIST v2, 28x28) first, then:

    python scripts/run_breastmnist.py data/breastmnist.npz --out runs/breast

Runs every (layer type, cluster count) pair and prints one line each.
"""
import argparse
import json
import time

from patchgraph.harness import RunConfig, run_pipeline

if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("archive")
    ap.add_argument("--out", default="runs/breast")
    ap.add_argument("--layer-types", default="sageconv,edgeconv")
    ap.add_argument("--clusters", default="8,16")
    ap.add_argument("--epochs", type=int, default=40)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    for lt in args.layer_types.split(","):
        for c in map(int, args.clusters.split(",")):
            cfg = RunConfig(dataset=args.archive, patch_size=7, clusters=c, layer_type=lt, epochs=args.epochs,
                            seed=args.seed, out=f"{args.out}/{lt}_c{c}")
            t0 = time.perf_counter()
            m = run_pipeline(cfg)
            print(json.dumps({"layer_type": lt, "clusters": c, "test_acc": m["test"]["accuracy"],
                              "test_auc": m["test"]["auc"], "seconds": round(time.perf_counter() - t0, 1)}))
