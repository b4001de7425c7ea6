"""Grid sweep over (patch size, cluster count) with one CSV row per cell and repetition."""
from __future__ import annotations

import csv
import logging
import time
from multiprocessing import get_context
from pathlib import Path

from .config import SweepGrid
from .pipeline import run_pipeline

log = logging.getLogger(__name__)

CSV_HEADER = ["patch_size", "clusters", "rep", "val_acc", "test_acc", "runtime_s", "error"]


def _run_cell(args):
    idx, patch, clusters, rep, base, root = args
    cfg = base.replace(patch_size=patch, clusters=clusters, seed=base.seed + idx, out=str(Path(root) / f"cell{idx:03d}"))
    t0 = time.perf_counter()
    try:
        m = run_pipeline(cfg)
        row = [patch, clusters, rep, repr(m["val"]["accuracy"]), repr(m["test"]["accuracy"])]
        err = ""
    except Exception as e:  # recorded in the CSV, sweep continues
        row = [patch, clusters, rep, "", ""]
        err = f"{type(e).__name__}: {e}".replace("\n", " ")
    runtime = round(time.perf_counter() - t0, 3) if base.record_timing else 0.0
    return row + [repr(runtime), err]


def run_sweep(grid: SweepGrid, csv_path: str | Path, jobs: int = 1) -> list[list]:
    """Run every cell; rows are written in cell order and flushed as each finishes."""
    grid.validate()
    csv_path = Path(csv_path)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    root = csv_path.with_suffix("")
    tasks = [(i, p, c, r, grid.base, str(root)) for i, p, c, r in grid.cells()]
    rows = []
    with open(csv_path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(CSV_HEADER)
        f.flush()
        if jobs > 1:
            with get_context("spawn").Pool(jobs) as pool:
                results = pool.imap(_run_cell, tasks)
                for row in results:
                    w.writerow(row)
                    f.flush()
                    rows.append(row)
        else:
            for t in tasks:
                row = _run_cell(t)
                w.writerow(row)
                f.flush()
                rows.append(row)
                log.info("cell %d/%d done: %s", len(rows), len(tasks), row)
    return rows
