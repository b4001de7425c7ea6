"""End-to-end pipeline: data -> patches -> encoder -> clusters -> graphs -> classifier -> metrics.

Each stage reads and writes plain files inside the run directory so the CLI
can execute stages one at a time. :func:`run_pipeline` chains them.
"""
from __future__ import annotations

import json
import logging
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .. import dataio
from ..clustering import ClusterModel, assign_batch, fit_kmeans
from ..encoder import AutoencoderModel, train_autoencoder
from ..errors import StageError
from ..gnn.model import GnnModel
from ..gnn.train import evaluate, train_classifier
from ..graphbuild import ImageGraph, build_graph, read_jsonl, write_jsonl
from ..patching import Connectivity, grid_shape, partition_batch
from .config import RunConfig, derive_seed

log = logging.getLogger(__name__)

DATA = "data.npz"
ENCODER = "encoder.bin"
CENTROIDS = "centroids.bin"
MODEL = "model.bin"
CONFIG = "config.txt"
MANIFEST = "manifest.json"


@contextmanager
def stage(name: str):
    try:
        yield
    except StageError:
        raise
    except Exception as e:
        raise StageError(name, e) from e


def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


class Run:
    """A run directory plus the config that governs it."""

    def __init__(self, cfg: RunConfig):
        cfg.validate()
        self.cfg = cfg
        self.dir = Path(cfg.out)
        self.t0 = time.perf_counter()

    def path(self, name: str) -> Path:
        return self.dir / name

    def elapsed(self) -> float:
        return round(time.perf_counter() - self.t0, 3) if self.cfg.record_timing else 0.0

    # ---------------------------------------------------------------- stages

    def prepare(self) -> tuple[dataio.Dataset, dataio.Dataset, dataio.Dataset]:
        cfg = self.cfg
        with stage("prepare"):
            self.dir.mkdir(parents=True, exist_ok=True)
            self.path(CONFIG).write_text(cfg.to_text())
            if cfg.dataset == "synth":
                seed = derive_seed(cfg.seed, "data")
                splits = []
                for k, (name, n) in enumerate(
                    (("train", cfg.synth_train), ("val", cfg.synth_val), ("test", cfg.synth_test))
                ):
                    # odd counts give the extra image to class 0
                    d = dataio.synth_textures((n + 1) // 2, cfg.synth_side, cfg.synth_noise, seed + k, name)
                    splits.append(d.subset(np.arange(n)) if len(d) != n else d)
                train, val, test = splits
            else:
                train, val, test = dataio.load_npz_dataset(cfg.dataset)
            grid_shape(train.images.shape[1], train.images.shape[2], cfg.patch_size)
            dataio.save_npz_dataset(self.path(DATA), train, val, test)
        return train, val, test

    def load_data(self):
        with stage("prepare"):
            return dataio.load_npz_dataset(self.path(DATA))

    def _patches(self, d: dataio.Dataset) -> np.ndarray:
        patches, _, _ = partition_batch(dataio.normalize(d), self.cfg.patch_size)
        return patches

    def train_encoder(self, train: dataio.Dataset) -> AutoencoderModel:
        with stage("train-encoder"):
            patches = self._patches(train)
            enc = train_autoencoder(patches.reshape(-1, patches.shape[-1]), self.cfg.encoder_config())
            enc.save(self.path(ENCODER))
            _dump_json(self.path("encoder_history.json"), {"epoch_mse": enc.history})
        return enc

    def fit_clusters(self, train: dataio.Dataset, enc: AutoencoderModel) -> ClusterModel:
        with stage("fit-clusters"):
            patches = self._patches(train)
            z = enc.encode_batch(patches.reshape(-1, patches.shape[-1]))
            km = fit_kmeans(z, self.cfg.clusters, seed=derive_seed(self.cfg.seed, "kmeans"),
                            max_iter=self.cfg.kmeans_max_iter)
            km.save(self.path(CENTROIDS))
        return km

    def graphs_for(self, d: dataio.Dataset, enc, km: ClusterModel) -> list[ImageGraph]:
        cfg = self.cfg
        patches = self._patches(d)
        n, P, dim = patches.shape
        rows = d.images.shape[1] // cfg.patch_size
        cols = d.images.shape[2] // cfg.patch_size
        z = enc.encode_batch(patches.reshape(-1, dim)).reshape(n, P, -1)
        labels = assign_batch(km, z.reshape(n * P, -1)).reshape(n, rows, cols)
        conn = Connectivity.parse(cfg.connectivity)
        return [build_graph(labels[i], z[i], km.C, conn, int(d.labels[i])) for i in range(n)]

    def build_graphs(self, splits, enc, km) -> dict[str, list[ImageGraph]]:
        with stage("build-graphs"):
            out = {}
            for d in splits:
                out[d.split] = self.graphs_for(d, enc, km)
                write_jsonl(self.path(f"graphs_{d.split}.jsonl"), out[d.split])
        return out

    def load_graphs(self, split: str) -> list[ImageGraph]:
        return read_jsonl(self.path(f"graphs_{split}.jsonl"))

    def train(self, graphs: dict[str, list[ImageGraph]], num_classes: int) -> GnnModel:
        with stage("train"):
            res = train_classifier(graphs["train"], self.cfg.gnn_config(), num_classes, graphs.get("val"))
            res.model.save(self.path(MODEL))
            _dump_json(
                self.path("train_log.json"),
                {"loss": res.losses, "val_accuracy": res.val_accuracy, "best_epoch": res.best_epoch},
            )
        return res.model

    def evaluate(self, model: GnnModel, graphs: list[ImageGraph], split: str) -> dict:
        with stage("eval"):
            m = evaluate(model, graphs).to_dict(split, self.elapsed())
            _dump_json(self.path(f"metrics_{split}.json"), m)
        return m

    def write_manifest(self, extra: dict | None = None) -> None:
        cfg = self.cfg
        manifest = {
            "config": {k: getattr(cfg, k) for k in cfg.__dataclass_fields__},
            "seeds": {s: derive_seed(cfg.seed, s) for s in ("data", "encoder", "kmeans", "gnn")},
            "checkpoint_rule": "fixed epochs, best validation accuracy (earliest on ties)",
            "artifacts": sorted(p.name for p in self.dir.iterdir() if p.name != MANIFEST),
        }
        manifest.update(extra or {})
        _dump_json(self.path(MANIFEST), manifest)


def run_pipeline(cfg: RunConfig) -> dict[str, dict]:
    """Run every stage; returns the metrics dicts keyed by split."""
    run = Run(cfg)
    train, val, test = run.prepare()
    enc = run.train_encoder(train)
    km = run.fit_clusters(train, enc)
    graphs = run.build_graphs((train, val, test), enc, km)
    model = run.train({"train": graphs["train"], "val": graphs["val"]}, train.num_classes)
    metrics = {"val": run.evaluate(model, graphs["val"], "val")}
    # test labels are first read here
    metrics["test"] = run.evaluate(model, graphs["test"], "test")
    run.write_manifest()
    log.info("test accuracy %.4f auc %s", metrics["test"]["accuracy"], metrics["test"]["auc"])
    return metrics


def eval_run(run_dir: str | Path, splits=("val", "test"), record_timing: bool = True) -> dict[str, dict]:
    """Recompute metrics from the persisted model and graphs of a finished run."""
    cfg = RunConfig.from_file(Path(run_dir) / CONFIG).replace(out=str(run_dir), record_timing=record_timing)
    run = Run(cfg)
    model = GnnModel.load(run.path(MODEL))
    return {s: run.evaluate(model, run.load_graphs(s), s) for s in splits}
