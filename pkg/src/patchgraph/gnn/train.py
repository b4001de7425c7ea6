"""Minibatch Adam training of the graph classifier and evaluation."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import ConfigError
from ..graphbuild import ImageGraph
from ..numerics import AdamState, adam_step, cross_entropy, softmax_cross_entropy_grad, softmax_rows
from .layers import batch_graphs
from .metrics import Metrics, metrics_from_probs
from .model import GnnConfig, GnnModel

log = logging.getLogger(__name__)


@dataclass
class TrainResult:
    model: GnnModel
    losses: list[float]  # mean training cross-entropy per epoch
    val_accuracy: list[float] = field(default_factory=list)
    best_epoch: int | None = None


def train_classifier(
    graphs: Sequence[ImageGraph],
    cfg: GnnConfig,
    num_classes: int | None = None,
    val_graphs: Sequence[ImageGraph] | None = None,
) -> TrainResult:
    """Fixed-epoch training; with ``val_graphs`` the best-val-accuracy epoch is kept."""
    cfg.validate()
    if not graphs or any(g.label is None for g in graphs):
        raise ConfigError("training needs labelled graphs")
    labels = np.array([g.label for g in graphs], dtype=np.int64)
    if np.unique(labels).size < 2:
        raise ConfigError("training labels contain a single class")
    num_classes = num_classes or int(labels.max()) + 1
    model = GnnModel.init(cfg, graphs[0].node_features.shape[1], num_classes)
    rng = np.random.default_rng(cfg.seed + 1)
    drop_rng = np.random.default_rng(cfg.seed + 2)
    state = AdamState(lr=cfg.lr)
    batches_all = batch_graphs(list(graphs))
    n = len(graphs)
    result = TrainResult(model, [])
    best = (-1.0, None)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for s in range(0, n, cfg.batch_size):
            idx = order[s : s + cfg.batch_size]
            b = batches_all.take(idx)
            model.params.zero_grad()
            logits, cache = model.forward(b, train=True, rng=drop_rng)
            probs = softmax_rows(logits)
            total += cross_entropy(probs, b.labels) * idx.size
            model.backward(cache, softmax_cross_entropy_grad(probs, b.labels))
            adam_step(model.params, state)
        result.losses.append(total / n)
        if val_graphs:
            acc = evaluate(model, val_graphs).accuracy
            result.val_accuracy.append(acc)
            if acc > best[0]:
                best = (acc, model.params.copy())
                result.best_epoch = epoch
        log.debug("epoch %d loss %.4f", epoch, result.losses[-1])
    if best[1] is not None:
        model.params = best[1]
    return result


def evaluate(model: GnnModel, graphs: Sequence[ImageGraph]) -> Metrics:
    labels = np.array([g.label for g in graphs], dtype=np.int64)
    return metrics_from_probs(labels, model.predict_proba(list(graphs)))
