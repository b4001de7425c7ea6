"""Accuracy, confusion matrix and macro one-vs-rest ROC AUC with midrank ties."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Metrics:
    accuracy: float
    auc_macro_ovr: float | None
    confusion: np.ndarray  # (K, K), rows = true class, cols = predicted

    def to_dict(self, split: str, runtime_s: float) -> dict:
        return {
            "split": split,
            "accuracy": self.accuracy,
            "auc": self.auc_macro_ovr,
            "confusion": self.confusion.tolist(),
            "runtime_s": runtime_s,
        }


def midranks(x) -> np.ndarray:
    """1-based ranks, tied values sharing the mean of their positions."""
    x = np.asarray(x, dtype=np.float64)
    order = np.argsort(x, kind="mergesort")
    sx = x[order]
    ranks = np.empty(x.size, dtype=np.float64)
    i = 0
    while i < x.size:
        j = i
        while j + 1 < x.size and sx[j + 1] == sx[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def binary_auc(y_true, scores) -> float | None:
    """Area under the ROC curve; equals the trapezoidal area when ties get midranks."""
    y = np.asarray(y_true).astype(bool)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    r = midranks(scores)
    return float((r[y].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def auc_macro_ovr(labels, probs) -> float | None:
    labels = np.asarray(labels, dtype=np.int64)
    probs = np.asarray(probs, dtype=np.float64)
    if probs.shape[1] == 2:
        return binary_auc(labels == 1, probs[:, 1])
    per_class = [binary_auc(labels == k, probs[:, k]) for k in range(probs.shape[1])]
    valid = [a for a in per_class if a is not None]
    return float(np.mean(valid)) if valid else None


def confusion_matrix(labels, preds, num_classes: int) -> np.ndarray:
    cm = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(cm, (np.asarray(labels, dtype=np.int64), np.asarray(preds, dtype=np.int64)), 1)
    return cm


def metrics_from_probs(labels, probs) -> Metrics:
    labels = np.asarray(labels, dtype=np.int64)
    probs = np.asarray(probs, dtype=np.float64)
    preds = probs.argmax(axis=1)
    cm = confusion_matrix(labels, preds, probs.shape[1])
    acc = float(np.trace(cm) / max(labels.size, 1))
    return Metrics(acc, auc_macro_ovr(labels, probs), cm)
