"""Per-image cluster-adjacency graphs.

Nodes are the global cluster ids ``0..C-1``. ``n[i, j]`` counts ordered
neighbour incidences ``(p, q)`` with ``p`` in cluster ``i`` and ``q`` in
cluster ``j``; each row of the adjacency is ``n[i] / n[i].sum()``. Same-cluster
neighbours land on the diagonal and act as self-edges.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .clustering import ClusterModel, assign_batch
from .errors import DomainError, ShapeError
from .patching import Connectivity, PatchGrid


@dataclass
class ImageGraph:
    C: int
    node_features: np.ndarray  # (C, d)
    adjacency: np.ndarray  # (C, C), row-normalised incidence counts
    present: np.ndarray  # (C,) bool
    label: int | None = None

    def to_dict(self) -> dict:
        return {
            "C": self.C,
            "present": [bool(b) for b in self.present],
            "node_features": self.node_features.tolist(),
            "adjacency": self.adjacency.tolist(),
            "label": None if self.label is None else int(self.label),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ImageGraph":
        c = int(d["C"])
        feats = np.asarray(d["node_features"], dtype=np.float64).reshape(c, -1)
        adj = np.asarray(d["adjacency"], dtype=np.float64).reshape(c, c)
        present = np.asarray(d["present"], dtype=bool)
        return cls(c, feats, adj, present, d.get("label"))


def label_patches(grid: PatchGrid, enc, km: ClusterModel) -> tuple[np.ndarray, np.ndarray]:
    """Cluster id and embedding for every patch of ``grid``."""
    z = enc.encode_batch(grid.patches)
    return assign_batch(km, z), z


def incidence_counts(labels, C: int, conn=Connectivity.FOUR) -> np.ndarray:
    """Integer matrix of ordered neighbour incidences between clusters."""
    labels = np.asarray(labels)
    if labels.ndim != 2:
        raise ShapeError(f"labels must be a 2-D grid, got shape {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= C):
        raise DomainError(f"cluster label outside [0, {C})")
    rows, cols = labels.shape
    n = np.zeros((C, C), dtype=np.int64)
    for dr, dc in Connectivity.parse(conn).offsets:
        src = labels[max(0, -dr) : rows - max(0, dr), max(0, -dc) : cols - max(0, dc)]
        dst = labels[max(0, dr) : rows - max(0, -dr), max(0, dc) : cols - max(0, -dc)]
        np.add.at(n, (src.ravel(), dst.ravel()), 1)
    return n


def adjacency_from_labels(labels, C: int, conn=Connectivity.FOUR) -> np.ndarray:
    n = incidence_counts(labels, C, conn)
    totals = n.sum(axis=1)
    A = np.zeros((C, C), dtype=np.float64)
    rows = totals > 0
    A[rows] = n[rows] / totals[rows, None]
    return A


def build_graph(labels, embeddings, C: int, conn=Connectivity.FOUR, label: int | None = None) -> ImageGraph:
    labels = np.asarray(labels)
    z = np.asarray(embeddings, dtype=np.float64)
    flat = labels.ravel()
    if z.ndim != 2 or z.shape[0] != flat.size:
        raise ShapeError(f"need one embedding per patch ({flat.size}), got {z.shape}")
    A = adjacency_from_labels(labels, C, conn)
    sums = np.zeros((C, z.shape[1]))
    np.add.at(sums, flat, z)
    counts = np.bincount(flat, minlength=C)
    present = counts > 0
    feats = np.zeros_like(sums)
    feats[present] = sums[present] / counts[present, None]
    return ImageGraph(C, feats, A, present, label)


def permute_graph(g: ImageGraph, perm) -> ImageGraph:
    """Relabel clusters: old node ``perm[k]`` becomes new node ``k``."""
    perm = np.asarray(perm)
    return ImageGraph(
        g.C, g.node_features[perm], g.adjacency[np.ix_(perm, perm)], g.present[perm], g.label
    )


def export_graph(g: ImageGraph, fmt: str = "json") -> str:
    if fmt == "json":
        return json.dumps(g.to_dict())
    if fmt == "dot":
        lines = ["digraph G {"]
        for c in np.flatnonzero(g.present):
            lines.append(f"  n{c} [label=\"cluster {c}\"];")
        for i, j in zip(*np.nonzero(g.adjacency > 0)):
            w = float(g.adjacency[i, j])
            lines.append(f"  n{i} -> n{j} [weight={w!r}, label=\"{w:.3f}\"];")
        lines.append("}")
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown export format {fmt!r}")


def import_graph(text: str) -> ImageGraph:
    return ImageGraph.from_dict(json.loads(text))


def write_jsonl(path, graphs: Iterable[ImageGraph]) -> int:
    count = 0
    with open(path, "w") as f:
        for g in graphs:
            f.write(export_graph(g, "json") + "\n")
            count += 1
    return count


def read_jsonl(path) -> list[ImageGraph]:
    with open(path) as f:
        return [import_graph(line) for line in f if line.strip()]
