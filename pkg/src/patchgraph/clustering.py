"""k-means with k-means++ seeding, fit once on training embeddings and frozen afterwards."""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError, ShapeError

MAGIC = b"IPAC-KM1"


@dataclass
class ClusterModel:
    centroids: np.ndarray  # (C, d)
    inertia: float | None = None
    history: list[float] = field(default_factory=list)  # inertia after every assignment step
    n_iter: int = 0

    @property
    def C(self) -> int:
        return int(self.centroids.shape[0])

    @property
    def dim(self) -> int:
        return int(self.centroids.shape[1])

    def save(self, path: str | Path) -> None:
        with open(path, "wb") as f:
            f.write(MAGIC)
            f.write(struct.pack("<2I", self.C, self.dim))
            f.write(np.ascontiguousarray(self.centroids, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path: str | Path) -> "ClusterModel":
        buf = Path(path).read_bytes()
        if buf[:8] != MAGIC:
            raise FormatError(f"{path}: not a centroid file")
        c, d = struct.unpack("<2I", buf[8:16])
        body = buf[16:]
        if len(body) != c * d * 8:
            raise FormatError(f"{path}: expected {c * d} centroid values")
        return cls(np.frombuffer(body, dtype="<f8").reshape(c, d).astype(np.float64))


def sq_distances(x: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """(n, C) squared Euclidean distances, computed from explicit differences."""
    diff = x[:, None, :] - centroids[None, :, :]
    return np.einsum("ncd,ncd->nc", diff, diff)


def assign_batch(m: ClusterModel, z) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if z.ndim == 1:
        z = z[None]
    if z.ndim != 2 or z.shape[1] != m.dim:
        raise ShapeError(f"embeddings must have length {m.dim}, got shape {z.shape}")
    # np.argmin returns the first minimum: ties go to the lowest index
    return np.argmin(sq_distances(z, m.centroids), axis=1)


def assign(m: ClusterModel, z) -> int:
    return int(assign_batch(m, np.asarray(z, dtype=np.float64).reshape(1, -1))[0])


def _plusplus(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = [x[rng.integers(n)]]
    closest = sq_distances(x, centers[0][None])[:, 0]
    for _ in range(1, k):
        total = closest.sum()
        probs = closest / total
        idx = int(rng.choice(n, p=probs))
        centers.append(x[idx])
        closest = np.minimum(closest, sq_distances(x, x[idx][None])[:, 0])
    return np.array(centers)


def fit_kmeans(embeddings, k: int, seed: int = 0, max_iter: int = 100, tol: float = 1e-6) -> ClusterModel:
    x = np.asarray(embeddings, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError(f"expected (n, d) embeddings, got {x.shape}")
    if k < 2:
        raise ConfigError("k must be >= 2")
    n_distinct = np.unique(x, axis=0).shape[0]
    if n_distinct < k:
        raise ConfigError(f"only {n_distinct} distinct embeddings for k={k} clusters")
    rng = np.random.default_rng(seed)
    centroids = _plusplus(x, k, rng)
    history: list[float] = []
    it = 0
    for it in range(1, max_iter + 1):
        d2 = sq_distances(x, centroids)
        labels = np.argmin(d2, axis=1)
        point_d2 = d2[np.arange(x.shape[0]), labels]
        counts = np.bincount(labels, minlength=k)
        # re-seed empty clusters with the point farthest from its own centroid
        for c in np.flatnonzero(counts == 0):
            far = int(np.argmax(point_d2))
            centroids[c] = x[far]
            d2 = sq_distances(x, centroids)
            labels = np.argmin(d2, axis=1)
            point_d2 = d2[np.arange(x.shape[0]), labels]
            counts = np.bincount(labels, minlength=k)
        history.append(float(point_d2.sum()))
        sums = np.zeros_like(centroids)
        np.add.at(sums, labels, x)
        new = np.where(counts[:, None] > 0, sums / np.maximum(counts, 1)[:, None], centroids)
        shift = float(np.sqrt(((new - centroids) ** 2).sum(axis=1)).max())
        centroids = new
        if shift < tol:
            break
    d2 = sq_distances(x, centroids)
    inertia = float(d2.min(axis=1).sum())
    history.append(inertia)
    return ClusterModel(centroids, inertia, history, it)
