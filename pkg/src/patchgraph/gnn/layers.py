"""Batched graph layers with explicit backward passes.

All tensors carry a leading batch axis: node states are ``(B, C, D)`` and
adjacencies ``(B, C, C)``. The neighbourhood of node ``i`` is the support
``{j : A[i, j] > 0}``, which doubles as its edge set.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import ShapeError
from ..graphbuild import ImageGraph

LAYER_TYPES = ("edgeconv", "gcnconv", "sageconv")


@dataclass
class GraphBatch:
    X: np.ndarray  # (B, C, d) node features
    A: np.ndarray  # (B, C, C) edge weights
    present: np.ndarray  # (B, C) 0/1
    S: np.ndarray  # (B, C, C) 0/1 support of A
    norm: np.ndarray  # (B, C, C) S_ij / sqrt(deg_i deg_j)
    mean: np.ndarray  # (B, C, C) S_ij / deg_i
    edge_sum: np.ndarray  # (B, C) sum_j norm_ij * A_ij
    labels: np.ndarray | None = None

    @property
    def size(self) -> int:
        return int(self.X.shape[0])

    def take(self, idx) -> "GraphBatch":
        lab = None if self.labels is None else self.labels[idx]
        return GraphBatch(
            self.X[idx], self.A[idx], self.present[idx], self.S[idx], self.norm[idx],
            self.mean[idx], self.edge_sum[idx], lab,
        )


def make_batch(X, A, present, labels=None) -> GraphBatch:
    X = np.asarray(X, dtype=np.float64)
    A = np.asarray(A, dtype=np.float64)
    present = np.asarray(present, dtype=np.float64)
    if A.ndim != 3 or A.shape[1] != A.shape[2] or X.shape[:2] != A.shape[:2]:
        raise ShapeError(f"features {X.shape} and adjacency {A.shape} disagree")
    S = (A > 0).astype(np.float64)
    deg = S.sum(axis=2)
    inv_sqrt = np.where(deg > 0, 1.0 / np.sqrt(np.maximum(deg, 1.0)), 0.0)
    norm = S * inv_sqrt[:, :, None] * inv_sqrt[:, None, :]
    mean = S * np.where(deg > 0, 1.0 / np.maximum(deg, 1.0), 0.0)[:, :, None]
    edge_sum = (norm * A).sum(axis=2)
    lab = None if labels is None else np.asarray(labels, dtype=np.int64)
    return GraphBatch(X, A, present, S, norm, mean, edge_sum, lab)


def batch_graphs(graphs: Sequence[ImageGraph]) -> GraphBatch:
    if not graphs:
        raise ShapeError("cannot batch zero graphs")
    labels = None
    if all(g.label is not None for g in graphs):
        labels = [g.label for g in graphs]
    return make_batch(
        np.stack([g.node_features for g in graphs]),
        np.stack([g.adjacency for g in graphs]),
        np.stack([g.present for g in graphs]),
        labels,
    )


def relu(x):
    return np.maximum(x, 0.0)


# ------------------------------------------------------------------ convolutions
# Each forward returns (out, cache); each backward returns (dH, {param: grad}).


def edgeconv_fwd(b: GraphBatch, H, theta, phi, use_edges: bool = True):
    agg = b.norm @ H
    pre = agg @ theta.T
    if use_edges:
        pre = pre + b.edge_sum[:, :, None] * phi[:, 0]
    return relu(pre), (H, agg, pre, use_edges)


def edgeconv_bwd(b: GraphBatch, dout, cache, theta):
    H, agg, pre, use_edges = cache
    dpre = dout * (pre > 0)
    grads = {"theta": np.einsum("bco,bci->oi", dpre, agg)}
    if use_edges:
        grads["phi"] = np.einsum("bco,bc->o", dpre, b.edge_sum)[:, None]
    dH = np.swapaxes(b.norm, 1, 2) @ (dpre @ theta)
    return dH, grads


def sageconv_fwd(b: GraphBatch, H, theta_self, theta_nb):
    nb = b.mean @ H
    pre = H @ theta_self.T + nb @ theta_nb.T
    return relu(pre), (H, nb, pre)


def sageconv_bwd(b: GraphBatch, dout, cache, theta_self, theta_nb):
    H, nb, pre = cache
    dpre = dout * (pre > 0)
    grads = {
        "theta_self": np.einsum("bco,bci->oi", dpre, H),
        "theta_nb": np.einsum("bco,bci->oi", dpre, nb),
    }
    dH = dpre @ theta_self + np.swapaxes(b.mean, 1, 2) @ (dpre @ theta_nb)
    return dH, grads


# ------------------------------------------------------------------ messages


def message_fwd(b: GraphBatch, H, msg_w, msg_b, phi):
    """Messages for every ordered pair, zeroed off the adjacency support.

    ``m_ij = relu(W [h_i; h_j; phi * A_ij] + bias)``; the weight matrix is split
    into the three blocks acting on the source, the target and the edge term.
    """
    D = H.shape[2]
    wa, wb, wc = msg_w[:, :D], msg_w[:, D : 2 * D], msg_w[:, 2 * D :]
    U = H @ wa.T
    V = H @ wb.T
    q = wc @ phi[:, 0]
    pre = U[:, :, None, :] + V[:, None, :, :] + b.A[..., None] * q + msg_b
    m = relu(pre) * b.S[..., None]
    return m, (H, pre, q)


def message_bwd(b: GraphBatch, dm, cache, msg_w, phi):
    H, pre, q = cache
    D = H.shape[2]
    wa, wb, wc = msg_w[:, :D], msg_w[:, D : 2 * D], msg_w[:, 2 * D :]
    dpre = dm * b.S[..., None] * (pre > 0)
    dU = dpre.sum(axis=2)
    dV = dpre.sum(axis=1)
    dq = np.einsum("bijo,bij->o", dpre, b.A)
    dw = np.concatenate(
        [np.einsum("bco,bci->oi", dU, H), np.einsum("bco,bci->oi", dV, H), np.outer(dq, phi[:, 0])],
        axis=1,
    )
    grads = {"w": dw, "b": dpre.sum(axis=(0, 1, 2)), "phi": (wc.T @ dq)[:, None]}
    dH = dU @ wa + dV @ wb
    return dH, grads
