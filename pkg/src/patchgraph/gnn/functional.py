"""Single-graph entry points over the batched kernels.

Node states here are plain ``(C, D)`` arrays and a message state maps each
ordered edge ``(i, j)`` with ``A[i, j] > 0`` to its message vector.
"""
from __future__ import annotations

import numpy as np

from ..errors import DegenerateGraphError, ShapeError
from ..graphbuild import ImageGraph
from ..numerics import softmax_rows
from . import layers as L
from .model import GnnLayer, GnnModel

MessageState = dict[tuple[int, int], np.ndarray]


def _single(g: ImageGraph, h) -> tuple[L.GraphBatch, np.ndarray]:
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 2 or h.shape[0] != g.C:
        raise ShapeError(f"node state must have {g.C} rows, got shape {h.shape}")
    return L.make_batch(g.node_features[None], g.adjacency[None], g.present[None]), h[None]


def edgeconv_forward(g: ImageGraph, h, layer: GnnLayer) -> np.ndarray:
    b, H = _single(g, h)
    return L.edgeconv_fwd(b, H, layer.theta, layer.phi, True)[0][0]


def gcn_forward(g: ImageGraph, h, layer: GnnLayer) -> np.ndarray:
    b, H = _single(g, h)
    return L.edgeconv_fwd(b, H, layer.theta, None, False)[0][0]


def sage_forward(g: ImageGraph, h, layer: GnnLayer) -> np.ndarray:
    b, H = _single(g, h)
    return L.sageconv_fwd(b, H, layer.theta_self, layer.theta_nb)[0][0]


def message_pass(g: ImageGraph, h, layer: GnnLayer) -> MessageState:
    b, H = _single(g, h)
    m, _ = L.message_fwd(b, H, layer.msg_w, layer.msg_b, layer.phi)
    return {(int(i), int(j)): m[0, i, j].copy() for i, j in zip(*np.nonzero(g.adjacency > 0))}


def readout_predict(model: GnnModel, g: ImageGraph, final: MessageState) -> np.ndarray:
    if not final:
        raise DegenerateGraphError("no messages to pool")
    x = np.sum([final[k] for k in sorted(final)], axis=0)[None]
    p, depth = model.params, model.cfg.mlp_depth
    for k in range(depth):
        x = x @ p[f"head{k}.w"].T + p[f"head{k}.b"]
        if k < depth - 1:
            x = L.relu(x)
    return softmax_rows(x)[0]


def forward_graph(model: GnnModel, g: ImageGraph) -> tuple[np.ndarray, MessageState]:
    """Inference path built from the single-graph operations above."""
    h = (g.node_features @ model.params["in.w"].T) * g.present[:, None]
    step = {"edgeconv": edgeconv_forward, "gcnconv": gcn_forward, "sageconv": sage_forward}[model.cfg.layer_type]
    for l in range(model.cfg.layers):
        h = step(g, h, model.layer(l))
    msgs = message_pass(g, h, model.layer(model.cfg.layers - 1))
    return readout_predict(model, g, msgs), msgs
