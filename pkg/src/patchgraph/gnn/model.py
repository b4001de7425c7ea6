"""Edge-aware graph classifier: input projection, L graph layers, edge messages, sum pool, MLP head."""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import ConfigError, DegenerateGraphError, FormatError, ShapeError
from ..graphbuild import ImageGraph
from ..numerics import ParamSet, glorot, softmax_rows
from . import layers as L
from .layers import LAYER_TYPES, GraphBatch, batch_graphs

MAGIC = b"IPAC-GN1"
HEAD_DEPTHS = (4, 6, 12)
INNER_DIMS = (128, 256, 512)


@dataclass
class GnnConfig:
    layer_type: str = "edgeconv"
    layers: int = 2
    inner_dim: int = 128
    dropout: float = 0.0
    mlp_depth: int = 4
    epochs: int = 40
    lr: float = 1e-3
    batch_size: int = 32
    seed: int = 0

    def validate(self) -> None:
        if self.layer_type not in LAYER_TYPES:
            raise ConfigError(f"layer_type must be one of {LAYER_TYPES}, got {self.layer_type!r}")
        if self.layers < 1:
            raise ConfigError("need at least one graph layer")
        if self.inner_dim < 1 or self.mlp_depth < 1:
            raise ConfigError("inner_dim and mlp_depth must be >= 1")
        if not 0.0 <= self.dropout <= 0.8:
            raise ConfigError(f"dropout must lie in [0, 0.8], got {self.dropout}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be >= 1")


@dataclass
class GnnLayer:
    """Read-only view of one layer's weights (arrays are shared with the model)."""

    kind: str
    theta: np.ndarray | None = None
    phi: np.ndarray | None = None
    theta_self: np.ndarray | None = None
    theta_nb: np.ndarray | None = None
    msg_w: np.ndarray | None = None
    msg_b: np.ndarray | None = None


@dataclass
class GnnModel:
    cfg: GnnConfig
    input_dim: int
    num_classes: int
    params: ParamSet = field(default_factory=ParamSet)

    @classmethod
    def init(cls, cfg: GnnConfig, input_dim: int, num_classes: int, seed: int | None = None) -> "GnnModel":
        cfg.validate()
        if num_classes < 2:
            raise ConfigError("need at least two classes")
        rng = np.random.default_rng(cfg.seed if seed is None else seed)
        D = cfg.inner_dim
        m = cls(cfg, input_dim, num_classes)
        p = m.params
        p.add("in.w", glorot(rng, D, input_dim))
        last = cfg.layers - 1
        for l in range(cfg.layers):
            if cfg.layer_type == "sageconv":
                p.add(f"conv{l}.theta_self", glorot(rng, D, D))
                p.add(f"conv{l}.theta_nb", glorot(rng, D, D))
            else:
                p.add(f"conv{l}.theta", glorot(rng, D, D))
            # edgeconv uses phi in every layer; the message function reads the last layer's
            if cfg.layer_type == "edgeconv" or l == last:
                p.add(f"conv{l}.phi", glorot(rng, D, 1))
        p.add("msg.w", glorot(rng, D, 3 * D))
        p.add("msg.b", np.zeros(D))
        widths = [D] * cfg.mlp_depth + [num_classes]
        for k in range(cfg.mlp_depth):
            p.add(f"head{k}.w", glorot(rng, widths[k + 1], widths[k]))
            p.add(f"head{k}.b", np.zeros(widths[k + 1]))
        return m

    def layer(self, l: int) -> GnnLayer:
        p, pre = self.params, f"conv{l}."
        get = lambda k: p.values.get(pre + k)  # noqa: E731
        view = GnnLayer(self.cfg.layer_type, get("theta"), get("phi"), get("theta_self"), get("theta_nb"))
        if l == self.cfg.layers - 1:
            view.msg_w, view.msg_b = p["msg.w"], p["msg.b"]
        return view

    # ------------------------------------------------------------ forward / backward

    def _conv_fwd(self, l, b, H):
        p, kind = self.params, self.cfg.layer_type
        if kind == "sageconv":
            return L.sageconv_fwd(b, H, p[f"conv{l}.theta_self"], p[f"conv{l}.theta_nb"])
        use_edges = kind == "edgeconv"
        phi = p[f"conv{l}.phi"] if use_edges else None
        return L.edgeconv_fwd(b, H, p[f"conv{l}.theta"], phi, use_edges)

    def _conv_bwd(self, l, b, dout, cache):
        p, kind = self.params, self.cfg.layer_type
        if kind == "sageconv":
            dH, g = L.sageconv_bwd(b, dout, cache, p[f"conv{l}.theta_self"], p[f"conv{l}.theta_nb"])
        else:
            dH, g = L.edgeconv_bwd(b, dout, cache, p[f"conv{l}.theta"])
        for k, v in g.items():
            self.params.accumulate(f"conv{l}.{k}", v)
        return dH

    def forward(self, b: GraphBatch, train: bool = False, rng: np.random.Generator | None = None):
        if b.X.shape[2] != self.input_dim:
            raise ShapeError(f"node features have dim {b.X.shape[2]}, model expects {self.input_dim}")
        empty = np.flatnonzero(b.S.sum(axis=(1, 2)) == 0)
        if empty.size:
            raise DegenerateGraphError(f"graph(s) {empty.tolist()} have no edges, so no messages to pool")
        p, cfg = self.params, self.cfg
        mask = b.present[..., None]
        H = (b.X @ p["in.w"].T) * mask
        convs, drops = [], []
        keep = 1.0 - cfg.dropout
        for l in range(cfg.layers):
            H, cache = self._conv_fwd(l, b, H)
            convs.append(cache)
            if train and cfg.dropout > 0:
                if rng is None:
                    raise ConfigError("training with dropout needs an rng")
                drop = (rng.random(H.shape) < keep) / keep
                H = H * drop
            else:
                drop = None
            drops.append(drop)
        phi = p[f"conv{cfg.layers - 1}.phi"]
        m, mcache = L.message_fwd(b, H, p["msg.w"], p["msg.b"], phi)
        x = m.sum(axis=(1, 2))
        heads = []
        for k in range(cfg.mlp_depth):
            pre = x @ p[f"head{k}.w"].T + p[f"head{k}.b"]
            heads.append((x, pre))
            x = L.relu(pre) if k < cfg.mlp_depth - 1 else pre
        return x, (b, convs, drops, m.shape, mcache, heads)

    def backward(self, cache, dlogits) -> None:
        """Accumulate parameter gradients given d(loss)/d(logits)."""
        b, convs, drops, m_shape, mcache, acts = cache
        p, cfg = self.params, self.cfg
        g = dlogits
        for k in reversed(range(cfg.mlp_depth)):
            xin, pre = acts[k]
            if k < cfg.mlp_depth - 1:
                g = g * (pre > 0)
            p.accumulate(f"head{k}.w", g.T @ xin)
            p.accumulate(f"head{k}.b", g.sum(0))
            g = g @ p[f"head{k}.w"]
        dm = np.broadcast_to(g[:, None, None, :], m_shape)
        last = cfg.layers - 1
        dH, mg = L.message_bwd(b, dm, mcache, p["msg.w"], p[f"conv{last}.phi"])
        p.accumulate("msg.w", mg["w"])
        p.accumulate("msg.b", mg["b"])
        p.accumulate(f"conv{last}.phi", mg["phi"])
        for l in reversed(range(cfg.layers)):
            if drops[l] is not None:
                dH = dH * drops[l]
            dH = self._conv_bwd(l, b, dH, convs[l])
        p.accumulate("in.w", np.einsum("bco,bci->oi", dH * b.present[..., None], b.X))

    def predict_proba(self, graphs: Sequence[ImageGraph] | GraphBatch, batch_size: int = 256) -> np.ndarray:
        if isinstance(graphs, GraphBatch):
            logits, _ = self.forward(graphs)
            return softmax_rows(logits)
        out = []
        for s in range(0, len(graphs), batch_size):
            logits, _ = self.forward(batch_graphs(graphs[s : s + batch_size]))
            out.append(softmax_rows(logits))
        return np.concatenate(out) if out else np.zeros((0, self.num_classes))

    # ------------------------------------------------------------ persistence

    def save(self, path: str | Path) -> None:
        c = self.cfg
        with open(path, "wb") as f:
            f.write(MAGIC)
            f.write(c.layer_type.encode("ascii").ljust(16, b"\0"))
            f.write(struct.pack("<5I", c.layers, c.inner_dim, c.mlp_depth, self.num_classes, self.input_dim))
            for name in self.params:
                f.write(np.ascontiguousarray(self.params[name], dtype="<f8").tobytes())

    @classmethod
    def load(cls, path: str | Path) -> "GnnModel":
        buf = Path(path).read_bytes()
        if buf[:8] != MAGIC:
            raise FormatError(f"{path}: not a GNN model file")
        kind = buf[8:24].rstrip(b"\0").decode("ascii")
        layers, inner, depth, ncls, indim = struct.unpack("<5I", buf[24:44])
        m = cls.init(GnnConfig(layer_type=kind, layers=layers, inner_dim=inner, mlp_depth=depth), indim, ncls)
        off = 44
        for name in m.params:
            v = m.params.values[name]
            nbytes = v.size * 8
            if off + nbytes > len(buf):
                raise FormatError(f"{path}: truncated at block {name}")
            v[...] = np.frombuffer(buf[off : off + nbytes], dtype="<f8").reshape(v.shape)
            off += nbytes
        if off != len(buf):
            raise FormatError(f"{path}: {len(buf) - off} trailing bytes")
        return m
