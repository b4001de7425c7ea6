"""Fully-connected patch autoencoder: input -> hidden -> embedding -> hidden -> input.

The encoder half maps a flattened patch to its embedding. Anything offering
``encode_batch(patches) -> (n, embed_dim)`` can stand in for :class:`AutoencoderModel`
inside the graph builder.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError, ShapeError
from .numerics import AdamState, ParamSet, adam_step, glorot

MAGIC = b"IPAC-AE1"
_ACTIVATIONS = ("relu", "linear")
_ORDER = ("enc1.w", "enc1.b", "enc2.w", "enc2.b", "dec1.w", "dec1.b", "dec2.w", "dec2.b")


@dataclass
class EncoderConfig:
    embed_dim: int = 32
    hidden_dim: int = 64
    epochs: int = 30
    batch_size: int = 128
    lr: float = 1e-3
    seed: int = 0
    activation: str = "relu"


def _act(x, kind):
    return np.maximum(x, 0.0) if kind == "relu" else x


def _act_grad(pre, g, kind):
    return g * (pre > 0) if kind == "relu" else g


@dataclass
class AutoencoderModel:
    input_dim: int
    hidden_dim: int
    embed_dim: int
    activation: str = "relu"
    params: ParamSet = field(default_factory=ParamSet)
    history: list[float] = field(default_factory=list)

    @classmethod
    def init(cls, input_dim: int, hidden_dim: int, embed_dim: int, activation: str = "relu", seed: int = 0):
        if min(input_dim, hidden_dim, embed_dim) < 1:
            raise ConfigError("autoencoder dimensions must be >= 1")
        if activation not in _ACTIVATIONS:
            raise ConfigError(f"activation must be one of {_ACTIVATIONS}")
        rng = np.random.default_rng(seed)
        m = cls(input_dim, hidden_dim, embed_dim, activation)
        p = m.params
        p.add("enc1.w", glorot(rng, hidden_dim, input_dim))
        p.add("enc1.b", np.zeros(hidden_dim))
        p.add("enc2.w", glorot(rng, embed_dim, hidden_dim))
        p.add("enc2.b", np.zeros(embed_dim))
        p.add("dec1.w", glorot(rng, hidden_dim, embed_dim))
        p.add("dec1.b", np.zeros(hidden_dim))
        p.add("dec2.w", glorot(rng, input_dim, hidden_dim))
        p.add("dec2.b", np.zeros(input_dim))
        return m

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[None]
        if x.ndim != 2 or x.shape[1] != self.input_dim:
            raise ShapeError(f"patch vectors must have length {self.input_dim}, got shape {x.shape}")
        return x

    def forward(self, x):
        p, a = self.params, self.activation
        x = self._check(x)
        pre1 = x @ p["enc1.w"].T + p["enc1.b"]
        h1 = _act(pre1, a)
        z = h1 @ p["enc2.w"].T + p["enc2.b"]
        pre2 = z @ p["dec1.w"].T + p["dec1.b"]
        h2 = _act(pre2, a)
        out = h2 @ p["dec2.w"].T + p["dec2.b"]
        return out, (x, pre1, h1, z, pre2, h2)

    def encode_batch(self, patches) -> np.ndarray:
        p = self.params
        x = self._check(patches)
        h1 = _act(x @ p["enc1.w"].T + p["enc1.b"], self.activation)
        return h1 @ p["enc2.w"].T + p["enc2.b"]

    def loss_and_grad(self, x) -> float:
        """Mean over samples of the squared reconstruction error; accumulates gradients."""
        p, a = self.params, self.activation
        out, (x, pre1, h1, z, pre2, h2) = self.forward(x)
        diff = out - x
        n = x.shape[0]
        loss = float(np.sum(diff * diff) / n)
        d_out = 2.0 * diff / n
        p.accumulate("dec2.w", d_out.T @ h2)
        p.accumulate("dec2.b", d_out.sum(0))
        d_pre2 = _act_grad(pre2, d_out @ p["dec2.w"], a)
        p.accumulate("dec1.w", d_pre2.T @ z)
        p.accumulate("dec1.b", d_pre2.sum(0))
        d_z = d_pre2 @ p["dec1.w"]
        p.accumulate("enc2.w", d_z.T @ h1)
        p.accumulate("enc2.b", d_z.sum(0))
        d_pre1 = _act_grad(pre1, d_z @ p["enc2.w"], a)
        p.accumulate("enc1.w", d_pre1.T @ x)
        p.accumulate("enc1.b", d_pre1.sum(0))
        return loss

    def mse(self, x) -> float:
        x = self._check(x)
        out, _ = self.forward(x)
        return float(np.sum((out - x) ** 2) / x.shape[0])

    # persistence

    def save(self, path: str | Path) -> None:
        code = _ACTIVATIONS.index(self.activation)
        with open(path, "wb") as f:
            f.write(MAGIC)
            f.write(struct.pack("<4I", self.input_dim, self.hidden_dim, self.embed_dim, code))
            for name in _ORDER:
                f.write(np.ascontiguousarray(self.params[name], dtype="<f8").tobytes())

    @classmethod
    def load(cls, path: str | Path) -> "AutoencoderModel":
        buf = Path(path).read_bytes()
        if buf[:8] != MAGIC:
            raise FormatError(f"{path}: not an autoencoder file")
        input_dim, hidden, embed, code = struct.unpack("<4I", buf[8:24])
        m = cls.init(input_dim, hidden, embed, _ACTIVATIONS[code])
        off = 24
        for name in _ORDER:
            v = m.params.values[name]
            nbytes = v.size * 8
            if off + nbytes > len(buf):
                raise FormatError(f"{path}: truncated at block {name}")
            v[...] = np.frombuffer(buf[off : off + nbytes], dtype="<f8").reshape(v.shape)
            off += nbytes
        if off != len(buf):
            raise FormatError(f"{path}: {len(buf) - off} trailing bytes")
        return m


def train_autoencoder(patches, cfg: EncoderConfig | None = None) -> AutoencoderModel:
    """Minibatch Adam on reconstruction MSE; ``model.history`` holds the per-epoch training MSE."""
    cfg = cfg or EncoderConfig()
    x = np.asarray(patches, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ConfigError("train_autoencoder needs a non-empty (n, dim) array of patch vectors")
    if cfg.epochs < 1 or cfg.batch_size < 1:
        raise ConfigError("epochs and batch_size must be >= 1")
    model = AutoencoderModel.init(x.shape[1], cfg.hidden_dim, cfg.embed_dim, cfg.activation, cfg.seed)
    rng = np.random.default_rng(cfg.seed + 1)
    state = AdamState(lr=cfg.lr)
    n = x.shape[0]
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = x[order[start : start + cfg.batch_size]]
            model.params.zero_grad()
            total += model.loss_and_grad(batch) * batch.shape[0]
            adam_step(model.params, state)
        epoch_mse = total / n
        if not np.isfinite(epoch_mse):
            raise ConfigError("autoencoder training diverged (non-finite loss)")
        model.history.append(epoch_mse)
    return model


def encode(m: AutoencoderModel, patch) -> np.ndarray:
    return m.encode_batch(np.asarray(patch, dtype=np.float64).reshape(1, -1))[0]


def reconstruct(m: AutoencoderModel, patch) -> np.ndarray:
    out, _ = m.forward(np.asarray(patch, dtype=np.float64).reshape(1, -1))
    return out[0]
