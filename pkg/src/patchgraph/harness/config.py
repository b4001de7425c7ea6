"""Run configuration: a flat dataclass that round-trips through ``key=value`` text."""
from __future__ import annotations

import dataclasses
import zlib
from dataclasses import dataclass, field, fields
from pathlib import Path

from ..encoder import EncoderConfig
from ..errors import ConfigError
from ..gnn.model import GnnConfig
from ..patching import Connectivity

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def derive_seed(base: int, stage: str) -> int:
    """Stage-specific seed; stable across processes and Python versions."""
    return splitmix64((base & _MASK64) ^ splitmix64(zlib.crc32(stage.encode()))) >> 1


@dataclass
class RunConfig:
    dataset: str = "synth"  # path to a .npz archive, or "synth"
    synth_train: int = 200
    synth_val: int = 100
    synth_test: int = 100
    synth_side: int = 28
    synth_noise: float = 20.0
    patch_size: int = 7
    connectivity: int = 4
    embed_dim: int = 32
    hidden_dim: int = 64
    ae_epochs: int = 30
    ae_batch_size: int = 128
    ae_lr: float = 1e-3
    clusters: int = 8
    kmeans_max_iter: int = 100
    layer_type: str = "edgeconv"
    layers: int = 2
    inner_dim: int = 128
    dropout: float = 0.0
    mlp_depth: int = 4
    epochs: int = 40
    lr: float = 1e-3
    batch_size: int = 32
    seed: int = 0
    out: str = "runs/default"
    record_timing: bool = True

    def validate(self) -> None:
        Connectivity.parse(self.connectivity)
        if self.clusters < 2:
            raise ConfigError("clusters must be >= 2")
        if self.patch_size < 1:
            raise ConfigError("patch_size must be >= 1")
        if self.dataset == "synth" and min(self.synth_train, self.synth_val, self.synth_test) < 2:
            raise ConfigError("synthetic splits need at least 2 images each")
        self.gnn_config().validate()

    def encoder_config(self) -> EncoderConfig:
        return EncoderConfig(
            embed_dim=self.embed_dim, hidden_dim=self.hidden_dim, epochs=self.ae_epochs,
            batch_size=self.ae_batch_size, lr=self.ae_lr, seed=derive_seed(self.seed, "encoder"),
        )

    def gnn_config(self) -> GnnConfig:
        return GnnConfig(
            layer_type=self.layer_type, layers=self.layers, inner_dim=self.inner_dim, dropout=self.dropout,
            mlp_depth=self.mlp_depth, epochs=self.epochs, lr=self.lr, batch_size=self.batch_size,
            seed=derive_seed(self.seed, "gnn"),
        )

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    # ---- key=value text

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            lines.append(f"{f.name}={str(v).lower() if isinstance(v, bool) else v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, base: "RunConfig | None" = None) -> "RunConfig":
        cfg = base or cls()
        changes = {}
        for n, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"config line {n}: expected key=value, got {raw!r}")
            k, v = (s.strip() for s in line.split("=", 1))
            changes[k.replace("-", "_")] = v
        return cfg.update(changes)

    @classmethod
    def from_file(cls, path: str | Path, base: "RunConfig | None" = None) -> "RunConfig":
        return cls.from_text(Path(path).read_text(), base)

    def update(self, changes: dict) -> "RunConfig":
        types = {f.name: f.type for f in fields(self)}
        coerced = {}
        for k, v in changes.items():
            if k not in types:
                raise ConfigError(f"unknown config key {k!r}")
            coerced[k] = _coerce(k, v, types[k])
        return dataclasses.replace(self, **coerced)


def _coerce(key, value, typ):
    if not isinstance(value, str):
        return value
    try:
        if typ in ("int", int):
            return int(value)
        if typ in ("float", float):
            return float(value)
        if typ in ("bool", bool):
            if value.lower() in ("1", "true", "yes", "on"):
                return True
            if value.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {value!r}") from None
    return value


@dataclass
class SweepGrid:
    patch_sizes: list[int]
    clusters: list[int]
    repetitions: int = 1
    base: RunConfig = field(default_factory=RunConfig)

    def validate(self) -> None:
        if not self.patch_sizes or not self.clusters or self.repetitions < 1:
            raise ConfigError("sweep axes must be non-empty and repetitions >= 1")
        for p in self.patch_sizes:
            for c in self.clusters:
                self.base.replace(patch_size=p, clusters=c).validate()

    def cells(self):
        """(index, patch_size, clusters, rep) in row-major (patch, clusters, rep) order."""
        idx = 0
        for p in self.patch_sizes:
            for c in self.clusters:
                for r in range(self.repetitions):
                    yield idx, p, c, r
                    idx += 1
