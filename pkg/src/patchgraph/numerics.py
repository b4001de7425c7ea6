"""Dense float64 numerics: products, softmax, cross-entropy, Adam, gradient checking.

Matrices are plain ``numpy.ndarray`` values of dtype float64. Every learnable
module in the package stores its weights in a :class:`ParamSet` and fills the
gradients itself with an explicit backward pass.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

from .errors import DomainError, NumericError, ShapeError, StateError

PROB_FLOOR = 1e-12


def as_matrix(x) -> np.ndarray:
    m = np.asarray(x, dtype=np.float64)
    if m.ndim == 1:
        m = m[None, :]
    if m.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {m.shape}")
    return m


def matmul(a, b) -> np.ndarray:
    a, b = as_matrix(a), as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    out = a @ b
    if not np.all(np.isfinite(out)):
        raise NumericError("matmul produced non-finite values")
    return out


def softmax_rows(m) -> np.ndarray:
    """Row-wise softmax over the last axis, stabilised by subtracting the row max."""
    m = np.asarray(m, dtype=np.float64)
    shifted = m - m.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _check_labels(probs: np.ndarray, labels) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if probs.ndim != 2 or probs.shape[0] != labels.shape[0]:
        raise ShapeError(f"probs {probs.shape} vs {labels.shape[0]} labels")
    if labels.size and (labels.min() < 0 or labels.max() >= probs.shape[1]):
        raise DomainError(f"label out of range [0, {probs.shape[1]})")
    return labels


def cross_entropy(probs, labels) -> float:
    """Mean negative log-likelihood of the true class, probabilities floored at 1e-12."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = _check_labels(probs, labels)
    picked = probs[np.arange(labels.size), labels]
    return float(np.mean(-np.log(np.maximum(picked, PROB_FLOOR))))


def softmax_cross_entropy_grad(probs, labels) -> np.ndarray:
    """Gradient of the mean cross-entropy with respect to the pre-softmax logits."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = _check_labels(probs, labels)
    g = probs.copy()
    g[np.arange(labels.size), labels] -= 1.0
    return g / labels.size


@dataclass
class ParamSet:
    """Named parameter matrices with matching gradient buffers."""

    values: dict[str, np.ndarray] = field(default_factory=dict)
    grads: dict[str, np.ndarray | None] = field(default_factory=dict)

    def add(self, name: str, value) -> np.ndarray:
        if name in self.values:
            raise StateError(f"duplicate parameter name {name!r}")
        v = np.array(value, dtype=np.float64)
        self.values[name] = v
        self.grads[name] = None
        return v

    def __getitem__(self, name: str) -> np.ndarray:
        return self.values[name]

    def __contains__(self, name: str) -> bool:
        return name in self.values

    def __iter__(self) -> Iterator[str]:
        return iter(self.values)

    def __len__(self) -> int:
        return len(self.values)

    def names(self) -> list[str]:
        return list(self.values)

    def zero_grad(self) -> None:
        for k, v in self.values.items():
            self.grads[k] = np.zeros_like(v)

    def accumulate(self, name: str, g) -> None:
        g = np.asarray(g, dtype=np.float64)
        if g.shape != self.values[name].shape:
            raise ShapeError(f"gradient for {name} has shape {g.shape}, expected {self.values[name].shape}")
        cur = self.grads[name]
        self.grads[name] = g.copy() if cur is None else cur + g

    def copy(self) -> "ParamSet":
        out = ParamSet()
        for k, v in self.values.items():
            out.values[k] = v.copy()
            g = self.grads[k]
            out.grads[k] = None if g is None else g.copy()
        return out

    def num_scalars(self) -> int:
        return int(sum(v.size for v in self.values.values()))


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: ParamSet, state: AdamState) -> ParamSet:
    """Apply one Adam update in place and zero the gradients."""
    missing = [k for k in params if params.grads[k] is None]
    if missing:
        raise StateError(f"no gradient populated for {missing}")
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t
    for name in params:
        g = params.grads[name]
        if name not in state.m:
            state.m[name] = np.zeros_like(g)
            state.v[name] = np.zeros_like(g)
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        params.values[name] -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        params.grads[name] = np.zeros_like(g)
    return params


def finite_difference_check(
    loss_fn: Callable[[ParamSet], float],
    params: ParamSet,
    h: float = 1e-5,
) -> float:
    """Worst relative error between stored analytic gradients and central differences.

    ``params.grads`` must already hold the analytic gradient of ``loss_fn`` at
    the current values. Every scalar entry is perturbed in turn by ``±h`` and
    restored afterwards. The relative error of an entry is
    ``|a - n| / max(|a|, |n|, 1e-8)``.
    """
    if h <= 0:
        raise DomainError("step h must be positive")
    worst = 0.0
    for name in params:
        analytic = params.grads[name]
        if analytic is None:
            raise StateError(f"no analytic gradient for {name}")
        value = params.values[name]
        flat = value.reshape(-1)
        aflat = np.asarray(analytic).reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + h
            fp = float(loss_fn(params))
            flat[idx] = orig - h
            fm = float(loss_fn(params))
            flat[idx] = orig
            if not (np.isfinite(fp) and np.isfinite(fm)):
                raise NumericError(f"non-finite loss while perturbing {name}[{idx}]")
            numeric = (fp - fm) / (2.0 * h)
            a = float(aflat[idx])
            denom = max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, abs(a - numeric) / denom)
    return worst


def glorot(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))
