import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import matmul_loops
from patchgraph.errors import DomainError, ShapeError, StateError
from patchgraph.numerics import (
    AdamState,
    ParamSet,
    adam_step,
    cross_entropy,
    finite_difference_check,
    matmul,
    softmax_cross_entropy_grad,
    softmax_rows,
)

finite = st.floats(-10, 10, allow_nan=False)


def test_matmul_identity():
    m = np.arange(9.0).reshape(3, 3)
    assert np.array_equal(matmul(np.eye(3), m), m)
    assert matmul([[2.0]], [[3.0]])[0, 0] == 6.0


def test_matmul_matches_triple_loop():
    rng = np.random.default_rng(1)
    a, b = rng.normal(size=(5, 4)), rng.normal(size=(4, 3))
    assert np.max(np.abs(matmul(a, b) - matmul_loops(a, b))) < 1e-12


def test_matmul_shape_error():
    with pytest.raises(ShapeError):
        matmul(np.ones((2, 3)), np.ones((2, 3)))


@settings(max_examples=50)
@given(st.integers(1, 4), st.integers(1, 4), st.integers(1, 4), st.integers(1, 4), st.integers(0, 2**31))
def test_matmul_associative(n, k, m, p, seed):
    rng = np.random.default_rng(seed)
    a, b, c = rng.normal(size=(n, k)), rng.normal(size=(k, m)), rng.normal(size=(m, p))
    assert np.allclose(matmul(matmul(a, b), c), matmul(a, matmul(b, c)), atol=1e-9, rtol=0)


def test_softmax_examples():
    assert np.allclose(softmax_rows([[0.0, 0.0]]), [[0.5, 0.5]])
    s = softmax_rows([[1000.0, 1000.0]])
    assert np.all(np.isfinite(s)) and np.allclose(s, [[0.5, 0.5]])
    # exp(ln 1) : exp(ln 3) = 1 : 3
    assert np.allclose(softmax_rows([[math.log(1), math.log(3)]]), [[0.25, 0.75]], atol=1e-15)


@given(arrays(np.float64, (3, 4), elements=finite), st.floats(-50, 50))
def test_softmax_rows_simplex_and_shift_invariant(m, c):
    s = softmax_rows(m)
    assert np.all(s >= 0)
    assert np.allclose(s.sum(axis=1), 1.0, atol=1e-9)
    assert np.max(np.abs(softmax_rows(m + c) - s)) < 1e-12


def test_cross_entropy_examples():
    assert cross_entropy([[1.0, 0.0]], [0]) < 1e-11
    assert cross_entropy([[0.5, 0.5]], [1]) == pytest.approx(math.log(2), abs=1e-15)
    probs = [[0.2, 0.8], [0.9, 0.1]]
    per_row = [-math.log(0.8), -math.log(0.9)]
    assert cross_entropy(probs, [1, 0]) == pytest.approx(sum(per_row) / 2, abs=1e-15)


def test_cross_entropy_clamps_zero_probability():
    assert cross_entropy([[1.0, 0.0]], [1]) == pytest.approx(-math.log(1e-12))


def test_cross_entropy_label_out_of_range():
    with pytest.raises(DomainError):
        cross_entropy([[0.5, 0.5]], [2])


@given(arrays(np.float64, (4, 3), elements=finite), st.lists(st.integers(0, 2), min_size=4, max_size=4))
def test_cross_entropy_nonnegative(logits, labels):
    assert cross_entropy(softmax_rows(logits), labels) >= 0.0


def test_softmax_cross_entropy_grad_by_differences():
    rng = np.random.default_rng(0)
    logits = rng.normal(size=(3, 4))
    labels = [0, 3, 1]
    g = softmax_cross_entropy_grad(softmax_rows(logits), labels)
    h = 1e-6
    for i in range(3):
        for j in range(4):
            e = np.zeros_like(logits)
            e[i, j] = h
            num = (cross_entropy(softmax_rows(logits + e), labels) - cross_entropy(softmax_rows(logits - e), labels)) / (2 * h)
            assert abs(num - g[i, j]) < 1e-8


def _scalar_params(v=0.0):
    p = ParamSet()
    p.add("w", [[v]])
    return p


def test_adam_zero_gradient_leaves_params():
    p = _scalar_params(1.5)
    p.zero_grad()
    adam_step(p, AdamState(lr=0.1))
    assert p["w"][0, 0] == 1.5


def test_adam_first_step_magnitude_is_lr():
    # m_hat = g and v_hat = g^2 after bias correction, so the step is lr * g / (|g| + eps)
    p = _scalar_params(0.0)
    p.grads["w"] = np.array([[1.0]])
    adam_step(p, AdamState(lr=0.1))
    assert p["w"][0, 0] == pytest.approx(-0.1 / (1 + 1e-8), abs=1e-15)
    assert np.all(p.grads["w"] == 0)


def test_adam_identical_params_identical_updates():
    p = ParamSet()
    p.add("a", [[0.3, -0.2]])
    p.add("b", [[0.3, -0.2]])
    st_ = AdamState()
    for k in range(5):
        g = np.array([[0.1 * k, -1.0]])
        p.grads["a"], p.grads["b"] = g.copy(), g.copy()
        adam_step(p, st_)
    assert np.array_equal(p["a"], p["b"])


def test_adam_missing_gradient():
    with pytest.raises(StateError):
        adam_step(_scalar_params(), AdamState())


def test_paramset_duplicate_name():
    p = _scalar_params()
    with pytest.raises(StateError):
        p.add("w", [[1.0]])


def test_fd_check_quadratic():
    rng = np.random.default_rng(0)
    p = ParamSet()
    p.add("W", rng.normal(size=(3, 4)))
    p.grads["W"] = p["W"].copy()
    err = finite_difference_check(lambda q: 0.5 * float(np.sum(q["W"] ** 2)), p)
    assert err < 1e-8


def test_fd_check_softmax_direction():
    rng = np.random.default_rng(2)
    p = ParamSet()
    p.add("W", rng.normal(size=(2, 3)))
    direction = rng.normal(size=(2, 3))

    def loss(q):
        return float(np.sum(softmax_rows(q["W"]) * direction))

    s = softmax_rows(p["W"])
    # d/dW of sum(s * r) = s * (r - sum_k s_k r_k) row-wise
    p.grads["W"] = s * (direction - np.sum(s * direction, axis=1, keepdims=True))
    assert finite_difference_check(loss, p) < 1e-6


def test_fd_check_detects_corrupted_gradient():
    rng = np.random.default_rng(0)
    p = ParamSet()
    p.add("W", rng.normal(size=(3, 3)))
    p.grads["W"] = 2.0 * p["W"]
    assert finite_difference_check(lambda q: 0.5 * float(np.sum(q["W"] ** 2)), p) > 0.3


def test_fd_check_restores_values():
    p = ParamSet()
    p.add("W", [[1.0, 2.0]])
    p.grads["W"] = np.array([[1.0, 2.0]])
    before = p["W"].copy()
    finite_difference_check(lambda q: 0.5 * float(np.sum(q["W"] ** 2)), p)
    assert np.array_equal(p["W"], before)
