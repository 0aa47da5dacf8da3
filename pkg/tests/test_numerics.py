import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mrkit.numerics import l2_normalize_rows, matmul, sigmoid, softmax_rows

from oracles import naive_matmul

finite = st.floats(-1e3, 1e3, allow_nan=False)


def test_matmul_identity_and_small():
    m = np.arange(9.0).reshape(3, 3)
    assert np.array_equal(matmul(np.eye(3), m), m)
    assert matmul([[1, 2], [3, 4]], [[1], [1]]).tolist() == [[3.0], [7.0]]
    assert not matmul(np.zeros((2, 3)), m).any()


def test_matmul_shape_error_names_both_shapes():
    with pytest.raises(ValueError, match=r"2x3.*2x2"):
        matmul(np.ones((2, 3)), np.ones((2, 2)))


def test_matmul_matches_triple_loop(rng):
    for _ in range(100):
        a, b = rng.normal(size=(5, 5)), rng.normal(size=(5, 5))
        assert np.allclose(matmul(a, b), naive_matmul(a.tolist(), b.tolist()), atol=1e-12, rtol=0)


def test_softmax_examples():
    assert np.allclose(softmax_rows([[0, 0, 0]]), [[1 / 3] * 3], atol=1e-15)
    assert softmax_rows([[1000, 1000]]).tolist() == [[0.5, 0.5]]
    assert np.allclose(softmax_rows([[0, math.log(3)]]), [[0.25, 0.75]], atol=1e-15)


@given(arrays(np.float64, (3, 4), elements=finite), finite)
def test_softmax_shift_invariance_and_sums(m, c):
    a = softmax_rows(m)
    assert np.allclose(a.sum(axis=1), 1.0, atol=1e-12)
    assert np.allclose(softmax_rows(m + c), a, atol=1e-12, rtol=0)


def test_sigmoid_examples():
    assert sigmoid(0.0) == 0.5
    assert sigmoid(50.0) >= 1 - 1e-12
    assert sigmoid(math.log(3)) == pytest.approx(0.75, abs=1e-15)
    assert np.isfinite(sigmoid(np.array([-1e6, 1e6]))).all()


def test_l2_normalize():
    assert np.allclose(l2_normalize_rows([[3, 4]]), [[0.6, 0.8]], atol=1e-15)
    u = np.array([[0.6, 0.8]])
    assert np.allclose(l2_normalize_rows(u), u, atol=1e-15)
    with pytest.raises(ValueError, match="row 1"):
        l2_normalize_rows([[1, 0], [0, 0]])


@settings(max_examples=50)
@given(arrays(np.float64, (4, 3), elements=st.floats(0.1, 100)))
def test_l2_normalize_idempotent(m):
    once = l2_normalize_rows(m)
    assert np.allclose(np.linalg.norm(once, axis=1), 1.0, atol=1e-12)
    assert np.allclose(l2_normalize_rows(once), once, atol=1e-12, rtol=0)
