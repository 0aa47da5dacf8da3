"""Small dense-matrix helpers shared by the rest of the package.

Matrices are plain 2-D ``numpy.ndarray`` objects of dtype float64 (row-major).
Every function returns a fresh array and never mutates its input.
"""
from __future__ import annotations

import numpy as np

SIGMOID_CLAMP = 500.0


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    """Coerce ``m`` to a C-contiguous 2-D float64 array."""
    a = np.ascontiguousarray(m, dtype=np.float64)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {a.shape}")
    return a


def matmul(a, b) -> np.ndarray:
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ValueError(
            f"cannot multiply {a.shape[0]}x{a.shape[1]} by {b.shape[0]}x{b.shape[1]}"
        )
    return a @ b


def softmax_rows(m) -> np.ndarray:
    """Row-wise softmax with per-row max subtraction."""
    m = as_matrix(m)
    z = m - m.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def sigmoid(m) -> np.ndarray:
    x = np.clip(np.asarray(m, dtype=np.float64), -SIGMOID_CLAMP, SIGMOID_CLAMP)
    return 1.0 / (1.0 + np.exp(-x))


def l2_normalize_rows(m) -> np.ndarray:
    m = as_matrix(m)
    norms = np.sqrt(np.einsum("ij,ij->i", m, m))
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ValueError(f"row {int(zero[0])} has zero norm (degenerate embedding)")
    return m / norms[:, None]


def layer_norm(m, gain=None, bias=None, eps: float = 1e-5) -> np.ndarray:
    """Row-wise layer normalisation (population variance)."""
    m = as_matrix(m)
    mu = m.mean(axis=1, keepdims=True)
    var = ((m - mu) ** 2).mean(axis=1, keepdims=True)
    out = (m - mu) / np.sqrt(var + eps)
    if gain is not None:
        out = out * np.asarray(gain, dtype=np.float64).reshape(1, -1)
    if bias is not None:
        out = out + np.asarray(bias, dtype=np.float64).reshape(1, -1)
    return out
