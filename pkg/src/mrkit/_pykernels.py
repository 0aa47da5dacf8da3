"""Pure-Python implementations of the hot kernels.

Used when the compiled ``_ckernels`` extension is unavailable, and as the
reference the compiled build is tested against.
"""
from __future__ import annotations

import math

import numpy as np

BACKEND = "python"


def _iou(s1: float, e1: float, s2: float, e2: float) -> float:
    inter = min(e1, e2) - max(s1, s2)
    if inter < 0.0:
        inter = 0.0
    union = (e1 - s1) + (e2 - s2) - inter
    if union <= 0.0:
        return 1.0 if (s1 == s2 and e1 == e2) else 0.0
    return inter / union


def _giou(s1: float, e1: float, s2: float, e2: float) -> float:
    # hull minus union is exactly the gap between disjoint spans, 0 otherwise
    gap = max(s1, s2) - min(e1, e2)
    if gap <= 0.0:
        return _iou(s1, e1, s2, e2)
    hull = max(e1, e2) - min(s1, s2)
    return _iou(s1, e1, s2, e2) - gap / hull


def iou_matrix(s1, e1, s2, e2) -> np.ndarray:
    n, m = len(s1), len(s2)
    out = np.empty((n, m), dtype=np.float64)
    for i in range(n):
        a, b = float(s1[i]), float(e1[i])
        for j in range(m):
            out[i, j] = _iou(a, b, float(s2[j]), float(e2[j]))
    return out


def giou_matrix(s1, e1, s2, e2) -> np.ndarray:
    n, m = len(s1), len(s2)
    out = np.empty((n, m), dtype=np.float64)
    for i in range(n):
        a, b = float(s1[i]), float(e1[i])
        for j in range(m):
            out[i, j] = _giou(a, b, float(s2[j]), float(e2[j]))
    return out


def linear_sum_assignment(cost) -> tuple[np.ndarray, np.ndarray]:
    """Minimum-cost assignment of a rectangular matrix.

    Shortest-augmenting-path Hungarian method with row/column potentials.
    Returns ``(rows, cols)`` with ``rows`` ascending; ``min(n, m)`` pairs.
    """
    c = np.asarray(cost, dtype=np.float64)
    n, m = c.shape
    if n == 0 or m == 0:
        return np.zeros(0, dtype=np.intp), np.zeros(0, dtype=np.intp)
    transposed = n > m
    if transposed:
        c = c.T
        n, m = m, n
    a = c.tolist()
    inf = math.inf
    u = [0.0] * (n + 1)
    v = [0.0] * (m + 1)
    p = [0] * (m + 1)  # p[j]: row (1-based) assigned to column j
    way = [0] * (m + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [inf] * (m + 1)
        used = [False] * (m + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            row = a[i0 - 1]
            ui0 = u[i0]
            delta = inf
            j1 = 0
            for j in range(1, m + 1):
                if not used[j]:
                    cur = row[j - 1] - ui0 - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(m + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    rows, cols = [], []
    for j in range(1, m + 1):
        if p[j]:
            rows.append(p[j] - 1)
            cols.append(j - 1)
    rows_a = np.asarray(rows, dtype=np.intp)
    cols_a = np.asarray(cols, dtype=np.intp)
    if transposed:
        rows_a, cols_a = cols_a, rows_a
    order = np.argsort(rows_a, kind="stable")
    return rows_a[order], cols_a[order]


def greedy_hits(iou, threshold: float) -> np.ndarray:
    """Greedy one-to-one matching of ranked predictions (rows) to gts (cols).

    Each prediction, in row order, takes the unmatched gt with the highest
    IoU >= ``threshold`` (ties to the lowest gt index). Returns a 0/1 array.
    """
    iou = np.asarray(iou, dtype=np.float64)
    n, m = iou.shape
    hits = np.zeros(n, dtype=np.int8)
    taken = [False] * m
    for i in range(n):
        best, best_j = -1.0, -1
        for j in range(m):
            if not taken[j]:
                x = iou[i, j]
                if x >= threshold and x > best:
                    best, best_j = x, j
        if best_j >= 0:
            taken[best_j] = True
            hits[i] = 1
    return hits
