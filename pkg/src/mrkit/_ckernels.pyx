# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_pykernels`` (same semantics)."""
import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()

BACKEND = "cython"


cdef inline double _iou(double s1, double e1, double s2, double e2) noexcept nogil:
    cdef double inter = (e1 if e1 < e2 else e2) - (s1 if s1 > s2 else s2)
    if inter < 0.0:
        inter = 0.0
    cdef double union_ = (e1 - s1) + (e2 - s2) - inter
    if union_ <= 0.0:
        return 1.0 if (s1 == s2 and e1 == e2) else 0.0
    return inter / union_


cdef inline double _giou(double s1, double e1, double s2, double e2) noexcept nogil:
    cdef double gap = (s1 if s1 > s2 else s2) - (e1 if e1 < e2 else e2)
    cdef double hull
    if gap <= 0.0:
        return _iou(s1, e1, s2, e2)
    hull = (e1 if e1 > e2 else e2) - (s1 if s1 < s2 else s2)
    return _iou(s1, e1, s2, e2) - gap / hull


def iou_matrix(s1, e1, s2, e2):
    cdef const double[:] a0 = np.ascontiguousarray(s1, dtype=np.float64)
    cdef const double[:] a1 = np.ascontiguousarray(e1, dtype=np.float64)
    cdef const double[:] b0 = np.ascontiguousarray(s2, dtype=np.float64)
    cdef const double[:] b1 = np.ascontiguousarray(e2, dtype=np.float64)
    cdef Py_ssize_t n = a0.shape[0], m = b0.shape[0], i, j
    out = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] o = out
    with nogil:
        for i in range(n):
            for j in range(m):
                o[i, j] = _iou(a0[i], a1[i], b0[j], b1[j])
    return out


def giou_matrix(s1, e1, s2, e2):
    cdef const double[:] a0 = np.ascontiguousarray(s1, dtype=np.float64)
    cdef const double[:] a1 = np.ascontiguousarray(e1, dtype=np.float64)
    cdef const double[:] b0 = np.ascontiguousarray(s2, dtype=np.float64)
    cdef const double[:] b1 = np.ascontiguousarray(e2, dtype=np.float64)
    cdef Py_ssize_t n = a0.shape[0], m = b0.shape[0], i, j
    out = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] o = out
    with nogil:
        for i in range(n):
            for j in range(m):
                o[i, j] = _giou(a0[i], a1[i], b0[j], b1[j])
    return out


def linear_sum_assignment(cost):
    c_in = np.asarray(cost, dtype=np.float64)
    cdef Py_ssize_t n = c_in.shape[0], m = c_in.shape[1]
    if n == 0 or m == 0:
        return np.zeros(0, dtype=np.intp), np.zeros(0, dtype=np.intp)
    cdef bint transposed = n > m
    if transposed:
        c_in = c_in.T
        n, m = m, n
    cdef const double[:, ::1] a = np.ascontiguousarray(c_in)
    cdef double[::1] u = np.zeros(n + 1)
    cdef double[::1] v = np.zeros(m + 1)
    cdef double[::1] minv = np.empty(m + 1)
    cdef Py_ssize_t[::1] p = np.zeros(m + 1, dtype=np.intp)
    cdef Py_ssize_t[::1] way = np.zeros(m + 1, dtype=np.intp)
    cdef unsigned char[::1] used = np.zeros(m + 1, dtype=np.uint8)
    cdef Py_ssize_t i, j, j0, j1, i0
    cdef double delta, cur, ui0
    with nogil:
        for i in range(1, n + 1):
            p[0] = i
            j0 = 0
            for j in range(m + 1):
                minv[j] = INFINITY
                used[j] = 0
            while True:
                used[j0] = 1
                i0 = p[j0]
                ui0 = u[i0]
                delta = INFINITY
                j1 = 0
                for j in range(1, m + 1):
                    if not used[j]:
                        cur = a[i0 - 1, j - 1] - ui0 - v[j]
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


def greedy_hits(iou, double threshold):
    cdef const double[:, ::1] x = np.ascontiguousarray(iou, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0], m = x.shape[1], i, j, best_j
    cdef double best
    hits = np.zeros(n, dtype=np.int8)
    cdef signed char[::1] h = hits
    cdef unsigned char[::1] taken = np.zeros(m, dtype=np.uint8)
    with nogil:
        for i in range(n):
            best = -1.0
            best_j = -1
            for j in range(m):
                if not taken[j] and x[i, j] >= threshold and x[i, j] > best:
                    best = x[i, j]
                    best_j = j
            if best_j >= 0:
                taken[best_j] = 1
                h[i] = 1
    return hits
