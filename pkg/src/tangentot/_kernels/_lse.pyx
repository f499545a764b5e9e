# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled log-sum-exp reductions for the log-domain Sinkhorn iterations.

Infinite cost entries are skipped entirely, which implements the
convention "+inf cost == zero kernel entry" without producing NaNs when
a potential is itself infinite.
"""

import numpy as np
from libc.math cimport exp, log, INFINITY, isinf


def softmin_rows(const double[:, ::1] C, const double[::1] g, double eps):
    """out[i] = log sum_j exp(g[j] - C[i, j] / eps) over finite C[i, j]."""
    cdef Py_ssize_t n = C.shape[0], m = C.shape[1], i, j
    cdef double inv = 1.0 / eps, mx, s, a
    out = np.empty(n)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            mx = -INFINITY
            for j in range(m):
                if not isinf(C[i, j]):
                    a = g[j] - C[i, j] * inv
                    if a > mx:
                        mx = a
            if isinf(mx):
                o[i] = mx
                continue
            s = 0.0
            for j in range(m):
                if not isinf(C[i, j]):
                    s += exp(g[j] - C[i, j] * inv - mx)
            o[i] = mx + log(s)
    return out


def softmin_cols(const double[:, ::1] C, const double[::1] f, double eps):
    """out[j] = log sum_i exp(f[i] - C[i, j] / eps) over finite C[i, j]."""
    cdef Py_ssize_t n = C.shape[0], m = C.shape[1], i, j
    cdef double inv = 1.0 / eps, a, fi
    out = np.empty(m)
    mxa = np.full(m, -INFINITY)
    sa = np.zeros(m)
    cdef double[::1] o = out
    cdef double[::1] mx = mxa
    cdef double[::1] s = sa
    with nogil:
        # row-major sweeps keep memory access contiguous
        for i in range(n):
            fi = f[i]
            if isinf(fi) and fi < 0:
                continue
            for j in range(m):
                if not isinf(C[i, j]):
                    a = fi - C[i, j] * inv
                    if a > mx[j]:
                        mx[j] = a
        for i in range(n):
            fi = f[i]
            if isinf(fi) and fi < 0:
                continue
            for j in range(m):
                if not isinf(C[i, j]) and not isinf(mx[j]):
                    s[j] += exp(fi - C[i, j] * inv - mx[j])
        for j in range(m):
            if isinf(mx[j]):
                o[j] = mx[j]
            else:
                o[j] = mx[j] + log(s[j])
    return out


def log_plan(const double[:, ::1] C, const double[::1] f, const double[::1] g, double eps):
    """P[i, j] = exp(f[i] + g[j] - C[i, j] / eps), zero where C is infinite."""
    cdef Py_ssize_t n = C.shape[0], m = C.shape[1], i, j
    cdef double inv = 1.0 / eps
    out = np.zeros((n, m))
    cdef double[:, ::1] P = out
    with nogil:
        for i in range(n):
            if isinf(f[i]) and f[i] < 0:
                continue
            for j in range(m):
                if not isinf(C[i, j]) and not (isinf(g[j]) and g[j] < 0):
                    P[i, j] = exp(f[i] + g[j] - C[i, j] * inv)
    return out
