"""Pure numpy implementation of the Sinkhorn reductions (fallback backend)."""

import numpy as np


def _masked(C, eps, shift_rows=None, shift_cols=None):
    A = -C / eps
    if shift_rows is not None:
        A = A + shift_rows[:, None]
    if shift_cols is not None:
        A = A + shift_cols[None, :]
    # infinite costs are structural zeros; also guard inf - inf
    A[~np.isfinite(C)] = -np.inf
    A[np.isnan(A)] = -np.inf
    return A


def _lse(A, axis):
    mx = np.max(A, axis=axis, keepdims=True)
    safe = np.where(np.isfinite(mx), mx, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(A - safe), axis=axis)) + np.squeeze(safe, axis=axis)
    return out


def softmin_rows(C, g, eps):
    """out[i] = log sum_j exp(g[j] - C[i, j] / eps) over finite C[i, j]."""
    C = np.asarray(C, dtype=float)
    if C.shape[1] == 0:
        return np.full(C.shape[0], -np.inf)
    return _lse(_masked(C, eps, shift_cols=np.asarray(g, float)), axis=1)


def softmin_cols(C, f, eps):
    """out[j] = log sum_i exp(f[i] - C[i, j] / eps) over finite C[i, j]."""
    C = np.asarray(C, dtype=float)
    if C.shape[0] == 0:
        return np.full(C.shape[1], -np.inf)
    return _lse(_masked(C, eps, shift_rows=np.asarray(f, float)), axis=0)


def log_plan(C, f, g, eps):
    """P[i, j] = exp(f[i] + g[j] - C[i, j] / eps), zero where C is infinite."""
    C = np.asarray(C, dtype=float)
    A = _masked(C, eps, np.asarray(f, float), np.asarray(g, float))
    return np.exp(A)
