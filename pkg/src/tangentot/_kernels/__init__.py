"""Backend selection for the Sinkhorn reductions.

The compiled extension ``_lse`` is used when it was built; otherwise the
numpy implementation in ``_pylse`` is used. Setting the environment
variable ``TANGENTOT_PURE_PYTHON=1`` forces the fallback.
"""

import os

import numpy as np

from . import _pylse as python_backend

try:
    from . import _lse as compiled_backend
except ImportError:  # extension not built
    compiled_backend = None

if compiled_backend is not None and os.environ.get("TANGENTOT_PURE_PYTHON", "") in ("", "0"):
    _impl = compiled_backend
    BACKEND = "cython"
else:
    _impl = python_backend
    BACKEND = "python"


def softmin_rows(C, g, eps):
    return _impl.softmin_rows(np.ascontiguousarray(C, dtype=float),
                              np.ascontiguousarray(g, dtype=float), float(eps))


def softmin_cols(C, f, eps):
    return _impl.softmin_cols(np.ascontiguousarray(C, dtype=float),
                              np.ascontiguousarray(f, dtype=float), float(eps))


def log_plan(C, f, g, eps):
    return _impl.log_plan(np.ascontiguousarray(C, dtype=float),
                          np.ascontiguousarray(f, dtype=float),
                          np.ascontiguousarray(g, dtype=float), float(eps))


__all__ = ["BACKEND", "softmin_rows", "softmin_cols", "log_plan",
           "python_backend", "compiled_backend"]
