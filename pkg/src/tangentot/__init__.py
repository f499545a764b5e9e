"""Linearized optimal transport for W2, HK and SHK metrics on discrete measures."""

from .errors import (ConvergenceError, CutLocusError, InvalidInputError, InvalidPlanError,
                     TangentOTError, UnsupportedError)
from .manifold import Euclidean, Hyperbolic, Manifold, Sphere
from .measure import DiscreteMeasure, GridSpec, RasterImage
from .solver import DualPotentials, SolverConfig, TransportPlan

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError", "CutLocusError", "InvalidInputError", "InvalidPlanError",
    "TangentOTError", "UnsupportedError", "Euclidean", "Hyperbolic", "Manifold", "Sphere",
    "DiscreteMeasure", "GridSpec", "RasterImage", "DualPotentials", "SolverConfig",
    "TransportPlan",
]
