"""Logarithmic and exponential maps for W2, HK and SHK on discrete measures.

An HK tangent at ``mu0`` is a triple ``(v, alpha, singular)``: a velocity
per atom, a growth rate per atom and a singular measure (mass created at
distance >= kappa*pi/2 from ``mu0``). Exp moves atom ``x`` to

    T(x) = exp_x(kappa * atan2(|v|/kappa, 1 + alpha/2) * v/|v|)

and multiplies its mass by ``u^2 = (1 + alpha/2)^2 + |v|^2/kappa^2``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidInputError, InvalidPlanError
from .measure import DiscreteMeasure
from .solver import DualPotentials, TransportPlan

TAN_GUARD = 1e-9
ALPHA_FLOOR_TOL = 1e-12


# ---------------------------------------------------------------------------
# tangent types

def _check_field(ref: DiscreteMeasure, v, name="v"):
    v = np.asarray(v, dtype=float)
    if v.shape != ref.points.shape:
        raise InvalidInputError(f"{name} must have shape {ref.points.shape}, got {v.shape}")
    return v


@dataclass(frozen=True, eq=False)
class W2Tangent:
    """Velocity field ``v`` (one ambient vector per reference atom)."""

    reference: DiscreteMeasure
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "v", _check_field(self.reference, self.v))

    def combine(self, coef: float, other: "W2Tangent" | None = None, coef2: float = 0.0):
        v = coef * self.v + (coef2 * other.v if other is not None else 0.0)
        return W2Tangent(self.reference, v)


@dataclass(frozen=True, eq=False)
class _GrowthTangent:
    reference: DiscreteMeasure
    v: np.ndarray
    alpha: np.ndarray
    singular: DiscreteMeasure | None = None

    def __post_init__(self):
        object.__setattr__(self, "v", _check_field(self.reference, self.v))
        a = np.asarray(self.alpha, dtype=float).reshape(-1)
        if a.shape != (len(self.reference),):
            raise InvalidInputError("alpha must have one entry per reference atom")
        object.__setattr__(self, "alpha", a)
        sing = self.singular
        if sing is None:
            sing = DiscreteMeasure.empty(self.reference.manifold)
        elif sing.manifold != self.reference.manifold:
            raise InvalidInputError("singular part lives on a different manifold")
        object.__setattr__(self, "singular", sing)

    @property
    def singular_mass(self) -> float:
        return self.singular.total_mass

    def combine(self, coef: float, other=None, coef2: float = 0.0):
        """Linear combination ``coef*self + coef2*other`` (singular parts must be empty)."""
        if self.singular_mass > 0 or (other is not None and other.singular_mass > 0):
            raise InvalidInputError("linear combinations need empty singular parts")
        v = coef * self.v + (coef2 * other.v if other is not None else 0.0)
        a = coef * self.alpha + (coef2 * other.alpha if other is not None else 0.0)
        return replace(self, v=v, alpha=a, singular=None)


@dataclass(frozen=True, eq=False)
class HkTangent(_GrowthTangent):
    """HK tangent triple ``(v, alpha, singular)`` anchored at ``reference``."""

    def is_feasible(self, tol: float = ALPHA_FLOOR_TOL) -> bool:
        return bool(np.all(self.alpha >= -2.0 - tol))


@dataclass(frozen=True, eq=False)
class ShkTangent(_GrowthTangent):
    """SHK tangent; ``s_prime`` is the slope s'(0) used to build it."""

    s_prime: float = 1.0


def zero_tangent(reference: DiscreteMeasure, metric: str = "hk"):
    v = np.zeros_like(reference.points)
    if metric == "w2":
        return W2Tangent(reference, v)
    cls = ShkTangent if metric == "shk" else HkTangent
    return cls(reference, v, np.zeros(len(reference)))


# ---------------------------------------------------------------------------
# helpers

def _tanc(x):
    """tan(x)/x with its removable singularity at 0."""
    x = np.asarray(x, float)
    small = np.abs(x) < 1e-4
    xs = np.where(small, 1.0, x)
    return np.where(small, 1.0 + x * x / 3.0 + 2.0 * x ** 4 / 15.0, np.tan(xs) / xs)


def _xsin(x):
    """x/sin(x), series below 1e-4."""
    x = float(x)
    if abs(x) < 1e-4:
        return 1.0 + x * x / 6.0 + 7.0 * x ** 4 / 360.0
    return x / np.sin(x)


def _plan_parts(mu0, plan):
    if not isinstance(plan, TransportPlan):
        raise InvalidInputError("expected a TransportPlan")
    if len(plan.source) != len(mu0):
        raise InvalidInputError("plan rows do not match the reference measure")
    return plan.matrix, plan.target


def _sq_norms(m, X, V):
    return np.maximum(m.inner(X, V, V), 0.0)


# ---------------------------------------------------------------------------
# W2

def log_w2(mu0: DiscreteMeasure, plan: TransportPlan) -> W2Tangent:
    """Barycentric W2 log map ``v(x) = sum_y Log_x(y) pi(y|x)``."""
    P, target = _plan_parts(mu0, plan)
    m = mu0.manifold
    I, J = np.nonzero(P > 0)
    v = np.zeros_like(mu0.points)
    if len(I):
        L = m.log(mu0.points[I], target.points[J])
        np.add.at(v, I, L * P[I, J][:, None])
    p0 = P.sum(axis=1)
    v = np.divide(v, p0[:, None], out=np.zeros_like(v), where=p0[:, None] > 0)
    return W2Tangent(mu0, v)


def exp_w2(mu0: DiscreteMeasure, t: W2Tangent) -> DiscreteMeasure:
    """Pushforward of ``mu0`` under ``x -> exp_x(v(x))``."""
    if len(t.reference) != len(mu0):
        raise InvalidInputError("tangent does not match the reference measure")
    return DiscreteMeasure(mu0.manifold, mu0.manifold.exp(mu0.points, t.v), mu0.masses)


def norm_w2(t: W2Tangent) -> float:
    """Squared L2(mu0) norm of the velocity field."""
    ref = t.reference
    return float(np.sum(ref.masses * _sq_norms(ref.manifold, ref.points, t.v)))


# ---------------------------------------------------------------------------
# HK

def log_hk(mu0: DiscreteMeasure, plan: TransportPlan, kappa: float,
           plan_tol: float = 1e-8, singular_tol: float = 0.0) -> HkTangent:
    """Barycentric HK log map.

    ``v(x) = kappa * (dpi0/dmu0)(x) * sum_y tan(d/kappa) * unit_log * pi(y|x)``,
    ``alpha(x) = 2 ((dpi0/dmu0)(x) - 1)``. Atoms of the target that the plan
    does not charge (``pi1 <= singular_tol * mu1``) form the singular part.

    Pairs within ``1e-9`` of ``d = kappa*pi/2`` must carry no more than
    ``plan_tol`` mass; such light pairs are dropped with a warning, heavier
    ones raise :class:`InvalidPlanError`.
    """
    if not kappa > 0:
        raise InvalidInputError("kappa must be positive")
    P, target = _plan_parts(mu0, plan)
    m = mu0.manifold
    m0 = mu0.masses
    p0 = P.sum(axis=1)
    if np.any((p0 > 0) & (m0 <= 0)):
        raise InvalidPlanError("plan charges atoms of zero reference mass")
    I, J = np.nonzero(P > 0)
    w = P[I, J]
    v = np.zeros_like(mu0.points)
    if len(I):
        d = m.dist(mu0.points[I], target.points[J])
        near = d >= kappa * np.pi / 2 - TAN_GUARD
        if np.any(near):
            heavy = w[near] > plan_tol
            if np.any(heavy):
                raise InvalidPlanError(
                    f"plan carries mass {w[near].max():.3e} on pairs at distance >= kappa*pi/2"
                )
            warnings.warn(f"dropping {int(near.sum())} plan entries at the kappa*pi/2 horizon",
                          RuntimeWarning, stacklevel=2)
            I, J, w, d = I[~near], J[~near], w[~near], d[~near]
        if len(I):
            L = m.log(mu0.points[I], target.points[J])
            f = _tanc(d / kappa)  # kappa*tan(d/kappa)/d
            np.add.at(v, I, L * (f * w)[:, None])
    ok = m0 > 0
    v[ok] /= m0[ok, None]
    rho = np.where(ok, p0 / np.where(ok, m0, 1.0), 1.0)
    alpha = 2.0 * (rho - 1.0)
    p1 = P.sum(axis=0)
    sing = target.subset((target.masses > 0) & (p1 <= singular_tol * target.masses))
    return HkTangent(mu0, v, alpha, sing)


def norm_hk(t: _GrowthTangent, kappa: float) -> float:
    """``|v|^2_{L2(mu0)} + (k^2/4) |alpha|^2_{L2(mu0)} + k^2 |singular|``."""
    ref = t.reference
    vv = _sq_norms(ref.manifold, ref.points, t.v)
    return float(np.sum(ref.masses * (vv + 0.25 * kappa ** 2 * t.alpha ** 2))
                 + kappa ** 2 * t.singular_mass)


def norm_shk(t: ShkTangent, kappa: float) -> float:
    """Squared SHK norm; same quadratic form as :func:`norm_hk`."""
    return norm_hk(t, kappa)


def _check_ref(mu0, t):
    if len(t.reference) != len(mu0):
        raise InvalidInputError("tangent does not match the reference measure")


def exp_hk(mu0: DiscreteMeasure, t: _GrowthTangent, kappa: float) -> DiscreteMeasure:
    """HK exponential map; the singular part is appended unchanged.

    Raises
    ------
    InvalidInputError
        If some ``alpha < -2`` (infeasible tangent).
    """
    _check_ref(mu0, t)
    if np.any(t.alpha < -2.0 - ALPHA_FLOOR_TOL):
        raise InvalidInputError("infeasible tangent: alpha < -2")
    m = mu0.manifold
    X = mu0.points
    nv = np.sqrt(_sq_norms(m, X, t.v))
    c = 1.0 + 0.5 * np.maximum(t.alpha, -2.0)
    ang = kappa * np.arctan2(nv / kappa, c)
    step = np.divide(ang, nv, out=np.zeros_like(nv), where=nv > 0)
    Y = m.exp(X, t.v * step[:, None])
    u2 = c ** 2 + (nv / kappa) ** 2
    out = DiscreteMeasure(m, Y, mu0.masses * u2)
    if len(t.singular):
        out = out + t.singular
    return out


def exp_mass(mu0: DiscreteMeasure, t: _GrowthTangent, kappa: float) -> float:
    """Total mass of ``exp_hk(mu0, t)`` without building the measure."""
    ref = t.reference
    nv2 = _sq_norms(ref.manifold, ref.points, t.v)
    c = 1.0 + 0.5 * t.alpha
    return float(np.sum(mu0.masses * (c ** 2 + nv2 / kappa ** 2)) + t.singular_mass)


def scale_tangent(t: _GrowthTangent, s: float):
    """Cone-geodesic scaling ``(s v, s alpha, s^2 singular)``."""
    sing = t.singular.scaled(s * s) if len(t.singular) and s != 0 else None
    return replace(t, v=s * t.v, alpha=s * t.alpha, singular=sing)


def geodesic_hk(mu0: DiscreteMeasure, t: HkTangent, s: float, kappa: float) -> DiscreteMeasure:
    """Point at time ``s`` on the HK geodesic generated by ``t``."""
    return exp_hk(mu0, scale_tangent(t, s), kappa)


def alpha_dual_check(t: HkTangent, potentials: DualPotentials, kappa: float) -> float:
    """max over reference atoms of ``|alpha + 2 Phi0/kappa^2|``."""
    phi0 = np.asarray(potentials.phi0, float)
    if phi0.shape != t.alpha.shape:
        raise InvalidInputError("potentials do not match the tangent")
    ok = t.reference.masses > 0
    return float(np.max(np.abs(t.alpha[ok] + 2.0 * phi0[ok] / kappa ** 2), initial=0.0))


# ---------------------------------------------------------------------------
# SHK

def shk_distance(hk_sq: float, kappa: float) -> float:
    """``kappa * arccos(1 - hk_sq / (2 kappa^2))`` for probability endpoints."""
    lim = 2.0 * kappa ** 2
    if hk_sq < -1e-12:
        raise InvalidInputError("squared distance must be nonnegative")
    if hk_sq > lim * (1.0 + 1e-9):
        raise InvalidInputError(
            f"HK^2 = {hk_sq:.6g} exceeds 2 kappa^2 = {lim:.6g}; endpoints are not probability measures"
        )
    # arccos(1 - 2y) = 2 asin(sqrt(y)) is accurate for small distances
    x = min(max(hk_sq, 0.0), lim) / (2.0 * lim)
    return float(2.0 * kappa * np.arcsin(np.sqrt(x)))


def _check_probability(mu0, t, kappa, tol):
    if abs(mu0.total_mass - 1.0) > tol:
        raise InvalidInputError(f"reference mass {mu0.total_mass:.12g} != 1")
    mt = exp_mass(mu0, t, kappa)
    if abs(mt - 1.0) > tol:
        raise InvalidInputError(
            f"tangent target has mass {mt:.12g} != 1; apply rescale_for_shk first"
        )


def hk_to_shk(t: HkTangent, kappa: float, mass_tol: float = 1e-6) -> ShkTangent:
    """Convert an HK tangent between probability measures to an SHK tangent."""
    mu0 = t.reference
    _check_probability(mu0, t, kappa, mass_tol)
    hk2 = norm_hk(t, kappa)
    shk = shk_distance(hk2, kappa)
    sp = _xsin(shk / kappa)
    sing = t.singular.scaled(sp * sp) if len(t.singular) else None
    return ShkTangent(mu0, sp * t.v, sp * (t.alpha + hk2 / kappa ** 2), sing, s_prime=sp)


def shk_to_hk(t: ShkTangent, kappa: float) -> HkTangent:
    """Inverse of :func:`hk_to_shk`; s'(0) is recomputed from the SHK norm."""
    shk = np.sqrt(norm_shk(t, kappa))
    if shk > kappa * np.pi / 2 * (1.0 + 1e-12):
        raise InvalidInputError(f"SHK norm {shk:.6g} exceeds kappa*pi/2")
    theta = min(shk / kappa, np.pi / 2)
    sp = _xsin(theta)
    hk2 = 2.0 * kappa ** 2 * (1.0 - np.cos(theta))
    sing = t.singular.scaled(1.0 / sp ** 2) if len(t.singular) else None
    return HkTangent(t.reference, t.v / sp, t.alpha / sp - hk2 / kappa ** 2, sing)


def rescale_for_shk(t: HkTangent, mu0: DiscreteMeasure, kappa: float) -> HkTangent:
    """Rescale so that ``exp_hk(mu0, result)`` has unit mass.

    With ``q = 1/sqrt(m~)``: ``v -> q v``, ``alpha -> q alpha + 2(q - 1)``,
    ``singular -> q^2 singular``. The transport directions are unchanged.
    """
    _check_ref(mu0, t)
    mt = exp_mass(mu0, t, kappa)
    if not mt > 0:
        raise InvalidInputError("exponential of the tangent has zero mass")
    q = 1.0 / np.sqrt(mt)
    sing = t.singular.scaled(q * q) if len(t.singular) else None
    return HkTangent(t.reference, q * t.v, q * t.alpha + 2.0 * (q - 1.0), sing)


def log_shk(mu0: DiscreteMeasure, plan: TransportPlan, kappa: float, **kw) -> ShkTangent:
    """SHK log map from an HK plan: barycentric HK log, unit-mass rescale, conversion."""
    t = log_hk(mu0, plan, kappa, **kw)
    return hk_to_shk(rescale_for_shk(t, mu0, kappa), kappa)


def exp_shk(mu0: DiscreteMeasure, t: ShkTangent, kappa: float) -> DiscreteMeasure:
    return exp_hk(mu0, shk_to_hk(t, kappa), kappa)


def geodesic_shk(mu0: DiscreteMeasure, t: ShkTangent, time: float, kappa: float) -> DiscreteMeasure:
    """SHK geodesic by renormalizing and reparametrizing the HK geodesic.

    ``mu^S_t = mu_{s(t)} / |mu_{s(t)}|`` with
    ``s(t) = sin(t th) / (sin((1-t) th) + sin(t th))``, ``th = SHK/kappa``.
    """
    h = shk_to_hk(t, kappa)
    theta = np.sqrt(norm_shk(t, kappa)) / kappa
    if theta < 1e-12:
        s = time
    else:
        s = np.sin(time * theta) / (np.sin((1 - time) * theta) + np.sin(time * theta))
    mu = geodesic_hk(mu0, h, s, kappa)
    return mu.normalize()
