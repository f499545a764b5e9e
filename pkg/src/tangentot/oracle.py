"""Independent reference solutions for small instances.

Nothing here calls the Sinkhorn solvers: the balanced oracle enumerates
integer transport plans exactly, the HK oracles use closed forms or a
coordinate descent with exact per-entry minimization.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import lcm

import numpy as np

from .errors import InvalidInputError, UnsupportedError
from .measure import DiscreteMeasure
from .solver import TransportPlan, cos_trunc, hk_cost_from_dist

MAX_ATOMS = 6
MAX_DENOMINATOR = 64


@dataclass(frozen=True)
class TinyInstance:
    mu0: DiscreteMeasure
    mu1: DiscreteMeasure

    def __post_init__(self):
        if len(self.mu0) > MAX_ATOMS or len(self.mu1) > MAX_ATOMS:
            raise UnsupportedError(f"tiny instances are limited to {MAX_ATOMS} atoms per side")
        if self.mu0.manifold != self.mu1.manifold:
            raise InvalidInputError("measures live on different manifolds")

    def distances(self):
        return self.mu0.manifold.pairwise_dist(self.mu0.points, self.mu1.points)


# ---------------------------------------------------------------------------
# balanced transport

def _rational(masses):
    out = []
    for m in masses:
        f = Fraction(float(m)).limit_denominator(MAX_DENOMINATOR)
        if abs(float(f) - m) > 1e-12:
            raise UnsupportedError(
                f"mass {m!r} is not rational with denominator <= {MAX_DENOMINATOR}"
            )
        out.append(f)
    return out


def exact_balanced(inst: TinyInstance, cost=None) -> TransportPlan:
    """Provably optimal balanced plan for a tiny instance.

    Equal atom counts with uniform equal masses are solved by enumerating
    permutations. Otherwise the masses must be rationals with a common
    denominator ``D <= 64``; the plan is then found by exhaustive search over
    integer plans in units of ``1/D`` (the transportation polytope has
    integral vertices, so an optimal vertex is among them).
    """
    mu0, mu1 = inst.mu0, inst.mu1
    C = np.asarray(cost if cost is not None else inst.distances() ** 2, dtype=float)
    a, b = mu0.masses, mu1.masses
    if abs(a.sum() - b.sum()) > 1e-12 * max(1.0, a.sum()):
        raise InvalidInputError("balanced oracle needs equal total masses")
    n0, n1 = C.shape
    if n0 == 0 or n1 == 0:
        return TransportPlan(np.zeros((n0, n1)), mu0, mu1, 0.0)
    uniform = n0 == n1 and np.allclose(a, a[0], rtol=0, atol=1e-15) and np.allclose(b, a[0], rtol=0, atol=1e-15)
    if uniform:
        best, best_perm = np.inf, None
        for perm in itertools.permutations(range(n1)):
            val = sum(C[i, perm[i]] for i in range(n0))
            if val < best:
                best, best_perm = val, perm
        P = np.zeros((n0, n1))
        P[np.arange(n0), best_perm] = a[0]
        return TransportPlan(P, mu0, mu1, float(best * a[0]))

    fa, fb = _rational(a), _rational(b)
    D = lcm(*[f.denominator for f in fa + fb])
    if D > MAX_DENOMINATOR:
        raise UnsupportedError(f"common denominator {D} exceeds {MAX_DENOMINATOR}")
    ia = [int(f * D) for f in fa]
    ib = tuple(int(f * D) for f in fb)

    @lru_cache(maxsize=None)
    def solve(row, demand):
        # best cost shipping rows row.. against remaining column demands
        if row == n0:
            return (0.0, ()) if not any(demand) else (np.inf, ())
        best = (np.inf, ())
        for ship in _compositions(ia[row], demand):
            rest = tuple(d - s for d, s in zip(demand, ship))
            sub, tail = solve(row + 1, rest)
            val = sub + sum(C[row, j] * s for j, s in enumerate(ship) if s)
            if val < best[0]:
                best = (val, (ship,) + tail)
        return best

    val, rows = solve(0, ib)
    if not np.isfinite(val):
        raise InvalidInputError("no finite-cost plan exists")
    P = np.array(rows, dtype=float) / D
    return TransportPlan(P, mu0, mu1, float(val) / D)


def _compositions(total, caps):
    """All integer vectors s with 0 <= s_j <= caps_j and sum s = total."""
    if not caps:
        if total == 0:
            yield ()
        return
    head, rest = caps[0], caps[1:]
    room = sum(rest)
    for s in range(max(0, total - room), min(head, total) + 1):
        for tail in _compositions(total - s, rest):
            yield (s,) + tail


# ---------------------------------------------------------------------------
# HK closed forms

def hk_dirac_closed_form(m0: float, x0, m1: float, x1, kappa: float, manifold=None):
    """HK between ``m0 delta_x0`` and ``m1 delta_x1``.

    Returns
    -------
    value, plan_mass, phi0, phi1
        ``value = k^2 (m0 + m1 - 2 sqrt(m0 m1) Cos(d/k))``; the potentials are
        the cone-scale marginal densities ``k^2 (1 - plan_mass / m_i)``
        (``k^2`` when ``m_i = 0``).
    """
    if manifold is None:
        d = float(np.linalg.norm(np.atleast_1d(np.asarray(x1, float) - np.asarray(x0, float))))
    else:
        d = float(manifold.dist(np.asarray(x0, float), np.asarray(x1, float)))
    lam = kappa ** 2
    c = float(cos_trunc(d / kappa))
    p = np.sqrt(m0 * m1) * c
    value = lam * (m0 + m1 - 2.0 * p)
    phi0 = lam * (1.0 - p / m0) if m0 > 0 else lam
    phi1 = lam * (1.0 - p / m1) if m1 > 0 else lam
    return value, p, phi0, phi1


def hk_star_closed_form(masses, dists, n: float, kappa: float):
    """Optimal HK plan from ``sum_i m_i delta_{x_i}`` to a single atom ``n delta_y``.

    Stationarity gives ``p_i = m_i c_i^2 sqrt(n / S)`` with ``c_i = Cos(d_i/k)``
    and ``S = sum_j m_j c_j^2``.

    Returns
    -------
    value, plan (vector of p_i)
    """
    m = np.asarray(masses, float)
    c2 = cos_trunc(np.asarray(dists, float) / kappa) ** 2
    S = float(np.sum(m * c2))
    lam = kappa ** 2
    if S <= 0 or n <= 0:
        return lam * (m.sum() + n), np.zeros_like(m)
    p = m * c2 * np.sqrt(n / S)
    value = lam * (m.sum() + n - 2.0 * np.sqrt(n * S))
    return value, p


def _hk_objective(P, C, a, b, lam):
    if np.any((P > 0) & ~np.isfinite(C)):
        return np.inf
    r, c = P.sum(axis=1), P.sum(axis=0)
    val = float(np.sum(np.where(P > 0, C, 0.0) * P))
    for p, m in ((r, a), (c, b)):
        if np.any((p > 0) & (m <= 0)):
            return np.inf
        pos = p > 0
        val += lam * (float(np.sum(p[pos] * np.log(p[pos] / m[pos]))) - p.sum() + m.sum())
    return val


def _xlogx_ratio(p, m):
    """Elementwise p log(p/m) - p + m with 0 log 0 = 0 and +inf when p > 0 = m."""
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(p > 0, p * np.log(p / m), 0.0)
    t = np.where((p > 0) & (m <= 0), np.inf, t)
    return t - p + m


def _hk_objective_batch(grid, idx, C, a, b, lam):
    """E_kappa for many plans whose free entries ``idx`` are the rows of ``grid``."""
    n0, n1 = C.shape
    rows = np.zeros((len(grid), n0))
    cols = np.zeros((len(grid), n1))
    val = np.zeros(len(grid))
    for k, (i, j) in enumerate(idx):
        rows[:, i] += grid[:, k]
        cols[:, j] += grid[:, k]
        val += C[i, j] * grid[:, k]
    val += lam * _xlogx_ratio(rows, a[None, :]).sum(axis=1)
    val += lam * _xlogx_ratio(cols, b[None, :]).sum(axis=1)
    return val


def hk_coordinate_descent(C, a, b, kappa: float, P0=None, tol: float = 1e-15,
                          max_sweeps: int = 100000):
    """Minimize E_kappa over plans by exact coordinate minimization.

    For fixed other entries, the optimal ``p_ij`` solves
    ``(r + p)(s + p) = a_i b_j Cos^2`` with ``r, s`` the remaining row and
    column mass, a quadratic with an explicit positive root.
    """
    C = np.asarray(C, float)
    lam = kappa ** 2
    w = a[:, None] * b[None, :] * np.where(np.isfinite(C), np.exp(-np.where(np.isfinite(C), C, 0) / lam), 0.0)
    P = np.zeros(C.shape) if P0 is None else np.array(P0, float)
    P[w == 0] = 0.0
    n0, n1 = C.shape
    for _ in range(max_sweeps):
        change = 0.0
        for i in range(n0):
            for j in range(n1):
                if w[i, j] == 0:
                    continue
                r = P[i].sum() - P[i, j]
                s = P[:, j].sum() - P[i, j]
                new = 0.5 * (-(r + s) + np.sqrt((r - s) ** 2 + 4.0 * w[i, j]))
                new = max(new, 0.0)
                change = max(change, abs(new - P[i, j]))
                P[i, j] = new
        if change <= tol:
            break
    return P


def hk_grid_search(inst: TinyInstance, kappa: float, grid_step: float = 1e-3):
    """Global minimizer of E_kappa for instances with at most 2 x 2 atoms.

    A coarse grid over ``[0, sqrt(a_i b_j)]`` per entry seeds the search; the
    best grid point is refined by coordinate descent. Since E_kappa is convex
    the refined stationary point is the global optimum.

    Returns
    -------
    value, plan matrix
    """
    mu0, mu1 = inst.mu0, inst.mu1
    if len(mu0) > 2 or len(mu1) > 2:
        raise UnsupportedError("grid search supports at most 2 x 2 atoms")
    a, b = mu0.masses, mu1.masses
    C = hk_cost_from_dist(inst.distances(), kappa)
    lam = kappa ** 2
    bound = np.sqrt(np.outer(a, b))
    free = np.isfinite(C) & (bound > 0)
    idx = list(zip(*np.nonzero(free)))
    best_val, best_P = _hk_objective(np.zeros(C.shape), C, a, b, lam), np.zeros(C.shape)
    if idx:
        per = max(2, min(int(round(1.0 / max(grid_step, 1e-12))), int(round(1e4 ** (1.0 / len(idx))))))
        axes = [np.linspace(0.0, bound[i, j], per) for i, j in idx]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(idx))
        vals = _hk_objective_batch(grid, idx, C, a, b, lam)
        k = int(np.argmin(vals))
        if vals[k] < best_val:
            best_val = vals[k]
            best_P = np.zeros(C.shape)
            for (i, j), p in zip(idx, grid[k]):
                best_P[i, j] = p
        best_P = hk_coordinate_descent(C, a, b, kappa, P0=best_P)
        best_val = _hk_objective(best_P, C, a, b, lam)
    return best_val, best_P


# ---------------------------------------------------------------------------
# semi-couplings

def joint_support(mu0: DiscreteMeasure, mu1: DiscreteMeasure) -> np.ndarray:
    """Points of mu0 followed by points of mu1; semi-couplings are indexed by it."""
    return np.concatenate([mu0.points, mu1.points])


def semicouplings_from_plan(P, mu0: DiscreteMeasure, mu1: DiscreteMeasure):
    """Semi-couplings built from a plan on the joint support.

    ``gamma_i = (dmu_i/dpi_i) pi + (id, id)_# mu_i^perp`` where ``mu_i^perp``
    are the atoms the plan does not charge.
    """
    P = np.asarray(P, float)
    n0, n1 = P.shape
    g0 = np.zeros((n0 + n1, n0 + n1))
    g1 = np.zeros_like(g0)
    r, c = P.sum(axis=1), P.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        s0 = np.where(r > 0, mu0.masses / r, 0.0)
        s1 = np.where(c > 0, mu1.masses / c, 0.0)
    g0[:n0, n0:] = s0[:, None] * P
    g1[:n0, n0:] = P * s1[None, :]
    for i in np.nonzero(r <= 0)[0]:
        g0[i, i] += mu0.masses[i]
    for j in np.nonzero(c <= 0)[0]:
        g1[n0 + j, n0 + j] += mu1.masses[j]
    return g0, g1


def semicoupling_value(g0, g1, mu0: DiscreteMeasure, mu1: DiscreteMeasure, kappa: float,
                       tol: float = 1e-9) -> float:
    """``k^2 (|g0| + |g1| - 2 sum Cos(d/k) sqrt(g0 g1))`` on the joint support.

    ``g0`` must have first marginal ``mu0`` and ``g1`` second marginal ``mu1``
    (both padded with zeros to the joint support).
    """
    g0 = np.asarray(g0, float)
    g1 = np.asarray(g1, float)
    n0, n1 = len(mu0), len(mu1)
    N = n0 + n1
    if g0.shape != (N, N) or g1.shape != (N, N):
        raise InvalidInputError(f"semi-couplings must be {N} x {N}")
    if np.any(g0 < 0) or np.any(g1 < 0):
        raise InvalidInputError("semi-couplings must be nonnegative")
    want0 = np.concatenate([mu0.masses, np.zeros(n1)])
    want1 = np.concatenate([np.zeros(n0), mu1.masses])
    if np.max(np.abs(g0.sum(axis=1) - want0)) > tol or np.max(np.abs(g1.sum(axis=0) - want1)) > tol:
        raise InvalidInputError("semi-coupling marginals do not match the measures")
    Z = joint_support(mu0, mu1)
    d = mu0.manifold.pairwise_dist(Z, Z)
    lam = kappa ** 2
    return float(lam * (g0.sum() + g1.sum() - 2.0 * np.sum(cos_trunc(d / kappa) * np.sqrt(g0 * g1))))
