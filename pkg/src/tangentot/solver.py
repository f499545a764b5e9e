"""Entropic transport solvers for balanced (W2) and soft-marginal (HK) problems.

Both solvers run the log-domain Sinkhorn iteration with epsilon-scaling.
Potentials ``u0, u1`` are kept in cost units; the entropic plan is

    pi_ij = a_i b_j exp((u0_i + u1_j - C_ij) / eps),

with ``a, b`` the masses of the two measures. Infinite costs are structural
zeros of the kernel. For HK the marginal penalty ``kappa^2 KL`` turns each
half-step into a damped one, ``u0 <- -(lam eps / (lam + eps)) log(...)`` with
``lam = kappa^2``. Potentials are reported in cone scale
``Phi = kappa^2 (1 - exp(-u / kappa^2))``.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from . import _kernels
from .errors import ConvergenceError, InvalidInputError
from .measure import DiscreteMeasure

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# configuration and result types

@dataclass(frozen=True)
class SolverConfig:
    """Sinkhorn settings.

    ``epsilon_target=None`` selects the default rule
    (median nearest-neighbour distance of the joint support)^2.
    ``max_iters`` applies to each epsilon stage. Every ``newton_every``
    iterations a damped Newton step on the dual is attempted when the problem
    has at most ``newton_max_size`` atoms in total (0 disables it).
    """

    epsilon_target: float | None = None
    epsilon_scaling_factor: float = 0.5
    max_iters: int = 20000
    marginal_tol: float = 1e-8
    kappa: float | None = None
    check_every: int = 5
    newton_every: int = 10
    newton_max_size: int = 3000

    def __post_init__(self):
        if self.epsilon_target is not None and not self.epsilon_target > 0:
            raise InvalidInputError("epsilon_target must be positive")
        if not 0 < self.epsilon_scaling_factor < 1:
            raise InvalidInputError("epsilon_scaling_factor must lie in (0, 1)")
        if int(self.max_iters) < 1:
            raise InvalidInputError("max_iters must be >= 1")
        if not self.marginal_tol > 0:
            raise InvalidInputError("marginal_tol must be positive")
        if self.kappa is not None and not self.kappa > 0:
            raise InvalidInputError("kappa must be positive")
        if int(self.check_every) < 1:
            raise InvalidInputError("check_every must be >= 1")
        if int(self.newton_every) < 1 or int(self.newton_max_size) < 0:
            raise InvalidInputError("newton_every must be >= 1, newton_max_size >= 0")

    @classmethod
    def from_dict(cls, d: dict) -> "SolverConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise InvalidInputError(f"unknown solver settings: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "SolverConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return asdict(self)

    def with_(self, **kw) -> "SolverConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


@dataclass
class TransportPlan:
    """Dense coupling between ``source`` (rows) and ``target`` (columns)."""

    matrix: np.ndarray
    source: DiscreteMeasure
    target: DiscreteMeasure
    value: float = float("nan")
    epsilon: float = 0.0
    iterations: int = 0
    residual: float = 0.0

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=float)
        if self.matrix.shape != (len(self.source), len(self.target)):
            raise InvalidInputError(
                f"plan shape {self.matrix.shape} does not match measures "
                f"({len(self.source)}, {len(self.target)})"
            )
        if np.any(self.matrix < 0) or not np.all(np.isfinite(self.matrix)):
            raise InvalidInputError("plan entries must be finite and nonnegative")

    @property
    def marginal0(self):
        return self.matrix.sum(axis=1)

    @property
    def marginal1(self):
        return self.matrix.sum(axis=0)

    @property
    def mass(self) -> float:
        return float(self.matrix.sum())


@dataclass
class DualPotentials:
    """Dual potentials. For HK ``phi0, phi1`` are in cone scale.

    ``u0, u1`` hold the raw entropic potentials (cost units).
    """

    phi0: np.ndarray
    phi1: np.ndarray
    kind: str = "hk"
    kappa: float | None = None
    u0: np.ndarray | None = None
    u1: np.ndarray | None = None


# ---------------------------------------------------------------------------
# costs

def cos_trunc(s):
    """Cos(s) = cos(min(|s|, pi/2)), exactly 0 from pi/2 on."""
    a = np.abs(s)
    return np.where(a >= 0.5 * np.pi, 0.0, np.cos(np.minimum(a, 0.5 * np.pi)))


def hk_cost_from_dist(d, kappa: float):
    """-2 kappa^2 log cos(d/kappa) for d < kappa*pi/2, +inf otherwise."""
    d = np.asarray(d, dtype=float)
    x = d / kappa
    out = np.full(d.shape, np.inf)
    ok = x < 0.5 * np.pi
    # log cos x = log1p(-2 sin^2(x/2)) keeps relative accuracy near 0
    out[ok] = -2.0 * kappa ** 2 * np.log1p(-2.0 * np.sin(0.5 * x[ok]) ** 2)
    return out


def _check_pair(m, mu0, mu1):
    if mu0.manifold != mu1.manifold:
        raise InvalidInputError("measures live on different manifolds")
    if m is not None and m != mu0.manifold:
        raise InvalidInputError("manifold does not match the measures")
    return mu0.manifold


def build_cost_w2(m, mu0: DiscreteMeasure, mu1: DiscreteMeasure) -> np.ndarray:
    """Squared geodesic distances, shape (k0, k1)."""
    man = _check_pair(m, mu0, mu1)
    return man.pairwise_dist(mu0.points, mu1.points) ** 2


def build_cost_hk(m, mu0: DiscreteMeasure, mu1: DiscreteMeasure, kappa: float) -> np.ndarray:
    """HK cost with truncation at ``d >= kappa*pi/2`` (entries +inf)."""
    if not kappa > 0:
        raise InvalidInputError("kappa must be positive")
    man = _check_pair(m, mu0, mu1)
    return hk_cost_from_dist(man.pairwise_dist(mu0.points, mu1.points), kappa)


def default_epsilon(mu0: DiscreteMeasure, mu1: DiscreteMeasure) -> float:
    """(median nearest-neighbour distance)^2 over the joint support."""
    P = np.concatenate([mu0.points, mu1.points])
    P = np.unique(P, axis=0)
    if len(P) < 2:
        return 1e-4
    D = mu0.manifold.pairwise_dist(P, P)
    np.fill_diagonal(D, np.inf)
    nn = D.min(axis=1)
    return float(np.median(nn) ** 2)


# ---------------------------------------------------------------------------
# Sinkhorn core

def _schedule(C, eps_target, factor):
    finite = C[np.isfinite(C)]
    eps0 = max(float(finite.max()) if finite.size else eps_target, eps_target)
    out = []
    e = eps0
    while e > eps_target * (1 + 1e-12):
        out.append(e)
        e *= factor
    out.append(eps_target)
    return out


def _components(C):
    """Connected components of the bipartite graph of finite costs."""
    n0, n1 = C.shape
    fin = np.isfinite(C)
    r, c = np.nonzero(fin)
    g = csr_matrix((np.ones(len(r)), (r, n0 + c)), shape=(n0 + n1, n0 + n1))
    _, lab = connected_components(g, directed=False)
    return lab[:n0], lab[n0:]


def _group_logsumexp(vals, labels, n):
    mx = np.full(n, -np.inf)
    np.maximum.at(mx, labels, vals)
    safe = np.where(np.isfinite(mx), mx, 0.0)
    s = np.zeros(n)
    np.add.at(s, labels, np.exp(vals - safe[labels]))
    with np.errstate(divide="ignore"):
        return np.log(s) + safe


def _fexp(x):
    """exp(x) with non-finite inputs mapped to 0."""
    fin = np.isfinite(x)
    return np.where(fin, np.exp(np.where(fin, x, 0.0)), 0.0)


def _dual(u, v, a, b, P, e, lam):
    """Entropic dual objective (up to a constant) for plan P = plan(u, v)."""
    if lam is None:
        fu, fv = np.isfinite(u), np.isfinite(v)
        return float(a[fu] @ u[fu] + b[fv] @ v[fv] - e * P.sum())
    return float(-lam * np.sum(a * (_fexp(-u / lam) - 1.0))
                 - lam * np.sum(b * (_fexp(-v / lam) - 1.0)) - e * P.sum())


def _sup_change(x, y):
    fin = np.isfinite(x) & np.isfinite(y)
    return float(np.max(np.abs(x[fin] - y[fin]), initial=0.0))


def _newton_step(C, u, v, a, b, la, lb, e, lam):
    """Damped Newton ascent step on the (concave) entropic dual.

    Sinkhorn contracts translation modes of nearly decoupled plan blocks at
    rate about 1 - 2 eps / lam; a Newton step removes them in one go. The
    step is only accepted if the dual does not decrease.
    """
    fu, fv = np.isfinite(u), np.isfinite(v)
    iu, iv = np.nonzero(fu)[0], np.nonzero(fv)[0]
    n0, n1 = len(iu), len(iv)
    P = _kernels.log_plan(C, u / e + la, v / e + lb, e)
    d0 = _dual(u, v, a, b, P, e, lam)
    Pf = P[np.ix_(iu, iv)]
    r, c = Pf.sum(axis=1), Pf.sum(axis=0)
    if lam is None:
        gu, gv = a[iu] - r, b[iv] - c
        hu, hv = r / e, c / e
    else:
        eu, ev = a[iu] * np.exp(-u[iu] / lam), b[iv] * np.exp(-v[iv] / lam)
        gu, gv = eu - r, ev - c
        hu, hv = eu / lam + r / e, ev / lam + c / e
    H = np.zeros((n0 + n1, n0 + n1))
    H[np.arange(n0), np.arange(n0)] = hu
    H[n0 + np.arange(n1), n0 + np.arange(n1)] = hv
    H[:n0, n0:] = Pf / e
    H[n0:, :n0] = Pf.T / e
    # the balanced dual is flat along (1, -1) per component
    H[np.diag_indices_from(H)] += 1e-12 * max(float(H.diagonal().max(initial=0.0)), 1e-300)
    try:
        d = np.linalg.solve(H, np.concatenate([gu, gv]))
    except np.linalg.LinAlgError:
        return u, v, False
    if not np.all(np.isfinite(d)):
        return u, v, False
    t = 1.0
    for _ in range(30):
        u2, v2 = u.copy(), v.copy()
        u2[iu] += t * d[:n0]
        v2[iv] += t * d[n0:]
        P2 = _kernels.log_plan(C, u2 / e + la, v2 / e + lb, e)
        if _dual(u2, v2, a, b, P2, e, lam) >= d0:
            return u2, v2, True
        t *= 0.5
    return u, v, False


def _sinkhorn(C, a, b, eps, cfg: SolverConfig, lam=None):
    """Log-domain Sinkhorn on strictly positive masses.

    Returns potentials (u, v), the plan, iteration count and final residual.
    """
    la, lb = np.log(a), np.log(b)
    n0, n1 = C.shape
    u = np.zeros(n0)
    v = np.zeros(n1)
    schedule = _schedule(C, eps, cfg.epsilon_scaling_factor)
    if lam is not None:
        lab0, lab1 = _components(C)
        ncomp = int(max(lab0.max(initial=-1), lab1.max(initial=-1))) + 1
    use_newton = 0 < n0 + n1 <= int(cfg.newton_max_size)
    total = 0
    res = np.inf
    for stage, e in enumerate(schedule):
        final = stage == len(schedule) - 1
        tol = cfg.marginal_tol if final else max(cfg.marginal_tol, 1e-3 * e if lam else 1e-4)
        rho = 1.0 if lam is None else lam / (lam + e)
        converged = False
        for it in range(int(cfg.max_iters)):
            total += 1
            check = (it % cfg.check_every == 0) or it == cfg.max_iters - 1
            lse_r = _kernels.softmin_rows(C, v / e + lb, e)
            if lam is None:
                if check:
                    res = float(np.sum(np.abs(a * np.exp(u / e + lse_r) - a)))
                    if res < tol:
                        converged = True
                        break
                u = -e * lse_r
            else:
                u_prev, v_prev = u, v
                u = -rho * e * lse_r
            lse_c = _kernels.softmin_cols(C, u / e + la, e)
            v = -rho * e * lse_c
            if lam is not None:
                # exact dual ascent along the per-component translation u+s, v-s
                A0 = _group_logsumexp(la - u / lam, lab0, ncomp)
                A1 = _group_logsumexp(lb - v / lam, lab1, ncomp)
                with np.errstate(invalid="ignore"):
                    s = 0.5 * lam * (A0 - A1)
                s[~np.isfinite(s)] = 0.0
                u = u + s[lab0]
                v = v - s[lab1]
                if check:
                    res = max(_sup_change(u, u_prev), _sup_change(v, v_prev))
                if check and res < tol:
                    converged = True
                    break
            if use_newton and it % cfg.newton_every == cfg.newton_every - 1:
                u, v, _ = _newton_step(C, u, v, a, b, la, lb, e, lam)
        if final and not converged:
            raise ConvergenceError(
                f"Sinkhorn did not converge at eps={e:.3g}: residual {res:.3e} "
                f"after {cfg.max_iters} iterations",
                residual=res, iterations=total,
            )
    e = schedule[-1]
    P = _kernels.log_plan(C, u / e + la, v / e + lb, e)
    return u, v, P, total, res, e


def _c_transform(C, v):
    """min_j (C_ij - v_j) over finite costs (+inf when none)."""
    with np.errstate(invalid="ignore"):
        A = C - v[None, :]
    A[~np.isfinite(C) | np.isnan(A)] = np.inf
    return A.min(axis=1) if A.shape[1] else np.full(A.shape[0], np.inf)


def _solve(C, mu0, mu1, cfg, lam):
    C = np.asarray(C, dtype=float)
    if C.shape != (len(mu0), len(mu1)):
        raise InvalidInputError("cost shape does not match the measures")
    eps = cfg.epsilon_target if cfg.epsilon_target is not None else default_epsilon(mu0, mu1)
    r = mu0.masses > 0
    c = mu1.masses > 0
    u = np.full(len(mu0), np.inf)
    v = np.full(len(mu1), np.inf)
    P = np.zeros(C.shape)
    iters, res = 0, 0.0
    if r.any() and c.any():
        Cs = np.ascontiguousarray(C[np.ix_(r, c)])
        us, vs, Ps, iters, res, eps = _sinkhorn(Cs, mu0.masses[r], mu1.masses[c], eps, cfg, lam)
        u[r], v[c] = us, vs
        P[np.ix_(r, c)] = Ps
        # dropped atoms get the c-transform of the other side
        if (~r).any():
            u[~r] = _c_transform(C[np.ix_(~r, c)], v[c])
        if (~c).any():
            v[~c] = _c_transform(C[np.ix_(r, ~c)].T, u[r])
    return u, v, P, iters, res, eps


def sinkhorn_balanced(cost, mu0: DiscreteMeasure, mu1: DiscreteMeasure,
                      cfg: SolverConfig | None = None):
    """Entropic W2-type transport with hard marginals.

    Returns
    -------
    (TransportPlan, DualPotentials)
    """
    cfg = cfg or SolverConfig()
    m0, m1 = mu0.total_mass, mu1.total_mass
    if abs(m0 - m1) > 1e-9 * max(1.0, m0):
        raise InvalidInputError(f"balanced transport needs equal masses ({m0} vs {m1})")
    C = np.asarray(cost, dtype=float)
    u, v, P, iters, res, eps = _solve(C, mu0, mu1, cfg, None)
    value = float(np.sum(np.where(P > 0, C, 0.0) * P))
    plan = TransportPlan(P, mu0, mu1, value, eps, iters, res)
    return plan, DualPotentials(u, v, kind="w2", u0=u, u1=v)


def sinkhorn_hk(cost, mu0: DiscreteMeasure, mu1: DiscreteMeasure,
                cfg: SolverConfig | None = None, kappa: float | None = None):
    """Entropic soft-marginal HK transport.

    ``kappa`` may be given directly or through ``cfg.kappa``.

    Returns
    -------
    (TransportPlan, DualPotentials)
        ``plan.value`` is the unregularized objective E_kappa of the plan.
    """
    cfg = cfg or SolverConfig()
    kappa = kappa if kappa is not None else cfg.kappa
    if kappa is None or not kappa > 0:
        raise InvalidInputError("HK solve requires kappa > 0")
    lam = float(kappa) ** 2
    C = np.asarray(cost, dtype=float)
    u, v, P, iters, res, eps = _solve(C, mu0, mu1, cfg, lam)
    value = _primal_from_cost(C, P, mu0.masses, mu1.masses, lam)
    plan = TransportPlan(P, mu0, mu1, value, eps, iters, res)
    with np.errstate(over="ignore"):
        phi0 = lam * (1.0 - np.exp(-u / lam))
        phi1 = lam * (1.0 - np.exp(-v / lam))
    return plan, DualPotentials(phi0, phi1, kind="hk", kappa=float(kappa), u0=u, u1=v)


def solve_hk(mu0, mu1, kappa: float, cfg: SolverConfig | None = None):
    """Build the HK cost and run :func:`sinkhorn_hk`."""
    C = build_cost_hk(None, mu0, mu1, kappa)
    return sinkhorn_hk(C, mu0, mu1, cfg, kappa=kappa)


def solve_w2(mu0, mu1, cfg: SolverConfig | None = None):
    """Build the W2 cost and run :func:`sinkhorn_balanced`."""
    return sinkhorn_balanced(build_cost_w2(None, mu0, mu1), mu0, mu1, cfg)


# ---------------------------------------------------------------------------
# objectives and certificates

def kl(rho, mu) -> float:
    """Generalized KL(rho|mu) = sum rho log(rho/mu) - rho + mu (inf unless rho << mu)."""
    rho = np.asarray(rho, float)
    mu = np.asarray(mu, float)
    if np.any((rho > 0) & (mu <= 0)):
        return np.inf
    pos = rho > 0
    return float(np.sum(rho[pos] * np.log(rho[pos] / mu[pos])) - rho.sum() + mu.sum())


def _primal_from_cost(C, P, a, b, lam):
    if np.any((P > 0) & ~np.isfinite(C)):
        return np.inf
    transport = float(np.sum(np.where(P > 0, C, 0.0) * P))
    return transport + lam * kl(P.sum(axis=1), a) + lam * kl(P.sum(axis=0), b)


def _matrix(plan):
    return plan.matrix if isinstance(plan, TransportPlan) else np.asarray(plan, dtype=float)


def primal_value_hk(plan, mu0: DiscreteMeasure, mu1: DiscreteMeasure, kappa: float) -> float:
    """Soft-marginal objective E_kappa(pi | mu0, mu1); +inf for inadmissible plans."""
    P = _matrix(plan)
    if P.shape != (len(mu0), len(mu1)):
        raise InvalidInputError("plan dimensions do not match the measures")
    C = build_cost_hk(None, mu0, mu1, kappa)
    return _primal_from_cost(C, P, mu0.masses, mu1.masses, float(kappa) ** 2)


def dual_value_hk(potentials: DualPotentials, mu0, mu1) -> float:
    """sum Phi0 dmu0 + sum Phi1 dmu1 (zero-mass atoms ignored)."""
    m0, m1 = mu0.masses, mu1.masses
    return float(np.sum(potentials.phi0[m0 > 0] * m0[m0 > 0])
                 + np.sum(potentials.phi1[m1 > 0] * m1[m1 > 0]))


def duality_gap_hk(plan: TransportPlan, potentials: DualPotentials, mu0, mu1, kappa) -> float:
    return primal_value_hk(plan, mu0, mu1, kappa) - dual_value_hk(potentials, mu0, mu1)


@dataclass
class OptimalityReport:
    """Maximal violations of the HK optimality conditions."""

    product: float
    far: float
    marginal: float
    admissibility: float
    bound: float
    tol: float
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = self.max_violation <= self.tol

    @property
    def max_violation(self) -> float:
        return max(self.product, self.far, self.marginal, self.admissibility, self.bound)


def check_optimality_conditions(plan, potentials: DualPotentials, mu0, mu1, kappa: float,
                                tol: float = 1e-9, support_threshold: float = 1e-6
                                ) -> OptimalityReport:
    """Audit a primal-dual pair against the HK optimality conditions.

    Checks (i) ``(1-Phi0/k^2)(1-Phi1/k^2) = Cos^2(d/k)`` on the plan's
    support, (ii) ``Phi = k^2`` on atoms the plan does not charge, (iii)
    ``dpi_i/dmu_i = 1 - Phi_i/k^2``, plus admissibility of the potentials
    on every pair and the bound ``Phi <= k^2``.

    The support of ``pi`` is ``{pi_ij > support_threshold * m0_i * m1_j}``
    so that entropic plans, which charge every finite pair, can be audited.
    """
    P = _matrix(plan)
    lam = float(kappa) ** 2
    m0, m1 = mu0.masses, mu1.masses
    cos2 = cos_trunc(mu0.manifold.pairwise_dist(mu0.points, mu1.points) / kappa) ** 2
    r0 = 1.0 - np.asarray(potentials.phi0, float) / lam
    r1 = 1.0 - np.asarray(potentials.phi1, float) / lam
    live = (m0[:, None] > 0) & (m1[None, :] > 0)
    prod = r0[:, None] * r1[None, :]
    with np.errstate(invalid="ignore"):
        prod = np.where(live, prod, cos2)
    supp = live & (P > support_threshold * m0[:, None] * m1[None, :])
    product = float(np.max(np.abs(prod - cos2)[supp], initial=0.0))
    admiss = float(np.max(np.maximum(cos2 - prod, 0.0)[live], initial=0.0))
    p0, p1 = P.sum(axis=1), P.sum(axis=0)
    far = 0.0
    for p, m, r in ((p0, m0, r0), (p1, m1, r1)):
        idle = (m > 0) & (p <= support_threshold * m)
        far = max(far, float(np.max(np.abs(lam * r[idle]), initial=0.0)))
    marg = 0.0
    for p, m, r in ((p0, m0, r0), (p1, m1, r1)):
        ok = m > 0
        marg = max(marg, float(np.max(np.abs(p[ok] / m[ok] - r[ok]), initial=0.0)))
    bound = float(max(np.max(-r0, initial=0.0), np.max(-r1, initial=0.0), 0.0)) * lam
    return OptimalityReport(product, far, marg, admiss, bound, tol)


def log_c_transform(phi1, dist_matrix, kappa: float):
    """Best cone-scale potential on the first side given ``phi1``.

    ``Phi0(x) = k^2 (1 - max_j Cos^2(d/k) / (1 - Phi1_j/k^2))``.
    """
    lam = float(kappa) ** 2
    cos2 = cos_trunc(np.asarray(dist_matrix, float) / kappa) ** 2
    r1 = 1.0 - np.asarray(phi1, float) / lam
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(cos2 > 0, cos2 / r1[None, :], 0.0)
    ratio = np.where(np.isnan(ratio), np.inf, ratio)
    return lam * (1.0 - ratio.max(axis=1, initial=0.0))
