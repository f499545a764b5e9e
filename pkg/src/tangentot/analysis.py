"""Tangent-space PCA, exponential shooting and study harnesses."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidInputError, TangentOTError, UnsupportedError
from .manifold import Manifold
from .measure import DiscreteMeasure, GridSpec, rasterize
from .oracle import hk_star_closed_form
from .solver import (SolverConfig, TransportPlan, primal_value_hk, solve_hk, solve_w2)
from .tangent import (W2Tangent, exp_hk, exp_shk, exp_w2, log_hk,
                      log_shk, log_w2, shk_to_hk)


# ---------------------------------------------------------------------------
# metric descriptor

@dataclass(frozen=True)
class Metric:
    kind: str = "hk"
    kappa: float | None = None

    def __post_init__(self):
        k = self.kind.lower()
        if k not in ("w2", "hk", "shk"):
            raise InvalidInputError(f"unknown metric {self.kind!r}")
        object.__setattr__(self, "kind", k)
        if k != "w2" and (self.kappa is None or not self.kappa > 0):
            raise InvalidInputError(f"metric {k} requires kappa > 0")

    @classmethod
    def parse(cls, kind, kappa=None) -> "Metric":
        if isinstance(kind, Metric):
            return kind
        return cls(str(kind), None if str(kind).lower() == "w2" else kappa)


Planner = Callable[[DiscreteMeasure, DiscreteMeasure], TransportPlan]


def default_planner(metric: Metric, cfg: SolverConfig | None = None) -> Planner:
    if metric.kind == "w2":
        return lambda a, b: solve_w2(a, b, cfg)[0]
    return lambda a, b: solve_hk(a, b, metric.kappa, cfg)[0]


def log_map(reference, plan, metric: Metric):
    if metric.kind == "w2":
        return log_w2(reference, plan)
    if metric.kind == "hk":
        return log_hk(reference, plan, metric.kappa)
    return log_shk(reference, plan, metric.kappa)


def exp_map(reference, t, metric: Metric) -> DiscreteMeasure:
    if metric.kind == "w2":
        return exp_w2(reference, t)
    if metric.kind == "hk":
        return exp_hk(reference, t, metric.kappa)
    return exp_shk(reference, t, metric.kappa)


# ---------------------------------------------------------------------------
# embeddings and PCA

@dataclass
class EmbeddingSet:
    reference: DiscreteMeasure
    metric: Metric
    embeddings: list

    def __post_init__(self):
        k = len(self.reference)
        for e in self.embeddings:
            if len(e.reference) != k:
                raise InvalidInputError("embeddings do not share the reference atoms")


def embed_samples(reference: DiscreteMeasure, samples: Sequence[DiscreteMeasure], metric,
                  solver_cfg: SolverConfig | None = None, planner: Planner | None = None,
                  workers: int = 1) -> EmbeddingSet:
    """Solve every sample against the reference and apply the barycentric log map.

    Errors from individual samples propagate with ``sample_index`` set.
    """
    metric = Metric.parse(metric, getattr(solver_cfg, "kappa", None))
    if metric.kind == "shk":
        for s in [reference, *samples]:
            if abs(s.total_mass - 1.0) > 1e-6:
                raise InvalidInputError("SHK embeddings need probability measures")
    planner = planner or default_planner(metric, solver_cfg)

    def one(item):
        i, s = item
        try:
            return log_map(reference, planner(reference, s), metric)
        except TangentOTError as exc:
            exc.sample_index = i
            exc.args = (f"sample {i}: {exc}",) + exc.args[1:]
            raise

    items = list(enumerate(samples))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            emb = list(pool.map(one, items))
    else:
        emb = [one(it) for it in items]
    return EmbeddingSet(reference, metric, emb)


def _fields(t):
    a = getattr(t, "alpha", None)
    return t.v, (np.zeros(len(t.reference)) if a is None else a)


def tangent_inner(t1, t2, kappa: float | None = None) -> float:
    """Weighted inner product ``sum m (<v, v'> + k^2/4 alpha alpha')``."""
    ref = t1.reference
    v1, a1 = _fields(t1)
    v2, a2 = _fields(t2)
    s = np.sum(ref.masses * ref.manifold.inner(ref.points, v1, v2))
    if kappa is not None and not isinstance(t1, W2Tangent):
        s += 0.25 * kappa ** 2 * np.sum(ref.masses * a1 * a2)
    return float(s)


def _linear(template, v, alpha):
    if isinstance(template, W2Tangent):
        return W2Tangent(template.reference, v)
    return type(template)(template.reference, v, alpha)


@dataclass
class PcaResult:
    eigenvalues: np.ndarray
    modes: list
    mean: object
    projections: np.ndarray

    @property
    def explained_variance_ratio(self) -> np.ndarray:
        tot = self.eigenvalues.sum()
        return self.eigenvalues / tot if tot > 0 else np.zeros_like(self.eigenvalues)


def pca(emb: EmbeddingSet, kappa: float | None = None, rel_tol: float = 1e-12) -> PcaResult:
    """PCA of the embeddings through the N x N Gram matrix.

    Eigenvalues are those of the empirical covariance (normalized by N).
    Modes are returned for eigenvalues above ``rel_tol * lambda_1``.
    """
    E = emb.embeddings
    N = len(E)
    if N < 2:
        raise InvalidInputError("PCA needs at least two samples")
    for t in E:
        if getattr(t, "singular_mass", 0.0) > 0:
            raise UnsupportedError("PCA of tangents with singular parts is not supported")
    kappa = emb.metric.kappa if kappa is None else kappa
    ref = emb.reference
    m = ref.manifold
    V = np.stack([_fields(t)[0] for t in E])
    A = np.stack([_fields(t)[1] for t in E])
    Vm, Am = V.mean(axis=0), A.mean(axis=0)
    Vc, Ac = V - Vm, A - Am
    w = ref.masses
    G = np.empty((N, N))
    for a in range(N):
        G[a] = np.sum(w * m.inner(ref.points, Vc[a][None], Vc), axis=1)
    if emb.metric.kind != "w2":
        G += 0.25 * kappa ** 2 * (Ac * w) @ Ac.T
    G = 0.5 * (G + G.T)
    lam, U = np.linalg.eigh(G / N)
    order = np.argsort(lam)[::-1]
    lam, U = np.clip(lam[order], 0.0, None), U[:, order]
    keep = lam > rel_tol * max(lam[0], 1e-300)
    modes = []
    for j in np.nonzero(keep)[0]:
        c = U[:, j] / np.sqrt(N * lam[j])
        modes.append(_linear(E[0], np.tensordot(c, Vc, axes=1), c @ Ac))
    proj = U[:, keep] * np.sqrt(N * lam[keep])
    mean = _linear(E[0], Vm, Am)
    return PcaResult(lam, modes, mean, proj)


# ---------------------------------------------------------------------------
# shooting

@dataclass
class ShootResult:
    times: list
    measures: list
    cut: list = field(default_factory=list)
    rasters: list = field(default_factory=list)

    def __len__(self):
        return len(self.measures)

    def __iter__(self):
        return iter(self.measures)


def shoot(mu0: DiscreteMeasure, mean, mode, sigma: float, steps: int, metric,
          kappa: float | None = None, grid: GridSpec | None = None,
          blur_sigma: float = 0.0) -> ShootResult:
    """Exponential of ``mean + t * mode`` for ``steps`` values of t in [-sigma, sigma].

    Values of t whose tangent is infeasible (alpha < -2, or SHK norm beyond
    kappa*pi/2) are skipped and recorded in ``cut``.
    """
    metric = Metric.parse(metric, kappa)
    if sigma == 0 or steps <= 1:
        times = [0.0]
    else:
        times = list(np.linspace(-abs(sigma), abs(sigma), int(steps)))
    out = ShootResult([], [])
    for t in times:
        w = mean.combine(1.0, mode, t)
        try:
            if metric.kind == "shk":
                h = shk_to_hk(w, metric.kappa)
                if not h.is_feasible():
                    raise InvalidInputError("alpha < -2")
            mu = exp_map(mu0, w, metric)
        except InvalidInputError:
            out.cut.append(float(t))
            continue
        out.times.append(float(t))
        out.measures.append(mu)
        if grid is not None:
            out.rasters.append(rasterize(mu, grid, blur_sigma))
    return out


# ---------------------------------------------------------------------------
# study reports

@dataclass
class StudyReport:
    name: str
    series: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    notes: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(bool(v) for v in self.flags.values())

    def summary(self) -> dict:
        return {"name": self.name, "flags": {k: bool(v) for k, v in self.flags.items()},
                "tolerances": self.tolerances, "notes": self.notes}


def _monotone(x, increasing, slack):
    x = np.asarray(x, float)
    if len(x) < 2 or np.any(~np.isfinite(x)):
        return bool(len(x) < 2)
    d = np.diff(x)
    return bool(np.all(d >= -slack) if increasing else np.all(d <= slack))


def _l2(ref, v=None, a=None):
    if v is not None:
        return float(np.sqrt(np.sum(ref.masses * np.maximum(ref.manifold.inner(ref.points, v, v), 0))))
    return float(np.sqrt(np.sum(ref.masses * a * a)))


def kappa_study(mu0: DiscreteMeasure, mu1: DiscreteMeasure, kappas: Sequence[float],
                cfg: SolverConfig | None = None, hk_planner=None, w2_planner=None,
                slack: float = 1e-9) -> StudyReport:
    """Compare HK tangents with the W2 tangent as kappa grows.

    ``hk_planner(mu0, mu1, kappa)`` and ``w2_planner(mu0, mu1)`` default to the
    Sinkhorn solvers; oracle planners can be plugged in for exact plans.
    """
    kappas = [float(k) for k in kappas]
    if any(b <= a for a, b in zip(kappas, kappas[1:])):
        raise InvalidInputError("kappa grid must be increasing")
    hk_planner = hk_planner or (lambda a, b, k: solve_hk(a, b, k, cfg)[0])
    w2_planner = w2_planner or (lambda a, b: solve_w2(a, b, cfg)[0])
    rep = StudyReport("kappa", tolerances={"slack": slack})
    w2plan = w2_planner(mu0, mu1)
    vw2 = log_w2(mu0, w2plan).v
    w2sq = float(w2plan.value) if np.isfinite(w2plan.value) else np.nan
    gaps, alphas, hks, errors = [], [], [], {}
    for k in kappas:
        try:
            plan = hk_planner(mu0, mu1, k)
            t = log_hk(mu0, plan, k)
            gaps.append(_l2(mu0, v=t.v - vw2))
            alphas.append(_l2(mu0, a=t.alpha))
            hks.append(primal_value_hk(plan, mu0, mu1, k))
        except TangentOTError as exc:
            errors[str(k)] = str(exc)
            gaps.append(np.nan)
            alphas.append(np.nan)
            hks.append(np.nan)
    rep.series = {"kappa": kappas, "v_gap": gaps, "alpha_norm": alphas,
                  "hk_sq": hks, "w2_sq": [w2sq] * len(kappas)}
    rep.flags = {
        "v_gap_nonincreasing": _monotone(gaps, False, slack),
        "alpha_norm_nonincreasing": _monotone(alphas, False, slack),
        "hk_sq_nondecreasing": _monotone(hks, True, slack),
        "hk_sq_below_w2_sq": bool(np.all(np.asarray(hks) <= w2sq + slack)),
    }
    if errors:
        rep.notes["errors"] = errors
    return rep


def regrid(mu: DiscreteMeasure, n: int, bounds) -> DiscreteMeasure:
    """Aggregate atoms into ``n`` cells per axis; each cell keeps its mass at the centroid."""
    X = mu.points
    bounds = np.asarray(bounds, float).reshape(-1, 2)
    if bounds.shape[0] != X.shape[1]:
        raise InvalidInputError("bounds do not match the dimension")
    lo, hi = bounds[:, 0], bounds[:, 1]
    idx = np.clip(np.floor((X - lo) / (hi - lo) * n).astype(int), 0, n - 1)
    flat = np.ravel_multi_index(idx.T, (n,) * X.shape[1])
    cells, inv = np.unique(flat, return_inverse=True)
    mass = np.bincount(inv, weights=mu.masses, minlength=len(cells))
    pos = np.stack([np.bincount(inv, weights=mu.masses * X[:, a], minlength=len(cells))
                    for a in range(X.shape[1])], axis=1)
    keep = mass > 0
    pos = pos[keep] / mass[keep, None]
    return DiscreteMeasure(mu.manifold, pos, mass[keep])


def _test_family(X):
    """1, x_a, x_a^2 and x_a x_b (a < b) evaluated at the points."""
    cols = [np.ones(len(X))]
    D = X.shape[1]
    cols += [X[:, a] for a in range(D)]
    cols += [X[:, a] ** 2 for a in range(D)]
    cols += [X[:, a] * X[:, b] for a in range(D) for b in range(a + 1, D)]
    return np.stack(cols, axis=1)


def momentum_moments(t) -> np.ndarray:
    """Moments of ``v mu0`` (per component) and ``alpha mu0`` against the test family."""
    ref = t.reference
    Phi = _test_family(ref.points) * ref.masses[:, None]
    v, a = _fields(t)
    return np.concatenate([(Phi.T @ v).ravel(), Phi.T @ a])


def refinement_study(mu0_fine: DiscreteMeasure, mu1_fine: DiscreteMeasure,
                     resolutions: Sequence[int], metric, cfg: SolverConfig | None = None,
                     bounds=None, planner: Planner | None = None,
                     plans: Callable[[int, DiscreteMeasure, DiscreteMeasure], TransportPlan] | None = None,
                     tol: float | None = None) -> StudyReport:
    """Momentum moments of the barycentric tangents across grid resolutions.

    The fine measures give the reference moments. For each ``N`` both
    measures are regridded to ``N`` cells per axis over ``bounds`` (default:
    joint bounding box padded by half the fine spacing), solved, and their
    moments compared with the reference (max absolute deviation).

    ``plans(N, mu0N, mu1N)`` overrides the solver, e.g. to feed prescribed
    sub-optimal plans.
    """
    metric = Metric.parse(metric, getattr(cfg, "kappa", None))
    planner = planner or default_planner(metric, cfg)
    if bounds is None:
        from scipy.spatial.distance import cdist
        P = np.unique(np.concatenate([mu0_fine.points, mu1_fine.points]), axis=0)
        pad = 0.5
        if len(P) > 1:
            D = cdist(P, P)
            np.fill_diagonal(D, np.inf)
            pad = 0.5 * float(np.median(D.min(axis=1)))
        lo, hi = P.min(axis=0) - pad, P.max(axis=0) + pad
        hi = np.where(hi > lo, hi, lo + 1.0)
        bounds = np.stack([lo, hi], axis=1)

    def moments(a, b, n=None):
        plan = plans(n, a, b) if (plans is not None and n is not None) else planner(a, b)
        return momentum_moments(log_map(a, plan, metric))

    ref = moments(mu0_fine, mu1_fine)
    devs, errors = [], {}
    for n in resolutions:
        try:
            a, b = regrid(mu0_fine, n, bounds), regrid(mu1_fine, n, bounds)
            devs.append(float(np.max(np.abs(moments(a, b, n) - ref))))
        except TangentOTError as exc:
            errors[str(n)] = str(exc)
            devs.append(np.nan)
    rep = StudyReport("refine", series={"resolution": list(map(int, resolutions)), "deviation": devs,
                                        "reference_moments": list(map(float, ref))})
    rep.flags["monotone_after_first"] = _monotone(devs[1:], False, 0.0)
    if tol is not None:
        rep.tolerances["final_deviation"] = tol
        rep.flags["final_below_tol"] = bool(np.isfinite(devs[-1]) and devs[-1] < tol)
    if errors:
        rep.notes["errors"] = errors
    return rep


# ---------------------------------------------------------------------------
# convexity probe

def symmetric_configuration(m: Manifold, a: float, b: float):
    """x0, x1 at distance a on either side of the base point along the first
    axis; y0, y1 at distance b along the second axis."""
    o = m.origin()
    e1 = np.zeros(m.ambient_dim)
    e2 = np.zeros(m.ambient_dim)
    e1[0], e2[1] = 1.0, 1.0
    x0, x1 = m.exp(o, -a * e1), m.exp(o, a * e1)
    y0, y1 = m.exp(o, -b * e2), m.exp(o, b * e2)
    return x0, x1, y0, y1


def _probe_w2(m, xs, ys, t):
    v = [[m.log(x, y) for y in ys] for x in xs]
    T = [m.exp(xs[i], (1 - t) * v[i][0] + t * v[i][1]) for i in range(2)]
    d2 = lambda p, q: float(m.dist(p, q)) ** 2
    return (d2(xs[0], T[1]) + d2(xs[1], T[0])) - (d2(xs[0], T[0]) + d2(xs[1], T[1])), np.nan


def _hk_log_to_dirac(mu, y, metric):
    dists = mu.manifold.dist(mu.points, y[None, :])
    _, p = hk_star_closed_form(mu.masses, dists, 1.0, metric.kappa)
    nu = DiscreteMeasure(mu.manifold, y[None, :], [1.0])
    return log_map(mu, TransportPlan(p[:, None], mu, nu), metric)


def _probe_hk(m, xs, ys, t, metric):
    mu = DiscreteMeasure(m, np.stack(xs), [0.5, 0.5])
    w0 = _hk_log_to_dirac(mu, ys[0], metric)
    w1 = _hk_log_to_dirac(mu, ys[1], metric)
    w = w0.combine(1 - t, w1, t)
    h = shk_to_hk(w, metric.kappa) if metric.kind == "shk" else w
    nu = exp_hk(mu, h, metric.kappa)
    k = metric.kappa
    keep = 1.0 + 0.5 * h.alpha
    A = np.diag(keep * mu.masses)
    # best plan supported on the swapped pairing: two independent Dirac problems
    d = m.pairwise_dist(mu.points, nu.points)
    c = np.cos(np.minimum(d / k, np.pi / 2))
    B = np.zeros((2, 2))
    for i in range(2):
        B[i, 1 - i] = np.sqrt(mu.masses[i] * nu.masses[1 - i]) * c[i, 1 - i]
    ea = primal_value_hk(A, mu, nu, k)
    eb = primal_value_hk(B, mu, nu, k)
    from .oracle import TinyInstance, hk_grid_search
    best, _ = hk_grid_search(TinyInstance(mu, nu), k)
    return eb - ea, ea - best


def convexity_probe(m: Manifold, x0, x1, y0, y1, metric, kappa: float | None = None,
                    t_list: Sequence[float] = tuple(np.linspace(0, 1, 11)),
                    tol: float = 1e-9, equality_tol: float = 1e-10) -> StudyReport:
    """Exchange test for interpolated tangents.

    ``mu = (delta_x0 + delta_x1)/2`` and ``nu_s = delta_{y_s}``. The tangents
    ``Log_mu(nu_0)`` and ``Log_mu(nu_1)`` are interpolated linearly and pushed
    forward. The margin compares the exchanged pairing with the pushforward
    pairing: squared distances for W2, E_kappa of the best plan on each
    pairing for HK/SHK. A negative margin means the interpolated tangent is
    not the log of its own exponential.
    """
    metric = Metric.parse(metric, kappa)
    xs = [m.point(x0), m.point(x1)]
    ys = [m.point(y0), m.point(y1)]
    margins, gaps, errors = [], [], {}
    for t in t_list:
        try:
            if metric.kind == "w2":
                mg, gp = _probe_w2(m, xs, ys, float(t))
            else:
                mg, gp = _probe_hk(m, xs, ys, float(t), metric)
        except TangentOTError as exc:
            errors[f"{t:.6g}"] = str(exc)
            mg, gp = np.nan, np.nan
        margins.append(float(mg))
        gaps.append(float(gp))
    mg = np.asarray(margins)
    fin = mg[np.isfinite(mg)]
    if fin.size and np.all(np.abs(fin) < equality_tol):
        verdict = "equality"
    elif np.all(fin >= -tol):
        verdict = "satisfied"
    else:
        verdict = "violated"
    rep = StudyReport("convexity", series={"t": list(map(float, t_list)), "margin": margins},
                      tolerances={"tol": tol, "equality_tol": equality_tol})
    if metric.kind != "w2":
        rep.series["plan_gap"] = gaps
    rep.flags = {"satisfied": verdict != "violated"}
    rep.notes["verdict"] = verdict
    rep.notes["min_margin"] = float(fin.min()) if fin.size else float("nan")
    if errors:
        rep.notes["errors"] = errors
    return rep


# ---------------------------------------------------------------------------
# regression fixtures for (non-)convergence of discretized log maps

def _block(E, start, mass, M):
    """Uniform mass on [start, start+1] sampled at M cell midpoints."""
    x = start + (np.arange(M) + 0.5) / M
    return x[:, None], np.full(M, mass / M)


def blocks_singular_study(Ns: Sequence[int], L: float = 3.0, M: int = 16,
                          kappa: float = 1.0, cfg: SolverConfig | None = None,
                          planner: Callable | None = None) -> StudyReport:
    """Two blocks exchanging all but 1/N of their mass across a distance L.

    For finite N both blocks are present on both sides and the optimal plan
    is pure Hellinger on each block, so the singular part is empty. In the
    limit the blocks are farther apart than the transport horizon, the plan
    vanishes and the whole target is singular.
    """
    from .manifold import Euclidean
    if not L > kappa * np.pi / 2 + 1:
        raise InvalidInputError("need L > kappa*pi/2 + 1")
    E = Euclidean(1)
    planner = planner or (lambda a, b: solve_hk(a, b, kappa, cfg)[0])

    def instance(w0, w1):
        xa, ma = _block(E, 0.0, 1.0, M)
        xb, mb = _block(E, L, 1.0, M)
        pts = np.concatenate([xa, xb])
        m0 = np.concatenate([w0[0] * ma, w0[1] * mb])
        m1 = np.concatenate([w1[0] * ma, w1[1] * mb])
        k0, k1 = m0 > 0, m1 > 0
        return DiscreteMeasure(E, pts[k0], m0[k0]), DiscreteMeasure(E, pts[k1], m1[k1])

    def measure(mu0, mu1):
        plan = planner(mu0, mu1)
        t = log_hk(mu0, plan, kappa)
        nrm = tangent_inner(t, t, kappa)
        return t.singular_mass, primal_value_hk(plan, mu0, mu1, kappa), nrm

    sing, hk, nrm = [], [], []
    for N in Ns:
        s, h, n = measure(*instance((1 - 1 / N, 1 / N), (1 / N, 1 - 1 / N)))
        sing.append(s)
        hk.append(h)
        nrm.append(n)
    mu0, mu1 = instance((1.0, 0.0), (0.0, 1.0))
    ls, lh, ln = measure(mu0, mu1)
    rep = StudyReport("blocks_singular", series={"N": list(map(int, Ns)), "singular_mass": sing,
                                                "hk_sq": hk, "tangent_norm_sq": nrm})
    rep.notes = {"limit_singular_mass": ls, "limit_target_mass": mu1.total_mass,
                 "limit_hk_sq": lh, "limit_tangent_norm_sq": ln}
    rep.flags["singular_discontinuity"] = bool(
        all(s == 0 for s in sing) and abs(ls - mu1.total_mass) <= 1e-12 * mu1.total_mass)
    return rep


def perturbed_plan_study(Ns: Sequence[int], M: int = 16) -> StudyReport:
    """Barycentric momentum of slightly sub-optimal plans (kappa = 1).

    mu0 = mu1 = Leb[0,1] + Leb[pi/2 - 1/N, 1 + pi/2 - 1/N]. The plan keeps
    (1 - 1/N) of the identity coupling and moves 1/N of the first block by
    pi/2 - 1/N. Its energy tends to zero, yet the momentum on the first
    block tends to 1 while the optimal limit momentum is 0.
    """
    from .manifold import Euclidean
    E = Euclidean(1)
    mom, energy = [], []
    for N in Ns:
        shift = np.pi / 2 - 1.0 / N
        xa, ma = _block(E, 0.0, 1.0, M)
        pts = np.concatenate([xa, xa + shift])
        m = np.concatenate([ma, ma])
        mu = DiscreteMeasure(E, pts, m)
        P = (1 - 1.0 / N) * np.diag(m)
        P[np.arange(M), M + np.arange(M)] += ma / N
        plan = TransportPlan(P, mu, mu)
        t = log_hk(mu, plan, 1.0)
        mom.append(float(np.sum(mu.masses[:M] * t.v[:M, 0])))
        energy.append(primal_value_hk(plan, mu, mu, 1.0))
    rep = StudyReport("perturbed_plan", series={"N": list(map(int, Ns)), "momentum_first_block": mom,
                                               "energy": energy})
    rep.notes = {"limit_momentum": 0.0, "expected_defect": 1.0}
    rep.flags["momentum_gap"] = bool(abs(mom[-1] - 1.0) < abs(mom[-1] - 0.0))
    return rep


def horizon_dirac_study(Ns: Sequence[int], tol: float = 1e-9) -> StudyReport:
    """Dirac target approaching the transport horizon (kappa = 1).

    mu0 = delta_0, mu1^N = delta_{pi/2 - 1/N}. The closed-form optimal plan
    gives v^N = sin(pi/2 - 1/N) -> 1 and alpha^N = 2(cos(pi/2 - 1/N) - 1) -> -2,
    while the limit tangent is (0, -2).
    """
    from .manifold import Euclidean
    from .oracle import hk_dirac_closed_form
    E = Euclidean(1)
    mu0 = DiscreteMeasure(E, [[0.0]], [1.0])
    vs, als, err = [], [], []
    for N in Ns:
        y = np.pi / 2 - 1.0 / N
        mu1 = DiscreteMeasure(E, [[y]], [1.0])
        _, p, _, _ = hk_dirac_closed_form(1.0, [0.0], 1.0, [y], 1.0, E)
        t = log_hk(mu0, TransportPlan(np.array([[p]]), mu0, mu1), 1.0)
        v, a = float(t.v[0, 0]), float(t.alpha[0])
        vs.append(v)
        als.append(a)
        err.append(max(abs(v - np.sin(y)), abs(a - 2 * (np.cos(y) - 1))))
    rep = StudyReport("horizon_dirac", series={"N": list(map(int, Ns)), "v": vs, "alpha": als,
                                              "closed_form_error": err},
                      tolerances={"closed_form": tol})
    rep.notes = {"limit_v": 0.0, "limit_alpha": -2.0}
    rep.flags["matches_closed_form"] = bool(max(err) <= tol)
    rep.flags["velocity_does_not_converge"] = bool(abs(vs[-1]) > 0.5)
    return rep
