import numpy as np
import pytest

from tangentot.analysis import (EmbeddingSet, Metric, blocks_singular_study, convexity_probe,
                                embed_samples, horizon_dirac_study, kappa_study,
                                momentum_moments, pca, perturbed_plan_study, refinement_study,
                                regrid, shoot, symmetric_configuration, tangent_inner)
from tangentot.errors import ConvergenceError, InvalidInputError, UnsupportedError
from tangentot.manifold import Euclidean, Hyperbolic, Sphere
from tangentot.measure import DiscreteMeasure, GridSpec
from tangentot.oracle import hk_dirac_closed_form
from tangentot.solver import SolverConfig, TransportPlan
from tangentot.tangent import HkTangent, ShkTangent, W2Tangent

E1 = Euclidean(1)
E2 = Euclidean(2)


def dirac(x, m=1.0):
    return DiscreteMeasure(E1, [[float(x)]], [m])


def dirac_planner(kappa):
    def plan(a, b, k=kappa):
        _, p, _, _ = hk_dirac_closed_form(a.masses[0], a.points[0], b.masses[0], b.points[0], k, E1)
        return TransportPlan(np.array([[p]]), a, b)
    return plan


def w2_dirac(a, b):
    return TransportPlan(np.array([[a.masses[0]]]), a, b,
                         value=float(a.masses[0] * np.sum((a.points[0] - b.points[0]) ** 2)))


# ---- metric descriptor

def test_metric_parse():
    assert Metric.parse("HK", 2.0) == Metric("hk", 2.0)
    assert Metric.parse("w2", 5.0).kappa is None
    with pytest.raises(InvalidInputError):
        Metric("hk")
    with pytest.raises(InvalidInputError):
        Metric("l1", 1.0)


# ---- embeddings and PCA

def test_embed_reference_gives_zero_tangent():
    rng = np.random.default_rng(0)
    ref = DiscreteMeasure(E2, rng.random((6, 2)), np.full(6, 1 / 6))
    eps = 1e-4
    emb = embed_samples(ref, [ref], Metric("hk", 1.0), SolverConfig(epsilon_target=eps))
    t = emb.embeddings[0]
    assert np.abs(t.v).max() < 10 * eps and np.abs(t.alpha).max() < 10 * eps


def test_embed_error_carries_sample_index():
    ref = dirac(0.0)

    def bad(a, b):
        if b.points[0, 0] > 1:
            raise ConvergenceError("nope")
        return dirac_planner(1.0)(a, b)

    with pytest.raises(ConvergenceError) as ei:
        embed_samples(ref, [dirac(0.5), dirac(2.0)], Metric("hk", 1.0), planner=bad)
    assert ei.value.sample_index == 1
    assert str(ei.value).startswith("sample 1:")


def test_embed_shk_requires_probability():
    with pytest.raises(InvalidInputError):
        embed_samples(dirac(0.0), [dirac(1.0, 2.0)], Metric("shk", 1.0))


def test_embed_workers_match_serial():
    ref = dirac(2.5)
    samples = [dirac(x) for x in np.linspace(0, 5, 7)]
    a = embed_samples(ref, samples, Metric("hk", 3.0), planner=dirac_planner(3.0))
    b = embed_samples(ref, samples, Metric("hk", 3.0), planner=dirac_planner(3.0), workers=3)
    for s, t in zip(a.embeddings, b.embeddings):
        np.testing.assert_array_equal(s.v, t.v)
        np.testing.assert_array_equal(s.alpha, t.alpha)


def test_pca_antipodal_pair():
    ref = DiscreteMeasure(E2, [[0.0, 0.0], [1.0, 0.0]], [0.3, 0.7])
    w = np.array([[1.0, 2.0], [-0.5, 0.25]])
    emb = EmbeddingSet(ref, Metric("w2"), [W2Tangent(ref, w), W2Tangent(ref, -w)])
    res = pca(emb)
    norm2 = tangent_inner(W2Tangent(ref, w), W2Tangent(ref, w))
    assert res.eigenvalues[0] == pytest.approx(norm2, rel=1e-12)
    assert len(res.modes) == 1
    assert abs(res.eigenvalues[1]) < 1e-12 * norm2
    np.testing.assert_allclose(res.mean.v, 0.0, atol=1e-15)
    np.testing.assert_allclose(np.abs(res.projections[:, 0]), np.sqrt(norm2), rtol=1e-12)


def test_pca_modes_orthonormal_and_reconstruct():
    rng = np.random.default_rng(1)
    ref = DiscreteMeasure(E2, rng.random((5, 2)), rng.uniform(0.5, 1, 5))
    E = [HkTangent(ref, rng.normal(size=(5, 2)), rng.normal(size=5)) for _ in range(4)]
    res = pca(EmbeddingSet(ref, Metric("hk", 1.5), E))
    G = np.array([[tangent_inner(a, b, 1.5) for b in res.modes] for a in res.modes])
    np.testing.assert_allclose(G, np.eye(len(res.modes)), atol=1e-10)
    # projections recover the centred embeddings
    for i, t in enumerate(E):
        v = res.mean.v + sum(res.projections[i, j] * m.v for j, m in enumerate(res.modes))
        np.testing.assert_allclose(v, t.v, atol=1e-10)


def test_pca_errors():
    ref = dirac(0.0)
    sing = HkTangent(ref, [[0.0]], [0.0], dirac(9.0))
    with pytest.raises(UnsupportedError):
        pca(EmbeddingSet(ref, Metric("hk", 1.0), [sing, sing]))
    with pytest.raises(InvalidInputError):
        pca(EmbeddingSet(ref, Metric("hk", 1.0), [HkTangent(ref, [[0.0]], [0.0])]))


def _dirac_line(kind, kappa=6.0, n=40):
    ref = dirac(2.5)
    samples = [dirac(x) for x in np.linspace(0, 5, n)]
    return embed_samples(ref, samples, Metric(kind, kappa), planner=dirac_planner(kappa))


def test_dirac_line_hk_two_modes_on_circle():
    kappa = 6.0
    emb = _dirac_line("hk", kappa)
    res = pca(emb)
    lam = res.eigenvalues
    assert np.sum(lam > 1e-4 * lam[0]) == 2
    # analytic embedding: (kappa sin th, kappa (cos th - 1)) is a circle of
    # radius kappa about (v, alpha) = (0, -2)
    ref = emb.reference
    centre = HkTangent(ref, [[0.0]], [-2.0])
    c = np.array([tangent_inner(centre.combine(1.0, res.mean, -1.0), m, kappa) for m in res.modes[:2]])
    r = np.linalg.norm(res.projections[:, :2] - c, axis=1)
    assert np.max(np.abs(r - kappa)) < 1e-6


def test_dirac_line_shk_is_one_dimensional():
    res = pca(_dirac_line("shk"))
    assert res.eigenvalues[1] / res.eigenvalues[0] < 1e-6


# ---- shooting

def test_shoot_examples():
    ref = DiscreteMeasure(E1, [[0.0], [1.0]], [0.5, 0.5])
    mean = HkTangent(ref, [[0.2], [0.1]], [0.1, -0.1])
    zero = HkTangent(ref, np.zeros((2, 1)), np.zeros(2))
    sh = shoot(ref, mean, zero, 1.0, 5, "hk", kappa=1.0)
    assert len(sh) == 5 and sh.cut == []
    for mu in sh.measures[1:]:
        np.testing.assert_allclose(mu.points, sh.measures[0].points)
        np.testing.assert_allclose(mu.masses, sh.measures[0].masses)
    one = shoot(ref, mean, HkTangent(ref, [[1.0], [0.0]], [0.0, 1.0]), 0.0, 9, "hk", kappa=1.0)
    assert one.times == [0.0] and len(one) == 1


def test_shoot_records_cut_and_rasters():
    ref = DiscreteMeasure(E2, [[0.0, 0.0]], [1.0])
    mean = HkTangent(ref, [[0.0, 0.0]], [0.0])
    mode = HkTangent(ref, [[0.1, 0.0]], [1.0])
    grid = GridSpec([(-1, 1), (-1, 1)], (8, 8))
    sh = shoot(ref, mean, mode, 3.0, 7, "hk", kappa=1.0, grid=grid)
    assert sh.cut == [-3.0]  # alpha = -3 < -2
    assert len(sh.rasters) == len(sh.measures) == 6
    for img, mu in zip(sh.rasters, sh.measures):
        assert img.values.sum() == pytest.approx(mu.total_mass)


def test_shoot_shk_norm_beyond_range_is_cut():
    ref = DiscreteMeasure(E1, [[0.0]], [1.0])
    mean = ShkTangent(ref, [[0.0]], [0.0])
    mode = ShkTangent(ref, [[1.0]], [0.0])
    sh = shoot(ref, mean, mode, 2.0, 5, "shk", kappa=1.0)
    assert sh.cut == [-2.0, 2.0]
    for mu in sh.measures:
        assert mu.total_mass == pytest.approx(1.0)


# ---- kappa study

KAPPAS = [2, 5, 10, 20, 50]


def test_kappa_study_oracle_path():
    rep = kappa_study(dirac(0.0), dirac(1.0), KAPPAS, hk_planner=dirac_planner(None),
                      w2_planner=w2_dirac)
    k = np.asarray(KAPPAS, float)
    np.testing.assert_allclose(rep.series["v_gap"], np.abs(k * np.sin(1 / k) - 1), atol=1e-6)
    np.testing.assert_allclose(rep.series["alpha_norm"], 2 * (1 - np.cos(1 / k)), atol=1e-6)
    assert rep.passed
    i = KAPPAS.index(10)
    assert rep.series["v_gap"][i] == pytest.approx(1.666e-3, abs=1e-6)
    assert rep.series["alpha_norm"][i] == pytest.approx(9.99e-3, abs=1e-5)
    assert rep.series["hk_sq"][-1] < rep.series["w2_sq"][0] == 1.0


def test_kappa_study_sinkhorn_path():
    rep = kappa_study(dirac(0.0), dirac(1.0), KAPPAS, cfg=SolverConfig(epsilon_target=1e-4))
    k = np.asarray(KAPPAS, float)
    np.testing.assert_allclose(rep.series["v_gap"], np.abs(k * np.sin(1 / k) - 1), atol=1e-3)
    np.testing.assert_allclose(rep.series["alpha_norm"], 2 * (1 - np.cos(1 / k)), atol=1e-3)
    assert rep.flags["hk_sq_nondecreasing"]


def test_kappa_study_rejects_unsorted():
    with pytest.raises(InvalidInputError):
        kappa_study(dirac(0.0), dirac(1.0), [5, 2])


# ---- refinement

def test_regrid_preserves_mass_and_mean():
    rng = np.random.default_rng(3)
    mu = DiscreteMeasure(E2, rng.random((200, 2)), rng.random(200))
    g = regrid(mu, 4, [(0, 1), (0, 1)])
    assert len(g) <= 16
    assert g.total_mass == pytest.approx(mu.total_mass)
    np.testing.assert_allclose(g.masses @ g.points, mu.masses @ mu.points, atol=1e-12)


def test_momentum_moments_linear():
    ref = DiscreteMeasure(E1, [[0.0], [1.0], [2.0]], [0.2, 0.3, 0.5])
    t1 = HkTangent(ref, [[1.0], [0.0], [2.0]], [0.0, 1.0, -1.0])
    t2 = HkTangent(ref, [[0.5], [1.0], [0.0]], [1.0, 0.0, 0.0])
    np.testing.assert_allclose(momentum_moments(t1.combine(2.0, t2, 3.0)),
                               2 * momentum_moments(t1) + 3 * momentum_moments(t2))


def test_refinement_self_is_zero():
    x = np.linspace(0, 4, 256)[:, None]
    w = np.exp(-((x[:, 0] - 1.0) ** 2) / 0.05) + np.exp(-((x[:, 0] - 2.5) ** 2) / 0.05)
    mu = DiscreteMeasure(E1, x, w / w.sum())
    eps = 1e-3
    rep = refinement_study(mu, mu, [16, 32, 64], Metric("hk", 1.0),
                           SolverConfig(epsilon_target=eps, kappa=1.0), bounds=[(0, 4)])
    assert np.all(np.asarray(rep.series["deviation"]) < 10 * eps)


def test_refinement_fed_plans():
    # prescribed identity plans on every level give zero momentum everywhere
    x = np.linspace(0, 1, 32)[:, None]
    mu = DiscreteMeasure(E1, x, np.full(32, 1 / 32))
    plans = lambda n, a, b: TransportPlan(np.diag(a.masses), a, b)
    rep = refinement_study(mu, mu, [4, 8], Metric("w2"), plans=plans, bounds=[(0, 1)],
                           planner=lambda a, b: TransportPlan(np.diag(a.masses), a, b), tol=1e-12)
    assert rep.series["deviation"] == [0.0, 0.0]
    assert rep.passed


# ---- convexity probe

def _probe(m, metric, kappa=None):
    return convexity_probe(m, *symmetric_configuration(m, 1.0, 1.0), metric, kappa)


def test_convexity_euclidean_w2_equality():
    rep = _probe(E2, "w2")
    assert rep.notes["verdict"] == "equality"
    assert np.all(np.abs(rep.series["margin"]) < 1e-10)


def test_convexity_sphere_w2_satisfied():
    for r in (1.0, 1.5):
        rep = _probe(Sphere(r), "w2")
        assert min(rep.series["margin"]) >= -1e-9


def test_convexity_hyperbolic_w2_violated():
    rep = _probe(Hyperbolic(2), "w2")
    assert rep.notes["verdict"] == "violated"
    assert min(rep.series["margin"]) < 0


def test_convexity_hk_sphere_flags():
    assert _probe(Sphere(1.0), "hk", 1.0).flags["satisfied"]
    assert not _probe(Sphere(1.5), "hk", 1.0).flags["satisfied"]


def test_convexity_hk_plan_gap_nonnegative():
    rep = _probe(Sphere(1.5), "hk", 1.0)
    assert np.all(np.asarray(rep.series["plan_gap"]) >= -1e-9)


# ---- regression fixtures

def test_blocks_singular_discontinuity():
    rep = blocks_singular_study([2, 4, 8], M=4, planner=None,
                                cfg=SolverConfig(epsilon_target=1e-3))
    assert rep.series["singular_mass"] == [0.0, 0.0, 0.0]
    assert rep.notes["limit_singular_mass"] == pytest.approx(rep.notes["limit_target_mass"])
    assert rep.flags["singular_discontinuity"]


def test_blocks_requires_separation():
    with pytest.raises(InvalidInputError):
        blocks_singular_study([2], L=2.0)


def test_perturbed_plan_momentum_gap():
    rep = perturbed_plan_study([4, 16, 64, 256])
    mom = np.asarray(rep.series["momentum_first_block"])
    assert rep.flags["momentum_gap"]
    assert abs(mom[-1] - 1.0) < 0.02
    assert np.all(np.diff(rep.series["energy"]) < 0)


def test_horizon_dirac_closed_form():
    rep = horizon_dirac_study([2, 10, 100, 1000])
    assert rep.passed
    assert max(rep.series["closed_form_error"]) <= 1e-9
    assert rep.series["alpha"][-1] == pytest.approx(-2.0, abs=1e-2)
