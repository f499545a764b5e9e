import numpy as np
import pytest
from hypothesis import given, strategies as st

from tangentot.errors import InvalidInputError
from tangentot.manifold import Euclidean, Sphere
from tangentot.measure import (DiscreteMeasure, GridSpec, chart_coords, disk, fibonacci_cap,
                               gen_disk_box, gen_disk_line, gen_sphere_caps, normalize,
                               rasterize, total_mass)

E2 = Euclidean(2)


def test_total_mass_examples():
    assert total_mass(DiscreteMeasure(E2, [[0, 0], [1, 1]], [0.5, 0.5])) == 1.0
    assert total_mass(DiscreteMeasure.empty(E2)) == 0.0
    assert total_mass(DiscreteMeasure(E2, np.zeros((3, 2)), [1, 2, 3])) == 6.0


def test_normalize_examples():
    mu = normalize(DiscreteMeasure(E2, [[0, 0], [1, 1]], [2, 2]))
    np.testing.assert_allclose(mu.masses, [0.5, 0.5])
    np.testing.assert_allclose(normalize(mu).masses, mu.masses)
    assert normalize(DiscreteMeasure(E2, [[3, 4]], [7.0])).total_mass == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(InvalidInputError):
        normalize(DiscreteMeasure(E2, [[0, 0]], [0.0]))


def test_invalid_measures():
    with pytest.raises(InvalidInputError):
        DiscreteMeasure(E2, [[0, 0]], [-1.0])
    with pytest.raises(InvalidInputError):
        DiscreteMeasure(E2, [[0, 0], [1, 1]], [1.0])
    with pytest.raises(InvalidInputError):
        DiscreteMeasure(E2, [[0, np.nan]], [1.0])


def test_measure_is_immutable():
    mu = DiscreteMeasure(E2, [[0, 0]], [1.0])
    with pytest.raises(ValueError):
        mu.masses[0] = 2.0


def test_sphere_points_projected():
    mu = DiscreteMeasure(Sphere(2.0), [[0, 0, 5.0]], [1.0])
    np.testing.assert_allclose(mu.points, [[0, 0, 2.0]])


def test_disk_line_generator():
    samples = gen_disk_line(5.0, 0.2, 6, seed=3)
    assert len(samples) == 6
    for s in samples:
        assert s.total_mass == pytest.approx(1.0, abs=1e-12)
        c = s.points.mean(axis=0)
        assert 0.2 - 0.05 <= c[0] <= 4.8 + 0.05 and abs(c[1]) < 0.05
        assert np.all(np.linalg.norm(s.points - c, axis=1) <= 0.2 + 0.05)
    assert len(gen_disk_line(5.0, 0.2, 1, seed=0)) == 1
    again = gen_disk_line(5.0, 0.2, 6, seed=3)
    for a, b in zip(samples, again):
        np.testing.assert_array_equal(a.points, b.points)
    with pytest.raises(InvalidInputError):
        gen_disk_line(0.3, 0.2, 2, seed=0)


def test_disk_box_generator():
    samples = gen_disk_box(5.0, 0.3, 0.7, 5, seed=1)
    for s in samples:
        assert s.total_mass == pytest.approx(1.0, abs=1e-12)
        c = s.points.mean(axis=0)
        assert np.all((c > 0.6) & (c < 4.4))
    same = gen_disk_box(5.0, 0.4, 0.4, 4, seed=2, h=0.05)
    for s in same:
        r = np.linalg.norm(s.points - s.points.mean(axis=0), axis=1).max()
        assert 0.35 < r <= 0.4 + 0.05  # centroid within one lattice step of the center
    with pytest.raises(InvalidInputError):
        gen_disk_box(5.0, 0.7, 0.3, 2, seed=0)


def test_disk_lattice_is_fixed():
    a = disk((1.0, 1.0), 0.3, 0.1)
    b = disk((1.05, 1.0), 0.3, 0.1)
    for mu in (a, b):
        k = mu.points / 0.1 - 0.5
        np.testing.assert_allclose(k, np.round(k), atol=1e-9)


def test_sphere_caps():
    ref, samples = gen_sphere_caps(1.0, 0.3, 4, seed=0)
    c = ref.points.mean(axis=0)
    np.testing.assert_allclose(c[:2], 0.0, atol=1e-2)
    assert c[2] > 0.9
    for s in samples:
        assert s.total_mass == pytest.approx(1.0, abs=1e-12)
        assert abs(s.points.mean(axis=0)[2]) < 1e-2
    assert gen_sphere_caps(1.0, 0.3, 0, seed=0)[1] == []
    with pytest.raises(InvalidInputError):
        gen_sphere_caps(1.0, 2.0, 1, seed=0)
    cap = fibonacci_cap(2.0, 0.5, 100)
    assert np.all(cap.points[:, 2] >= 2.0 * np.cos(0.5) - 1e-12)


def test_rasterize_examples():
    g = GridSpec([(0, 4), (0, 4)], (4, 4))
    img = rasterize(DiscreteMeasure(E2, [[1.5, 2.5]], [0.7]), g)
    assert np.count_nonzero(img.values) == 1 and img.values[1, 2] == pytest.approx(0.7)
    img = rasterize(DiscreteMeasure(E2, [[1.5, 2.5], [1.5, 2.5]], [0.3, 0.3]), g)
    assert img.values[1, 2] == pytest.approx(0.6)
    img = rasterize(DiscreteMeasure(E2, [[10.0, 2.5]], [1.0]), g)
    assert img.clamped == 1 and img.total == pytest.approx(1.0)


def test_rasterize_blur_conserves_interior_mass(rng):
    g = GridSpec([(0, 10), (0, 10)], (50, 50))
    mu = DiscreteMeasure(E2, rng.uniform(4, 6, size=(40, 2)), rng.random(40))
    img = rasterize(mu, g, blur_sigma=0.3)
    assert img.total == pytest.approx(mu.total_mass, rel=1e-6)


@given(st.lists(st.tuples(st.floats(0, 5), st.floats(0, 5), st.floats(0, 3)), min_size=1, max_size=20),
       st.floats(0, 3), st.floats(0, 3))
def test_rasterize_mass_and_linearity(atoms, a, b):
    g = GridSpec([(0, 5), (0, 5)], (7, 9))
    P = np.array([[x, y] for x, y, _ in atoms])
    m = np.array([w for _, _, w in atoms])
    mu = DiscreteMeasure(E2, P, m)
    nu = DiscreteMeasure(E2, P[::-1] * 0.5, m[::-1])
    assert rasterize(mu, g).total == pytest.approx(mu.total_mass, rel=1e-6, abs=1e-12)
    lhs = rasterize(mu.scaled(a) + nu.scaled(b), g).values
    rhs = a * rasterize(mu, g).values + b * rasterize(nu, g).values
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_chart_coords_sphere():
    S = Sphere(2.0)
    mu = DiscreteMeasure(S, [[2, 0, 0], [0, 2, 0]], [1, 1])
    np.testing.assert_allclose(chart_coords(mu), [[0, 0], [np.pi, 0]], atol=1e-12)
