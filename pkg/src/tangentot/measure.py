"""Discrete measures, dataset generators and rasterization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter1d

from .errors import InvalidInputError
from .manifold import Euclidean, Manifold, Sphere


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Weighted point cloud ``sum_i masses[i] * delta_{points[i]}``.

    Parameters
    ----------
    manifold : Manifold
    points : array_like, shape (k, D)
        Ambient coordinates, projected onto the manifold on construction.
    masses : array_like, shape (k,)
        Nonnegative weights.
    """

    manifold: Manifold
    points: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        D = self.manifold.ambient_dim
        pts = np.asarray(self.points, dtype=float)
        if pts.size == 0:
            pts = pts.reshape(0, D)
        if pts.ndim == 1 and D == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[1] != D:
            raise InvalidInputError(f"points must have shape (k, {D}), got {pts.shape}")
        m = np.asarray(self.masses, dtype=float).reshape(-1)
        if m.shape[0] != pts.shape[0]:
            raise InvalidInputError("points and masses have different lengths")
        if np.any(~np.isfinite(m)) or np.any(m < 0):
            raise InvalidInputError("masses must be finite and nonnegative")
        if np.any(~np.isfinite(pts)):
            raise InvalidInputError("points must be finite")
        pts = self.manifold.project(pts) if len(pts) else pts
        pts.setflags(write=False)
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "masses", m)

    def __len__(self):
        return len(self.masses)

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.masses))

    def normalize(self) -> "DiscreteMeasure":
        return normalize(self)

    def scaled(self, factor: float) -> "DiscreteMeasure":
        return DiscreteMeasure(self.manifold, self.points, self.masses * float(factor))

    def subset(self, mask) -> "DiscreteMeasure":
        return DiscreteMeasure(self.manifold, self.points[mask], self.masses[mask])

    def __add__(self, other: "DiscreteMeasure") -> "DiscreteMeasure":
        """Concatenation of atoms (sum of measures)."""
        if self.manifold != other.manifold:
            raise InvalidInputError("cannot add measures on different manifolds")
        return DiscreteMeasure(
            self.manifold,
            np.concatenate([self.points, other.points]),
            np.concatenate([self.masses, other.masses]),
        )

    @classmethod
    def empty(cls, manifold: Manifold) -> "DiscreteMeasure":
        return cls(manifold, np.zeros((0, manifold.ambient_dim)), np.zeros(0))

    @classmethod
    def dirac(cls, manifold: Manifold, x, mass: float = 1.0) -> "DiscreteMeasure":
        return cls(manifold, np.asarray(x, dtype=float).reshape(1, -1), [mass])


def total_mass(mu: DiscreteMeasure) -> float:
    return mu.total_mass


def normalize(mu: DiscreteMeasure) -> DiscreteMeasure:
    """Rescale to a probability measure."""
    tot = mu.total_mass
    if not tot > 0:
        raise InvalidInputError("cannot normalize a zero measure")
    return DiscreteMeasure(mu.manifold, mu.points, mu.masses / tot)


# ---------------------------------------------------------------------------
# dataset generators

def disk(center, radius: float, h: float) -> DiscreteMeasure:
    """Uniform probability measure on a disk, sampled on the lattice (h*Z + h/2)^2.

    The lattice is fixed (it does not move with the center), so disks at
    different positions carry slightly different atom counts.
    """
    if not radius > 0 or not h > 0:
        raise InvalidInputError("radius and spacing must be positive")
    c = np.asarray(center, dtype=float)
    lo = np.floor((c - radius) / h - 0.5) - 1
    hi = np.ceil((c + radius) / h - 0.5) + 1
    gx = (np.arange(lo[0], hi[0] + 1) + 0.5) * h
    gy = (np.arange(lo[1], hi[1] + 1) + 0.5) * h
    X, Y = np.meshgrid(gx, gy, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel()], axis=1)
    inside = np.sum((pts - c) ** 2, axis=1) <= radius ** 2
    pts = pts[inside]
    if len(pts) == 0:
        raise InvalidInputError("grid spacing too coarse for the disk radius")
    return DiscreteMeasure(Euclidean(2), pts, np.full(len(pts), 1.0 / len(pts)))


def gen_disk_line(L: float, R: float, count: int, seed: int, h: float | None = None):
    """Disks of radius R with centers uniform on the segment [R, L-R] x {0}.

    Returns
    -------
    list of DiscreteMeasure
    """
    if not (R > 0 and L > 2 * R):
        raise InvalidInputError("need R > 0 and L > 2R")
    if count < 1:
        raise InvalidInputError("count must be >= 1")
    h = R / 6.0 if h is None else float(h)
    rng = np.random.default_rng(seed)
    xs = rng.uniform(R, L - R, size=count)
    return [disk((x, 0.0), R, h) for x in xs]


def disk_line_reference(L: float, R: float, h: float | None = None) -> DiscreteMeasure:
    """Disk of radius R centered at the middle of the segment."""
    return disk((0.5 * L, 0.0), R, R / 6.0 if h is None else h)


def gen_disk_box(L: float, Rmin: float, Rmax: float, count: int, seed: int,
                 h: float | None = None):
    """Disks with radius ~ U[Rmin, Rmax] and center ~ U[Rmax, L-Rmax]^2."""
    if not (0 < Rmin <= Rmax and L > 2 * Rmax):
        raise InvalidInputError("need 0 < Rmin <= Rmax and L > 2 Rmax")
    if count < 1:
        raise InvalidInputError("count must be >= 1")
    h = Rmin / 6.0 if h is None else float(h)
    rng = np.random.default_rng(seed)
    radii = rng.uniform(Rmin, Rmax, size=count)
    centers = rng.uniform(Rmax, L - Rmax, size=(count, 2))
    return [disk(c, r, h) for c, r in zip(centers, radii)]


def disk_box_reference(L: float, R: float = 0.5, h: float | None = None) -> DiscreteMeasure:
    return disk((0.5 * L, 0.5 * L), R, R / 6.0 if h is None else h)


def fibonacci_cap(r: float, cap_angle: float, n: int = 200, center=None) -> DiscreteMeasure:
    """Uniform probability measure on a spherical cap via Fibonacci sampling.

    About ``n`` points fall inside the cap. The cap is centered at the north
    pole and rotated to ``center`` (an ambient point) if given.
    """
    if not 0 < cap_angle < np.pi / 2:
        raise InvalidInputError("cap angle must lie in (0, pi/2)")
    frac = 0.5 * (1.0 - np.cos(cap_angle))
    total = max(int(np.ceil(n / frac)), n)
    i = np.arange(total) + 0.5
    z = 1.0 - 2.0 * i / total
    keep = z >= np.cos(cap_angle)
    z = z[keep]
    phi = (np.pi * (3.0 - np.sqrt(5.0)) * i[keep]) % (2 * np.pi)
    rho = np.sqrt(np.maximum(1.0 - z * z, 0.0))
    pts = np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)
    if center is not None:
        pts = pts @ _rotation_from_north(np.asarray(center, float) / np.linalg.norm(center)).T
    S = Sphere(r)
    return DiscreteMeasure(S, r * pts, np.full(len(pts), 1.0 / len(pts)))


def _rotation_from_north(c):
    """Rotation matrix taking (0,0,1) to the unit vector c."""
    n = np.array([0.0, 0.0, 1.0])
    axis = np.cross(n, c)
    s = np.linalg.norm(axis)
    cth = float(np.dot(n, c))
    if s < 1e-15:
        return np.eye(3) if cth > 0 else np.diag([1.0, -1.0, -1.0])
    k = axis / s
    K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + s * K + (1 - cth) * K @ K


def gen_sphere_caps(r: float, cap_angle: float, count: int, seed: int, n: int = 200):
    """Reference cap at the north pole plus caps centered on random equator points.

    Returns
    -------
    reference : DiscreteMeasure
    samples : list of DiscreteMeasure
    """
    if not r > 0:
        raise InvalidInputError("radius must be positive")
    if not 0 < cap_angle < np.pi / 2:
        raise InvalidInputError("cap angle must lie in (0, pi/2)")
    if count < 0:
        raise InvalidInputError("count must be >= 0")
    rng = np.random.default_rng(seed)
    ref = fibonacci_cap(r, cap_angle, n)
    lon = rng.uniform(0.0, 2 * np.pi, size=count)
    samples = [
        fibonacci_cap(r, cap_angle, n, center=(np.cos(a), np.sin(a), 0.0)) for a in lon
    ]
    return ref, samples


# ---------------------------------------------------------------------------
# rasterization

@dataclass(frozen=True)
class GridSpec:
    """Regular grid of cells; ``bounds[a] = (lo, hi)`` and ``resolution[a]`` cells on axis a."""

    bounds: tuple
    resolution: tuple

    def __post_init__(self):
        b = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        r = tuple(int(n) for n in self.resolution)
        if len(b) != len(r):
            raise InvalidInputError("bounds and resolution differ in length")
        if any(n < 1 for n in r):
            raise InvalidInputError("resolution must be >= 1")
        if any(not hi > lo for lo, hi in b):
            raise InvalidInputError("empty grid bounds")
        object.__setattr__(self, "bounds", b)
        object.__setattr__(self, "resolution", r)

    @property
    def spacing(self):
        return tuple((hi - lo) / n for (lo, hi), n in zip(self.bounds, self.resolution))

    def centers(self, axis: int) -> np.ndarray:
        lo, _ = self.bounds[axis]
        return lo + (np.arange(self.resolution[axis]) + 0.5) * self.spacing[axis]

    @classmethod
    def around(cls, coords, h: float, margin: float = 0.0) -> "GridSpec":
        """Grid with spacing ``h`` covering the chart coordinates plus a margin."""
        coords = np.asarray(coords, float)
        lo = coords.min(axis=0) - margin - 0.5 * h
        hi = coords.max(axis=0) + margin + 0.5 * h
        res = np.maximum(np.ceil((hi - lo) / h).astype(int), 1)
        hi = lo + res * h
        return cls(tuple(zip(lo, hi)), tuple(res))


@dataclass
class RasterImage:
    grid: GridSpec
    values: np.ndarray
    clamped: int = 0

    @property
    def total(self) -> float:
        return float(self.values.sum())


def chart_coords(mu: DiscreteMeasure) -> np.ndarray:
    """Planar chart used for rasterization.

    Euclidean: identity. Sphere: equirectangular (longitude, latitude) in
    units of arc length. Hyperbolic: spatial coordinates of the hyperboloid.
    """
    m = mu.manifold
    P = mu.points
    if m.kind == "euclidean":
        return P
    if m.kind == "sphere":
        r = m.radius
        lon = np.arctan2(P[:, 1], P[:, 0])
        lat = np.arcsin(np.clip(P[:, 2] / r, -1.0, 1.0))
        return np.stack([r * lon, r * lat], axis=1)
    return P[:, :-1]


def rasterize(mu: DiscreteMeasure, grid: GridSpec, blur_sigma: float = 0.0) -> RasterImage:
    """Bilinear (multilinear) splatting followed by a truncated Gaussian blur.

    Parameters
    ----------
    blur_sigma : float
        Standard deviation in chart units; the kernel is truncated at 3 sigma.

    Notes
    -----
    Atoms outside the grid are clamped to the boundary and counted in
    ``RasterImage.clamped``.
    """
    X = chart_coords(mu)
    nd = len(grid.resolution)
    if X.shape[1] != nd:
        raise InvalidInputError(f"grid has {nd} axes but chart has {X.shape[1]}")
    values = np.zeros(grid.resolution)
    clamped = 0
    idx0, w0 = [], []
    outside = np.zeros(len(X), dtype=bool)
    for a in range(nd):
        lo, hi = grid.bounds[a]
        outside |= (X[:, a] < lo) | (X[:, a] > hi)
        u = (X[:, a] - lo) / grid.spacing[a] - 0.5
        u = np.clip(u, 0.0, grid.resolution[a] - 1)
        i = np.minimum(np.floor(u).astype(int), max(grid.resolution[a] - 2, 0))
        f = u - i
        if grid.resolution[a] == 1:
            i = np.zeros_like(i)
            f = np.zeros_like(f)
        idx0.append(i)
        w0.append(f)
    clamped = int(outside.sum())
    # every corner of the cell gets its multilinear weight
    for corner in range(2 ** nd):
        w = mu.masses.copy()
        idx = []
        for a in range(nd):
            bit = (corner >> a) & 1
            w = w * (w0[a] if bit else 1.0 - w0[a])
            idx.append(np.minimum(idx0[a] + bit, grid.resolution[a] - 1))
        np.add.at(values, tuple(idx), w)
    if blur_sigma > 0:
        for a in range(nd):
            values = gaussian_filter1d(values, blur_sigma / grid.spacing[a], axis=a,
                                       mode="constant", truncate=3.0)
    return RasterImage(grid, values, clamped)
