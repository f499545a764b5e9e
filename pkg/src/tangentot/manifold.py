"""Base-space geometry for Euclidean space, round spheres and hyperbolic space.

Points and tangent vectors are stored in ambient coordinates as numpy
arrays whose last axis has length ``ambient_dim``. Every method broadcasts
over the leading axes, so a single call can process whole point clouds.

The sphere of radius ``r`` lives in R^{n+1} with ``|x| = r``. Hyperbolic
space uses the hyperboloid (Minkowski) model in R^{n+1}: the last
coordinate is time-like and points satisfy ``Z = sqrt(1 + |spatial|^2)``.
"""

from __future__ import annotations

import numpy as np

from .errors import CutLocusError, InvalidInputError

CUT_LOCUS_TOL = 1e-9


def _as_array(x, dim: int, name: str = "point") -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0 or arr.shape[-1] != dim:
        raise InvalidInputError(
            f"{name} has trailing dimension {arr.shape[-1] if arr.ndim else 0}, expected {dim}"
        )
    return arr


def _norm(v):
    return np.sqrt(np.sum(v * v, axis=-1))


class Manifold:
    """Common interface. Subclasses implement the geometry."""

    kind = "abstract"
    dim: int
    ambient_dim: int

    # -- construction helpers -------------------------------------------------
    def point(self, coords) -> np.ndarray:
        """Validate coordinates and project them onto the manifold."""
        return self.project(_as_array(coords, self.ambient_dim))

    def project(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def to_tangent(self, x, v) -> np.ndarray:
        """Orthogonal projection of an ambient vector onto T_x."""
        raise NotImplementedError

    def origin(self) -> np.ndarray:
        """A distinguished base point (0, north pole, hyperboloid apex)."""
        raise NotImplementedError

    def descriptor(self) -> dict:
        return {"manifold": self.kind, "dim": self.ambient_dim, "radius": 1.0}

    # -- geometry ---------------------------------------------------------------
    def inner(self, x, u, v) -> np.ndarray:
        raise NotImplementedError

    def norm(self, x, v) -> np.ndarray:
        return np.sqrt(np.maximum(self.inner(x, v, v), 0.0))

    def dist(self, x, y) -> np.ndarray:
        raise NotImplementedError

    def log(self, x, y) -> np.ndarray:
        raise NotImplementedError

    def exp(self, x, v) -> np.ndarray:
        raise NotImplementedError

    def geodesic(self, x, y, t) -> np.ndarray:
        """Point at fraction ``t`` of the geodesic from x to y."""
        x = _as_array(x, self.ambient_dim)
        t = np.asarray(t, dtype=float)
        v = self.log(x, y)
        return self.exp(x, t[..., None] * v if t.ndim else t * v)

    def pairwise_dist(self, X, Y) -> np.ndarray:
        """Distance matrix of shape (len(X), len(Y))."""
        X = _as_array(X, self.ambient_dim)
        Y = _as_array(Y, self.ambient_dim)
        return self.dist(X[:, None, :], Y[None, :, :])

    def __eq__(self, other):
        return type(self) is type(other) and self.descriptor() == other.descriptor()

    def __hash__(self):
        return hash(tuple(sorted(self.descriptor().items())))

    def __repr__(self):
        return f"{type(self).__name__}({self.descriptor()})"


class Euclidean(Manifold):
    """Flat space R^n."""

    kind = "euclidean"

    def __init__(self, dim: int = 1):
        if int(dim) < 1:
            raise InvalidInputError("dimension must be >= 1")
        self.dim = self.ambient_dim = int(dim)

    def project(self, x):
        return np.array(x, dtype=float)

    def to_tangent(self, x, v):
        return np.array(v, dtype=float)

    def origin(self):
        return np.zeros(self.dim)

    def inner(self, x, u, v):
        u = _as_array(u, self.dim, "vector")
        v = _as_array(v, self.dim, "vector")
        return np.sum(u * v, axis=-1)

    def dist(self, x, y):
        x = _as_array(x, self.dim)
        y = _as_array(y, self.dim)
        return _norm(y - x)

    def log(self, x, y):
        return _as_array(y, self.dim) - _as_array(x, self.dim)

    def exp(self, x, v):
        return _as_array(x, self.dim) + _as_array(v, self.dim, "vector")


class Sphere(Manifold):
    """Round sphere of radius ``radius`` embedded in R^{dim+1}."""

    kind = "sphere"

    def __init__(self, radius: float = 1.0, dim: int = 2):
        if not radius > 0:
            raise InvalidInputError("sphere radius must be positive")
        self.radius = float(radius)
        self.dim = int(dim)
        self.ambient_dim = self.dim + 1

    def descriptor(self):
        return {"manifold": self.kind, "dim": self.ambient_dim, "radius": self.radius}

    def project(self, x):
        x = np.array(x, dtype=float)
        n = _norm(x)
        if np.any(n == 0):
            raise InvalidInputError("zero vector cannot be projected onto the sphere")
        return self.radius * x / n[..., None]

    def to_tangent(self, x, v):
        xh = _as_array(x, self.ambient_dim) / self.radius
        v = _as_array(v, self.ambient_dim, "vector")
        return v - np.sum(v * xh, axis=-1)[..., None] * xh

    def origin(self):
        e = np.zeros(self.ambient_dim)
        e[-1] = self.radius
        return e

    def inner(self, x, u, v):
        u = _as_array(u, self.ambient_dim, "vector")
        v = _as_array(v, self.ambient_dim, "vector")
        return np.sum(u * v, axis=-1)

    def _angle(self, xh, yh):
        # 2*atan2(|x-y|, |x+y|) is accurate at both ends of [0, pi]
        return 2.0 * np.arctan2(_norm(xh - yh), _norm(xh + yh))

    def dist(self, x, y):
        xh = _as_array(x, self.ambient_dim) / self.radius
        yh = _as_array(y, self.ambient_dim) / self.radius
        return self.radius * self._angle(xh, yh)

    def log(self, x, y):
        xh = _as_array(x, self.ambient_dim) / self.radius
        yh = _as_array(y, self.ambient_dim) / self.radius
        theta = self._angle(xh, yh)
        if np.any(theta >= np.pi - CUT_LOCUS_TOL):
            raise CutLocusError("log requested between antipodal points of the sphere")
        d = yh - xh
        w = d - np.sum(d * xh, axis=-1)[..., None] * xh
        wn = _norm(w)
        # theta / |w| is theta / sin(theta); both vanish together
        scale = np.divide(theta, wn, out=np.zeros_like(wn), where=wn > 0)
        return self.radius * scale[..., None] * w

    def exp(self, x, v):
        x = _as_array(x, self.ambient_dim)
        v = _as_array(v, self.ambient_dim, "vector")
        r = self.radius
        s = _norm(v)
        # r*sin(s/r)/s written through numpy's normalized sinc
        out = np.cos(s / r)[..., None] * x + (np.sinc(s / (np.pi * r)))[..., None] * v
        return self.project(out)


class Hyperbolic(Manifold):
    """Hyperboloid model of H^dim inside Minkowski space R^{dim,1}."""

    kind = "hyperbolic"

    def __init__(self, dim: int = 2):
        self.dim = int(dim)
        self.ambient_dim = self.dim + 1

    @staticmethod
    def minkowski(u, v):
        return np.sum(u[..., :-1] * v[..., :-1], axis=-1) - u[..., -1] * v[..., -1]

    def lift(self, spatial):
        """Chart coordinates (X, Y, ...) to the hyperboloid sheet."""
        s = _as_array(spatial, self.dim, "chart point")
        z = np.sqrt(1.0 + np.sum(s * s, axis=-1))
        return np.concatenate([s, z[..., None]], axis=-1)

    def project(self, x):
        x = np.array(x, dtype=float)
        return self.lift(x[..., :-1])

    def to_tangent(self, x, v):
        x = _as_array(x, self.ambient_dim)
        v = _as_array(v, self.ambient_dim, "vector")
        return v + self.minkowski(x, v)[..., None] * x

    def origin(self):
        e = np.zeros(self.ambient_dim)
        e[-1] = 1.0
        return e

    def inner(self, x, u, v):
        u = _as_array(u, self.ambient_dim, "vector")
        v = _as_array(v, self.ambient_dim, "vector")
        return self.minkowski(u, v)

    def dist(self, x, y):
        x = _as_array(x, self.ambient_dim)
        y = _as_array(y, self.ambient_dim)
        d = y - x
        # Minkowski chord length; 2*asinh(chord/2) avoids arccosh near 1
        chord = np.sqrt(np.maximum(self.minkowski(d, d), 0.0))
        return 2.0 * np.arcsinh(0.5 * chord)

    def log(self, x, y):
        x = _as_array(x, self.ambient_dim)
        y = _as_array(y, self.ambient_dim)
        d = y - x
        u = d + self.minkowski(x, d)[..., None] * x
        un = np.sqrt(np.maximum(self.minkowski(u, u), 0.0))
        dist = self.dist(x, y)
        scale = np.divide(dist, un, out=np.zeros_like(un), where=un > 0)
        return scale[..., None] * u

    def exp(self, x, v):
        x = _as_array(x, self.ambient_dim)
        v = _as_array(v, self.ambient_dim, "vector")
        s = np.sqrt(np.maximum(self.minkowski(v, v), 0.0))
        small = s < 1e-8
        shs = np.where(small, 1.0 + s * s / 6.0, np.sinh(s) / np.where(small, 1.0, s))
        out = np.cosh(s)[..., None] * x + shs[..., None] * v
        return self.project(out)


def from_descriptor(desc: dict) -> Manifold:
    """Build a manifold from a sidecar descriptor dict."""
    kind = str(desc.get("manifold", "euclidean")).lower()
    dim = int(desc.get("dim", 1))
    if kind == "euclidean":
        return Euclidean(dim)
    if kind == "sphere":
        return Sphere(float(desc.get("radius", 1.0)), dim - 1)
    if kind == "hyperbolic":
        return Hyperbolic(dim - 1)
    raise InvalidInputError(f"unknown manifold kind {kind!r}")


# Functional aliases -----------------------------------------------------------

def dist(m: Manifold, x, y):
    return m.dist(x, y)


def log_point(m: Manifold, x, y):
    return m.log(x, y)


def exp_point(m: Manifold, x, v):
    return m.exp(x, v)


def inner(m: Manifold, x, u, v):
    return m.inner(x, u, v)


def geodesic_point(m: Manifold, x, y, t):
    return m.geodesic(x, y, t)
