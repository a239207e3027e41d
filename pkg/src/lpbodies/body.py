"""Convex and star bodies, their support/radial functions and surface measures.

Every convex body contains the origin in its interior.  Support functions are
evaluated through their 1-homogeneous extension, so ``support`` accepts any
nonzero vectors, not only unit vectors.
"""

from __future__ import annotations

import logging
import warnings
import weakref
from dataclasses import dataclass, field
from math import factorial

import numpy as np
from scipy.linalg import sqrtm
from scipy.spatial import ConvexHull

from .sphere import SphereGrid, ball_volume, build_grid

log = logging.getLogger(__name__)

DEFAULT_RESOLUTION = 64
FD_STEP = 1e-4
_CHUNK = 256


def default_grid(n: int = 3) -> SphereGrid:
    return build_grid(n, DEFAULT_RESOLUTION)


def _as_points(X, n: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.shape[-1] != n:
        raise ValueError(f"expected vectors of dimension {n}, got shape {X.shape}")
    return X


def _unit(X: np.ndarray):
    r = np.linalg.norm(X, axis=-1)
    if np.any(r == 0):
        raise ValueError("zero direction")
    return X / r[..., None], r


_UNIT_CACHE: dict = {}


def _unit_cached(X: np.ndarray):
    """:func:`_unit`, memoized (with read-only output) for read-only input."""
    if X.flags.writeable:
        return _unit(X)
    hit = _UNIT_CACHE.get(id(X))
    if hit is not None and hit[0] is X:
        return hit[1], hit[2]
    U, r = _unit(X)
    U.flags.writeable = False
    _UNIT_CACHE[id(X)] = (X, U, r)
    return U, r


def _chunked_rows(X: np.ndarray, fn, chunk: int = _CHUNK) -> np.ndarray:
    """Apply ``fn`` to row blocks of a 2-D array and concatenate."""
    if X.shape[0] <= chunk:
        return fn(X)
    return np.concatenate([fn(X[s:s + chunk]) for s in range(0, X.shape[0], chunk)])


# --------------------------------------------------------------------------
# spherical measures


@dataclass(frozen=True, eq=False)
class Atoms:
    """Discrete measure: point masses at unit vectors."""

    directions: np.ndarray
    masses: np.ndarray
    cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.directions.shape[0] == 0:
            raise ValueError("empty measure")
        if np.any(self.masses < 0):
            raise ValueError("masses must be nonnegative")

    @property
    def dim(self) -> int:
        return self.directions.shape[1]

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.masses))


@dataclass(frozen=True, eq=False)
class Density:
    """Absolutely continuous measure given by density samples on a grid."""

    grid: SphereGrid
    values: np.ndarray
    cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.values.shape != (self.grid.size,):
            raise ValueError("density must have one value per grid node")
        if np.any(self.values < 0) or not np.all(np.isfinite(self.values)):
            raise ValueError("density must be finite and nonnegative")

    @property
    def dim(self) -> int:
        return self.grid.dim

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.grid.weights * self.values))


SphericalMeasure = Atoms | Density


# --------------------------------------------------------------------------
# convex bodies


class ConvexBody:
    """Base class of the convex body variants."""

    dim: int
    #: support is exact at arbitrary directions (not only grid nodes)
    exact_support: bool = True
    #: admits the finite-difference curvature path
    smooth: bool = False

    def support(self, X) -> np.ndarray:
        raise NotImplementedError

    def radial(self, U) -> np.ndarray:
        raise NotImplementedError

    def contains(self, X, tol: float = 1e-12) -> np.ndarray:
        raise NotImplementedError

    def chord(self, X, u):
        """Parameters ``(lo, hi)`` of the segment ``{x + t u} ∩ K``.

        Rows whose line misses the body get ``lo > hi`` (both NaN for
        quadric bodies).
        """
        raise NotImplementedError

    def descriptor(self) -> dict:
        raise NotImplementedError

    @property
    def diameter(self) -> float:
        g = default_grid(self.dim)
        h = self.support(g.nodes)
        return float(np.max(h + h[g.antipodes]))

    def __repr__(self):
        return f"{type(self).__name__}({self.descriptor_summary()})"

    def descriptor_summary(self) -> str:
        return ""


class Ellipsoid(ConvexBody):
    """Centered ellipsoid ``A B`` for a symmetric positive-definite ``A``."""

    smooth = True

    def __init__(self, A):
        A = np.array(A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("ellipsoid matrix must be square")
        if not np.allclose(A, A.T, rtol=0, atol=1e-12 * np.abs(A).max()):
            raise ValueError("ellipsoid matrix must be symmetric")
        A = 0.5 * (A + A.T)
        ev = np.linalg.eigvalsh(A)
        if ev[0] <= 0:
            raise ValueError("ellipsoid matrix must be positive definite")
        self.A = A
        self.A.flags.writeable = False
        self.dim = A.shape[0]
        self._Ainv = np.linalg.inv(A)

    @property
    def matrix(self) -> np.ndarray:
        return self.A

    def support(self, X):
        X = _as_points(X, self.dim)
        return np.linalg.norm(X @ self.A, axis=-1)

    def radial(self, U):
        U = _as_points(U, self.dim)
        return 1.0 / np.linalg.norm(U @ self._Ainv, axis=-1)

    def contains(self, X, tol=1e-12):
        X = _as_points(X, self.dim)
        return np.sum((X @ self._Ainv) ** 2, axis=-1) <= 1.0 + tol

    def chord(self, X, u):
        return _quadric_chord(self._Ainv, np.zeros(self.dim), X, u)

    def exact_volume(self) -> float:
        return float(np.linalg.det(self.A)) * ball_volume(self.dim)

    def descriptor(self):
        return {"kind": "ellipsoid", "matrix": self.A.tolist()}

    def descriptor_summary(self):
        return f"eig={np.round(np.linalg.eigvalsh(self.A), 4).tolist()}"


class Ball(Ellipsoid):
    """Centered Euclidean ball of radius ``r``."""

    def __init__(self, radius: float = 1.0, dim: int = 3):
        if not radius > 0:
            raise ValueError("radius must be positive")
        if dim < 2:
            raise ValueError("dimension must be at least 2")
        super().__init__(float(radius) * np.eye(dim))
        self.r = float(radius)

    def support(self, X):
        X = _as_points(X, self.dim)
        return self.r * np.linalg.norm(X, axis=-1)

    def radial(self, U):
        U = _as_points(U, self.dim)
        return np.full(U.shape[:-1], self.r)

    def exact_volume(self):
        return self.r ** self.dim * ball_volume(self.dim)

    def descriptor(self):
        return {"kind": "ball", "radius": self.r, "dimension": self.dim}

    def descriptor_summary(self):
        return f"r={self.r:g}, n={self.dim}"


def _quadric_chord(Ainv, center, X, u):
    # solve |Ainv (x + t u - c)|^2 = 1
    X = np.asarray(X, dtype=float)
    a_u = Ainv @ u
    Y = (X - center) @ Ainv.T
    a = a_u @ a_u
    b = Y @ a_u
    d = np.sum(Y * Y, axis=-1)
    disc = b * b - a * (d - 1.0)
    with np.errstate(invalid="ignore"):
        s = np.sqrt(disc)
    return (-b - s) / a, (-b + s) / a


class Polytope(ConvexBody):
    """Convex hull of finitely many points, with facet data.

    Attributes
    ----------
    vertices : ndarray, shape (V, n)
        Extreme points.
    normals, offsets, areas : ndarray
        Unit outer facet normals, support values at them and the
        (n-1)-dimensional facet areas.
    """

    def __init__(self, points, *, _hull: ConvexHull | None = None):
        P = np.array(points, dtype=float)
        if P.ndim != 2 or P.shape[0] <= P.shape[1]:
            raise ValueError("a polytope needs at least n+1 points in R^n")
        n = P.shape[1]
        hull = _hull if _hull is not None else ConvexHull(P)
        self.dim = n
        self.vertices = np.ascontiguousarray(hull.points[hull.vertices])
        self.normals, self.offsets, self.areas = _facets(hull)
        scale = np.abs(self.vertices).max()
        if self.offsets.min() <= 1e-12 * scale:
            raise ValueError("origin must lie in the interior of the polytope")
        for a in (self.vertices, self.normals, self.offsets, self.areas):
            a.flags.writeable = False
        self._polar = self.normals / self.offsets[:, None]

    def support(self, X):
        X = _as_points(X, self.dim)
        shape = X.shape[:-1]
        X2 = X.reshape(-1, self.dim)
        V = self.vertices
        return _chunked_rows(X2, lambda B: np.max(B @ V.T, axis=1)).reshape(shape)

    def radial(self, U):
        # rho(u) = 1 / h(K*, u), K* has vertices n_i / b_i
        U = _as_points(U, self.dim)
        shape = U.shape[:-1]
        U2 = U.reshape(-1, self.dim)
        Q = self._polar
        return (1.0 / _chunked_rows(U2, lambda B: np.max(B @ Q.T, axis=1))).reshape(shape)

    def contains(self, X, tol=1e-12):
        X = _as_points(X, self.dim)
        X2 = X.reshape(-1, self.dim)
        out = _chunked_rows(X2, lambda B: np.max(B @ self._polar.T, axis=1)) <= 1.0 + tol
        return out.reshape(X.shape[:-1])

    def chord(self, X, u):
        return _halfspace_chord(self.normals, self.offsets, X, u)

    def exact_volume(self) -> float:
        """Divergence-theorem volume ``(1/n) sum_i b_i A_i``."""
        return float(np.sum(self.offsets * self.areas) / self.dim)

    @property
    def surface_area(self) -> float:
        return float(np.sum(self.areas))

    @property
    def diameter(self):
        V = self.vertices
        d2 = np.sum(V ** 2, 1)[:, None] + np.sum(V ** 2, 1)[None] - 2 * V @ V.T
        return float(np.sqrt(max(d2.max(), 0.0)))

    def descriptor(self):
        return {"kind": "polytope", "vertices": self.vertices.tolist()}

    def descriptor_summary(self):
        return f"{len(self.vertices)} vertices, {len(self.offsets)} facets"


def _facets(hull: ConvexHull):
    """Merge the triangulated hull simplices into facets."""
    eq = hull.equations
    n = hull.points.shape[1]
    pts = hull.points[hull.simplices]                  # (S, n, n)
    E = pts[:, 1:] - pts[:, :1]                        # (S, n-1, n)
    if n == 3:
        area = 0.5 * np.linalg.norm(np.cross(E[:, 0], E[:, 1]), axis=1)
    else:
        G = E @ np.transpose(E, (0, 2, 1))
        area = np.sqrt(np.clip(np.linalg.det(G), 0, None)) / factorial(n - 1)
    key = np.round(eq / 1e-9).astype(np.int64)
    _, inv = np.unique(key, axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    m = inv.max() + 1
    A = np.bincount(inv, weights=area, minlength=m)
    N = np.zeros((m, n))
    np.add.at(N, inv, eq[:, :n] * area[:, None])
    B = np.bincount(inv, weights=-eq[:, n] * area, minlength=m)
    keep = A >= 1e-12
    N, B, A = N[keep], B[keep], A[keep]
    B = B / A
    N = N / np.linalg.norm(N, axis=1, keepdims=True)
    return np.ascontiguousarray(N), B, A


def _halfspace_chord(N, b, X, u, eps=1e-14):
    X = np.asarray(X, dtype=float)
    shape = X.shape[:-1]
    X2 = X.reshape(-1, X.shape[-1])
    nu = N @ u
    up, down, flat = nu > eps, nu < -eps, np.abs(nu) <= eps
    Gu, au = N[up] / nu[up, None], b[up] / nu[up]
    Gd, ad = N[down] / nu[down, None], b[down] / nu[down]
    Nf, bf = N[flat], b[flat]

    def block(B):
        hi = np.min(au[None] - B @ Gu.T, axis=1) if au.size else np.full(len(B), np.inf)
        lo = np.max(ad[None] - B @ Gd.T, axis=1) if ad.size else np.full(len(B), -np.inf)
        if bf.size:
            miss = np.any(B @ Nf.T > bf[None], axis=1)
            lo = np.where(miss, np.inf, lo)
            hi = np.where(miss, -np.inf, hi)
        return np.stack([lo, hi], axis=1)

    out = _chunked_rows(X2, block)
    return out[:, 0].reshape(shape), out[:, 1].reshape(shape)


class Translate(ConvexBody):
    """Translate ``K + c`` of another convex body."""

    def __init__(self, inner: ConvexBody, offset):
        c = np.array(offset, dtype=float).reshape(-1)
        if c.shape != (inner.dim,):
            raise ValueError("offset dimension does not match the body")
        if isinstance(inner, Translate):
            c = c + inner.offset
            inner = inner.inner
        self.inner = inner
        self.offset = c
        self.offset.flags.writeable = False
        self.dim = inner.dim
        self.smooth = inner.smooth
        self.exact_support = inner.exact_support
        if isinstance(inner, Polytope):
            self._poly = Polytope(inner.vertices + c)
        elif isinstance(inner, SampledSupport):
            h = inner.support(inner.grid.nodes) + inner.grid.nodes @ c
            if h.min() <= 0:
                raise ValueError("origin must lie in the interior of the translated body")
        elif isinstance(inner, Ellipsoid):
            if np.sum((inner._Ainv @ c) ** 2) >= 1.0:
                raise ValueError("origin must lie in the interior of the translated body")

    @property
    def polytope(self) -> Polytope | None:
        return getattr(self, "_poly", None)

    def support(self, X):
        X = _as_points(X, self.dim)
        return self.inner.support(X) + X @ self.offset

    def radial(self, U):
        U = _as_points(U, self.dim)
        if isinstance(self.inner, Ellipsoid):
            Ainv = self.inner._Ainv
            Uu = U @ Ainv.T
            Cc = Ainv @ self.offset
            a = np.sum(Uu * Uu, axis=-1)
            b = Uu @ Cc
            d = Cc @ Cc
            return (b + np.sqrt(b * b - a * (d - 1.0))) / a
        if self.polytope is not None:
            return self.polytope.radial(U)
        grid = self.inner.grid
        return _halfspace_radial(grid.nodes, self.support(grid.nodes), U)

    def contains(self, X, tol=1e-12):
        X = _as_points(X, self.dim)
        return self.inner.contains(X - self.offset, tol)

    def chord(self, X, u):
        X = np.asarray(X, dtype=float)
        return self.inner.chord(X - self.offset, u)

    def exact_volume(self):
        return self.inner.exact_volume()

    def descriptor(self):
        return {"kind": "translate", "inner": self.inner.descriptor(),
                "offset": self.offset.tolist()}

    def descriptor_summary(self):
        return f"{self.inner!r}, c={np.round(self.offset, 4).tolist()}"


def _halfspace_radial(V, h, U, eps=1e-9):
    """``rho(u) = min over v with u.v > eps of h(v) / (u.v)``."""
    U = np.asarray(U, dtype=float)
    shape = U.shape[:-1]
    U2 = U.reshape(-1, U.shape[-1])

    def block(B):
        d = B @ V.T
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(d > eps, h[None] / d, np.inf)
        return np.min(r, axis=1)

    out = _chunked_rows(U2, block, chunk=128)
    if not np.all(np.isfinite(out)):
        raise ValueError("no positive intersection found; origin not interior")
    return out.reshape(shape)


_GOLD = 0.5 * (np.sqrt(5.0) - 1.0)


def _golden_min(f, lo, hi, iters):
    """Vectorized golden-section minimization of convex 1-D functions.

    Returns the minimum value and its abscissa for every row.
    """
    c = hi - _GOLD * (hi - lo)
    d = lo + _GOLD * (hi - lo)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        left = fc < fd
        hi = np.where(left, d, hi)
        lo = np.where(left, lo, c)
        c_new = hi - _GOLD * (hi - lo)
        d_new = lo + _GOLD * (hi - lo)
        x = np.where(left, c_new, d_new)
        fx = f(x)
        c, d = np.where(left, c_new, d), np.where(left, c, d_new)
        fc, fd = np.where(left, fx, fd), np.where(left, fc, fx)
    left = fc < fd
    return np.where(left, fc, fd), np.where(left, c, d)


def refined_radial(K: ConvexBody, U, grid: SphereGrid | None = None, iters: int = 32,
                   passes: int = 4) -> np.ndarray:
    """Radial function from an exact support function by convex minimization.

    Uses ``rho(u) = min over a of H(u + T a)`` where ``T`` spans ``u^perp``
    and ``H`` is the 1-homogeneous support function.  The minimization
    (n = 3 only) is a nested golden-section search in a window around the
    best grid normal, recentred while the minimizer sits on the window edge,
    so kinks of ``H`` are handled; the result never exceeds the grid
    halfspace value.
    """
    if K.dim != 3:
        raise ValueError("refined radial is implemented for n = 3")
    grid = grid or _grid_of(K)
    U = np.atleast_2d(np.asarray(U, dtype=float))
    V = grid.nodes
    hV = K.support(V)
    T = tangent_frames(U)
    t1, t2 = T[:, 0], T[:, 1]

    def best_node(B):
        d = B @ V.T
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(d > 1e-9, hV[None] / d, np.inf)
        j = np.argmin(r, axis=1)
        return np.stack([j.astype(float), r[np.arange(len(B)), j]], 1)

    jb = _chunked_rows(U, best_node, chunk=128)
    v0 = V[jb[:, 0].astype(int)]
    v0 = v0 / np.sum(v0 * U, axis=1, keepdims=True)
    a1 = np.sum(v0 * t1, axis=1)
    a2 = np.sum(v0 * t2, axis=1)
    # window of a few grid spacings, measured in the tangent-plane chart
    w = 3.0 * np.pi / grid.resolution * (1.0 + a1 ** 2 + a2 ** 2)
    best = jb[:, 1].copy()

    active = np.arange(U.shape[0])
    for _ in range(passes):
        Ua, s1, s2 = U[active], t1[active], t2[active]
        c1, c2, wa = a1[active], a2[active], w[active]
        arg1 = {}

        def F(x1, x2):
            return K.support(Ua + x1[:, None] * s1 + x2[:, None] * s2)

        def inner(x2):
            val, x1 = _golden_min(lambda z: F(z, x2), c1 - wa, c1 + wa, iters)
            arg1[x2.tobytes()] = x1
            return val

        val, x2 = _golden_min(inner, c2 - wa, c2 + wa, iters)
        x1 = arg1.get(x2.tobytes())
        if x1 is None:
            x1 = _golden_min(lambda z: F(z, x2), c1 - wa, c1 + wa, iters)[1]
        best[active] = np.minimum(best[active], val)
        edge = (np.abs(x1 - c1) > 0.9 * wa) | (np.abs(x2 - c2) > 0.9 * wa)
        if not np.any(edge):
            break
        active = active[edge]
        a1[active], a2[active] = x1[edge], x2[edge]
        w[active] = 2.0 * wa[edge]
    return best


class SampledSupport(ConvexBody):
    """Convex body known through support values on a sphere grid.

    Parameters
    ----------
    grid : SphereGrid
    values : array_like, shape (N,)
        Positive support values at the grid nodes.
    evaluator : callable, optional
        Exact support at arbitrary unit vectors (``(m, n) -> (m,)``).  Bodies
        produced by the operators carry one.  Without it, off-grid queries
        return the nearest-node value.
    label : str, optional
        Free-form description of how the body was produced.
    check : bool
        Run the sampled convexity spot check at construction.
    """

    def __init__(self, grid: SphereGrid, values, evaluator=None, label: str = "",
                 check: bool = True, cheap: bool = False):
        h = np.array(values, dtype=float).reshape(-1)
        if h.shape != (grid.size,):
            raise ValueError("need one support value per grid node")
        if not np.all(np.isfinite(h)) or h.min() <= 0:
            raise ValueError("support values must be finite and positive (origin interior)")
        h.flags.writeable = False
        self.grid = grid
        self.values = h
        self.evaluator = evaluator
        self.label = label
        self.dim = grid.dim
        self.exact_support = evaluator is not None
        self.smooth = evaluator is not None
        #: evaluator is cheap enough for the refined radial function
        self.cheap = bool(cheap and evaluator is not None)
        self._radial_nodes = None
        if check:
            viol = convexity_defect(self)
            if viol > 1e-8 * h.max():
                warnings.warn(f"sampled support fails the convexity spot check "
                              f"(defect {viol:.2e})", RuntimeWarning, stacklevel=2)

    def support(self, X):
        X = _as_points(X, self.dim)
        if X.shape == self.grid.nodes.shape and (
                X is self.grid.nodes or np.array_equal(X, self.grid.nodes)):
            return self.values.copy()
        shape = X.shape[:-1]
        U, r = _unit_cached(X if X.ndim == 2 else X.reshape(-1, self.dim))
        if self.evaluator is not None:
            h = np.asarray(self.evaluator(U), dtype=float)
        else:
            idx = _chunked_rows(U, lambda B: np.argmax(B @ self.grid.nodes.T, axis=1))
            h = self.values[idx]
        return (h * r).reshape(shape)

    def radial(self, U):
        """Radial function.

        Halfspace formula over the grid nodes; when the body has a cheap exact
        evaluator (n = 3) the minimum is refined off the grid, see
        :func:`refined_radial`.
        """
        U = _as_points(U, self.dim)
        nodes = self.grid.nodes
        on_grid = U.shape == nodes.shape and (U is nodes or np.array_equal(U, nodes))
        if on_grid and self._radial_nodes is not None:
            return self._radial_nodes.copy()
        shape = U.shape[:-1]
        U2 = U.reshape(-1, self.dim)
        if self.cheap and self.dim == 3:
            r = refined_radial(self, U2, self.grid)
        else:
            r = _halfspace_radial(nodes, self.values, U2)
        if on_grid:
            self._radial_nodes = r
        return r.reshape(shape)

    def contains(self, X, tol=1e-12):
        X = _as_points(X, self.dim)
        X2 = X.reshape(-1, self.dim)
        q = self.grid.nodes / self.values[:, None]
        out = _chunked_rows(X2, lambda B: np.max(B @ q.T, axis=1)) <= 1.0 + tol
        return out.reshape(X.shape[:-1])

    def chord(self, X, u):
        return _halfspace_chord(self.grid.nodes, self.values, X, u)

    def descriptor(self):
        d = {"kind": "sampled_support",
             "grid": {"dimension": self.grid.dim, "resolution": self.grid.resolution},
             "values": self.values.tolist()}
        if self.label:
            d["label"] = self.label
        return d

    def descriptor_summary(self):
        return f"{self.label or 'sampled'}, res={self.grid.resolution}"


def convexity_defect(K: SampledSupport, trials: int = 1000, seed: int = 0) -> float:
    """Largest violation of sublinearity found on random node triples.

    For nodes ``u, v1, v2, v3`` with ``u = sum a_i v_i`` and ``a_i >= 0``,
    convexity requires ``h(u) <= sum a_i h(v_i)``.  Only node values are
    used, so the check is meaningful without an exact evaluator.
    """
    grid, h = K.grid, K.values
    V = grid.nodes
    n = grid.dim
    rng = np.random.default_rng(seed)
    iu = rng.integers(0, grid.size, trials)
    worst = 0.0
    for s in range(0, trials, 100):
        U = V[iu[s:s + 100]]
        near = np.argpartition(-(U @ V.T), 4 * n, axis=1)[:, :4 * n + 1]
        pick = np.stack([rng.choice(near.shape[1], n, replace=False)
                         for _ in range(len(U))])
        J = np.take_along_axis(near, pick, axis=1)
        M = np.transpose(V[J], (0, 2, 1))               # columns v_i
        ok = np.abs(np.linalg.det(M)) > 1e-10
        a = np.zeros((len(U), n))
        a[ok] = np.linalg.solve(M[ok], U[ok][..., None])[..., 0]
        ok &= np.all(a >= 0, axis=1)
        if np.any(ok):
            d = h[iu[s:s + 100]][ok] - np.sum(a[ok] * h[J[ok]], axis=1)
            worst = max(worst, float(d.max()))
    return worst


# --------------------------------------------------------------------------
# star bodies


class StarBody:
    """Base class of star bodies (positive continuous radial function)."""

    dim: int

    def radial(self, U) -> np.ndarray:
        raise NotImplementedError


class FromConvex(StarBody):
    """A convex body viewed as a star body."""

    def __init__(self, body: ConvexBody):
        self.body = body
        self.dim = body.dim

    def radial(self, U):
        return self.body.radial(U)

    def __repr__(self):
        return f"FromConvex({self.body!r})"


class SampledRadial(StarBody):
    """Star body known through radial values on a grid.

    ``evaluator`` (unit vectors to radial values) is used off the grid when
    present; otherwise the nearest-node value is returned.
    """

    def __init__(self, grid: SphereGrid, values, evaluator=None, label: str = ""):
        rho = np.array(values, dtype=float).reshape(-1)
        if rho.shape != (grid.size,):
            raise ValueError("need one radial value per grid node")
        if not np.all(np.isfinite(rho)) or rho.min() <= 0:
            raise ValueError("radial values must be finite and positive")
        rho.flags.writeable = False
        self.grid = grid
        self.values = rho
        self.evaluator = evaluator
        self.label = label
        self.dim = grid.dim

    def radial(self, U):
        U = _as_points(U, self.dim)
        if U.shape == self.grid.nodes.shape and (
                U is self.grid.nodes or np.array_equal(U, self.grid.nodes)):
            return self.values.copy()
        shape = U.shape[:-1]
        U2, _ = _unit(U.reshape(-1, self.dim))
        if self.evaluator is not None:
            return np.asarray(self.evaluator(U2), dtype=float).reshape(shape)
        idx = _chunked_rows(U2, lambda B: np.argmax(B @ self.grid.nodes.T, axis=1))
        return self.values[idx].reshape(shape)

    def descriptor(self):
        d = {"kind": "sampled_radial",
             "grid": {"dimension": self.grid.dim, "resolution": self.grid.resolution},
             "values": self.values.tolist()}
        if self.label:
            d["label"] = self.label
        return d

    def __repr__(self):
        return f"SampledRadial({self.label or 'sampled'}, res={self.grid.resolution})"


Body = ConvexBody | StarBody


def as_star(L) -> StarBody:
    return L if isinstance(L, StarBody) else FromConvex(L)


# --------------------------------------------------------------------------
# functional interface


def support(K: ConvexBody, u) -> np.ndarray | float:
    """Support function ``h(K, u)``; scalar for a single vector."""
    out = K.support(u)
    return float(out) if np.ndim(out) == 0 else out


def radial(L: Body, u) -> np.ndarray | float:
    """Radial function ``rho(L, u)``; scalar for a single vector."""
    out = L.radial(u)
    return float(out) if np.ndim(out) == 0 else out


def polar_radial(K: ConvexBody, grid: SphereGrid | None = None) -> SampledRadial:
    """Radial function of the polar body, ``rho(K*, u) = 1 / h(K, u)``."""
    grid = grid or (K.grid if isinstance(K, SampledSupport) else default_grid(K.dim))
    h = K.support(grid.nodes)
    ev = (lambda U: 1.0 / K.support(U)) if K.exact_support else None
    return SampledRadial(grid, 1.0 / h, evaluator=ev, label="polar")


def volume(L: Body, grid: SphereGrid | None = None, method: str = "auto") -> float:
    """Volume of a convex or star body.

    Parameters
    ----------
    method : {"auto", "quadrature", "curvature"}
        ``"quadrature"`` is the polar-coordinate formula
        ``(1/n) sum_i w_i rho(u_i)^n``.  ``"curvature"`` integrates
        ``(1/n) h f`` with the finite-difference curvature function ``f``
        (smooth convex bodies).  ``"auto"`` uses exact formulas for polytopes,
        ellipsoids and their translates, the curvature formula for sampled
        support bodies whose exact evaluator is expensive, and the quadrature
        otherwise.
    """
    if method not in ("auto", "quadrature", "curvature"):
        raise ValueError(f"unknown volume method {method!r}")
    if method == "auto" and hasattr(L, "exact_volume"):
        return L.exact_volume()
    grid = grid or _grid_of(L)
    if method == "auto" and isinstance(L, SampledSupport) and L.smooth and not L.cheap:
        method = "curvature"
    if method == "curvature":
        if not isinstance(L, ConvexBody):
            raise ValueError("the curvature formula needs a convex body")
        f = curvature_on_grid(L, grid)
        return float(np.sum(grid.weights * L.support(grid.nodes) * f) / grid.dim)
    rho = L.radial(grid.nodes)
    return float(np.sum(grid.weights * rho ** grid.dim) / grid.dim)


def _grid_of(L) -> SphereGrid:
    g = getattr(L, "grid", None)
    if g is None and isinstance(L, FromConvex):
        g = getattr(L.body, "grid", None)
    return g if g is not None else default_grid(L.dim)


def centroid_vector(K: Body, grid: SphereGrid | None = None) -> np.ndarray:
    """``m(K) = integral of x over K`` via ``sum_i w_i u_i rho(u_i)^{n+1} / (n+1)``."""
    grid = grid or _grid_of(K)
    n = grid.dim
    rho = K.radial(grid.nodes)
    return (grid.weights * rho ** (n + 1)) @ grid.nodes / (n + 1)


def lp_combination(alpha: float, K: ConvexBody, beta: float, L: ConvexBody, p: float,
                   grid: SphereGrid | None = None) -> SampledSupport:
    """L_p Minkowski combination ``alpha.K +_p beta.L``."""
    if alpha < 0 or beta < 0 or alpha + beta <= 0:
        raise ValueError("coefficients must be nonnegative and not both zero")
    if p < 1:
        raise ValueError("p must be at least 1")
    grid = grid or _grid_of(K)

    def h(U):
        return (alpha * K.support(U) ** p + beta * L.support(U) ** p) ** (1.0 / p)

    ev = h if (K.exact_support and L.exact_support) else None
    cheap = not any(isinstance(B, SampledSupport) for B in (K, L))
    return SampledSupport(grid, h(grid.nodes), evaluator=ev,
                          label=f"lp_combination(p={p:g})", check=False, cheap=cheap)


def harmonic_radial_combination(alpha: float, L1: Body, beta: float, L2: Body, p: float,
                                grid: SphereGrid | None = None) -> SampledRadial:
    """Harmonic L_p radial combination ``alpha.L1 +~_p beta.L2``."""
    if alpha < 0 or beta < 0 or alpha + beta <= 0:
        raise ValueError("coefficients must be nonnegative and not both zero")
    if p < 1:
        raise ValueError("p must be at least 1")
    grid = grid or _grid_of(L1)

    def rho(U):
        return (alpha * L1.radial(U) ** -p + beta * L2.radial(U) ** -p) ** (-1.0 / p)

    return SampledRadial(grid, rho(grid.nodes), evaluator=rho,
                         label=f"harmonic_combination(p={p:g})")


# --------------------------------------------------------------------------
# curvature and L_p surface area measures


def tangent_frames(U: np.ndarray) -> np.ndarray:
    """Orthonormal bases of ``u^perp``, shape (m, n-1, n), via Householder maps."""
    U = np.asarray(U, dtype=float)
    m, n = U.shape
    e = np.zeros(n)
    e[-1] = 1.0
    flip = U[:, -1] < 0
    W = U - e
    W[flip] = U[flip] + e
    nw = np.sum(W * W, axis=1)
    small = nw < 1e-30
    W[small] = 0.0
    nw[small] = 1.0
    # columns of H = I - 2 w w^T / |w|^2; H e_n = +-u, the others span u^perp
    H = np.eye(n)[None] - 2.0 * W[:, :, None] * W[:, None, :] / nw[:, None, None]
    return np.transpose(H[:, :, :n - 1], (0, 2, 1))


_STENCILS: dict = {}


def _stencil(U: np.ndarray, step: float) -> np.ndarray:
    """Finite-difference points around every row of U.

    Cached (and read-only) for read-only inputs such as grid nodes, so that
    transforms evaluated on the stencil can reuse cached kernel sums.
    """
    key = (id(U), float(step))
    if not U.flags.writeable and key in _STENCILS and _STENCILS[key][0] is U:
        return _STENCILS[key][1]
    m, n = U.shape
    T = tangent_frames(U)
    k = n - 1
    offs = [np.zeros((m, n))]
    for i in range(k):
        offs += [step * T[:, i], -step * T[:, i]]
    for i in range(k):
        for j in range(i + 1, k):
            for si, sj in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                offs.append(step * (si * T[:, i] + sj * T[:, j]))
    P = np.concatenate([U + o for o in offs])
    if not U.flags.writeable:
        P.flags.writeable = False
        _STENCILS[key] = (U, P)
    return P


def curvature_function(K: ConvexBody, u, step: float = FD_STEP) -> np.ndarray | float:
    """Curvature function (reciprocal Gauss curvature in terms of normals).

    Computed as the determinant of the tangential Hessian of the
    1-homogeneous support function by central differences.

    Parameters
    ----------
    K : ConvexBody
        Ball, ellipsoid, a translate of these, or a sampled support body with
        an exact evaluator.
    u : array_like, shape (n,) or (m, n)
        Unit normals.
    """
    if not K.smooth:
        raise ValueError(f"curvature function needs a smooth body, got {type(K).__name__}")
    U = np.atleast_2d(np.asarray(u, dtype=float))
    m, n = U.shape
    k = n - 1
    pairs = [(i, j) for i in range(k) for j in range(i + 1, k)]
    P = _stencil(U, step)
    H = K.support(P).reshape(-1, m)
    h0 = H[0]
    Hess = np.empty((m, k, k))
    for i in range(k):
        Hess[:, i, i] = (H[1 + 2 * i] + H[2 + 2 * i] - 2.0 * h0) / step ** 2
    base = 1 + 2 * k
    for q, (i, j) in enumerate(pairs):
        pp, pm, mp, mm = H[base + 4 * q: base + 4 * q + 4]
        Hess[:, i, j] = Hess[:, j, i] = (pp - pm - mp + mm) / (4.0 * step ** 2)
    f = np.linalg.det(Hess)
    return float(f[0]) if np.ndim(u) == 1 else f


def sp_measure(K: ConvexBody, p: float, grid: SphereGrid | None = None) -> SphericalMeasure:
    """L_p surface area measure ``dS_p = h^{1-p} dS``.

    Polytopes give facet atoms; smooth bodies give a density
    ``h^{1-p} f`` on the grid.
    """
    if p < 1:
        raise ValueError("p must be at least 1")
    grid = grid or _grid_of(K)
    store = _SP_CACHE.setdefault(K, {})
    key = (float(p), id(grid))
    if key not in store:
        store[key] = _sp_measure(K, float(p), grid)
    return store[key]


_SP_CACHE: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def _sp_measure(K, p, grid):
    if isinstance(K, Translate) and K.polytope is not None:
        K = K.polytope
    if isinstance(K, Polytope):
        return Atoms(K.normals, K.offsets ** (1.0 - p) * K.areas)
    if isinstance(K, SampledSupport) and K.evaluator is None:
        raise ValueError("sampled support without an exact evaluator has no "
                         "reliable curvature")
    if not K.smooth:
        raise ValueError(f"no L_p surface area measure for {type(K).__name__}")
    h = K.support(grid.nodes)
    return Density(grid, h ** (1.0 - p) * curvature_on_grid(K, grid))


_CURV_CACHE: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def curvature_on_grid(K: ConvexBody, grid: SphereGrid) -> np.ndarray:
    """Curvature function at the grid nodes (cached per body and grid).

    Raises
    ------
    FloatingPointError
        If a value is negative, i.e. the body is not smooth and convex at the
        grid resolution.
    """
    store = _CURV_CACHE.setdefault(K, {})
    if id(grid) not in store:
        f = curvature_function(K, grid.nodes)
        if np.any(f < 0):
            raise FloatingPointError("negative curvature function; body is not smooth "
                                     "and convex at grid resolution")
        f.flags.writeable = False
        store[id(grid)] = f
    return store[id(grid)]


def surface_measure(K: ConvexBody, grid: SphereGrid | None = None) -> SphericalMeasure:
    """Classical surface area measure ``S(K, .) = S_1(K, .)``."""
    return sp_measure(K, 1.0, grid)


# --------------------------------------------------------------------------
# maps of bodies


def translate(K: ConvexBody, c) -> ConvexBody:
    c = np.asarray(c, dtype=float)
    if not np.any(c):
        return K
    if isinstance(K, Translate) and np.array_equal(-c, K.offset):
        return K.inner
    return Translate(K, c)


def reflect(K: ConvexBody) -> ConvexBody:
    """The reflected body ``-K``."""
    if isinstance(K, Ellipsoid):
        return K
    if isinstance(K, Polytope):
        return Polytope(-K.vertices)
    if isinstance(K, Translate):
        return Translate(reflect(K.inner), -K.offset)
    if isinstance(K, SampledSupport):
        anti = K.grid.antipodes
        ev = (lambda U: K.evaluator(-U)) if K.evaluator is not None else None
        return SampledSupport(K.grid, K.values[anti], evaluator=ev,
                              label=f"reflect({K.label})", check=False)
    raise TypeError(f"cannot reflect {type(K).__name__}")


def linear_image(K: ConvexBody, M) -> ConvexBody:
    """Image ``M K`` under an invertible linear map."""
    M = np.asarray(M, dtype=float)
    if abs(np.linalg.det(M)) < 1e-14:
        raise ValueError("linear map must be invertible")
    if isinstance(K, Ball) and np.allclose(M, M[0, 0] * np.eye(K.dim)) and M[0, 0] > 0:
        return Ball(K.r * M[0, 0], K.dim)
    if isinstance(K, Ellipsoid):
        # M A B = S B with S = (M A A^T M^T)^{1/2}
        S = np.real(sqrtm(M @ K.A @ K.A.T @ M.T))
        return Ellipsoid(0.5 * (S + S.T))
    if isinstance(K, Polytope):
        return Polytope(K.vertices @ M.T)
    if isinstance(K, Translate):
        return Translate(linear_image(K.inner, M), M @ K.offset)
    if isinstance(K, SampledSupport) and K.evaluator is not None:
        ev = K.evaluator

        def h(U):
            X = U @ M
            r = np.linalg.norm(X, axis=1)
            return ev(X / r[:, None]) * r

        return SampledSupport(K.grid, h(K.grid.nodes), evaluator=h,
                              label=f"linear({K.label})", check=False)
    raise TypeError(f"cannot map {type(K).__name__} without an exact evaluator")


def scale(K: ConvexBody, lam: float) -> ConvexBody:
    return linear_image(K, lam * np.eye(K.dim))


# --------------------------------------------------------------------------
# Santalo point


class SantaloError(RuntimeError):
    pass


def polar_volume_function(K: ConvexBody, grid: SphereGrid | None = None):
    """Return ``g(x) = V((K - x)*)`` by quadrature, with gradient and Hessian.

    The returned callable maps ``x`` to ``(g, grad, hess)``; infeasible
    points (outside the grid halfspace domain) give ``g = inf``.
    """
    grid = grid or _grid_of(K)
    U, w, n = grid.nodes, grid.weights, grid.dim
    h = K.support(U)

    def g(x, derivatives=True):
        s = h - U @ x
        if s.min() <= 0:
            return np.inf, None, None
        r = 1.0 / s
        val = float(np.sum(w * r ** n) / n)
        if not derivatives:
            return val, None, None
        grad = (w * r ** (n + 1)) @ U
        hess = (n + 1) * (U.T * (w * r ** (n + 2))) @ U
        return val, grad, hess

    return g, h


def santalo_point(K: ConvexBody, grid: SphereGrid | None = None, tol: float = 1e-8,
                  max_iter: int = 200, guard: float = 1e-6) -> np.ndarray:
    """Minimizer of ``x -> V((K - x)*)`` by damped Newton iteration.

    Steps leaving the region ``min_u (h(u) - x.u) > guard`` or increasing the
    objective are halved.  Raises :class:`SantaloError` on failure.
    """
    g, h = polar_volume_function(K, grid)
    grid = grid or _grid_of(K)
    U = grid.nodes
    x = np.zeros(K.dim)
    val, grad, hess = g(x)
    if not np.isfinite(val):
        raise SantaloError("origin is not interior to the body")
    for it in range(max_iter):
        gn = np.linalg.norm(grad)
        if gn <= tol:
            log.debug("santalo point converged after %d iterations", it)
            return x
        d = -np.linalg.solve(hess, grad)
        t = 1.0
        for _ in range(60):
            y = x + t * d
            if np.min(h - U @ y) > guard:
                nval, _, _ = g(y, derivatives=False)
                if nval <= val + 1e-4 * t * (grad @ d):
                    break
            t *= 0.5
        else:
            if gn <= 1e3 * tol:
                return x
            raise SantaloError(f"line search failed at iteration {it} (|grad|={gn:.2e})")
        x = y
        val, grad, hess = g(x)
    raise SantaloError(f"no convergence after {max_iter} iterations "
                       f"(|grad|={np.linalg.norm(grad):.2e})")


# --------------------------------------------------------------------------
# descriptors


def from_descriptor(d: dict) -> ConvexBody | StarBody:
    """Build a body from a descriptor dictionary (see :meth:`ConvexBody.descriptor`)."""
    if not isinstance(d, dict) or "kind" not in d:
        raise ValueError("body descriptor must be an object with a 'kind' field")
    kind = d["kind"]
    if kind == "ball":
        return Ball(float(d.get("radius", 1.0)), int(d.get("dimension", 3)))
    if kind == "ellipsoid":
        return Ellipsoid(np.array(d["matrix"], dtype=float))
    if kind == "polytope":
        return Polytope(np.array(d["vertices"], dtype=float))
    if kind == "translate":
        return Translate(from_descriptor(d["inner"]), np.array(d["offset"], dtype=float))
    if kind in ("sampled_support", "sampled_radial"):
        g = d["grid"]
        grid = build_grid(int(g["dimension"]), int(g["resolution"]))
        cls = SampledSupport if kind == "sampled_support" else SampledRadial
        return cls(grid, np.array(d["values"], dtype=float), label=d.get("label", ""))
    raise ValueError(f"unknown body kind {kind!r}")
