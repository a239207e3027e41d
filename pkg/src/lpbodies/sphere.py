"""Quadrature on the unit sphere, real spherical harmonics and multiplier estimation.

The integration backbone of the package is :class:`SphereGrid`.  In three
dimensions it is a Gauss-Legendre rule in the polar coordinate combined with
a uniform azimuthal rule, which integrates polynomials of degree below the
resolution exactly and is antipodally symmetric.  For ``n > 3`` an
equal-weight quasi-uniform point set is used instead (lower accuracy).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from math import gamma, pi

import numpy as np
from scipy.special import sph_harm_y
from scipy.stats import norm, qmc


def sphere_area(n: int) -> float:
    """Surface area of the unit sphere in R^n."""
    return 2.0 * pi ** (n / 2.0) / gamma(n / 2.0)


def ball_volume(n: int) -> float:
    """Volume of the unit ball in R^n."""
    return pi ** (n / 2.0) / gamma(1.0 + n / 2.0)


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class SphereGrid:
    """Quadrature nodes and weights on S^{n-1}.

    Attributes
    ----------
    dim : int
        Ambient dimension n.
    nodes : ndarray, shape (N, n)
        Unit vectors.
    weights : ndarray, shape (N,)
        Positive weights summing to the surface area of S^{n-1}.
    resolution : int
        Resolution the grid was built with.
    kind : str
        ``"gauss-legendre"`` or ``"quasi-uniform"``.
    """

    dim: int
    nodes: np.ndarray
    weights: np.ndarray
    resolution: int
    kind: str
    _antipodes: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.nodes.shape[0]

    @property
    def antipodes(self) -> np.ndarray:
        """Index map ``j -> k`` with ``nodes[k] == -nodes[j]``."""
        return self._antipodes

    @cached_property
    def area(self) -> float:
        return float(np.sum(self.weights))

    def coarser(self) -> "SphereGrid":
        """Grid of the same family at half the resolution (at least 8)."""
        return build_grid(self.dim, max(8, self.resolution // 2))

    def describe(self) -> dict:
        return {"dimension": self.dim, "resolution": self.resolution, "kind": self.kind,
                "nodes": self.size}


_GRID_CACHE: dict = {}


def build_grid(n: int, resolution: int) -> SphereGrid:
    """Build a quadrature grid on S^{n-1}.

    Parameters
    ----------
    n : int
        Ambient dimension, at least 3.
    resolution : int
        Number of polar nodes for n = 3 (the azimuthal count is twice that).
        For n > 3 the grid has ``2 * resolution**2`` nodes as well.

    Returns
    -------
    SphereGrid
        Grids are cached, so equal arguments return the same object.
    """
    n = int(n)
    resolution = int(resolution)
    if n < 3:
        raise ValueError(f"dimension must be at least 3, got {n}")
    if resolution < 8:
        raise ValueError(f"resolution must be at least 8, got {resolution}")
    key = (n, resolution)
    if key not in _GRID_CACHE:
        if n == 3:
            _GRID_CACHE[key] = _product_grid(resolution)
        else:
            _GRID_CACHE[key] = _quasi_uniform_grid(n, resolution)
    return _GRID_CACHE[key]


def _product_grid(res: int) -> SphereGrid:
    x, w = np.polynomial.legendre.leggauss(res)
    m = 2 * res
    phi = 2.0 * pi * np.arange(m) / m
    X, P = np.meshgrid(x, phi, indexing="ij")
    s = np.sqrt(1.0 - X ** 2)
    nodes = np.stack([s * np.cos(P), s * np.sin(P), X], axis=-1).reshape(-1, 3)
    weights = np.repeat(w, m) * (2.0 * pi / m)
    # antipode of (i, k) is (res-1-i, k+res mod m)
    i, k = np.meshgrid(np.arange(res), np.arange(m), indexing="ij")
    anti = ((res - 1 - i) * m + (k + res) % m).reshape(-1)
    # make the antipodal pairing exact in floating point
    nodes = nodes.copy()
    lower = anti < np.arange(nodes.shape[0])
    nodes[lower] = -nodes[anti[lower]]
    weights[lower] = weights[anti[lower]]
    return SphereGrid(3, _readonly(nodes), _readonly(weights), res, "gauss-legendre",
                      _readonly(anti).astype(np.intp))


def _quasi_uniform_grid(n: int, res: int) -> SphereGrid:
    half = res * res
    u = qmc.Halton(d=n, scramble=True, seed=0).random(half)
    g = norm.ppf(np.clip(u, 1e-12, 1.0 - 1e-12))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    nodes = np.vstack([g, -g])
    weights = np.full(2 * half, sphere_area(n) / (2 * half))
    anti = np.concatenate([np.arange(half, 2 * half), np.arange(half)])
    return SphereGrid(n, _readonly(nodes), _readonly(weights), res, "quasi-uniform",
                      _readonly(anti).astype(np.intp))


def integrate(grid: SphereGrid, samples) -> float:
    """Quadrature sum ``sum_i w_i f_i`` of per-node samples."""
    f = np.asarray(samples, dtype=float)
    if f.shape != (grid.size,):
        raise ValueError(f"expected {grid.size} samples, got shape {f.shape}")
    if not np.all(np.isfinite(f)):
        raise ValueError("samples must be finite")
    return float(np.sum(grid.weights * f))


# --------------------------------------------------------------------------
# spherical harmonics (n = 3)


@dataclass(frozen=True)
class HarmonicIndex:
    """Degree ``k`` and order index ``i`` with ``1 <= i <= 2k+1``."""

    k: int
    i: int

    def __post_init__(self):
        if self.k < 0 or not 1 <= self.i <= 2 * self.k + 1:
            raise ValueError(f"invalid harmonic index (k={self.k}, i={self.i})")

    @property
    def order(self) -> int:
        """Signed order m in [-k, k]."""
        return self.i - self.k - 1


def harmonic_count(n: int, k: int) -> int:
    """Dimension of the space of degree-k harmonics on S^{n-1}."""
    if n != 3:
        raise ValueError("spherical harmonics are only implemented for n = 3")
    return 2 * k + 1


def eval_harmonic(idx: HarmonicIndex, u) -> np.ndarray:
    """Real orthonormal spherical harmonic Y_{k,i} on S^2.

    Parameters
    ----------
    idx : HarmonicIndex
    u : array_like, shape (..., 3)
        Unit vectors.
    """
    u = np.asarray(u, dtype=float)
    if u.shape[-1] != 3:
        raise ValueError("spherical harmonics are only implemented for n = 3")
    theta = np.arccos(np.clip(u[..., 2], -1.0, 1.0))
    phi = np.arctan2(u[..., 1], u[..., 0])
    m = idx.order
    if m == 0:
        return sph_harm_y(idx.k, 0, theta, phi).real
    y = sph_harm_y(idx.k, abs(m), theta, phi)
    part = y.real if m > 0 else y.imag
    return np.sqrt(2.0) * (-1.0) ** m * part


def harmonic_basis(grid: SphereGrid, k: int) -> np.ndarray:
    """All degree-k harmonics sampled on the grid, shape (N, 2k+1)."""
    harmonic_count(grid.dim, k)
    return np.stack([eval_harmonic(HarmonicIndex(k, i), grid.nodes)
                     for i in range(1, 2 * k + 2)], axis=1)


class NotAMultiplierError(ValueError):
    """Raised when a transform does not act diagonally on a harmonic space."""


@dataclass(frozen=True)
class MultiplierEstimate:
    """Averaged multiplier of one degree with its diagnostic residual."""

    k: int
    value: float
    residual: float
    per_order: np.ndarray

    def __float__(self):
        return self.value


def estimate_multiplier(transform, k: int, grid: SphereGrid,
                        quadrature_tol: float = 1e-5) -> MultiplierEstimate:
    """Estimate the Funk-Hecke multiplier of ``transform`` at degree ``k``.

    Parameters
    ----------
    transform : callable
        Maps an array of grid samples of shape (N, m) to an array of the same
        shape, column by column.
    k : int
        Harmonic degree.
    grid : SphereGrid
        A three-dimensional grid.
    quadrature_tol : float
        Expected quadrature accuracy.  A relative residual above ten times
        this value raises :class:`NotAMultiplierError`.

    Returns
    -------
    MultiplierEstimate
        ``value`` is the mean of ``<T Y_ki, Y_ki>`` over the order index and
        ``residual`` the largest ``||T Y_ki - a_k Y_ki|| / ||Y_ki||``.
    """
    Y = harmonic_basis(grid, k)
    TY = np.asarray(transform(Y), dtype=float)
    if TY.shape != Y.shape:
        raise ValueError("transform must preserve the shape of its input")
    w = grid.weights[:, None]
    per_order = np.sum(w * TY * Y, axis=0)
    a = float(np.mean(per_order))
    norms = np.sqrt(np.sum(w * Y * Y, axis=0))
    residual = float(np.max(np.sqrt(np.sum(w * (TY - a * Y) ** 2, axis=0)) / norms))
    if residual > 10.0 * quadrature_tol:
        raise NotAMultiplierError(
            f"degree {k}: residual {residual:.3e} exceeds {10 * quadrature_tol:.1e}")
    return MultiplierEstimate(k, a, residual, per_order)
