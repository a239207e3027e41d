"""Nonsymmetric L_p cosine transform and the projection/moment body families.

For ``tau`` in [-1, 1] the kernel is ``phi_tau(t) = |t| + tau t``; ``tau = 1``
gives twice the positive part, ``tau = 0`` the absolute value.  The
operators return :class:`~lpbodies.body.SampledSupport` bodies on the grid of
the input functionals, each carrying an exact evaluator so the outputs can be
queried (and differentiated) off the grid.

Normalization.  Atom sums use the exact constant ``c_{n,p}(tau)``.  Integrals
against densities divide by the quadrature of the kernel itself at the same
output direction, so the discrete transform maps the constant 1 to 1 exactly.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass, field
from math import lgamma, log, pi, exp

import numpy as np

from .body import (Atoms, ConvexBody, Density, FromConvex, SampledRadial, SampledSupport,
                   StarBody, _grid_of, as_star, default_grid, reflect,
                   sp_measure)
from . import _kernels
from .sphere import SphereGrid, ball_volume

P_MAX = 64.0


def c_np(n: int, p: float) -> float:
    """``Gamma((n+p)/2) / (pi^{(n-1)/2} Gamma((1+p)/2))``."""
    return exp(lgamma((n + p) / 2.0) - 0.5 * (n - 1) * log(pi) - lgamma((1.0 + p) / 2.0))


def c_np_tau(n: int, p: float, tau: float) -> float:
    return c_np(n, p) / ((1.0 + tau) ** p + (1.0 - tau) ** p)


@dataclass(frozen=True)
class OperatorParams:
    """Exponent ``p``, asymmetry ``tau`` and dimension ``n``.

    ``p`` must satisfy 1 < p <= 64 unless ``diagnostic=True`` (which admits
    0 < p <= 1, used by the limit checks and classical cosine transforms).
    """

    p: float
    tau: float = 0.0
    n: int = 3
    diagnostic: bool = field(default=False, compare=False)

    def __post_init__(self):
        lo_ok = self.p > 1 or (self.diagnostic and self.p > 0)
        if not (lo_ok and self.p <= P_MAX):
            raise ValueError(f"p must lie in (1, {P_MAX:g}], got {self.p}")
        if not -1.0 <= self.tau <= 1.0:
            raise ValueError(f"tau must lie in [-1, 1], got {self.tau}")
        if self.n < 2:
            raise ValueError("dimension must be at least 2")

    @property
    def c(self) -> float:
        return c_np(self.n, self.p)

    @property
    def c_tau(self) -> float:
        return c_np_tau(self.n, self.p, self.tau)

    def with_tau(self, tau: float) -> "OperatorParams":
        return OperatorParams(self.p, tau, self.n, self.diagnostic)


def _params(p, tau, n) -> OperatorParams:
    if isinstance(p, OperatorParams):
        return p
    return OperatorParams(float(p), float(tau), int(n))


def phi_tau(tau: float, t):
    """``|t| + tau t``."""
    if not -1.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [-1, 1]")
    out = np.abs(t) + tau * np.asarray(t, dtype=float)
    return float(out) if np.ndim(out) == 0 else out


def half_kernel_sums(D: np.ndarray, S: np.ndarray, W: np.ndarray, p: float):
    """Positive- and negative-side kernel sums.

    Returns ``(Sp, Sm)`` with ``Sp_i = sum_j (d_i.s_j)_+^p W_j`` and
    ``Sm_i = sum_j (d_i.s_j)_-^p W_j``.  Any ``phi_tau`` kernel is the
    combination ``(1+tau)^p Sp + (1-tau)^p Sm``.  ``W`` may have columns.
    """
    return _kernels.half_sums(D, S, W, p)


def kernel_sums(D: np.ndarray, S: np.ndarray, W: np.ndarray, p: float, tau: float
                ) -> np.ndarray:
    """``sum_j phi_tau(d_i . s_j)^p W_j`` for every output direction ``d_i``."""
    Sp, Sm = half_kernel_sums(D, S, W, p)
    return (1.0 + tau) ** p * Sp + (1.0 - tau) ** p * Sm


def _measure_sums(mu, p: float, U: np.ndarray):
    """Half sums of a measure at ``U``, cached for read-only (grid) arrays."""
    cacheable = not U.flags.writeable
    key = (float(p), id(U))
    if cacheable and key in mu.cache:
        return mu.cache[key][1]
    if isinstance(mu, Atoms):
        out = half_kernel_sums(U, mu.directions, mu.masses, p)
    elif isinstance(mu, Density):
        g = mu.grid
        W = np.stack([g.weights * mu.values, g.weights], axis=1)
        out = half_kernel_sums(U, g.nodes, W, p)
    else:
        raise TypeError(f"not a spherical measure: {type(mu).__name__}")
    if cacheable:
        mu.cache[key] = (U, out)
    return out


def transform_power(mu, params: OperatorParams, U: np.ndarray) -> np.ndarray:
    """``c_{n,p}(tau) * integral of phi_tau(u.v)^p dmu(v)`` at unit vectors ``U``.

    Densities are normalized by the quadrature of the kernel at each ``u``.
    """
    p, tau = params.p, params.tau
    a, b = (1.0 + tau) ** p, (1.0 - tau) ** p
    Sp, Sm = _measure_sums(mu, p, np.asarray(U, dtype=float) if U.dtype != float else U)
    if isinstance(mu, Atoms):
        return params.c * (a * Sp + b * Sm) / (a + b)
    num = a * Sp[:, 0] + b * Sm[:, 0]
    return num / (a * Sp[:, 1] + b * Sm[:, 1])


def cosine_transform_plus(mu, p: float, grid: SphereGrid | None = None,
                          directions=None) -> np.ndarray:
    """``(C_p^+ mu)(u) = c_{n,p} integral of (u.v)_+^p dmu(v)``.

    Evaluated at ``directions`` if given, otherwise at the nodes of ``grid``
    (default: the grid of a density, or a resolution-64 grid for atoms).
    """
    n = mu.dim
    params = OperatorParams(float(p), 1.0, n, diagnostic=True)
    if directions is None:
        if grid is None:
            grid = mu.grid if isinstance(mu, Density) else default_grid(n)
        U = grid.nodes
    else:
        U = np.atleast_2d(np.asarray(directions, dtype=float))
    # phi_1 = 2 t_+ and c_{n,p}(1) = c_{n,p} / 2^p
    out = transform_power(mu, params, U)
    return float(out[0]) if directions is not None and np.ndim(directions) == 1 else out


def cplus_grid_transform(p: float, grid: SphereGrid, tau: float = 1.0):
    """The discrete transform ``f -> (C f)`` on grid samples (columns allowed).

    With ``tau = 1`` this is ``C_p^+``; other values give the ``phi_tau``
    family (all are multiplier transformations).
    """
    def T(F):
        F = np.asarray(F, dtype=float)
        W = np.column_stack([grid.weights[:, None] * F.reshape(grid.size, -1), grid.weights])
        s = kernel_sums(grid.nodes, grid.nodes, W, p, tau)
        return (s[:, :-1] / s[:, -1:]).reshape(F.shape)
    return T


def _output(grid: SphereGrid, mu, params: OperatorParams, label: str) -> SampledSupport:
    inv = 1.0 / params.p

    def ev(U):
        return transform_power(mu, params, U) ** inv

    out = SampledSupport(grid, ev(grid.nodes), evaluator=ev, label=label)
    out.params = params
    out.measure = mu
    return out


def pi_tau(K: ConvexBody, p, tau: float = 0.0, grid: SphereGrid | None = None
           ) -> SampledSupport:
    """L_p projection body ``Pi_p^tau K`` as sampled support with evaluator.

    ``h(Pi_p^tau K, u)^p = c_{n,p}(tau) integral of phi_tau(u.v)^p dS_p(K, v)``.
    ``p`` may also be an :class:`OperatorParams`.
    """
    params = _params(p, tau, K.dim)
    grid = grid or _grid_of(K)
    mu = sp_measure(K, params.p, grid)
    return _output(grid, mu, params, f"pi_tau(p={params.p:g},tau={params.tau:g})")


def m_tau(L, p, tau: float = 0.0, grid: SphereGrid | None = None) -> SampledSupport:
    """L_p moment body ``M_p^tau L`` of a star (or convex) body.

    ``h(M_p^tau L, u)^p = c_{n,p}(tau) integral of phi_tau(u.v)^p rho(L, v)^{n+p} dv``.
    """
    L = as_star(L)
    params = _params(p, tau, L.dim)
    grid = grid or _grid_of(L)
    mu = radial_measure(L, params.p, grid)
    return _output(grid, mu, params, f"m_tau(p={params.p:g},tau={params.tau:g})")


_RHO_CACHE: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def radial_measure(L, p: float, grid: SphereGrid) -> Density:
    """Density ``rho(L, .)^{n+p}`` on the grid (cached per body, p and grid)."""
    owner = L.body if isinstance(L, FromConvex) else L
    store = _RHO_CACHE.setdefault(owner, {})
    key = (float(p), id(grid))
    if key not in store:
        rho = L.radial(grid.nodes)
        store[key] = Density(grid, rho ** (grid.dim + p))
    return store[key]


def pi_plus(K, p, grid=None):
    return pi_tau(K, p, 1.0, grid)


def m_plus(L, p, grid=None):
    return m_tau(L, p, 1.0, grid)


def reflect_star(L):
    if isinstance(L, ConvexBody):
        return reflect(L)
    if isinstance(L, FromConvex):
        return FromConvex(reflect(L.body))
    if isinstance(L, SampledRadial):
        ev = (lambda U: L.evaluator(-U)) if L.evaluator is not None else None
        return SampledRadial(L.grid, L.values[L.grid.antipodes], evaluator=ev,
                             label=f"reflect({L.label})")
    raise TypeError(f"cannot reflect {type(L).__name__}")


def pi_minus(K, p, grid=None):
    """``Pi_p^- K``, evaluated as ``Pi_p^+`` of the reflected body."""
    return pi_tau(reflect(K), p, 1.0, grid)


def m_minus(L, p, grid=None):
    """``M_p^- L``, evaluated as ``M_p^+`` of the reflected body."""
    return m_tau(reflect_star(L), p, 1.0, grid)


def tau_from_coefficients(c1: float, c2: float, p: float) -> tuple[float, float]:
    """Rewrite ``c1.Pi^+ +_p c2.Pi^-`` as ``c Pi^tau``.

    Returns ``(tau, c)`` with ``c1 h_+^p + c2 h_-^p = c^p h_tau^p``, where
    ``tau = (r-1)/(r+1)``, ``r = (c1/c2)^{1/p}`` and ``c^p = c1 + c2``.
    """
    if c1 < 0 or c2 < 0 or c1 + c2 <= 0:
        raise ValueError("coefficients must be nonnegative and not both zero")
    c = (c1 + c2) ** (1.0 / p)
    if c2 == 0:
        return 1.0, c
    if c1 == 0:
        return -1.0, c
    # ratio of the smaller to the larger coefficient, so it cannot overflow
    if c1 >= c2:
        s = (c2 / c1) ** (1.0 / p)
        return (1.0 - s) / (1.0 + s), c
    r = (c1 / c2) ** (1.0 / p)
    return (r - 1.0) / (r + 1.0), c


def recombine(h_plus: np.ndarray, h_minus: np.ndarray, p: float, tau: float) -> np.ndarray:
    """Support of ``Pi^tau`` (or ``M^tau``) from the ``+`` and ``-`` supports."""
    a, b = (1.0 + tau) ** p, (1.0 - tau) ** p
    return ((a * h_plus ** p + b * h_minus ** p) / (a + b)) ** (1.0 / p)


# --------------------------------------------------------------------------
# classical projection body and limit checks


def projection_body_support(K: ConvexBody, U, grid: SphereGrid | None = None) -> np.ndarray:
    """``h(Pi K, u) = 1/2 integral of |u.v| dS(K, v)`` (shadow areas)."""
    U = np.atleast_2d(np.asarray(U, dtype=float))
    mu = sp_measure(K, 1.0, grid)
    if isinstance(mu, Atoms):
        return 0.5 * np.abs(U @ mu.directions.T) @ mu.masses
    g = mu.grid
    # normalize by the quadrature of the kernel, whose exact integral is 2 kappa_{n-1}
    s = kernel_sums(U, g.nodes, np.stack([g.weights * mu.values, g.weights], axis=1), 1.0, 0.0)
    return ball_volume(K.dim - 1) * s[:, 0] / s[:, 1]


@dataclass(frozen=True)
class LimitReport:
    """Sup-norm deviations of the two limit checks.

    ``projection_deviation`` compares ``kappa_{n-1} h(Pi_p^+ K)`` at ``p_low``
    with ``h(Pi K)`` relative to ``max h(Pi K)``; ``moment_deviation`` is
    ``max |h(M_p^+ K) - h(K)|`` at ``p_high`` divided by ``diam K``.
    """

    p_low: float
    projection_deviation: float
    p_high: float
    moment_deviation: float
    diameter: float


def limit_checks(K: ConvexBody, grid: SphereGrid | None = None, p_low: float = 1.05,
                 p_high: float = 40.0) -> LimitReport:
    grid = grid or _grid_of(K)
    n = K.dim
    U = grid.nodes
    hp = pi_tau(K, OperatorParams(p_low, 1.0, n), grid=grid).support(U)
    hpi = projection_body_support(K, U, grid)
    proj = float(np.max(np.abs(ball_volume(n - 1) * hp - hpi)) / np.max(hpi))
    hm = m_tau(K, OperatorParams(p_high, 1.0, n), grid=grid).support(U)
    diam = K.diameter
    mom = float(np.max(np.abs(hm - K.support(U))) / diam)
    return LimitReport(p_low, proj, p_high, mom, diam)
