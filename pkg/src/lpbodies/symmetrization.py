"""Steiner symmetrization, the Steiner inclusion check and symmetrization flows.

Three constructions of the symmetral ``S_u K`` are available:

* ellipsoids and their translates: the exact volume-preserving shear that
  moves every chord midpoint onto ``u^perp``;
* polytopes with few facets: the exact symmetral as the image of the fiber
  polytope ``{(x, t1, t2) : x + t1 u, x + t2 u in K}`` under
  ``(x, t1, t2) -> x + (t1 - t2)/2 u``;
* any body with a chord oracle: the convex hull of the symmetrized chord
  endpoints over a polar disk grid on ``u^perp``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import sqrtm
from scipy.spatial import ConvexHull, HalfspaceIntersection

from .body import (Ball, ConvexBody, Ellipsoid, Polytope, SphereGrid, Translate, _chunked_rows,
                   _grid_of, _golden_min, polar_radial, tangent_frames, volume)
from .inequalities import petty_value
from .operators import pi_tau
from .sphere import ball_volume

log = logging.getLogger(__name__)

#: facet count above which polytopes use the sampled construction
MAX_EXACT_FACETS = 200
#: vertex count above which the sampled construction uses the disk grid only
MAX_KINK_VERTICES = 500
#: edge count above which the sampled construction skips edge crossings
MAX_CROSSING_EDGES = 1000


def _unit_vector(u, n: int) -> np.ndarray:
    u = np.asarray(u, dtype=float).reshape(-1)
    if u.shape != (n,):
        raise ValueError(f"direction must have dimension {n}")
    r = np.linalg.norm(u)
    if r == 0:
        raise ValueError("direction must be nonzero")
    return u / r


def _frame(u: np.ndarray) -> np.ndarray:
    """Orthonormal basis of ``u^perp`` as rows."""
    return tangent_frames(u[None])[0]


# --------------------------------------------------------------------------
# exact constructions


def _steiner_ellipsoid(A: np.ndarray, c: np.ndarray, u: np.ndarray) -> ConvexBody:
    P = np.linalg.inv(A @ A.T)
    g = -P @ u / (u @ P @ u)
    g = g - (g @ u) * u
    # shear x -> x - (g.x_perp) u maps chord midpoints to the hyperplane through c
    L = np.eye(len(u)) - np.outer(u, g)
    S = np.real(sqrtm(L @ A @ A.T @ L.T))
    E = Ellipsoid(0.5 * (S + S.T))
    center = c - (c @ u) * u
    if np.allclose(E.A, E.A[0, 0] * np.eye(len(u)), rtol=0, atol=1e-12):
        E = Ball(float(E.A[0, 0]), len(u))
    if np.any(np.abs(center) > 1e-15 * np.abs(A).max()):
        return Translate(E, center)
    return E


def _steiner_polytope_exact(K: Polytope, u: np.ndarray) -> Polytope:
    n = K.dim
    T = _frame(u)
    N, b = K.normals, K.offsets
    nT = N @ T.T
    nu = N @ u
    vertical = np.abs(nu) <= 1e-12
    rows = [np.hstack([nT, nu[:, None], np.zeros((len(b), 1)), -b[:, None]])]
    keep = ~vertical
    rows.append(np.hstack([nT[keep], np.zeros((keep.sum(), 1)), nu[keep, None],
                           -b[keep, None]]))
    H = np.vstack(rows)
    hs = HalfspaceIntersection(H, np.zeros(n + 1))
    Z = hs.intersections
    X = Z[:, :n - 1] @ T + (0.5 * (Z[:, n - 1] - Z[:, n]))[:, None] * u
    return Polytope(X)


# --------------------------------------------------------------------------
# sampled construction


def _projection_radial(K: ConvexBody, T: np.ndarray, u: np.ndarray, D: np.ndarray,
                       iters: int = 60) -> np.ndarray:
    """Radial function of the projection ``K | u^perp`` in directions ``D @ T``."""
    poly = K.polytope if isinstance(K, Translate) else K
    if isinstance(poly, Polytope):
        Y = poly.vertices @ T.T
        hull = ConvexHull(Y)
        eq = hull.equations
        G = eq[:, :-1] / -eq[:, -1:]
        return 1.0 / np.max(D @ G.T, axis=1)
    # bisection on nonemptiness of the chord through r * d
    X = D @ T
    hi = np.full(len(D), 1.0)
    for _ in range(64):
        lo_c, hi_c = K.chord(hi[:, None] * X, u)
        out = ~(lo_c <= hi_c)
        if np.all(out):
            break
        hi = np.where(out, hi, 2.0 * hi)
    else:
        raise FloatingPointError("projection of the body appears unbounded")
    lo = np.zeros(len(D))
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        a, b = K.chord(mid[:, None] * X, u)
        inside = a <= b
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
    return lo


def disk_samples(rings: int) -> tuple[np.ndarray, np.ndarray]:
    """Polar sampling of the unit disk, refined toward the rim.

    Returns radius fractions and unit directions (as 2-vectors).  Ring ``i``
    has radius ``sin(pi i / (2 rings))``, so the spacing shrinks quadratically
    at the rim where chord lengths of smooth bodies vary fastest, and about
    ``2 pi rings`` times its radius points; the centre is included.
    """
    f = [np.zeros(1)]
    D = [np.array([[1.0, 0.0]])]
    for i in range(1, rings + 1):
        r = np.sin(0.5 * np.pi * i / rings)
        m = max(6, int(round(2.0 * np.pi * rings * r)))
        th = 2.0 * np.pi * (np.arange(m) + 0.5 * (i % 2)) / m
        f.append(np.full(m, r))
        D.append(np.column_stack([np.cos(th), np.sin(th)]))
    return np.concatenate(f), np.vstack(D)


def _edge_crossings(K: Polytope, T: np.ndarray) -> np.ndarray:
    """Pairwise crossings of the projected edges of a polytope (in ``T`` coordinates)."""
    simp = ConvexHull(K.vertices).simplices
    E = np.unique(np.sort(np.vstack([simp[:, [0, 1]], simp[:, [1, 2]], simp[:, [0, 2]]]),
                          axis=1), axis=0)
    Y = K.vertices @ T.T
    if len(E) > MAX_CROSSING_EDGES:
        return np.empty((0, Y.shape[1]))
    A, B = Y[E[:, 0]], Y[E[:, 1]]
    i, j = np.triu_indices(len(E), 1)
    d1, d2 = B[i] - A[i], B[j] - A[j]
    den = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    ok = np.abs(den) > 1e-14
    w = A[j] - A[i]
    with np.errstate(divide="ignore", invalid="ignore"):
        s = (w[:, 0] * d2[:, 1] - w[:, 1] * d2[:, 0]) / den
        t = (w[:, 0] * d1[:, 1] - w[:, 1] * d1[:, 0]) / den
    ok &= (s > 0) & (s < 1) & (t > 0) & (t < 1)
    return A[i][ok] + s[ok, None] * d1[ok]


def _steiner_sampled(K: ConvexBody, u: np.ndarray, rings: int):
    T = _frame(u)
    f, D = disk_samples(rings)
    R = _projection_radial(K, T, u, D)
    # stay just inside the projection so that boundary chords are nonempty
    X = ((f * R * (1.0 - 1e-9))[:, None] * D) @ T
    poly = K.polytope if isinstance(K, Translate) else K
    if isinstance(poly, Polytope) and len(poly.vertices) <= MAX_KINK_VERTICES:
        # chord lengths of a polytope are piecewise linear over the arrangement
        # of projected edges: add projected vertices and edge crossings
        Y = np.vstack([poly.vertices @ T.T, _edge_crossings(poly, T)])
        X = np.vstack([X, (Y * (1.0 - 1e-9)) @ T])
    lo, hi = K.chord(X, u)
    ok = np.isfinite(lo) & np.isfinite(hi) & (hi >= lo)
    if not np.all(ok):
        log.debug("dropped %d chords outside the body", int(np.sum(~ok)))
    X, half = X[ok], 0.5 * (hi[ok] - lo[ok])
    pts = np.vstack([X + half[:, None] * u, X - half[:, None] * u])
    hull = ConvexHull(pts)
    # hull vertices have depth 0; the other samples lie on or below the hull
    inner = np.ones(len(pts), dtype=bool)
    inner[hull.vertices] = False
    eq = hull.equations
    depth = _chunked_rows(pts[inner], lambda B: np.min(-(B @ eq[:, :-1].T + eq[:, -1]),
                                                       axis=1), chunk=64)
    scale = np.max(np.linalg.norm(pts, axis=1))
    defect = float(np.max(depth) / scale) if depth.size else 0.0
    return Polytope(pts, _hull=hull), max(defect, 0.0)


# --------------------------------------------------------------------------
# public interface


@dataclass(frozen=True, eq=False)
class SteinerStep:
    """One Steiner symmetrization with its diagnostics.

    Attributes
    ----------
    direction : ndarray
        Unit vector ``u``.
    input, output : ConvexBody
    resolution : int
        Number of rings of the disk grid (unused by the exact paths).
    method : str
        ``"ellipsoid"``, ``"fiber"`` or ``"sampled"``.
    convexity_defect : float
        Largest depth of a sampled boundary point below the hull, relative to
        the body's circumradius (0 for the exact paths).
    """

    direction: np.ndarray
    input: ConvexBody
    output: ConvexBody
    resolution: int
    method: str
    convexity_defect: float

    @property
    def volume_drift(self) -> float:
        """``V(S_u K) / V(K) - 1``."""
        return volume(self.output) / volume(self.input) - 1.0


def _ellipsoid_parts(K):
    if isinstance(K, Ellipsoid):
        return K.A, np.zeros(K.dim)
    if isinstance(K, Translate) and isinstance(K.inner, Ellipsoid):
        return K.inner.A, K.offset
    return None


def steiner_step(K: ConvexBody, u, resolution: int = 48, method: str = "auto") -> SteinerStep:
    """Steiner symmetral of ``K`` in direction ``u`` with diagnostics.

    Parameters
    ----------
    K : ConvexBody
        Body with the origin in its interior.
    u : array_like
        Direction (normalized internally).
    resolution : int
        Number of rings of the polar disk grid of the sampled construction.
    method : {"auto", "ellipsoid", "fiber", "sampled"}
        ``"auto"`` picks the exact construction when available (polytopes up
        to :data:`MAX_EXACT_FACETS` facets).
    """
    u = _unit_vector(u, K.dim)
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    ell = _ellipsoid_parts(K)
    poly = K.polytope if isinstance(K, Translate) else K
    poly = poly if isinstance(poly, Polytope) else None
    if method == "auto":
        if ell is not None:
            method = "ellipsoid"
        elif poly is not None and len(poly.offsets) <= MAX_EXACT_FACETS:
            method = "fiber"
        else:
            method = "sampled"
    if method == "ellipsoid":
        if ell is None:
            raise ValueError("the ellipsoid construction needs an ellipsoid")
        out, defect = _steiner_ellipsoid(ell[0], ell[1], u), 0.0
    elif method == "fiber":
        if poly is None:
            raise ValueError("the fiber construction needs a polytope")
        out, defect = _steiner_polytope_exact(poly, u), 0.0
    elif method == "sampled":
        out, defect = _steiner_sampled(K, u, resolution)
    else:
        raise ValueError(f"unknown Steiner method {method!r}")
    return SteinerStep(u, K, out, resolution, method, defect)


def steiner(K: ConvexBody, u, resolution: int = 48, method: str = "auto") -> ConvexBody:
    """Steiner symmetral ``S_u K``; see :func:`steiner_step`."""
    return steiner_step(K, u, resolution, method).output


def mirror(u) -> np.ndarray:
    """Reflection matrix in the hyperplane ``u^perp``."""
    u = np.asarray(u, dtype=float)
    u = u / np.linalg.norm(u)
    return np.eye(len(u)) - 2.0 * np.outer(u, u)


# --------------------------------------------------------------------------
# Steiner inclusion for polar L_p projection bodies


def steiner_polar_radial(H, V: np.ndarray, u: np.ndarray, tol: float = 1e-13,
                         max_iter: int = 200) -> np.ndarray:
    """Radial function of ``S_u L`` for ``L = {x : H(x) <= 1}``.

    ``H`` is a 1-homogeneous convex gauge evaluated on arrays of vectors.  For
    ``v = w + s u`` with ``w`` in ``u^perp``,
    ``rho(S_u L, v) = 1 / min_a max(q(a), q(a - 2|s|))`` with
    ``q(a) = H(w + a u)``; the minimum is at the crossing of the two
    branches, found by the Illinois variant of regula falsi.
    """
    V = np.atleast_2d(np.asarray(V, dtype=float))
    s = V @ u
    W = V - s[:, None] * u
    d = 2.0 * np.abs(s)

    def q(a, idx):
        return H(W[idx] + a[:, None] * u)

    out = np.empty(len(V))
    flat = d <= 1e-12
    if np.any(flat):
        idx = np.flatnonzero(flat)
        span = 4.0 * np.max(H(np.vstack([u, -u]))) / max(np.min(H(V[idx])), 1e-300)
        span = np.full(idx.size, span)
        val, _ = _golden_min(lambda a: q(a, idx), -span, span, 90)
        out[idx] = 1.0 / val
    idx = np.flatnonzero(~flat)
    if idx.size:
        dd = d[idx]

        def gap(a, sub):
            j = idx[sub]
            return q(a, j) - q(a - dd[sub], j)

        every = np.arange(idx.size)
        lo = np.zeros(idx.size)
        hi = dd.copy()
        glo, ghi = gap(lo, every), gap(hi, every)
        # widen until the crossing is bracketed (gap is nondecreasing in a)
        for _ in range(200):
            bad_lo = glo > 0
            bad_hi = ghi < 0
            if not (np.any(bad_lo) or np.any(bad_hi)):
                break
            w = hi - lo
            lo = np.where(bad_lo, lo - w, lo)
            hi = np.where(bad_hi, hi + w, hi)
            if np.any(bad_lo):
                glo[bad_lo] = gap(lo[bad_lo], np.flatnonzero(bad_lo))
            if np.any(bad_hi):
                ghi[bad_hi] = gap(hi[bad_hi], np.flatnonzero(bad_hi))
        else:
            raise FloatingPointError("could not bracket the chord crossing")
        active = np.flatnonzero((glo < 0) & (ghi > 0))
        side = np.zeros(idx.size, dtype=int)
        for _ in range(max_iter):
            if active.size == 0:
                break
            a_lo, a_hi = lo[active], hi[active]
            g_lo, g_hi = glo[active], ghi[active]
            x = a_hi - g_hi * (a_hi - a_lo) / (g_hi - g_lo)
            # fall back to bisection if the secant step leaves the bracket
            bad = ~((x > a_lo) & (x < a_hi))
            x = np.where(bad, 0.5 * (a_lo + a_hi), x)
            gx = gap(x, active)
            up = gx < 0
            lo[active] = np.where(up, x, a_lo)
            glo[active] = np.where(up, gx, g_lo)
            hi[active] = np.where(up, a_hi, x)
            ghi[active] = np.where(up, g_hi, gx)
            # Illinois: halve the stale end point value after two same-side moves
            sd = np.where(up, 1, -1)
            stale_hi = up & (side[active] == 1)
            stale_lo = ~up & (side[active] == -1)
            ghi[active[stale_hi]] *= 0.5
            glo[active[stale_lo]] *= 0.5
            side[active] = sd
            width = hi[active] - lo[active]
            done = (gx == 0) | (width <= tol * (1.0 + np.abs(x)))
            active = active[~done]
        a = np.where(np.abs(glo) < np.abs(ghi), lo, hi)
        a = np.where(glo == 0, lo, np.where(ghi == 0, hi, a))
        j = idx
        val = np.maximum(q(a, j), q(a - dd, j))
        out[idx] = 1.0 / val
    return out


@dataclass(frozen=True)
class InclusionReport:
    """Comparison of ``rho(S_u Pi^{tau,*} K)`` with ``rho(Pi^{tau,*} S_u K)`` on a grid."""

    max_violation: float
    scale: float
    tolerance: float
    min_margin: float
    direction: tuple
    p: float
    tau: float
    resolution: int
    steiner_method: str

    @property
    def holds(self) -> bool:
        return self.max_violation <= self.tolerance


def inclusion_check(K: ConvexBody, p: float, tau: float, u, grid: SphereGrid | None = None,
                    resolution: int = 48, rel_tol: float = 1e-6) -> InclusionReport:
    """Check ``S_u Pi_p^{tau,*} K`` is contained in ``Pi_p^{tau,*} S_u K``.

    Radial functions of both sides are compared at every grid node; the
    tolerance is ``rel_tol`` times the largest radial value of the right side.
    ``max_violation`` is the largest excess of the left radial function, and
    ``min_margin`` the smallest gap (negative when violated).
    """
    grid = grid or _grid_of(K)
    u = _unit_vector(u, K.dim)
    P = pi_tau(K, p, tau, grid)
    left = steiner_polar_radial(P.support, grid.nodes, u)
    step = steiner_step(K, u, resolution)
    right = polar_radial(pi_tau(step.output, p, tau, grid), grid).radial(grid.nodes)
    scale = float(np.max(right))
    diff = left - right
    return InclusionReport(float(max(np.max(diff), 0.0)), scale, rel_tol * scale,
                           float(-np.max(diff)), tuple(u.tolist()), float(p), float(tau),
                           grid.resolution, step.method)


# --------------------------------------------------------------------------
# symmetrization flow


@dataclass(frozen=True)
class FlowRow:
    """One row of a flow trace.

    ``ball_distance`` is ``max_u |rho(K,u) - r| / r`` with ``r`` the radius of
    the ball of the same volume as the current body.
    """

    step: int
    direction: tuple
    volume: float
    petty: float
    ball_distance: float
    volume_drift: float
    method: str


@dataclass(frozen=True, eq=False)
class FlowTrace:
    rows: list
    body: ConvexBody
    p: float
    tau: float
    seed: int
    resolution: int
    stopped_early: bool = False
    bodies: list = field(default_factory=list)

    @property
    def final_distance(self) -> float:
        return self.rows[-1].ball_distance

    @property
    def max_drift(self) -> float:
        return max((abs(r.volume_drift) for r in self.rows[1:]), default=0.0)

    def petty_decreases(self, slack: float = 1e-3) -> list:
        """Steps at which the Petty product dropped by more than ``slack`` (relative)."""
        out = []
        for a, b in zip(self.rows, self.rows[1:]):
            if np.isfinite(a.petty) and b.petty < a.petty * (1.0 - slack):
                out.append(b.step)
        return out


def ball_distance(K: ConvexBody, grid: SphereGrid) -> float:
    """``max_u |rho(K,u) - r| / r`` for the ball of equal volume."""
    n = grid.dim
    r = (volume(K, grid) / ball_volume(n)) ** (1.0 / n)
    return float(np.max(np.abs(K.radial(grid.nodes) - r)) / r)


def flow_directions(steps: int, seed: int, n: int = 3) -> np.ndarray:
    """Seeded uniformly distributed unit directions."""
    rng = np.random.default_rng(seed)
    D = rng.standard_normal((steps, n))
    return D / np.linalg.norm(D, axis=1, keepdims=True)


def symmetrize_flow(K: ConvexBody, steps: int = 60, seed: int = 0, p: float = 2.0,
                    tau: float = 0.0, grid: SphereGrid | None = None, resolution: int = 48,
                    stop_distance: float | None = None, track_petty: bool = True,
                    keep_bodies: bool = False, method: str = "auto") -> FlowTrace:
    """Apply Steiner symmetrizations in seeded random directions.

    Parameters
    ----------
    K : ConvexBody
    steps : int
        Maximal number of steps, at least 1.
    seed : int
        Seed of the direction sequence.
    p, tau : float
        Parameters of the tracked Petty product.
    grid : SphereGrid, optional
        Grid for radial distances and the Petty product.
    resolution : int
        Disk-grid rings of the sampled Steiner construction.
    stop_distance : float, optional
        Stop once the relative ball distance falls below this value.
    track_petty : bool
        Compute the Petty product after every step (NaN otherwise).
    keep_bodies : bool
        Keep every intermediate body in the trace.
    """
    if steps < 1:
        raise ValueError("steps must be at least 1")
    grid = grid or _grid_of(K)
    dirs = flow_directions(steps, seed, K.dim)

    def row(i, body, u, drift, meth):
        pv = petty_value(body, p, tau, grid) if track_petty else float("nan")
        return FlowRow(i, tuple(float(x) for x in u), volume(body, grid), pv,
                       ball_distance(body, grid), drift, meth)

    rows = [row(0, K, np.zeros(K.dim), 0.0, "")]
    bodies = [K] if keep_bodies else []
    body = K
    stopped = False
    for i, u in enumerate(dirs, start=1):
        st = steiner_step(body, u, resolution, method)
        drift = volume(st.output, grid) / volume(body, grid) - 1.0
        body = st.output
        rows.append(row(i, body, u, drift, st.method))
        if keep_bodies:
            bodies.append(body)
        if stop_distance is not None and rows[-1].ball_distance <= stop_distance:
            stopped = i < steps
            break
    return FlowTrace(rows, body, float(p), float(tau), int(seed), int(resolution), stopped,
                     bodies)
