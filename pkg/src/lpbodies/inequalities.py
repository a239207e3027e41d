"""Checkers for the affine isoperimetric inequalities of the L_p operator families.

Every checker returns an :class:`InequalityReport`.  The comparison is
normalized to a ratio ``r`` such that the inequality reads ``r <= 1``; the
verdict follows a fixed slack protocol (see :func:`verdict`).
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .body import (ConvexBody, SphereGrid, _grid_of, as_star, harmonic_radial_combination,
                   lp_combination, polar_radial, santalo_point, volume)
from .functionals import dual_mixed_volume, mixed_volume_p
from .operators import cplus_grid_transform, m_tau, pi_tau
from .sphere import ball_volume, estimate_multiplier

log = logging.getLogger(__name__)

#: relative slack within which an inequality counts as verified
SLACK = 1e-3
#: relative band within which equality is detected
EQUALITY_BAND = 5e-3

VERDICTS = ("holds", "equality", "violated-within-tolerance", "violated")


def verdict(ratio: float, slack: float = SLACK, band: float = EQUALITY_BAND) -> str:
    """Classify a normalized ratio (the inequality reads ``ratio <= 1``)."""
    if not np.isfinite(ratio):
        return "violated"
    if abs(ratio - 1.0) <= band:
        return "equality"
    if ratio < 1.0:
        return "holds"
    if ratio <= 1.0 + slack:
        return "violated-within-tolerance"
    return "violated"


@dataclass(frozen=True)
class InequalityReport:
    """Outcome of one inequality evaluation.

    Attributes
    ----------
    theorem : str
        Short tag of the inequality.
    left, right : float
        The two sides, in the orientation ``left <= right`` or
        ``left >= right`` given by ``relation``.
    relation : str
        ``"<="`` or ``">="``.
    slack : float
        ``1 - ratio`` with ``ratio`` normalized so that the inequality reads
        ``ratio <= 1``; negative values are violations.
    equality : bool
        Whether the ratio is within the equality band.
    body : str
        Short description of the input body or bodies.
    params : dict
        ``p``, ``tau``, grid resolution and anything else relevant.
    verdict : str
        One of :data:`VERDICTS`.
    """

    theorem: str
    left: float
    right: float
    relation: str
    slack: float
    equality: bool
    body: str
    params: dict
    verdict: str

    @property
    def ok(self) -> bool:
        return self.verdict in ("holds", "equality")

    def to_dict(self) -> dict:
        return asdict(self)


def make_report(theorem: str, left: float, right: float, relation: str, body: str,
                params: dict, slack: float = SLACK, band: float = EQUALITY_BAND
                ) -> InequalityReport:
    """Build a report from the two sides of ``left <= right`` or ``left >= right``."""
    if relation == "<=":
        ratio = left / right
    elif relation == ">=":
        ratio = right / left
    else:
        raise ValueError(f"relation must be '<=' or '>=', got {relation!r}")
    return InequalityReport(theorem, float(left), float(right), relation, float(1.0 - ratio),
                            bool(abs(ratio - 1.0) <= band), body, dict(params),
                            verdict(ratio, slack, band))


def _describe(K) -> str:
    f = getattr(K, "descriptor_summary", None)
    return f() if f is not None else repr(K)


def _params(p, tau, grid, **extra) -> dict:
    d = {"p": float(p), "tau": None if tau is None else float(tau),
         "resolution": grid.resolution}
    d.update(extra)
    return d


# --------------------------------------------------------------------------
# Petty projection and centroid inequalities


def polar_projection_volume(K: ConvexBody, p: float, tau: float,
                            grid: SphereGrid | None = None) -> float:
    """``V(Pi_p^{tau,*} K)``, the volume of the polar L_p projection body."""
    grid = grid or _grid_of(K)
    P = pi_tau(K, p, tau, grid)
    return volume(polar_radial(P, grid), grid, method="quadrature")


def petty_value(K: ConvexBody, p: float, tau: float, grid: SphereGrid | None = None
                ) -> float:
    """``V(K)^{n/p-1} V(Pi_p^{tau,*} K)``."""
    grid = grid or _grid_of(K)
    n = grid.dim
    return volume(K, grid) ** (n / p - 1.0) * polar_projection_volume(K, p, tau, grid)


def petty_product(K: ConvexBody, p: float, tau: float = 0.0,
                  grid: SphereGrid | None = None) -> InequalityReport:
    """Generalized L_p Petty projection inequality.

    ``V(K)^{n/p-1} V(Pi_p^{tau,*} K) <= kappa_n^{n/p}`` with equality for
    centered ellipsoids.
    """
    grid = grid or _grid_of(K)
    n = grid.dim
    left = petty_value(K, p, tau, grid)
    right = ball_volume(n) ** (n / p)
    return make_report("petty-projection", left, right, "<=", _describe(K),
                       _params(p, tau, grid))


def moment_volume(L, p: float, tau: float, grid: SphereGrid | None = None) -> float:
    """``V(M_p^tau L)``."""
    L = as_star(L)
    grid = grid or _grid_of(L)
    return volume(m_tau(L, p, tau, grid), grid)


def centroid_product(L, p: float, tau: float = 0.0, grid: SphereGrid | None = None
                     ) -> InequalityReport:
    """L_p Busemann-Petty centroid inequality.

    ``V(L)^{-n/p-1} V(M_p^tau L) >= kappa_n^{-n/p}`` with equality for centered
    ellipsoids.
    """
    S = as_star(L)
    grid = grid or _grid_of(S)
    n = grid.dim
    left = volume(L, grid) ** (-n / p - 1.0) * moment_volume(S, p, tau, grid)
    right = ball_volume(n) ** (-n / p)
    return make_report("busemann-petty-centroid", left, right, ">=", _describe(L),
                       _params(p, tau, grid))


# --------------------------------------------------------------------------
# tau sweeps


def tau_grid(nodes: int = 21) -> np.ndarray:
    """Ascending grid on [-1, 1], symmetric about 0, containing 0 when ``nodes`` is odd."""
    if nodes < 2:
        raise ValueError("a tau grid needs at least two nodes")
    t = np.linspace(-1.0, 1.0, nodes)
    t = 0.5 * (t - t[::-1])
    t[np.abs(t) < 1e-15] = 0.0
    return t


@dataclass(frozen=True)
class TauSweep:
    """Functional values over a tau grid with the ordering diagnostics.

    Attributes
    ----------
    kind : str
        ``"projection"`` (polar volume, minimum expected at 0) or ``"moment"``
        (volume, maximum expected at 0).
    taus, values : ndarray
    argmin, argmax : float
        Tau values at which the extreme values occur.
    violations : list of str
        Orderings that fail beyond the slack.
    strict : bool
        Whether strictness was asserted (nonsymmetric body, p not an odd integer).
    """

    kind: str
    taus: np.ndarray
    values: np.ndarray
    argmin: float
    argmax: float
    violations: list = field(default_factory=list)
    strict: bool = False

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def spread(self) -> float:
        """``(max - min) / max`` of the values."""
        return float((self.values.max() - self.values.min()) / self.values.max())


def _odd_integer(p: float) -> bool:
    return float(p).is_integer() and int(p) % 2 == 1


def _is_symmetric(values_on_grid: np.ndarray, grid: SphereGrid, tol: float = 1e-9) -> bool:
    v = values_on_grid
    return bool(np.max(np.abs(v - v[grid.antipodes])) <= tol * np.max(np.abs(v)))


def _sweep(kind: str, taus, values, symmetric: bool, p: float, slack: float) -> TauSweep:
    taus = np.asarray(taus, dtype=float)
    values = np.asarray(values, dtype=float)
    if np.any(np.diff(taus) <= 0) or not np.allclose(taus, -taus[::-1], atol=1e-12):
        raise ValueError("tau grid must be ascending and symmetric about 0")
    if not np.all(np.isfinite(values)):
        raise FloatingPointError("non-finite functional value in sweep")
    # orient so that the expected minimum is at tau = 0 and maxima at the ends
    sign = 1.0 if kind == "projection" else -1.0
    v = sign * values
    lo = np.abs(v) * slack
    violations = []
    zero = np.flatnonzero(taus == 0.0)
    if zero.size:
        i0 = int(zero[0])
        bad = taus[v[i0] > v + lo]
        if bad.size:
            violations.append(f"tau=0 is not extremal: beaten at tau={bad.tolist()}")
    ends = np.maximum(v[0], v[-1])
    bad = taus[v > ends + lo]
    if bad.size:
        violations.append(f"endpoints are not extremal: beaten at tau={bad.tolist()}")
    left = taus <= 0
    right = taus >= 0
    if np.any(np.diff(v[left]) > lo[left][1:]):
        violations.append("not monotone on [-1, 0]")
    if np.any(np.diff(v[right]) < -lo[right][1:]):
        violations.append("not monotone on [0, 1]")
    strict = not symmetric and not _odd_integer(p)
    if strict and zero.size:
        i0 = int(zero[0])
        others = np.delete(v, i0)
        if not np.all(others > v[i0]):
            violations.append("tau=0 is not a strict extremum")
    return TauSweep(kind, taus, values, float(taus[np.argmin(values)]),
                    float(taus[np.argmax(values)]), violations, strict)


def strongest_pi_sweep(K: ConvexBody, p: float, taus=None, grid: SphereGrid | None = None,
                       slack: float = SLACK) -> TauSweep:
    """``V(Pi_p^{tau,*} K)`` over a tau grid: minimal at 0, maximal at the ends."""
    grid = grid or _grid_of(K)
    taus = tau_grid() if taus is None else taus
    vals = [polar_projection_volume(K, p, t, grid) for t in taus]
    h = K.support(grid.nodes)
    return _sweep("projection", taus, vals, _is_symmetric(h, grid), p, slack)


def strongest_m_sweep(L, p: float, taus=None, grid: SphereGrid | None = None,
                      slack: float = SLACK) -> TauSweep:
    """``V(M_p^tau L)`` over a tau grid: maximal at 0, minimal at the ends."""
    S = as_star(L)
    grid = grid or _grid_of(S)
    taus = tau_grid() if taus is None else taus
    vals = [moment_volume(S, p, t, grid) for t in taus]
    rho = S.radial(grid.nodes)
    return _sweep("moment", taus, vals, _is_symmetric(rho, grid), p, slack)


# --------------------------------------------------------------------------
# Blaschke-Santalo and its corollary


def polar_volume_about(K: ConvexBody, s, grid: SphereGrid) -> float:
    """``V((K - s)^*)`` by quadrature of ``(h(K,u) - s.u)^{-n}``."""
    n = grid.dim
    h = K.support(grid.nodes) - grid.nodes @ np.asarray(s, dtype=float)
    if np.any(h <= 0):
        raise ValueError("point is not interior to the body")
    return float(np.sum(grid.weights * h ** (-n)) / n)


def santalo_check(K: ConvexBody, grid: SphereGrid | None = None) -> InequalityReport:
    """Blaschke-Santalo inequality ``V(K) V((K - s)^*) <= kappa_n^2``."""
    grid = grid or _grid_of(K)
    n = grid.dim
    s = santalo_point(K, grid)
    left = volume(K, grid) * polar_volume_about(K, s, grid)
    return make_report("blaschke-santalo", left, ball_volume(n) ** 2, "<=", _describe(K),
                       _params(float("nan"), None, grid, santalo_point=s.tolist()))


def corollary_check(L, p: float, tau: float = 0.0, grid: SphereGrid | None = None
                    ) -> InequalityReport:
    """``V(L)^{n/p+1} V((M_p^tau L - s)^*) <= kappa_n^{n/p+2}``.

    ``s`` is the Santalo point of ``M_p^tau L``; the bound composes the centroid
    inequality with the Blaschke-Santalo inequality.
    """
    S = as_star(L)
    grid = grid or _grid_of(S)
    n = grid.dim
    M = m_tau(S, p, tau, grid)
    s = santalo_point(M, grid)
    left = volume(L, grid) ** (n / p + 1.0) * polar_volume_about(M, s, grid)
    right = ball_volume(n) ** (n / p + 2.0)
    return make_report("centroid-santalo-corollary", left, right, "<=", _describe(L),
                       _params(p, tau, grid, santalo_point=s.tolist()))


# --------------------------------------------------------------------------
# class reduction chain


@dataclass(frozen=True)
class ClassReductionReport:
    """The three inequalities of the class reduction chain.

    ``i0`` and ``chain`` are ``None`` when the curvature of the composed body
    could not be computed; ``note`` then says why.
    """

    i2: InequalityReport
    i0: InequalityReport | None
    chain: InequalityReport | None
    note: str = ""

    @property
    def reports(self) -> list:
        return [r for r in (self.i2, self.i0, self.chain) if r is not None]


def class_reduction_check(K: ConvexBody, p: float, tau: float = 0.0,
                          grid: SphereGrid | None = None, L=None) -> ClassReductionReport:
    """Evaluate the class reduction chain for ``K``.

    With ``A = Pi_p^{tau,*} K`` and ``B = M_p^tau A``:

    * ``V(A)^n >= V(K)^{n-p} V(B)^p``;
    * ``V(M_p^tau L)^n >= V(L)^{n+p} V(Pi_p^{tau,*} M_p^tau L)^{-p}`` with
      ``L = A`` unless another star body is given;
    * ``V(K)^{n/p-1} V(A) <= V(B)^{n/p-1} V(Pi_p^{tau,*} B)``.

    ``B`` is a sampled support body whose L_p surface area measure comes from
    the finite-difference curvature path; if that fails the last two checks are
    dropped (or only the last, when ``L`` is given).
    """
    grid = grid or _grid_of(K)
    n = grid.dim
    desc = _describe(K)
    prm = _params(p, tau, grid)
    VK = volume(K, grid)
    A = polar_radial(pi_tau(K, p, tau, grid), grid)
    VA = volume(A, grid, method="quadrature")
    B = m_tau(A, p, tau, grid)
    note = ""
    try:
        VB = volume(B, grid, method="curvature")
    except FloatingPointError as exc:
        note = f"curvature path failed on the composed body: {exc}"
        log.warning(note)
        VB = volume(B, grid, method="quadrature")
    i2 = make_report("class-reduction-i2", VA ** n, VK ** (n - p) * VB ** p, ">=", desc, prm)

    def i0_report(star, Vstar, M):
        VM = volume(M, grid, method="curvature")
        C = polar_radial(pi_tau(M, p, tau, grid), grid)
        VC = volume(C, grid, method="quadrature")
        return make_report("class-reduction-i0", VM ** n, Vstar ** (n + p) * VC ** (-p),
                           ">=", _describe(star), prm), VC

    i0 = chain = None
    if L is not None:
        S = as_star(L)
        try:
            i0, _ = i0_report(L, volume(L, grid), m_tau(S, p, tau, grid))
        except FloatingPointError as exc:
            note = f"curvature path failed for M_p^tau L: {exc}"
            log.warning(note)
    if not note or L is not None:
        try:
            r, VC = i0_report(A, VA, B)
            if L is None:
                i0 = r
            chain = make_report("class-reduction-chain", VK ** (n / p - 1.0) * VA,
                                VB ** (n / p - 1.0) * VC, "<=", desc, prm)
        except FloatingPointError as exc:
            note = f"curvature path failed on the composed body: {exc}"
            log.warning(note)
    return ClassReductionReport(i2, i0, chain, note)


# --------------------------------------------------------------------------
# classical L_p inequalities


def minkowski_check(K: ConvexBody, L: ConvexBody, p: float,
                    grid: SphereGrid | None = None) -> InequalityReport:
    """L_p Minkowski inequality ``V_p(K,L)^n >= V(K)^{n-p} V(L)^p``."""
    grid = grid or _grid_of(K)
    n = grid.dim
    left = mixed_volume_p(K, L, p, grid).value ** n
    right = volume(K, grid) ** (n - p) * volume(L, grid) ** p
    return make_report("lp-minkowski", left, right, ">=",
                       f"{_describe(K)} | {_describe(L)}", _params(p, None, grid))


def dual_minkowski_check(K, L, p: float, grid: SphereGrid | None = None
                         ) -> InequalityReport:
    """Dual L_p Minkowski inequality ``V~_{-p}(K,L)^n >= V(K)^{n+p} V(L)^{-p}``."""
    grid = grid or _grid_of(as_star(K))
    n = grid.dim
    left = dual_mixed_volume(K, L, p, grid).value ** n
    VK = volume(as_star(K), grid, method="quadrature")
    VL = volume(as_star(L), grid, method="quadrature")
    right = VK ** (n + p) * VL ** (-p)
    return make_report("dual-lp-minkowski", left, right, ">=",
                       f"{_describe(K)} | {_describe(L)}", _params(p, None, grid))


def brunn_minkowski_check(K: ConvexBody, L: ConvexBody, p: float,
                          grid: SphereGrid | None = None) -> InequalityReport:
    """L_p Brunn-Minkowski ``V(K +_p L)^{p/n} >= V(K)^{p/n} + V(L)^{p/n}``."""
    grid = grid or _grid_of(K)
    n = grid.dim
    S = lp_combination(1.0, K, 1.0, L, p, grid)
    left = volume(S, grid) ** (p / n)
    right = volume(K, grid) ** (p / n) + volume(L, grid) ** (p / n)
    return make_report("lp-brunn-minkowski", left, right, ">=",
                       f"{_describe(K)} | {_describe(L)}", _params(p, None, grid))


def dual_brunn_minkowski_check(K, L, p: float, grid: SphereGrid | None = None
                               ) -> InequalityReport:
    """Dual L_p Brunn-Minkowski ``V(K +~_p L)^{-p/n} >= V(K)^{-p/n} + V(L)^{-p/n}``."""
    SK, SL = as_star(K), as_star(L)
    grid = grid or _grid_of(SK)
    n = grid.dim
    S = harmonic_radial_combination(1.0, SK, 1.0, SL, p, grid)
    left = volume(S, grid, method="quadrature") ** (-p / n)
    right = (volume(SK, grid, method="quadrature") ** (-p / n)
             + volume(SL, grid, method="quadrature") ** (-p / n))
    return make_report("dual-lp-brunn-minkowski", left, right, ">=",
                       f"{_describe(K)} | {_describe(L)}", _params(p, None, grid))


# --------------------------------------------------------------------------
# multipliers of the cosine transform


@dataclass(frozen=True)
class MultiplierRow:
    """Multiplier ``a_k`` of the ``phi_tau`` transform at one degree."""

    k: int
    value: float
    residual: float
    zero: bool
    predicted_zero: bool

    def to_dict(self) -> dict:
        return asdict(self)


def predicted_zero(p: float, k: int, tau: float = 1.0) -> bool:
    """Whether the multiplier of the ``phi_tau`` transform vanishes at degree ``k``.

    For integer ``p`` the degrees ``k = p+2, p+4, ...`` vanish; with
    ``tau = 0`` the kernel is even, so every odd degree vanishes as well.
    """
    if k % 2 == 1 and tau == 0.0:
        return True
    return float(p).is_integer() and k >= p + 2 and (k - int(p)) % 2 == 0


def multiplier_table(p: float, kmax: int, grid: SphereGrid, tau: float = 1.0,
                     zero_tol: float = 1e-6, quadrature_tol: float = 1e-5) -> list:
    """Multipliers of the normalized ``phi_tau`` cosine transform for ``k <= kmax``.

    ``tau = 1`` is the transform ``C_p^+`` itself.
    """
    T = cplus_grid_transform(p, grid, tau)
    rows = []
    for k in range(kmax + 1):
        est = estimate_multiplier(T, k, grid, quadrature_tol)
        rows.append(MultiplierRow(k, est.value, est.residual, abs(est.value) <= zero_tol,
                                  predicted_zero(p, k, tau)))
    return rows


def multiplier_reports(p: float, kmax: int, grid: SphereGrid, tau: float = 1.0
                       ) -> list:
    """Agreement of measured zeros with the predicted zero pattern, as reports.

    Each degree gives a report that holds (ratio 0) when the measured
    zero/nonzero status matches the prediction and is violated (ratio 2)
    otherwise.
    """
    out = []
    for row in multiplier_table(p, kmax, grid, tau):
        left = 0.0 if row.zero == row.predicted_zero else 2.0
        out.append(make_report(f"multiplier-k{row.k}", left, 1.0, "<=",
                               f"a_{row.k}={row.value:.6e}",
                               _params(p, tau, grid, k=row.k, value=row.value,
                                       residual=row.residual, zero=row.zero,
                                       predicted_zero=row.predicted_zero)))
    return out


def ratio_of(report: InequalityReport) -> float:
    """The normalized ratio (``<= 1`` when the inequality holds)."""
    return 1.0 - report.slack

