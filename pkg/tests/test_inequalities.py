from math import pi

import numpy as np
import pytest
from numpy.testing import assert_allclose

from lpbodies.body import Ball, Ellipsoid, Polytope, Translate, linear_image, sp_measure, volume
from lpbodies.inequalities import (EQUALITY_BAND, SLACK, centroid_product, class_reduction_check,
                                   corollary_check, make_report, multiplier_reports,
                                   multiplier_table, petty_product, petty_value, predicted_zero,
                                   ratio_of, santalo_check, strongest_m_sweep,
                                   strongest_pi_sweep, tau_grid, verdict)
from lpbodies.operators import c_np, cosine_transform_plus
from lpbodies.sphere import build_grid

KAPPA3 = 4 * pi / 3
CUBE = np.array([[x, y, z] for x in (-1, 1) for y in (-1, 1) for z in (-1, 1)], float)
SIMPLEX = np.array([[-0.5, -0.5, -0.5], [2, 0, 0], [0, 2, 0], [0, 0, 2]], float)
SHIFTED = Translate(Ball(1), [0, 0, 0.3])


@pytest.fixture(scope="module")
def g64():
    return build_grid(3, 64)


@pytest.fixture(scope="module")
def g32():
    return build_grid(3, 32)


def random_ellipsoid(rng, max_cond=4.0):
    Q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    ev = rng.uniform(1.0, max_cond, 3)
    ev = ev / ev.min() * rng.uniform(0.7, 1.0)
    return Ellipsoid(Q @ np.diag(ev) @ Q.T)


def test_verdict_protocol():
    assert verdict(0.9) == "holds"
    assert verdict(1.0) == "equality"
    assert verdict(1 + 0.9 * EQUALITY_BAND) == "equality"
    assert verdict(1 - 0.9 * EQUALITY_BAND) == "equality"
    assert verdict(1.0001, band=0.0) == "violated-within-tolerance"
    assert verdict(1 + 2 * SLACK, band=0.0) == "violated"
    assert verdict(float("nan")) == "violated"
    r = make_report("x", 2.0, 1.0, ">=", "b", {})
    assert r.verdict == "holds" and r.ok and ratio_of(r) == 0.5
    r = make_report("x", 2.0, 1.0, "<=", "b", {})
    assert r.verdict == "violated" and not r.ok
    assert r.to_dict()["theorem"] == "x"
    with pytest.raises(ValueError):
        make_report("x", 1.0, 1.0, "<", "b", {})


def test_petty_examples(g64):
    r = petty_product(Ball(1), 2.0, 0.3, g64)
    assert_allclose(r.left, KAPPA3 ** 1.5, rtol=1e-6)
    assert_allclose(KAPPA3 ** 1.5, 8.573, atol=1e-3)
    assert r.verdict == "equality"
    E = random_ellipsoid(np.random.default_rng(0))
    assert petty_product(E, 2.0, 0.6, g64).verdict == "equality"
    r = petty_product(Polytope(SIMPLEX), 2.0, 0.0, g64)
    assert r.verdict == "holds" and r.slack >= 0.01


def test_petty_through_cosine_transform(g64):
    # tau = +-1 via C_p^+ S_p(K) directly, and by an explicit atom sum
    K = Polytope(SIMPLEX)
    p = 2.5
    U = g64.nodes
    mu = sp_measure(K, p)
    h1 = cosine_transform_plus(mu, p, g64) ** (1 / p)
    h2 = (c_np(3, p) * np.maximum(U @ mu.directions.T, 0) ** p @ mu.masses) ** (1 / p)
    assert_allclose(h1, h2, rtol=1e-12)
    pv = K.exact_volume() ** (3 / p - 1) * np.sum(g64.weights * h2 ** -3.0) / 3
    assert_allclose(petty_value(K, p, 1.0, g64), pv, rtol=1e-10)
    # minus side: reflect the directions
    h3 = (c_np(3, p) * np.maximum(-U @ mu.directions.T, 0) ** p @ mu.masses) ** (1 / p)
    pv = K.exact_volume() ** (3 / p - 1) * np.sum(g64.weights * h3 ** -3.0) / 3
    assert_allclose(petty_value(K, p, -1.0, g64), pv, rtol=1e-10)


def test_petty_affine_invariance(g64):
    rng = np.random.default_rng(4)
    K = Polytope(SIMPLEX)
    base = petty_value(K, 2.0, 0.4, g64)
    for _ in range(3):
        M = np.eye(3) + 0.3 * rng.standard_normal((3, 3))
        M /= np.cbrt(np.linalg.det(M))
        assert_allclose(petty_value(linear_image(K, M), 2.0, 0.4, g64), base, rtol=1e-3)


def test_centroid_examples(g64):
    r = centroid_product(Ball(1), 2.0, 0.0, g64)
    assert_allclose(r.right, 0.11665, atol=1e-5)
    assert r.verdict == "equality"
    E = random_ellipsoid(np.random.default_rng(1))
    assert centroid_product(E, 2.0, 0.5, g64).verdict == "equality"
    r = centroid_product(SHIFTED, 2.0, 0.5, g64)
    assert r.verdict == "holds" and r.left > r.right


def test_tau_grid():
    t = tau_grid(21)
    assert len(t) == 21 and t[10] == 0.0 and t[0] == -1 and t[-1] == 1
    assert_allclose(t, -t[::-1], atol=0)
    with pytest.raises(ValueError):
        tau_grid(1)


def test_symmetric_sweeps_constant(g32):
    taus = tau_grid(5)
    s = strongest_pi_sweep(Polytope(CUBE), 2.0, taus, g32)
    assert s.ok and not s.strict and s.spread <= 1e-8
    s = strongest_m_sweep(Ball(1), 2.0, taus, g32)
    assert s.ok and s.spread <= 1e-8
    assert_allclose(s.values, KAPPA3, rtol=1e-6)


def test_sweeps_shifted_ball(g32):
    taus = tau_grid(9)
    s = strongest_pi_sweep(SHIFTED, 2.0, taus, g32)
    assert s.ok and s.strict and s.argmin == 0.0 and abs(s.argmax) == 1.0
    s = strongest_pi_sweep(SHIFTED, 3.0, taus, g32)
    assert s.ok and not s.strict
    m = strongest_m_sweep(SHIFTED, 2.0, taus, g32)
    assert m.ok and m.argmax == 0.0 and abs(m.argmin) == 1.0
    assert_allclose(m.values[0], m.values[-1], rtol=1e-8)


def test_sweep_rejects_bad_grid(g32):
    with pytest.raises(ValueError):
        strongest_pi_sweep(SHIFTED, 2.0, [0.0, 0.5, 1.0], g32)


def test_santalo_check_examples(g64):
    r = santalo_check(Ball(1), g64)
    assert_allclose(r.right, 17.546, atol=1e-3)
    assert r.verdict == "equality"
    E = random_ellipsoid(np.random.default_rng(2))
    assert santalo_check(Translate(E, [0.1, 0.0, -0.2]), g64).verdict == "equality"
    r = santalo_check(Polytope(SIMPLEX), g64)
    assert r.verdict == "holds" and r.left < r.right


def test_corollary_examples(g64):
    assert corollary_check(Ball(1), 2.0, 0.0, g64).verdict == "equality"
    E = random_ellipsoid(np.random.default_rng(3))
    r = corollary_check(E, 2.0, 0.3, g64)
    assert abs(ratio_of(r) - 1) <= 1e-2
    r = corollary_check(SHIFTED, 2.0, 0.5, g64)
    assert r.verdict == "holds"


def test_class_reduction(g32):
    rep = class_reduction_check(Ball(1), 2.0, 0.4, g32)
    assert [r.verdict for r in rep.reports] == ["equality"] * 3
    rep = class_reduction_check(Polytope(CUBE), 2.0, 0.0, g32)
    assert rep.i2.ok and rep.i2.slack >= 0
    rep = class_reduction_check(Polytope(CUBE), 2.0, 1.0, g32, L=SHIFTED)
    assert rep.i0 is not None and rep.i0.verdict == "holds"


def test_predicted_zero():
    assert predicted_zero(2, 4) and predicted_zero(2, 6) and not predicted_zero(2, 5)
    assert predicted_zero(3, 5) and not predicted_zero(3, 4)
    assert not any(predicted_zero(2.5, k) for k in range(10))
    assert predicted_zero(2.5, 3, tau=0.0)


def test_multiplier_table(g64):
    for p in (2.0, 2.5, 3.0):
        rows = multiplier_table(p, 7, g64)
        assert all(r.zero == r.predicted_zero for r in rows)
    reps = multiplier_reports(2.0, 5, g64)
    assert [r.verdict for r in reps] == ["holds"] * 6
    assert reps[4].params["zero"] and reps[4].params["predicted_zero"]
