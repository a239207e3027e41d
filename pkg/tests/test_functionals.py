from math import pi

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from lpbodies.body import (Ball, Ellipsoid, Polytope, SampledRadial, Translate,
                           harmonic_radial_combination, lp_combination, volume)
from lpbodies.functionals import durch_identity_check, dual_mixed_volume, mixed_volume_p
from lpbodies.inequalities import (brunn_minkowski_check, dual_brunn_minkowski_check,
                                   dual_minkowski_check, minkowski_check)
from lpbodies.sphere import build_grid

KAPPA3 = 4 * pi / 3
CUBE = np.array([[x, y, z] for x in (-1, 1) for y in (-1, 1) for z in (-1, 1)], float)
SHIFTED = Translate(Ball(1), [0, 0, 0.3])


@pytest.fixture(scope="module")
def g64():
    return build_grid(3, 64)


def random_polytope(rng, m=10):
    P = rng.standard_normal((m, 3))
    P /= np.linalg.norm(P, axis=1, keepdims=True)
    P = np.vstack([P * rng.uniform(0.6, 1.4, size=(m, 1)), 0.5 * np.eye(3), -0.5 * np.eye(3)])
    return Polytope(P + rng.uniform(-0.15, 0.15, 3))


def random_ellipsoid(rng):
    Q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    return Ellipsoid(Q @ np.diag(rng.uniform(0.6, 1.4, 3)) @ Q.T)


def test_mixed_volume_examples(g64):
    cube = Polytope(CUBE)
    v = mixed_volume_p(cube, cube, 2.0)
    assert_allclose(v.value, 8.0, atol=1e-10)
    assert v.error == 0.0
    assert_allclose(mixed_volume_p(Ball(1), Ball(1), 2.0, g64).value, KAPPA3, rtol=1e-6)
    assert_allclose(mixed_volume_p(Ball(1), Ball(2), 2.0, g64).value, 16 * pi / 3, rtol=1e-6)


def test_mixed_volume_of_body_with_itself():
    rng = np.random.RandomState(0)
    for _ in range(4):
        K = random_polytope(rng)
        for p in (1.5, 2.0, 3.0):
            assert_allclose(mixed_volume_p(K, K, p).value, K.exact_volume(), rtol=1e-12)


def test_error_estimate(g64):
    E = Ellipsoid(np.diag([1, 1.3, 0.8]))
    v = mixed_volume_p(E, Ball(1), 2.0, g64, estimate_error=True)
    assert 0 <= v.error < 1e-4
    assert np.isnan(mixed_volume_p(E, Ball(1), 2.0, g64).error)
    d = dual_mixed_volume(SHIFTED, Ball(1), 2.0, g64, estimate_error=True)
    assert 0 <= d.error < 1e-4


def test_dual_mixed_volume_examples(g64):
    assert_allclose(dual_mixed_volume(SHIFTED, SHIFTED, 2.0, g64).value, KAPPA3, atol=1e-5)
    assert_allclose(dual_mixed_volume(Ball(1), Ball(2), 2.0, g64).value, pi / 3, rtol=1e-12)
    # (1/3) int |A^{-1} u|^2 du = (4 pi / 9) tr(A^{-2}); A = diag(1, 1, 2) gives pi
    E = Ellipsoid(np.diag([1, 1, 2.0]))
    v64 = dual_mixed_volume(Ball(1), E, 2.0, g64).value
    v128 = dual_mixed_volume(Ball(1), E, 2.0, build_grid(3, 128)).value
    assert_allclose(v64, v128, rtol=1e-12)
    assert_allclose(v64, pi, rtol=1e-12)


def test_durch_examples(g64):
    for p, tau in ((2.0, 0.0), (2.5, -0.7)):
        r = durch_identity_check(Ball(1), Ball(1), p, tau, g64)
        assert_allclose([r.lhs, r.rhs], KAPPA3, rtol=1e-6)
    cube = Polytope(CUBE)
    assert durch_identity_check(cube, SHIFTED, 2.0, 0.3, g64).discrepancy <= 1e-4
    assert durch_identity_check(cube, cube, 3.0, -1.0, g64).discrepancy <= 1e-4


def test_durch_smooth_k(g64):
    E = Ellipsoid(np.diag([1, 1.3, 0.8]))
    r = durch_identity_check(E, SHIFTED, 2.5, 0.4, g64)
    assert r.discrepancy <= 1e-4


def test_bilinearity(g64):
    rng = np.random.default_rng(3)
    Q = random_polytope(rng)
    K, L = random_ellipsoid(rng), random_polytope(rng)
    for p in (2.0, 2.5):
        for a, b in ((1.0, 1.0), (0.3, 2.0)):
            S = lp_combination(a, K, b, L, p, g64)
            lhs = mixed_volume_p(Q, S, p).value
            rhs = a * mixed_volume_p(Q, K, p).value + b * mixed_volume_p(Q, L, p).value
            assert_allclose(lhs, rhs, rtol=1e-10)
            E = random_ellipsoid(rng)
            lhs = mixed_volume_p(E, S, p, g64).value
            rhs = a * mixed_volume_p(E, K, p, g64).value + b * mixed_volume_p(E, L, p, g64).value
            assert_allclose(lhs, rhs, rtol=1e-10)
            H = harmonic_radial_combination(a, K, b, L, p, g64)
            lhs = dual_mixed_volume(Q, H, p, g64).value
            rhs = (a * dual_mixed_volume(Q, K, p, g64).value
                   + b * dual_mixed_volume(Q, L, p, g64).value)
            assert_allclose(lhs, rhs, rtol=1e-10)


@settings(max_examples=8, deadline=None)
@given(seed=st.integers(0, 10_000), p=st.sampled_from([1.5, 2.0, 2.5, 3.5]))
def test_classical_inequalities_hold(seed, p):
    rng = np.random.default_rng(seed)
    g = build_grid(3, 48)
    K = random_polytope(rng)
    L = random_ellipsoid(rng) if seed % 2 else random_polytope(rng)
    for check in (minkowski_check, dual_minkowski_check, dual_brunn_minkowski_check):
        assert check(K, L, p, g).ok
    assert brunn_minkowski_check(L, K, p, g).ok


def test_dilates_give_equality(g64):
    rng = np.random.default_rng(1)
    E = random_ellipsoid(rng)
    K = random_polytope(rng)
    for A in (E, K):
        B = Polytope(2 * A.vertices) if isinstance(A, Polytope) else Ellipsoid(2 * A.A)
        for check in (minkowski_check, dual_minkowski_check, brunn_minkowski_check,
                      dual_brunn_minkowski_check):
            rep = check(A, B, 2.0, g64)
            assert rep.equality, (check.__name__, rep.slack)


def test_sampled_radial_dual_volume(g64):
    rho = SHIFTED.radial(g64.nodes)
    S = SampledRadial(g64, rho)
    assert_allclose(dual_mixed_volume(S, S, 2.0, g64).value, volume(S, g64), rtol=1e-14)
