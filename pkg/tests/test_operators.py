from math import pi

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from lpbodies.body import (Atoms, Ball, Density, Ellipsoid, Polytope, Translate, linear_image,
                           scale, volume)
from lpbodies.operators import (OperatorParams, c_np, c_np_tau, cosine_transform_plus,
                                half_kernel_sums, kernel_sums,
                                limit_checks, m_minus, m_plus, m_tau, phi_tau, pi_minus,
                                pi_plus, pi_tau, projection_body_support, recombine,
                                tau_from_coefficients)
from lpbodies.sphere import build_grid

CUBE = np.array([[x, y, z] for x in (-1, 1) for y in (-1, 1) for z in (-1, 1)], float)
SHIFTED = Translate(Ball(1), [0, 0, 0.3])


@pytest.fixture(scope="module")
def g64():
    return build_grid(3, 64)


@pytest.fixture(scope="module")
def g32():
    return build_grid(3, 32)


def random_polytope(rng, m=10):
    P = rng.standard_normal((m, 3))
    P /= np.linalg.norm(P, axis=1, keepdims=True)
    P = np.vstack([P * rng.uniform(0.6, 1.4, size=(m, 1)), 0.5 * np.eye(3), -0.5 * np.eye(3)])
    return Polytope(P + rng.uniform(-0.15, 0.15, 3))


def random_sl(rng, max_cond=4.0):
    while True:
        M = np.eye(3) + 0.4 * rng.standard_normal((3, 3))
        d = np.linalg.det(M)
        if d > 0.1 and np.linalg.cond(M) <= max_cond:
            return M / d ** (1 / 3)


def test_phi_tau_examples():
    assert phi_tau(0, -2) == 2
    assert phi_tau(1, -2) == 0
    assert phi_tau(0.5, 3) == 4.5
    t = np.linspace(-3, 3, 61)
    for tau in (-1, -0.3, 0, 0.8, 1):
        assert np.all(phi_tau(tau, t) >= 0)
    with pytest.raises(ValueError):
        phi_tau(1.5, 1.0)


def test_constants():
    assert_allclose(c_np(3, 2), 3 / (2 * pi), rtol=1e-14)
    assert_allclose(c_np_tau(3, 2, 0.0), 3 / (4 * pi), rtol=1e-14)
    with pytest.raises(ValueError):
        OperatorParams(1.0)
    with pytest.raises(ValueError):
        OperatorParams(65.0)
    with pytest.raises(ValueError):
        OperatorParams(2.0, 1.2)
    assert OperatorParams(0.5, diagnostic=True).p == 0.5


def test_cosine_transform_examples(g64):
    for p in (1.5, 2.0, 2.5, 3.0):
        out = cosine_transform_plus(Density(g64, np.ones(g64.size)), p)
        assert_allclose(out, 1.0, atol=1e-8)
    atom = Atoms(np.array([[0, 0, 1.0]]), np.array([1.0]))
    assert_allclose(cosine_transform_plus(atom, 2.0, directions=[0, 0, 1.0]), 3 / (2 * pi),
                    rtol=1e-14)
    for p in (1.5, 2.0, 3.7):
        assert cosine_transform_plus(atom, p, directions=[0, 0, -1.0]) == 0.0


def test_ball_fixed_points(g64):
    U = g64.nodes
    for p in (1.5, 2.0, 3.5):
        for tau in (-1, -0.5, 0, 0.5, 1):
            assert np.max(np.abs(pi_tau(Ball(1), p, tau, g64).support(U) - 1)) <= 1e-6
            assert np.max(np.abs(m_tau(Ball(1), p, tau, g64).support(U) - 1)) <= 1e-6


def test_dilated_ball_examples(g64):
    U = g64.nodes
    assert_allclose(pi_tau(Ball(2), 2.0, 0.3, g64).support(U), np.sqrt(2), rtol=1e-6)
    assert_allclose(m_tau(Ball(2), 2.0, 0.3, g64).support(U), 2 ** 2.5, rtol=1e-6)


def test_recombination(g64):
    U = g64.nodes
    for p in (2.0, 2.5):
        hp = pi_plus(SHIFTED, p, g64).support(U)
        hm = pi_minus(SHIFTED, p, g64).support(U)
        for tau in (-0.6, 0.4):
            ht = pi_tau(SHIFTED, p, tau, g64).support(U)
            assert_allclose(recombine(hp, hm, p, tau), ht, rtol=1e-10)
        mp = m_plus(SHIFTED, p, g64).support(U)
        mm = m_minus(SHIFTED, p, g64).support(U)
        assert_allclose(recombine(mp, mm, p, 0.4), m_tau(SHIFTED, p, 0.4, g64).support(U),
                        rtol=1e-10)


def test_moment_body_monte_carlo(g64):
    # h(M_p^+ L, u)^p = c_{n,p} (n+p) * integral over L of (u.x)_+^p
    p = 2.0
    rng = np.random.default_rng(2)
    X = rng.standard_normal((1_000_000, 3))
    X *= (rng.uniform(size=(len(X), 1)) ** (1 / 3)) / np.linalg.norm(X, axis=1, keepdims=True)
    X += [0, 0, 0.3]
    V = 4 * pi / 3
    M = m_plus(SHIFTED, p, g64)
    for u in ([0, 0, 1.0], [0, 0, -1.0], [0.6, 0, 0.8], [1.0, 0, 0]):
        u = np.array(u)
        mc = c_np(3, p) * (3 + p) * V * np.mean(np.maximum(X @ u, 0) ** p)
        assert_allclose(M.support(u[None])[0] ** p, mc, rtol=0.01)


def test_reflection_convention(g64):
    U = g64.nodes
    cube = Polytope(CUBE)
    for K in (cube, Ellipsoid(np.diag([1, 1.3, 0.8]))):
        assert_allclose(pi_plus(K, 2.0, g64).support(U), pi_minus(K, 2.0, g64).support(U),
                        rtol=1e-10)
    diff = pi_plus(SHIFTED, 2.0, g64).support(U) - pi_minus(SHIFTED, 2.0, g64).support(U)
    assert np.max(np.abs(diff)) > 1e-3
    anti = g64.antipodes
    hp = pi_plus(SHIFTED, 2.0, g64).support(U)
    hm = pi_minus(SHIFTED, 2.0, g64).support(U)
    assert_allclose(hm, hp[anti], rtol=1e-12)
    mp = m_plus(SHIFTED, 2.5, g64).support(U)
    mm = m_minus(SHIFTED, 2.5, g64).support(U)
    assert_allclose(mm, mp[anti], rtol=1e-12)


def test_tau_from_coefficients_examples():
    assert tau_from_coefficients(0.5, 0.5, 2.0)[0] == 0.0
    assert tau_from_coefficients(1.0, 0.0, 2.0)[0] == 1.0
    assert tau_from_coefficients(0.0, 1.0, 2.0)[0] == -1.0
    assert_allclose(tau_from_coefficients(2.0, 1.0, 2.0)[0],
                    (np.sqrt(2) - 1) / (np.sqrt(2) + 1), rtol=1e-14)
    with pytest.raises(ValueError):
        tau_from_coefficients(0.0, 0.0, 2.0)


@settings(max_examples=50, deadline=None)
@given(c1=st.floats(0, 5), c2=st.floats(0, 5), p=st.floats(1.1, 6))
def test_tau_from_coefficients_identity(c1, c2, p):
    if c1 + c2 < 1e-6:
        return
    tau, c = tau_from_coefficients(c1, c2, p)
    assert -1 <= tau <= 1
    rng = np.random.default_rng(0)
    hp, hm = rng.uniform(0.5, 2, 50), rng.uniform(0.5, 2, 50)
    assert_allclose(c1 * hp ** p + c2 * hm ** p, c ** p * recombine(hp, hm, p, tau) ** p,
                    rtol=1e-10)


def test_projection_body_of_cube(g64):
    U = g64.nodes[::7]
    brightness = 2 * np.abs(U).sum(axis=1) * 2
    assert_allclose(projection_body_support(Polytope(CUBE), U), brightness, rtol=1e-13)


def test_limit_checks():
    rep = limit_checks(Polytope(CUBE))
    assert rep.projection_deviation <= 0.10
    U = build_grid(3, 64).nodes
    # independent oracle: exact brightness of the cube
    hp = pi_tau(Polytope(CUBE), OperatorParams(1.05, 1.0)).support(U)
    dev = np.max(np.abs(pi * hp - 4 * np.abs(U).sum(axis=1))) / np.max(4 * np.abs(U).sum(1))
    assert dev <= 0.10
    assert_allclose(dev, rep.projection_deviation, rtol=1e-12)
    assert limit_checks(Ball(1)).projection_deviation <= 1e-6
    assert limit_checks(SHIFTED).moment_deviation <= 0.05


def test_homogeneity(g32):
    rng = np.random.default_rng(5)
    K = random_polytope(rng)
    U = g32.nodes
    for lam in (0.5, 2.0):
        for p, tau in ((2.0, 0.3), (2.5, -1.0)):
            hK = pi_tau(K, p, tau, g32).support(U)
            hL = pi_tau(scale(K, lam), p, tau, g32).support(U)
            assert_allclose(hL, lam ** (3 / p - 1) * hK, rtol=1e-8)
            mK = m_tau(SHIFTED, p, tau, g32).support(U)
            mL = m_tau(scale(SHIFTED, lam), p, tau, g32).support(U)
            assert_allclose(mL, lam ** (3 / p + 1) * mK, rtol=1e-8)


def test_sl_equivariance(g64):
    rng = np.random.default_rng(8)
    U = g64.nodes[::13]
    for _ in range(3):
        K = random_polytope(rng)
        M = random_sl(rng)
        for p, tau in ((2.0, 0.4), (3.5, -1.0)):
            lhs = pi_tau(linear_image(K, M), p, tau, g64).support(U)
            rhs = pi_tau(K, p, tau, g64).support(U @ np.linalg.inv(M).T)
            assert_allclose(lhs, rhs, rtol=1e-4)


def test_moment_covariance():
    # M_p(phi L) = phi M_p L; exact for centered ellipsoids at any grid
    g = build_grid(3, 64)
    rng = np.random.default_rng(9)
    M = random_sl(rng)
    E = Ellipsoid(np.diag([1, 1.2, 0.8]))
    U = g.nodes[::13]
    for tau in (0.0, 0.7):
        lhs = m_tau(linear_image(E, M), 2.0, tau, g).support(U)
        rhs = m_tau(E, 2.0, tau, g).support(U @ M)
        assert_allclose(lhs, rhs, rtol=1e-4)


def test_symmetric_collapse(g64):
    U = g64.nodes
    cube = Polytope(CUBE)
    for K in (cube, Ellipsoid(np.diag([1, 1.3, 0.8]))):
        h0 = pi_tau(K, 2.5, 0.0, g64).support(U)
        for tau in (-1, -0.4, 0.6, 1):
            assert_allclose(pi_tau(K, 2.5, tau, g64).support(U), h0, rtol=1e-10)
    m0 = m_tau(cube, 2.0, 0.0, g64).support(U)
    assert_allclose(m_tau(cube, 2.0, 0.9, g64).support(U), m0, rtol=1e-10)


def test_operator_output_volume(g64):
    # curvature-formula volume of an operator output agrees with quadrature of the
    # exact radial function on a fine grid
    P = pi_tau(SHIFTED, 2.0, 0.5, g64)
    V = volume(P, g64)
    assert_allclose(V, volume(P, g64, method="curvature"), rtol=0)
    assert V > 0


def test_kernel_sums_against_numpy():
    rng = np.random.default_rng(12)
    D = rng.standard_normal((40, 3))
    D /= np.linalg.norm(D, axis=1, keepdims=True)
    S = rng.standard_normal((300, 3))
    S /= np.linalg.norm(S, axis=1, keepdims=True)
    W = rng.uniform(0, 1, (300, 2))
    T = D @ S.T
    for p in (1.0, 2.0, 2.5, 7.0):
        for tau in (-1.0, 0.3, 1.0):
            want = (np.abs(T) + tau * T) ** p @ W
            assert_allclose(kernel_sums(D, S, W, p, tau), want, rtol=1e-10)
        Sp, Sm = half_kernel_sums(D, S, W[:, 0], p)
        assert_allclose(Sp, np.maximum(T, 0) ** p @ W[:, 0], rtol=1e-10)
        assert_allclose(Sm, np.maximum(-T, 0) ** p @ W[:, 0], rtol=1e-10)
