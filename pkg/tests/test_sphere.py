import numpy as np
import pytest
from math import pi
from numpy.testing import assert_allclose
from scipy.integrate import quad
from scipy.special import eval_legendre

from lpbodies.operators import c_np, cplus_grid_transform
from lpbodies.sphere import (HarmonicIndex, NotAMultiplierError, build_grid, eval_harmonic,
                             estimate_multiplier, harmonic_basis, integrate, sphere_area)


@pytest.fixture(scope="module")
def g64():
    return build_grid(3, 64)


def test_grid_invariants():
    for n, res in [(3, 8), (3, 32), (3, 64), (4, 16), (5, 12)]:
        g = build_grid(n, res)
        assert_allclose(np.linalg.norm(g.nodes, axis=1), 1.0, atol=1e-12)
        assert np.all(g.weights > 0)
        assert_allclose(g.weights.sum(), sphere_area(n), rtol=1e-9)
        assert np.linalg.norm(g.weights @ g.nodes) <= 1e-9
        assert_allclose(g.nodes[g.antipodes], -g.nodes, atol=0)


def test_grid_examples():
    g = build_grid(3, 32)
    assert g.size == 2048
    assert_allclose(g.weights.sum(), 4 * pi, rtol=1e-12)
    assert_allclose(integrate(build_grid(3, 64), np.ones(build_grid(3, 64).size)), 4 * pi,
                    atol=1e-12)
    assert_allclose(build_grid(4, 32).weights.sum(), 2 * pi ** 2, rtol=1e-12)


def test_grid_rejects_bad_arguments():
    with pytest.raises(ValueError):
        build_grid(2, 32)
    with pytest.raises(ValueError):
        build_grid(3, 7)


def test_integrate_examples(g64):
    u = g64.nodes
    assert_allclose(integrate(g64, u[:, 2] ** 2), 4 * pi / 3, atol=1e-10)
    assert abs(integrate(g64, u[:, 0])) <= 1e-10
    c32 = c_np(3, 2)
    assert_allclose(c32, 3 / (2 * pi), rtol=1e-14)
    e = np.array([0.3, -0.2, 0.9])
    e /= np.linalg.norm(e)
    # (e.u)_+^2 is not a polynomial; its integral over the sphere is 2 pi / 3
    g = build_grid(3, 256)
    f = np.maximum(g.nodes @ e, 0) ** 2
    assert_allclose(c32 * integrate(g, f), 1.0, atol=1e-6)
    f = np.maximum(u[:, 2], 0) ** 2
    assert_allclose(c32 * integrate(g64, f), 1.0, atol=1e-10)


def test_integrate_rejects_bad_samples(g64):
    with pytest.raises(ValueError):
        integrate(g64, np.ones(g64.size - 1))
    f = np.ones(g64.size)
    f[3] = np.nan
    with pytest.raises(ValueError):
        integrate(g64, f)


def test_polynomial_exactness():
    rng = np.random.RandomState(0)
    g = build_grid(3, 16)
    # monomials x^a y^b z^c with a+b+c <= 15
    from math import gamma
    for _ in range(30):
        a, b, c = rng.randint(0, 6, size=3)
        if a + b + c > 15:
            continue
        f = g.nodes[:, 0] ** a * g.nodes[:, 1] ** b * g.nodes[:, 2] ** c
        if a % 2 or b % 2 or c % 2:
            exact = 0.0
        else:
            be = [(a + 1) / 2, (b + 1) / 2, (c + 1) / 2]
            exact = 2 * gamma(be[0]) * gamma(be[1]) * gamma(be[2]) / gamma(sum(be))
        assert_allclose(integrate(g, f), exact, atol=1e-10)


def test_harmonic_examples(g64):
    Y0 = eval_harmonic(HarmonicIndex(0, 1), g64.nodes)
    assert_allclose(Y0, 1 / np.sqrt(4 * pi), rtol=1e-14)
    Y21 = eval_harmonic(HarmonicIndex(2, 1), g64.nodes)
    Y31 = eval_harmonic(HarmonicIndex(3, 1), g64.nodes)
    assert_allclose(integrate(g64, Y21 * Y21), 1.0, atol=1e-8)
    assert abs(integrate(g64, Y21 * Y31)) <= 1e-8


def test_harmonic_orthonormality(g64):
    Y = np.hstack([harmonic_basis(g64, k) for k in range(7)])
    G = Y.T @ (g64.weights[:, None] * Y)
    assert_allclose(G, np.eye(Y.shape[1]), atol=1e-6)


def test_harmonic_index_validation():
    with pytest.raises(ValueError):
        HarmonicIndex(2, 6)
    with pytest.raises(ValueError):
        HarmonicIndex(-1, 1)
    with pytest.raises(ValueError):
        eval_harmonic(HarmonicIndex(1, 1), np.ones((2, 4)) / 2)


def _funk_hecke(p, k):
    # a_k = 2 pi c_{3,p} int_{-1}^{1} t_+^p P_k(t) dt
    val, _ = quad(lambda t: t ** p * eval_legendre(k, t), 0.0, 1.0, limit=200)
    return 2 * pi * c_np(3, p) * val


def test_multiplier_matches_funk_hecke(g64):
    for p in (2.0, 2.5, 3.0):
        T = cplus_grid_transform(p, g64)
        for k in range(7):
            est = estimate_multiplier(T, k, g64)
            assert_allclose(est.value, _funk_hecke(p, k), atol=2e-6)
            assert est.residual <= 1e-5


def test_multiplier_examples(g64):
    T2 = cplus_grid_transform(2.0, g64)
    assert_allclose(estimate_multiplier(T2, 0, g64).value, 1.0, atol=1e-8)
    assert abs(estimate_multiplier(T2, 4, g64).value) <= 1e-6
    T25 = cplus_grid_transform(2.5, g64)
    assert abs(estimate_multiplier(T25, 3, g64).value) > 1e-4


def test_zero_pattern_integer_p(g64):
    for p in (2, 3):
        T = cplus_grid_transform(float(p), g64)
        zeros = [k for k in range(p + 6) if abs(estimate_multiplier(T, k, g64).value) <= 1e-6]
        # only k = p+2 and p+4 vanish among k <= p+5 (odd k only with tau = 0)
        assert zeros == [p + 2, p + 4]


def test_non_multiplier_rejected(g64):
    z = g64.nodes[:, 2][:, None]
    with pytest.raises(NotAMultiplierError):
        estimate_multiplier(lambda F: F * (1 + z), 2, g64)
