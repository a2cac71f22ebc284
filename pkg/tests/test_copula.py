import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wrongway.copula import (bivariate_normal_cdf, comparator_coupling, copula_coupling,
                             coupling_in_scenario_order, ratio_curve, sort_scenarios)
from wrongway.credit import LossSurface, build_credit_grid, systematic_loss_surface
from wrongway.errors import ValidationError
from wrongway.portfolio import ExposureMatrix
from wrongway.risk import DiscreteDistribution, cvar
from wrongway.wcc import solve_wcc
from wrongway._prob import uniform

mpmath.mp.dps = 30


def mp_bvn(h, k, r):
    # P(X <= h, Y <= k) by one-dimensional quadrature of the conditional CDF
    h, k, r = mpmath.mpf(h), mpmath.mpf(k), mpmath.mpf(r)
    s = mpmath.sqrt(1 - r * r)
    f = lambda x: mpmath.npdf(x) * mpmath.ncdf((k - r * x) / s)
    return float(mpmath.quad(f, [-mpmath.inf, min(h, 0), h] if h > 0 else [-mpmath.inf, h]))


def test_bvn_closed_forms():
    assert bivariate_normal_cdf(0, 0, 0) == 0.25
    assert bivariate_normal_cdf(0, 0, 0.5) == pytest.approx(1 / 3, abs=5e-8)
    for r in (-0.99, -0.9, -0.5, 0.3, 0.8, 0.95, 0.999):
        assert bivariate_normal_cdf(0, 0, r) == pytest.approx(0.25 + math.asin(r) / (2 * math.pi), abs=1e-12)
    for k in (-2.0, 0.0, 1.3):
        assert bivariate_normal_cdf(np.inf, k, 0.7) == pytest.approx(0.5 * math.erfc(-k / math.sqrt(2)))
        assert bivariate_normal_cdf(-np.inf, k, 0.7) == 0.0


def test_bvn_limits():
    h, k = np.array([-1.0, 0.5, 2.0]), np.array([0.3, 0.3, -1.0])
    from wrongway.credit import norm_cdf
    np.testing.assert_allclose(bivariate_normal_cdf(h, k, 1.0), norm_cdf(np.minimum(h, k)))
    np.testing.assert_allclose(bivariate_normal_cdf(h, k, -1.0),
                               np.maximum(norm_cdf(h) + norm_cdf(k) - 1, 0), atol=1e-15)
    with pytest.raises(ValidationError):
        bivariate_normal_cdf(0, 0, 1.5)


def test_bvn_against_quadrature():
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(120):
        h, k = rng.uniform(-4, 4, 2)
        r = float(rng.choice([rng.uniform(-0.999, 0.999), rng.uniform(0.9, 0.999), rng.uniform(-0.999, -0.9)]))
        worst = max(worst, abs(bivariate_normal_cdf(h, k, r) - mp_bvn(h, k, r)))
    assert worst <= 1e-9


def test_bvn_broadcast_shape():
    out = bivariate_normal_cdf(np.zeros((3, 1)), np.zeros((1, 4)), 0.4)
    assert out.shape == (3, 4)


def test_sort_scenarios():
    x = ExposureMatrix(("a",), [[3.0, 1.0, 2.0]], uniform(3))
    assert sort_scenarios(x).tolist() == [1, 2, 0]
    assert sort_scenarios(ExposureMatrix(("a",), [[2.0] * 4], uniform(4))).tolist() == [0, 1, 2, 3]
    assert sort_scenarios(ExposureMatrix(("a",), [[1.0, 2.0, 5.0]], uniform(3))).tolist() == [0, 1, 2]
    with pytest.raises(ValidationError):
        sort_scenarios(x, "name")


def test_coupling_examples():
    g = build_credit_grid(2)
    np.testing.assert_array_equal(copula_coupling(np.array([0.5, 0.5]), g, 0.0), np.full((2, 2), 0.25))
    ww = copula_coupling(np.array([0.5, 0.5]), g, 1.0)
    # high exposure rank (row 1) sits with low Z (column 0)
    np.testing.assert_allclose(ww, [[0.0, 0.5], [0.5, 0.0]], atol=1e-15)
    rw = copula_coupling(np.array([0.5, 0.5]), g, -1.0)
    np.testing.assert_allclose(rw, [[0.5, 0.0], [0.0, 0.5]], atol=1e-15)


@given(st.integers(0, 2**32 - 1), st.floats(-1, 1))
@settings(max_examples=80, deadline=None)
def test_marginals_reproduced(seed, r):
    rng = np.random.default_rng(seed)
    M, N = int(rng.integers(1, 51)), int(rng.integers(1, 51))
    p = rng.dirichlet(np.ones(M))
    g = build_credit_grid(N)
    c = copula_coupling(p, g, r)
    assert np.all(c >= 0)
    np.testing.assert_allclose(c.sum(axis=1), p, atol=1e-7)
    np.testing.assert_allclose(c.sum(axis=0), g.cell_probs, atol=1e-7)


def test_independence_shortcut_exact():
    p = np.random.default_rng(1).dirichlet(np.ones(7))
    g = build_credit_grid(9)
    assert np.max(np.abs(copula_coupling(p, g, 0.0) - np.outer(p, g.cell_probs))) <= 1e-12


def test_reverse_sort_negates_r():
    rng = np.random.default_rng(4)
    M = 12
    L = rng.exponential(size=(M, 9))
    p = uniform(M)
    g = build_credit_grid(9)
    order = rng.permutation(M)
    for r in (-0.7, -0.2, 0.4, 0.9):
        a = coupling_in_scenario_order(copula_coupling(p[order], g, r), order)
        rev = order[::-1]
        b = coupling_in_scenario_order(copula_coupling(p[rev], g, -r), rev)
        # reversed ranks negate the exposure score, which cancels the sign change in r
        np.testing.assert_allclose(a, b, atol=1e-9)
        la = DiscreteDistribution.from_coupling(L, a)
        lb = DiscreteDistribution.from_coupling(L, b)
        for alpha in (0.5, 0.9, 0.99):
            assert cvar(la, alpha) == pytest.approx(cvar(lb, alpha), abs=1e-9)


def _separable_case(M=20, N=20):
    rng = np.random.default_rng(12)
    a_m = np.sort(rng.exponential(size=M))
    g = build_credit_grid(N)
    b_n = np.linspace(3.0, 0.0, N)  # decreasing in Z: bad credit states carry the larger loss
    L = LossSurface(a_m[:, None] + b_n[None, :], uniform(M), g.cell_probs)
    return L, g, np.arange(M)


def test_separable_attains_bound_at_r1():
    L, g, order = _separable_case()
    for alpha in (0.9, 0.95, 0.99):
        w = solve_wcc(L, alpha)
        curve = ratio_curve(L, w.wcc_cvar, alpha, [-1.0, 0.0, 1.0], g, order)
        assert curve.ratio[-1] == pytest.approx(1.0, abs=1e-6)
        assert curve.max_ratio <= 1 + 1e-8
        assert curve.argmax == 1.0


def test_ratio_curve_domination(tiny_portfolio):
    x, cps = tiny_portfolio
    g = build_credit_grid(40)
    surf = systematic_loss_surface(x, cps, g)
    order = sort_scenarios(x)
    for alpha in (0.9, 0.99):
        w = solve_wcc(surf, alpha)
        curve = ratio_curve(surf, w.wcc_cvar, alpha, np.linspace(-1, 1, 21), g, order)
        assert np.all(curve.ratio <= 1 + 1e-8)
        assert curve.min_ratio <= curve.max_ratio
        indep = cvar(DiscreteDistribution.from_coupling(surf.values, np.outer(surf.market_probs, g.cell_probs)),
                     alpha)
        assert curve.comparator_cvar[10] == pytest.approx(indep, rel=1e-12)


def test_ratio_requires_positive_bound():
    L, g, order = _separable_case(3, 3)
    with pytest.raises(ValidationError):
        ratio_curve(L, 0.0, 0.9, [0.0], g, order)


def test_comparator_coupling_scenario_order(tiny_portfolio):
    x, _ = tiny_portfolio
    g = build_credit_grid(5)
    c = comparator_coupling(x, g, 0.6)
    np.testing.assert_allclose(c.sum(axis=1), x.probs, atol=1e-12)
    # the scenario with the largest total gets the most mass in the worst credit cell
    assert np.argmax(c[:, 0] / x.probs) == int(np.argmax(x.totals()))
