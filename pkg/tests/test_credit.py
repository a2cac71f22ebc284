import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wrongway.credit import (BaselInputs, LossSurface, basel_capital, build_credit_grid, conditional_pd,
                             conditional_pd_matrix, cwi, default_indicator, norm_cdf, norm_inv, norm_sf,
                             systematic_loss_surface, total_loss)
from wrongway.errors import ValidationError
from wrongway.portfolio import Counterparty, ExposureMatrix
from wrongway._prob import uniform

mpmath.mp.dps = 40


def mp_cdf(x):
    return float(mpmath.ncdf(x))


def test_norm_basics():
    assert norm_cdf(0.0) == 0.5
    assert norm_inv(0.5) == 0.0
    assert norm_cdf(-1.2816) == pytest.approx(0.1, abs=1e-4)
    assert norm_cdf(-1.2816) == pytest.approx(mp_cdf(-1.2816), rel=1e-14)


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5, float("nan")])
def test_norm_inv_domain(p):
    with pytest.raises(ValidationError):
        norm_inv(p)


def test_norm_cdf_against_mpmath():
    rng = np.random.default_rng(3)
    xs = np.concatenate([np.linspace(-37.5, 8.3, 600), rng.uniform(-8, 8, 1500)])
    ref = np.array([mp_cdf(v) for v in xs])
    np.testing.assert_allclose(norm_cdf(xs), ref, rtol=1e-15, atol=0)
    ref_upper = np.array([float(mpmath.ncdf(-mpmath.mpf(v))) for v in xs])
    np.testing.assert_allclose(norm_sf(xs), ref_upper, rtol=1e-15, atol=0)


def test_norm_cdf_special_values():
    assert norm_cdf(-np.inf) == 0.0 and norm_cdf(np.inf) == 1.0
    assert math.isnan(norm_cdf(float("nan")))
    assert norm_cdf(-40.0) == 0.0
    assert norm_cdf(np.zeros((2, 3))).shape == (2, 3)


def test_norm_inv_roundtrip_lower_half():
    xs = np.linspace(-6, 0, 1201)
    assert np.max(np.abs(norm_inv(norm_cdf(xs)) - xs)) <= 1e-9


def test_roundtrip_resolution_limit_upper_tail():
    # Near x = 6 consecutive doubles below 1 are ~1.1e-16 apart while the CDF
    # moves by ~6e-9 * dx, so inputs far more than 1e-9 apart share one value.
    xs = 6.0 - np.arange(40) * 1e-9
    vals = norm_cdf(xs)
    spans = [np.ptp(xs[vals == v]) for v in np.unique(vals)]
    assert max(spans) >= 4e-9
    # any inverse maps a shared value to one point, so some input misses by >= span / 2
    worst = max(np.max(np.abs(norm_inv(vals) - xs)), 0.0)
    assert worst >= 2e-9


def test_grid_single_cell():
    g = build_credit_grid(1)
    assert g.cell_probs.tolist() == [1.0]
    assert g.cell_reps[0] == 0.0
    assert g.lower[0] == -np.inf and g.upper[0] == np.inf


def test_grid_two_cells():
    g = build_credit_grid(2)
    assert g.interior_points.tolist() == [0.0]
    assert g.cell_probs.tolist() == [0.5, 0.5]
    assert g.cell_reps[0] == pytest.approx(-math.sqrt(2 / math.pi))


def test_grid_thousand_cells():
    g = build_credit_grid(1000)
    assert math.fsum(g.cell_probs) == 1.0
    interior = g.cell_probs[1:-1]
    # cells are [-0.01, 0] and [0, 0.01] around the mode, close to the centred width-0.01 mass
    assert interior.max() == pytest.approx(mp_cdf(0.005) - mp_cdf(-0.005), rel=1e-4)
    assert interior.max() == pytest.approx(mp_cdf(0.01) - 0.5, rel=1e-12)
    # reps sit inside their cells and increase
    assert np.all(g.cell_reps > g.lower) and np.all(g.cell_reps < g.upper)
    assert np.all(np.diff(g.cell_reps) > 0)


def test_grid_cell_mass_against_mpmath():
    g = build_credit_grid(37, -6.0, 4.0)
    lo, hi = g.lower, g.upper
    ref = [float(mpmath.ncdf(h) - mpmath.ncdf(l)) for l, h in zip(lo, hi)]
    np.testing.assert_allclose(g.cell_probs, ref, rtol=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 5000))
def test_grid_mass_exact(n):
    assert math.fsum(build_credit_grid(n).cell_probs) == 1.0


def test_grid_validation():
    with pytest.raises(ValidationError):
        build_credit_grid(0)
    with pytest.raises(ValidationError):
        build_credit_grid(3, 1.0, -1.0)


def test_conditional_pd_examples():
    assert conditional_pd(Counterparty("a", 0.5, 0.0), 3.0) == 0.5
    assert conditional_pd(Counterparty("a", 0.5, 0.5), 0.0) == 0.5
    v = conditional_pd(Counterparty("a", 0.1, 0.2), -2.0)
    assert v == pytest.approx(0.3325, abs=5e-4)
    ref = mpmath.ncdf((mpmath.sqrt(2) * mpmath.erfinv(2 * mpmath.mpf("0.1") - 1) + mpmath.sqrt(0.2) * 2)
                      / mpmath.sqrt(0.8))
    assert v == pytest.approx(float(ref), rel=1e-12)


@given(st.floats(1e-4, 0.5), st.floats(0.0, 0.95))
def test_conditional_pd_monotone_and_total_probability(pd, rho):
    g = build_credit_grid(2000, -8, 8)
    c = conditional_pd_matrix([pd], [rho], g.cell_reps)[0]
    assert np.all(np.diff(c) <= 1e-15)
    # law of total probability over the grid
    assert float(np.dot(c, g.cell_probs)) == pytest.approx(pd, abs=1e-4)


def test_surface_constant():
    x = ExposureMatrix(("a",), [[10.0, 10.0, 10.0]], uniform(3))
    L = systematic_loss_surface(x, [Counterparty("a", 0.5, 0.0, 1.0)], build_credit_grid(7))
    assert np.all(L.values == 5.0)
    assert L.shape == (3, 7)


def test_surface_monotone_in_z(tiny_portfolio):
    x, cps = tiny_portfolio
    L = systematic_loss_surface(x, cps, build_credit_grid(50))
    assert np.all(np.diff(L.values, axis=1) <= 0)


@settings(max_examples=40)
@given(st.integers(0, 2**32 - 1))
def test_surface_linear_in_exposures(seed):
    rng = np.random.default_rng(seed)
    K, M = 2, int(rng.integers(1, 8))
    cps = [Counterparty(f"c{k}", float(rng.uniform(1e-3, 0.2)), float(rng.uniform(0, 0.5))) for k in range(K)]
    ids = tuple(c.id for c in cps)
    y1 = rng.exponential(size=(K, M))
    y2 = rng.exponential(size=(K, M))
    g = build_credit_grid(int(rng.integers(1, 30)))
    s = lambda y: systematic_loss_surface(ExposureMatrix(ids, y, uniform(M)), cps, g).values
    np.testing.assert_allclose(s(y1 + y2), s(y1) + s(y2), rtol=1e-12, atol=0)
    # additivity over counterparties: zero out each row in turn
    only0 = y1.copy()
    only0[1] = 0
    only1 = y1.copy()
    only1[0] = 0
    np.testing.assert_allclose(s(y1), s(only0) + s(only1), rtol=1e-12, atol=0)


def test_surface_shape_validation():
    with pytest.raises(ValidationError):
        LossSurface(np.zeros((2, 3)), [0.5, 0.5], [1.0])


def test_cwi_examples():
    assert cwi(1.7, 0.3, 0.0) == 0.3
    assert cwi(2.0, 0.0, 0.25) == 1.0
    pd = norm_cdf(6.0)
    assert np.all(default_indicator(np.linspace(-5, 5, 11), pd))


def test_total_loss_examples():
    cps = [Counterparty("a", 0.02, 0.2, 0.5), Counterparty("b", 0.1, 0.3, 1.0)]
    y = np.array([4.0, 6.0])
    assert total_loss(y, cps, 0.0, np.array([10.0, 10.0])) == 0.0
    sure = [Counterparty("a", 1 - 1e-12, 0.2, 0.5), Counterparty("b", 1 - 1e-12, 0.3, 1.0)]
    assert total_loss(y, sure, 0.0, np.array([3.0, 3.0])) == pytest.approx(2.0 + 6.0)
    # a defaults (deep negative eps), b survives
    z, eps = 0.5, np.array([-4.0, 1.0])
    hand = 0.5 * 4.0 * (math.sqrt(0.2) * z + math.sqrt(0.8) * eps[0] <= norm_inv(0.02)) \
        + 1.0 * 6.0 * (math.sqrt(0.3) * z + math.sqrt(0.7) * eps[1] <= norm_inv(0.1))
    assert total_loss(y, cps, z, eps) == hand == 2.0


def test_total_loss_averages_to_systematic():
    rng = np.random.default_rng(7)
    cps = [Counterparty("a", 0.05, 0.2, 0.6), Counterparty("b", 0.1, 0.35, 1.0)]
    y = np.array([4.0, 6.0])
    z = -1.3
    n = 100_000
    eps = rng.standard_normal((n, 2))
    pd = np.array([c.pd for c in cps])
    rho = np.array([c.rho for c in cps])
    lgd = np.array([c.lgd for c in cps])
    hits = np.sqrt(rho) * z + np.sqrt(1 - rho) * eps <= norm_inv(pd)
    losses = (hits * (lgd * y)).sum(axis=1)
    exact = float((lgd * y) @ conditional_pd_matrix(pd, rho, [z])[:, 0])
    se = losses.std(ddof=1) / math.sqrt(n)
    assert abs(losses.mean() - exact) <= 3 * se
    # the scalar path agrees with the vectorised hand evaluation
    assert total_loss(y, cps, z, eps[0]) == pytest.approx(losses[0])


def test_basel_examples():
    assert basel_capital(BaselInputs(100, 0.6, 0.02, 0.0)) == pytest.approx(100 * 0.6 * 0.02, rel=1e-12)
    v = basel_capital(BaselInputs(100, 1.0, 0.01, 0.2))
    assert v == pytest.approx(14.55, abs=0.05)
    assert v == pytest.approx(100 * mp_cdf(-1.0559), abs=0.05)
    assert basel_capital(BaselInputs(100, 0.0, 0.01, 0.2)) == 0.0
    with pytest.raises(ValidationError):
        BaselInputs(100, 1.0, 0.01, 1.0)
