import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wrongway.errors import ParseError, ValidationError
from wrongway.portfolio import (Counterparty, ExposureMatrix, concentration, exposure_band_report,
                                load_counterparties, load_exposures, total_exposure_histogram)
from wrongway._prob import uniform


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_uniform_probs(tmp_path):
    f = _write(tmp_path, "e.csv", "counterparty_id,s1,s2,s3\nA,1,2,3\nB,0,0,1\n")
    x = load_exposures(f)
    assert x.exposures.shape == (2, 3)
    np.testing.assert_allclose(x.probs, [1 / 3] * 3, rtol=0, atol=1e-15)
    assert math.fsum(x.probs) == 1.0


def test_negative_cell_names_location(tmp_path):
    f = _write(tmp_path, "e.csv", "counterparty_id,s1,s2\nA,1,2\nB,3,-1\n")
    with pytest.raises(ValidationError, match=r"row 3, col 2"):
        load_exposures(f)


def test_single_cell(tmp_path):
    f = _write(tmp_path, "e.csv", "counterparty_id,s1\nA,5.0\n")
    x = load_exposures(f)
    assert x.exposures.tolist() == [[5.0]]
    assert x.probs.tolist() == [1.0]


def test_explicit_probs(tmp_path):
    f = _write(tmp_path, "e.csv", "counterparty_id,s1,s2\nA,1,2\n__probs__,0.25,0.75\n")
    assert load_exposures(f, "explicit").probs.tolist() == [0.25, 0.75]
    assert load_exposures(f, "uniform").probs.tolist() == [0.5, 0.5]
    bad = _write(tmp_path, "b.csv", "counterparty_id,s1,s2\nA,1,2\n__probs__,0.25,0.7\n")
    with pytest.raises(ValidationError):
        load_exposures(bad, "explicit")
    with pytest.raises(ValidationError):
        load_exposures(_write(tmp_path, "c.csv", "counterparty_id,s1\nA,1\n"), "explicit")


def test_parse_errors(tmp_path):
    with pytest.raises(ParseError, match="row 2"):
        load_exposures(_write(tmp_path, "a.csv", "counterparty_id,s1\nA,abc\n"))
    with pytest.raises(ParseError, match="row 3"):
        load_exposures(_write(tmp_path, "b.csv", "counterparty_id,s1,s2\nA,1,2\nB,1\n"))
    with pytest.raises(ParseError):
        load_exposures(_write(tmp_path, "c.csv", "name,s1\nA,1\n"))
    with pytest.raises(ValidationError):
        load_exposures(_write(tmp_path, "d.csv", "counterparty_id,s1\n"))


def test_counterparty_row(tmp_path):
    f = _write(tmp_path, "c.csv", "counterparty_id,pd,rho,lgd,ead_override\nCP1,0.01,0.2,0.6,\n")
    (cp,) = load_counterparties(f)
    assert cp == Counterparty("CP1", 0.01, 0.2, 0.6, None)


def test_counterparty_default_lgd(tmp_path):
    f = _write(tmp_path, "c.csv", "counterparty_id,pd,rho\nCP1,0.01,0.2\n")
    assert load_counterparties(f)[0].lgd == 1.0


@pytest.mark.parametrize("pd,rho", [(1.0, 0.2), (0.0, 0.2), (0.01, 1.0), (0.01, -0.1)])
def test_counterparty_contract(tmp_path, pd, rho):
    f = _write(tmp_path, "c.csv", f"counterparty_id,pd,rho\nCP1,{pd},{rho}\n")
    with pytest.raises(ValidationError):
        load_counterparties(f)


def test_duplicate_counterparty(tmp_path):
    f = _write(tmp_path, "c.csv", "counterparty_id,pd,rho\nA,0.01,0.2\nA,0.02,0.2\n")
    with pytest.raises(ValidationError, match="duplicate"):
        load_counterparties(f)


@pytest.mark.parametrize("w,h,eff", [
    ((1, 1, 1, 1), 0.25, 4.0),
    ((2, 1, 1), 0.375, 8 / 3),
    ((5, 0, 0), 1.0, 1.0),
])
def test_concentration_examples(w, h, eff):
    r = concentration(np.array(w, dtype=float), len(w))
    assert r.herfindahl == pytest.approx(h, abs=1e-15)
    assert r.effective_counterparties == pytest.approx(eff, rel=1e-14)


def test_concentration_clamps_top_n():
    with pytest.warns(UserWarning, match="clamped"):
        r = concentration(np.array([3.0, 1.0]), 10)
    assert r.top_n == 2


def test_concentration_uses_top_n():
    r = concentration(np.array([1.0, 4.0, 4.0, 0.5]), 2)
    assert r.effective_counterparties == pytest.approx(2.0)
    assert r.effective_by_rank.size == 4


weights = st.lists(st.floats(0, 1e6, allow_nan=False), min_size=1, max_size=30).filter(lambda v: sum(v) > 1e-6)


@given(weights, st.sampled_from([0.5, 2.0, 4.0, 1024.0]))
def test_concentration_scale_invariant(w, c):
    # power-of-two scale factors make the invariance exact in floating point
    w = np.array(w)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        a = concentration(w, len(w))
        b = concentration(c * w, len(w))
    assert a.herfindahl == b.herfindahl


@given(weights, st.floats(1e-3, 1e3))
def test_concentration_scale_invariant_any_factor(w, c):
    w = np.array(w)
    a = concentration(w, len(w)).herfindahl
    b = concentration(c * w, len(w)).herfindahl
    assert b == pytest.approx(a, rel=1e-12)


@given(st.integers(1, 40), st.floats(1e-3, 1e6))
def test_effective_equals_count_for_equal_weights(n, v):
    assert concentration(np.full(n, v), n).effective_counterparties == pytest.approx(n, rel=1e-12)


@given(weights)
def test_effective_below_count_when_unequal(w):
    w = np.array(w)
    eff = concentration(w, len(w)).effective_counterparties
    top = np.sort(w)[::-1]
    if np.ptp(top) > 1e-6 * top.max():
        assert eff < len(w) - 1e-12


def test_band_report_examples():
    x = ExposureMatrix(("C", "Z", "S"), [[3, 3, 3, 3], [0, 0, 0, 100], [0, 0, 0, 0]], uniform(4))
    rows, excluded = exposure_band_report(x)
    by = {r["counterparty_id"]: r for r in rows}
    assert by["C"]["p5_pct_of_mean"] == pytest.approx(100.0)
    assert by["C"]["p95_pct_of_mean"] == pytest.approx(100.0)
    assert by["Z"]["mean"] == pytest.approx(25.0)
    assert by["Z"]["p5_pct_of_mean"] == 0.0
    assert by["Z"]["p95_pct_of_mean"] == pytest.approx(400.0)
    assert excluded == ["S"]


def test_band_report_identical_rows():
    x = ExposureMatrix(("A", "B"), [[1, 5, 2], [1, 5, 2]], uniform(3))
    rows, _ = exposure_band_report(x)
    assert {k: v for k, v in rows[0].items() if k != "counterparty_id"} == \
        {k: v for k, v in rows[1].items() if k != "counterparty_id"}


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1))
def test_band_report_permutation_equivariant(seed):
    rng = np.random.default_rng(seed)
    K, M = 3, int(rng.integers(1, 20))
    y = rng.exponential(size=(K, M)) * (rng.random((K, M)) < 0.7)
    perm = rng.permutation(M)
    a, _ = exposure_band_report(ExposureMatrix(("a", "b", "c"), y, uniform(M)))
    b, _ = exposure_band_report(ExposureMatrix(("a", "b", "c"), y[:, perm], uniform(M)))
    assert [r["counterparty_id"] for r in a] == [r["counterparty_id"] for r in b]
    for ra, rb in zip(a, b):
        assert ra["p5_pct_of_mean"] == pytest.approx(rb["p5_pct_of_mean"], rel=1e-12)
        assert ra["p95_pct_of_mean"] == pytest.approx(rb["p95_pct_of_mean"], rel=1e-12)
        assert ra["mean"] == pytest.approx(rb["mean"], rel=1e-12)


def test_histogram_examples():
    x = ExposureMatrix(("A",), [[0, 1, 2, 3]], uniform(4))
    edges, mass = total_exposure_histogram(x, 2)
    assert mass.tolist() == [0.5, 0.5]
    assert edges.size == 3
    same = ExposureMatrix(("A",), [[2, 2, 2]], uniform(3))
    _, mass = total_exposure_histogram(same, 5)
    assert np.count_nonzero(mass) == 1
    assert mass.sum() == pytest.approx(1.0)


def test_empty_portfolio_rejected(tmp_path):
    with pytest.raises(ValidationError):
        ExposureMatrix((), np.zeros((0, 3)), uniform(3))


@settings(max_examples=50)
@given(st.integers(1, 300))
def test_loaded_probs_sum_to_one(m):
    p = uniform(m)
    assert abs(math.fsum(p) - 1.0) <= 1e-12
    x = ExposureMatrix(("A",), np.ones((1, m)), p)
    assert abs(math.fsum(x.probs) - 1.0) <= 1e-12
