import numpy as np
import pytest
import scipy.special as sc
from hypothesis import given, settings
from hypothesis import strategies as st

from uplink_aoi.errors import DegenerateDistribution, ParameterError, UnsupportedCase
from uplink_aoi.macro import (MacroParams, MetaMoments, db_to_linear, linear_to_db, meta_ccdf,
                              meta_ccdf_curve, moment_closed_form, moment_integral, moments,
                              quantize)

THETA_5DB = db_to_linear(5)


def test_db_round_trip():
    assert db_to_linear(0) == 1.0
    assert linear_to_db(db_to_linear(-3.7)) == pytest.approx(-3.7)


@pytest.mark.parametrize("kwargs", [dict(theta=0), dict(theta=1, eta=2), dict(theta=1, eps=0),
                                    dict(theta=1, eps=1.2), dict(theta=1, chi=1.5),
                                    dict(theta=1, activity="sometimes")])
def test_params_validation(kwargs):
    with pytest.raises(ParameterError):
        MacroParams(**kwargs)


def test_moment_examples():
    assert moment_closed_form(1, MacroParams(THETA_5DB, chi=1.0)) == 1.0
    assert moment_closed_form(1, MacroParams(1e-12, chi=0.5)) == pytest.approx(1.0, abs=1e-10)
    # mean of the ten reference class values at chi = 0.5
    ref = [0.0656, 0.1431, 0.2097, 0.2732, 0.3368, 0.4027, 0.4734, 0.5524, 0.6476, 0.7856]
    assert moment_closed_form(1, MacroParams(THETA_5DB, chi=0.5)) == pytest.approx(
        np.mean(ref), abs=2e-3)


def test_closed_form_against_scipy_oracle():
    # same sum evaluated with scipy's hyp2f1
    th, eta, chi = 2.0, 3.5, 0.3
    delta = 2 / eta
    for b in (1, 2, 3):
        s = sum(sc.comb(b, n) * (-1) ** (n + 1) * ((1 - chi) * th) ** n / (n - delta)
                * sc.hyp2f1(n, n - delta, n + 1 - delta, -th) for n in range(1, b + 1))
        assert moment_closed_form(b, MacroParams(th, eta, chi=chi)) == pytest.approx(
            np.exp(-delta * s), rel=1e-12)


def test_frozen_activity_differs_only_beyond_first_moment():
    p = MacroParams(THETA_5DB, chi=0.5)
    q = MacroParams(THETA_5DB, chi=0.5, activity="frozen")
    assert moment_closed_form(1, p) == pytest.approx(moment_closed_form(1, q), rel=1e-14)
    assert moment_closed_form(2, q) > moment_closed_form(2, p)


def test_closed_form_rejects_fractional_power_control():
    with pytest.raises(UnsupportedCase):
        moment_closed_form(1, MacroParams(1.0, eps=0.5))
    with pytest.raises(ParameterError):
        moment_closed_form(0, MacroParams(1.0))


def test_integral_examples():
    assert moment_integral(1, MacroParams(1.0, eps=0.5, chi=1.0)) == 1.0
    near = moment_integral(1, MacroParams(1.0, eps=0.999, chi=0.5))
    assert near == pytest.approx(moment_closed_form(1, MacroParams(1.0, chi=0.5)), abs=2e-2)
    p = MacroParams(1.0, eps=0.5, chi=0.5)
    assert moment_integral(2, p) <= moment_integral(1, p)
    with pytest.raises(UnsupportedCase):
        moment_integral(1, MacroParams(1.0))


def test_integral_frozen_continuity():
    near = moment_integral(2, MacroParams(THETA_5DB, eps=0.999, chi=0.5, activity="frozen"))
    exact = moment_closed_form(2, MacroParams(THETA_5DB, chi=0.5, activity="frozen"))
    assert near == pytest.approx(exact, abs=2e-2)


def test_moments_dispatch():
    m = moments(MacroParams(1.0, chi=0.5))
    assert m.m1 == moment_closed_form(1, MacroParams(1.0, chi=0.5))
    assert m.chi_used == 0.5


def test_m1_decreasing_in_theta_and_load():
    thetas = db_to_linear(np.linspace(-10, 10, 21))
    chis = np.linspace(1.0, 0.0, 21)
    for chi in (0.2, 0.6):
        m1 = [moment_closed_form(1, MacroParams(t, chi=chi)) for t in thetas]
        assert np.all(np.diff(m1) < 0)
    for t in (0.5, 3.0):
        m1 = [moment_closed_form(1, MacroParams(t, chi=c)) for c in chis]
        assert np.all(np.diff(m1) < 0)


@settings(max_examples=20, deadline=None)
@given(st.floats(-10, 10), st.floats(2.2, 6.0), st.floats(0.0, 0.99),
       st.sampled_from(["per_slot", "frozen"]))
def test_moment_ordering(theta_db, eta, chi, activity):
    p = MacroParams(db_to_linear(theta_db), eta, chi=chi, activity=activity)
    m1, m2 = moment_closed_form(1, p), moment_closed_form(2, p)
    assert 0 <= m2 <= m1 <= 1
    assert m2 >= m1 ** 2 - 1e-9


@pytest.mark.parametrize("m1,m2", [(0.5, 0.6), (1.2, 1.0), (0.5, 0.2)])
def test_meta_moments_validation(m1, m2):
    with pytest.raises(ParameterError):
        MetaMoments(m1, m2, 0.5)


def test_meta_ccdf_edges_and_monotonicity():
    m = moments(MacroParams(1.0, chi=0.5))
    assert meta_ccdf(1e-12, m) == pytest.approx(1.0, abs=1e-6)
    assert meta_ccdf(1 - 1e-12, m) == pytest.approx(0.0, abs=1e-6)
    curve = meta_ccdf_curve(np.linspace(0, 1, 201), m)
    assert np.all(np.diff(curve) <= 1e-15)


def test_meta_ccdf_matches_scipy_beta():
    m = moments(MacroParams(THETA_5DB, chi=0.5))
    a, b = m.beta_shape()
    for x in (0.1, 0.37, 0.8):
        assert meta_ccdf(x, m) == pytest.approx(sc.betaincc(a, b, x), abs=1e-12)


def test_degenerate_distribution():
    m = MetaMoments(0.7, 0.49, 1.0)
    assert m.degenerate
    with pytest.raises(DegenerateDistribution):
        meta_ccdf(0.5, m)
    np.testing.assert_array_equal(meta_ccdf_curve([0.5, 0.7, 0.9], m), [1.0, 0.0, 0.0])
    table = quantize(10, m)
    assert table.degenerate
    np.testing.assert_array_equal(table.d, np.full(10, 0.7))


def test_quantize_single_class_is_median():
    m = moments(MacroParams(1.0, chi=0.4))
    a, b = m.beta_shape()
    lo, hi = 0.0, 1.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if sc.betainc(a, b, mid) < 0.5 else (lo, mid)
    assert quantize(1, m).d[0] == pytest.approx(0.5 * (lo + hi), abs=1e-8)


@settings(max_examples=15, deadline=None)
@given(st.floats(-8, 8), st.floats(0.05, 0.95), st.integers(1, 25))
def test_quantize_invariants(theta_db, chi, n):
    tol = 1e-9
    m = moments(MacroParams(db_to_linear(theta_db), chi=chi))
    t = quantize(n, m, tol)
    assert len(t) == n
    assert np.all(np.diff(t.d) > 0)
    assert np.all(np.diff(t.boundaries) > 0)
    assert np.all(t.boundaries[:-1] < t.d) and np.all(t.d < t.boundaries[1:])
    ccdf = np.array([1.0 if w == 0 else 0.0 if w == 1 else meta_ccdf(w, m)
                     for w in t.boundaries])
    np.testing.assert_allclose(ccdf[:-1] - ccdf[1:], 1.0 / n, atol=2 * tol)


def test_quantize_mean_converges_to_m1():
    m = moments(MacroParams(THETA_5DB, chi=0.5))
    gap10 = abs(quantize(10, m).d.mean() - m.m1)
    gap100 = abs(quantize(100, m).d.mean() - m.m1)
    assert gap100 < gap10


def test_quantize_validation():
    m = moments(MacroParams(1.0, chi=0.5))
    with pytest.raises(ParameterError):
        quantize(0, m)
    with pytest.raises(ParameterError):
        quantize(3, m, tol=0)
