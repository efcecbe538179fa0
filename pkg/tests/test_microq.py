import math
import pickle

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from oracles import empirical_pmf, geo_geo_1_des, total_variation
from uplink_aoi.errors import ParameterError
from uplink_aoi.microq import (SOJOURN_MODES, UNBOUNDED, ArrivalSpec, class_stats,
                               format_value, is_unbounded, mean_sojourn, peak_aoi, sojourn_pmf,
                               steady_state)

prob = st.floats(0.001, 0.999)


def stable_pair(alpha, d):
    assume(alpha < d * 0.98)
    return ArrivalSpec(alpha), d


def test_steady_state_example():
    ss = steady_state(ArrivalSpec(0.1), 0.5)
    assert ss.stable
    assert ss.x0 == pytest.approx(0.8)
    assert ss.ratio == pytest.approx(1 / 9)


def test_boundary_is_unstable():
    ss = steady_state(ArrivalSpec(0.5), 0.5)
    assert not ss.stable and ss.x0 == 0.0
    assert ss.queue_length_pmf(5) is None
    assert sojourn_pmf(ArrivalSpec(0.5), 0.5) is None
    assert mean_sojourn(ArrivalSpec(0.5), 0.5) is UNBOUNDED
    st_ = class_stats(ArrivalSpec(0.6), 0.5)
    assert not st_.stable and st_.x0 == 0.0 and st_.mean_sojourn is UNBOUNDED


@pytest.mark.parametrize("d", [0.0, -0.1, 1.2])
def test_service_probability_domain(d):
    with pytest.raises(ParameterError):
        steady_state(ArrivalSpec(0.1), d)


@pytest.mark.parametrize("alpha", [0.0, -0.2, 1.5])
def test_arrival_domain(alpha):
    with pytest.raises(ParameterError):
        ArrivalSpec(alpha)


def test_interference_free_service():
    # d = 1: FCFS delivers every packet in its arrival slot; the primary
    # semantics still charges a second slot to packets that find one ahead
    a = ArrivalSpec(0.3)
    np.testing.assert_allclose(sojourn_pmf(a, 1.0), [0.0, 0.7, 0.3])
    assert mean_sojourn(a, 1.0) == pytest.approx(1.3)
    assert sojourn_pmf(a, 1.0, mode="arrival")[1] == pytest.approx(1.0)
    assert mean_sojourn(a, 1.0, "arrival") == pytest.approx(1.0)


@settings(max_examples=100, deadline=None)
@given(prob, prob)
def test_queue_length_normalisation(alpha, d):
    a, d = stable_pair(alpha, d)
    ss = steady_state(a, d)
    n = 10
    while ss.ratio ** n > 1e-13 and n < 2_000_000:
        n *= 2
    x = ss.queue_length_pmf(n)
    assert math.fsum(x) == pytest.approx(1.0, abs=1e-9)
    assert ss.x0 == pytest.approx((d - a.alpha) / d)
    assert ss.mean_queue_length == pytest.approx(np.dot(np.arange(n), x), rel=1e-8)


@settings(max_examples=100, deadline=None)
@given(prob, prob, st.sampled_from(SOJOURN_MODES))
def test_sojourn_mass_and_mean(alpha, d, mode):
    a, d = stable_pair(alpha, d)
    pmf = sojourn_pmf(a, d, mode=mode)
    assert math.fsum(pmf) == pytest.approx(1.0, abs=1e-9)
    assert np.all(pmf >= 0)
    if mode != "printed":
        assert pmf[0] == 0.0
    m = np.arange(len(pmf))
    # the PMF drops up to 1e-9 of tail mass; the closed-form mean does not
    assert float(mean_sojourn(a, d, mode)) == pytest.approx(np.dot(m, pmf), rel=1e-6, abs=1e-6)


@settings(max_examples=50, deadline=None)
@given(prob, prob)
def test_system_pmf_matches_binomial_sum(alpha, d):
    # P(W = m) = sum_v x_{v-1} C(m-1, v-1) d^v (1-d)^(m-v), summed term by term
    a, d = stable_pair(alpha, d)
    assume(d < 1)
    pmf = sojourn_pmf(a, d)[:40]
    x = steady_state(a, d).queue_length_pmf(41)
    for m in range(1, len(pmf)):
        ref = math.fsum(x[v - 1] * math.comb(m - 1, v - 1) * d ** v * (1 - d) ** (m - v)
                        for v in range(1, m + 1))
        assert pmf[m] == pytest.approx(ref, rel=1e-9, abs=1e-300)


def test_printed_mode_is_literal_form():
    a, d = ArrivalSpec(0.2), 0.6
    pmf = sojourn_pmf(a, d, mode="printed")
    x = steady_state(a, d).queue_length_pmf(60)
    assert pmf[0] == pytest.approx((d - 0.2) / d)
    for m in (1, 2, 5):
        ref = sum(x[v] * math.comb(m - 1, v - 1) * d ** v * (1 - d) ** (m - v)
                  for v in range(1, m + 1))
        assert pmf[m] == pytest.approx(ref, rel=1e-12)


def test_light_load_sojourn_is_geometric():
    pmf = sojourn_pmf(ArrivalSpec(1e-9), 0.5)
    m = np.arange(1, 20)
    np.testing.assert_allclose(pmf[1:20], 0.5 ** m, rtol=1e-7)
    assert float(mean_sojourn(ArrivalSpec(1e-9), 0.5)) == pytest.approx(2.0, rel=1e-7)


def test_mean_sojourn_monotone():
    alphas = np.linspace(0.01, 0.45, 30)
    w = [float(mean_sojourn(ArrivalSpec(a), 0.5)) for a in alphas]
    assert np.all(np.diff(w) > 0)
    ds = np.linspace(0.31, 1.0, 30)
    w = [float(mean_sojourn(ArrivalSpec(0.3), d)) for d in ds]
    assert np.all(np.diff(w) < 0)


def test_truncation_cap():
    pmf = sojourn_pmf(ArrivalSpec(0.499), 0.5, max_terms=1000)
    assert len(pmf) <= 1000
    with pytest.raises(ParameterError):
        sojourn_pmf(ArrivalSpec(0.1), 0.5, truncation=0)
    with pytest.raises(ParameterError):
        sojourn_pmf(ArrivalSpec(0.1), 0.5, mode="other")


def test_peak_aoi_identity():
    a = ArrivalSpec(0.2)
    ds = np.linspace(0.3, 0.9, 10)
    res = peak_aoi(a, ds)
    waits = [float(mean_sojourn(a, d)) for d in ds]
    assert res.network - 1 / 0.2 == pytest.approx(np.mean(waits), abs=1e-12)
    assert res.mean_sojourn == pytest.approx(np.mean(waits), abs=1e-12)
    assert all(v >= 1 / 0.2 + 1 for v in res.per_class)


def test_peak_aoi_unbounded_cases():
    a = ArrivalSpec(0.4)
    some = peak_aoi(a, [0.3, 0.5, 0.9])
    assert some.per_class[0] is UNBOUNDED and not is_unbounded(some.per_class[1])
    assert some.network is UNBOUNDED and some.mean_sojourn is UNBOUNDED
    none = peak_aoi(a, [0.1, 0.2, 0.4])
    assert all(v is UNBOUNDED for v in none.per_class)


def test_unbounded_marker():
    assert str(UNBOUNDED) == "inf" and float(UNBOUNDED) == math.inf
    assert pickle.loads(pickle.dumps(UNBOUNDED)) is UNBOUNDED
    assert format_value(UNBOUNDED) == "inf"
    assert format_value(math.inf) == "inf"
    assert format_value(True) == "true"
    assert format_value(np.int64(3)) == "3"
    assert format_value(0.1) == "0.1"


def test_queue_length_matches_des():
    a, d = 0.1, 0.5
    content, _ = geo_geo_1_des(a, d, 10 ** 6, seed=11)
    x = steady_state(ArrivalSpec(a), d).queue_length_pmf(30)
    emp, tail = empirical_pmf(content, 30)
    assert total_variation(x, emp) < 0.005


def test_arrival_mode_matches_des():
    # the per-packet system time that an FCFS slot simulation actually measures
    for a, d in [(0.1, 0.5), (0.3, 0.45), (0.05, 0.9)]:
        _, soj = geo_geo_1_des(a, d, 10 ** 6, seed=3)
        pmf = sojourn_pmf(ArrivalSpec(a), d, mode="arrival")
        emp, tail = empirical_pmf(soj, len(pmf))
        assert total_variation(pmf, emp) + tail < 0.01
        assert soj.mean() == pytest.approx(float(mean_sojourn(ArrivalSpec(a), d, "arrival")),
                                           rel=0.01)


def test_system_mode_exceeds_des_mean_by_alpha_over_d():
    # documented gap between the primary sojourn semantics and FCFS dynamics
    a, d = 0.1, 0.5
    _, soj = geo_geo_1_des(a, d, 10 ** 6, seed=5)
    gap = float(mean_sojourn(ArrivalSpec(a), d, "system")) - soj.mean()
    assert gap == pytest.approx(a / d, abs=0.02)
