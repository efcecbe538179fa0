import logging

import numpy as np
import pytest

from uplink_aoi.coupler import (FixedPointConfig, idle_map, multi_start, solve, stability_point,
                                sweep_point)
from uplink_aoi.errors import ParameterError
from uplink_aoi.macro import MacroParams, db_to_linear
from uplink_aoi.microq import UNBOUNDED, ArrivalSpec


def test_config_validation():
    for kwargs in (dict(tol=0), dict(max_iters=0), dict(chi_init=1.5), dict(damping=0),
                   dict(damping=1.2)):
        with pytest.raises(ParameterError):
            FixedPointConfig(**kwargs)
    with pytest.raises(ParameterError):
        solve(ArrivalSpec(0.1), MacroParams(1.0), 0)


@pytest.mark.parametrize("alpha,theta_db", [(0.05, 5), (0.25, 0), (0.35, 0), (0.61, -5)])
def test_self_consistency(alpha, theta_db):
    cfg = FixedPointConfig()
    a, p = ArrivalSpec(alpha), MacroParams(db_to_linear(theta_db))
    sol = solve(a, p, 10, cfg)
    assert sol.converged
    assert abs(idle_map(sol.chi, a, p, 10, cfg) - sol.chi) < cfg.tol
    assert sol.chi == pytest.approx(np.mean([c.x0 for c in sol.per_class]), abs=cfg.tol)
    assert all(0 <= c <= 1 for c in sol.trajectory)


def test_multi_start_agreement():
    cfg = FixedPointConfig()
    sols = multi_start(ArrivalSpec(0.25), MacroParams(1.0), 10, cfg=cfg)
    chis = [s.chi for s in sols]
    assert max(chis) - min(chis) < 10 * cfg.tol


def test_multi_start_reports_distinct_fixed_points(caplog):
    # near the theta = 5 dB frontier the map has two attracting fixed points
    with caplog.at_level(logging.WARNING):
        sols = multi_start(ArrivalSpec(0.17), MacroParams(db_to_linear(5)), 10)
    chis = sorted(s.chi for s in sols)
    assert chis[-1] - chis[0] > 0.1
    assert "depends on start" in caplog.text
    assert {s.all_stable for s in sols} == {True, False}


def test_vanishing_load():
    sol = solve(ArrivalSpec(1e-4), MacroParams(1.0), 10)
    assert sol.chi >= 0.999 and sol.all_stable
    assert np.all(sol.table.d > 0.99)
    assert sol.moments.m1 == pytest.approx(1.0, abs=1e-3)


def test_frontier_point_theta_minus_5():
    p = MacroParams(db_to_linear(-5))
    ok = solve(ArrivalSpec(0.61), p, 10)
    assert ok.all_stable and ok.aoi.network == pytest.approx(7.11, abs=0.15)
    bad = solve(ArrivalSpec(0.63), p, 10)
    assert not bad.all_stable and bad.aoi.network is UNBOUNDED


def test_non_convergence_returns_trajectory(caplog):
    cfg = FixedPointConfig(tol=1e-15, max_iters=3)
    with caplog.at_level(logging.WARNING):
        sol = solve(ArrivalSpec(0.25), MacroParams(1.0), 10, cfg)
    assert not sol.converged and sol.iterations == 3
    assert len(sol.trajectory) == 4
    assert "not converged" in caplog.text


def test_damping_reaches_same_point():
    a, p = ArrivalSpec(0.35), MacroParams(1.0)
    plain = solve(a, p, 10)
    damped = solve(a, p, 10, FixedPointConfig(damping=0.5))
    assert damped.chi == pytest.approx(plain.chi, abs=1e-5)


def test_sweep_point_is_conservative_when_starts_disagree():
    p = MacroParams(db_to_linear(5))
    pt = sweep_point(p.theta, 0.17, p, 10)
    assert pt.n_fixed_points == 2
    assert not pt.all_stable and pt.peak_aoi is UNBOUNDED
    single = sweep_point(p.theta, 0.17, p, 10, starts=())
    assert single.all_stable and single.n_fixed_points == 1


def test_stability_point():
    p = MacroParams(1.0)
    pts = [sweep_point(1.0, a, p, 10) for a in (0.31, 0.33, 0.35, 0.37, 0.39)]
    assert stability_point(pts) == 0.35
    assert stability_point(pts[3:]) is None
