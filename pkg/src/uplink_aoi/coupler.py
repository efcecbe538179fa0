"""Fixed point between network interference and queue idleness.

The network idle probability chi sets the interference level, which sets
the meta distribution, hence the per-class service probabilities, hence
each class's idle probability; their class average is the next chi.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .macro import MacroParams, MetaMoments, QoSClassTable, moments, quantize
from .microq import (UNBOUNDED, ArrivalSpec, ClassQueueStats, PeakAoIResult, class_stats,
                     peak_aoi)
from .specfun import QuadratureSpec

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FixedPointConfig:
    tol: float = 1e-6
    max_iters: int = 500
    chi_init: float = 1.0
    damping: float = 1.0
    bisection_tol: float = 1e-9
    sojourn_mode: str = "system"

    def __post_init__(self):
        if not self.tol > 0:
            raise ParameterError("fixed-point tolerance must be positive")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ParameterError("max_iters must be a positive integer")
        if not 0 <= self.chi_init <= 1:
            raise ParameterError("chi_init must lie in [0, 1]")
        if not 0 < self.damping <= 1:
            raise ParameterError("damping must lie in (0, 1]")


@dataclass
class EquilibriumSolution:
    chi: float
    moments: MetaMoments
    table: QoSClassTable
    per_class: list[ClassQueueStats]
    aoi: PeakAoIResult
    iterations: int
    converged: bool
    trajectory: list[float] = field(default_factory=list)

    @property
    def all_stable(self) -> bool:
        return all(c.stable for c in self.per_class)

    @property
    def mean_sojourn(self):
        return self.aoi.mean_sojourn


def _pass(chi, arrival, macro, n_classes, cfg, quad):
    m = moments(macro.with_chi(chi), quad)
    table = quantize(n_classes, m, cfg.bisection_tol)
    x0 = []
    for d in table.d:
        alpha = arrival.alpha
        x0.append((d - alpha) / d if alpha < d else 0.0)
    return m, table, float(np.mean(x0))


def idle_map(chi: float, arrival: ArrivalSpec, macro: MacroParams, n_classes: int,
             cfg: FixedPointConfig | None = None, quad: QuadratureSpec | None = None) -> float:
    """One macro + micro pass: the class-averaged idle probability given chi."""
    cfg = cfg or FixedPointConfig()
    return _pass(chi, arrival, macro, n_classes, cfg, quad)[2]


def solve(arrival: ArrivalSpec, macro: MacroParams, n_classes: int,
          cfg: FixedPointConfig | None = None,
          quad: QuadratureSpec | None = None) -> EquilibriumSolution:
    """Iterate chi to its fixed point and return the full equilibrium.

    ``macro.chi`` is ignored; iteration starts from ``cfg.chi_init``.  When
    ``max_iters`` runs out the last iterate is returned with
    ``converged=False`` and the chi trajectory attached.
    """
    cfg = cfg or FixedPointConfig()
    if int(n_classes) != n_classes or n_classes < 1:
        raise ParameterError("number of classes must be a positive integer")
    chi = cfg.chi_init
    trajectory = [chi]
    converged = False
    for k in range(1, cfg.max_iters + 1):
        m, table, chi_new = _pass(chi, arrival, macro, n_classes, cfg, quad)
        step = cfg.damping * (chi_new - chi)
        chi_next = min(1.0, max(0.0, chi + step))
        trajectory.append(chi_next)
        if abs(chi_next - chi) < cfg.tol:
            converged = True
            break
        chi = chi_next
    else:
        k = cfg.max_iters
        log.warning("fixed point not converged after %d iterations (last step %.3g)",
                    k, abs(chi_next - chi))

    per_class = [class_stats(arrival, d, mode=cfg.sojourn_mode) for d in table.d]
    aoi = peak_aoi(arrival, table, mode=cfg.sojourn_mode)
    # report the class average that the reported per-class stats imply
    return EquilibriumSolution(chi_new, m, table, per_class, aoi, k, converged, trajectory)


def multi_start(arrival: ArrivalSpec, macro: MacroParams, n_classes: int,
                starts=(0.0, 0.5, 1.0), cfg: FixedPointConfig | None = None,
                quad: QuadratureSpec | None = None) -> list[EquilibriumSolution]:
    """Solve from several initial chi values.

    Distinct fixed points are logged rather than merged.
    """
    cfg = cfg or FixedPointConfig()
    sols = []
    for c in starts:
        sub = FixedPointConfig(cfg.tol, cfg.max_iters, c, cfg.damping, cfg.bisection_tol,
                               cfg.sojourn_mode)
        sols.append(solve(arrival, macro, n_classes, sub, quad))
    chis = [s.chi for s in sols]
    if max(chis) - min(chis) > 10 * cfg.tol:
        log.warning("fixed point depends on start: %s -> %s", list(starts), chis)
    return sols


@dataclass(frozen=True)
class SweepPoint:
    theta: float
    alpha: float
    peak_aoi: object
    mean_sojourn: object
    all_stable: bool
    chi: float
    converged: bool
    n_fixed_points: int = 1


def _distinct(chis, tol):
    out = []
    for c in sorted(chis):
        if not out or c - out[-1] > 10 * tol:
            out.append(c)
    return out


def sweep_point(theta: float, alpha: float, macro: MacroParams, n_classes: int,
                cfg: FixedPointConfig | None = None, quad: QuadratureSpec | None = None,
                starts=(0.0, 0.5, 1.0)) -> SweepPoint:
    """Solve one grid point from every start in `starts`.

    The point counts as stable only if every attained fixed point is; when
    they disagree the least favourable one is reported (its unbounded age
    included) and `n_fixed_points` records how many distinct chi were seen.
    An empty `starts` uses ``cfg.chi_init`` alone.
    """
    cfg = cfg or FixedPointConfig()
    p = MacroParams(theta, macro.eta, macro.eps, 1.0, macro.activity)
    arrival = ArrivalSpec(alpha)
    if starts:
        sols = multi_start(arrival, p, n_classes, starts, cfg, quad)
    else:
        sols = [solve(arrival, p, n_classes, cfg, quad)]
    # least favourable: unstable first, then the lowest idle probability
    sol = min(sols, key=lambda s: (s.all_stable, s.chi))
    return SweepPoint(theta, alpha, sol.aoi.network, sol.aoi.mean_sojourn, sol.all_stable,
                      sol.chi, all(s.converged for s in sols),
                      len(_distinct([s.chi for s in sols], cfg.tol)))


def stability_point(points: list[SweepPoint]):
    """Largest alpha on the (monotone) grid at which every class is stable."""
    stable = [p.alpha for p in points if p.all_stable]
    return max(stable) if stable else None


__all__ = ["FixedPointConfig", "EquilibriumSolution", "SweepPoint", "solve", "idle_map",
           "multi_start", "sweep_point", "stability_point", "UNBOUNDED"]
