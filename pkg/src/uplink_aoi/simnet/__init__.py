"""Monte Carlo simulator of the slotted uplink network."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor

from .config import NetworkConfig, substream
from .engine import DeviceTrace, SimRecord, run_realization
from .stats import AggregateReport, ClassEstimate, aggregate
from .topology import (SpatialRealization, generate_topology, realization_from_positions,
                       torus_distance)


def _one(cfg: NetworkConfig, r: int) -> SimRecord:
    topo = generate_topology(cfg, realization=r)
    return run_realization(topo, cfg, realization=r)


def simulate(cfg: NetworkConfig, jobs: int = 1) -> list[SimRecord]:
    """Run all ``cfg.n_realizations`` realisations, returned in index order."""
    idx = range(cfg.n_realizations)
    if jobs <= 1:
        return [_one(cfg, r) for r in idx]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_one, [cfg] * len(idx), idx))


__all__ = [
    "NetworkConfig", "SpatialRealization", "SimRecord", "DeviceTrace", "AggregateReport",
    "ClassEstimate", "generate_topology", "realization_from_positions", "run_realization",
    "aggregate", "simulate", "substream", "torus_distance",
]
