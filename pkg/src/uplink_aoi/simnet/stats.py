"""Pooling of per-realisation records into network-level estimates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ParameterError
from .engine import SimRecord


@dataclass
class ClassEstimate:
    index: int
    n_devices: int
    success_probability: float
    idle_fraction: float
    mean_sojourn: float
    peak_aoi: float


@dataclass
class AggregateReport:
    deltas: np.ndarray
    ccdf: np.ndarray
    n_devices: int
    n_used: int
    n_zero_attempts: int
    n_low_attempts: int
    idle_fraction: float
    mean_sojourn: float
    network_peak_aoi: float
    per_class: list
    all_steady: bool


def _mean(chunks):
    chunks = [c for c in chunks if c.size]
    if not chunks:
        return float("nan")
    return float(np.concatenate(chunks).mean())


def aggregate(records: list[SimRecord], delta_grid, n_classes: int = 10,
              min_attempts: int = 50) -> AggregateReport:
    """Pool devices across realisations.

    The meta CCDF is the fraction of devices whose empirical success
    probability exceeds each delta.  Devices that never transmitted are
    counted in `n_zero_attempts`; devices with fewer than `min_attempts`
    attempts in `n_low_attempts`; both are left out of the CCDF and of the
    class split.  Classes are N equal-size groups of devices ordered by
    empirical success probability.
    """
    if not records:
        raise ParameterError("aggregate needs at least one record")
    deltas = np.asarray(delta_grid, dtype=float)
    attempts = np.concatenate([r.attempts for r in records])
    successes = np.concatenate([r.successes for r in records])
    idle = np.concatenate([r.idle_slots / r.measured_slots for r in records])
    soj = [s for r in records for s in r.sojourn]
    peaks = [p for r in records for p in r.peak_aoi]

    zero = attempts == 0
    used = attempts >= max(1, min_attempts)
    ps = np.where(used, successes / np.maximum(attempts, 1), np.nan)
    ps_used = ps[used]
    if ps_used.size:
        ccdf = (ps_used[None, :] > deltas[:, None]).mean(axis=1)
    else:
        ccdf = np.full(deltas.shape, np.nan)

    per_class = []
    order = np.flatnonzero(used)[np.argsort(ps_used, kind="stable")]
    if order.size >= n_classes:
        for c, group in enumerate(np.array_split(order, n_classes), start=1):
            per_class.append(ClassEstimate(
                index=c,
                n_devices=int(group.size),
                success_probability=float(ps[group].mean()),
                idle_fraction=float(idle[group].mean()),
                mean_sojourn=_mean([soj[i] for i in group]),
                peak_aoi=_mean([peaks[i] for i in group]),
            ))

    return AggregateReport(
        deltas=deltas,
        ccdf=ccdf,
        n_devices=int(attempts.size),
        n_used=int(used.sum()),
        n_zero_attempts=int(zero.sum()),
        n_low_attempts=int((~zero & ~used).sum()),
        idle_fraction=float(idle.mean()),
        mean_sojourn=_mean(soj),
        network_peak_aoi=_mean(peaks),
        per_class=per_class,
        all_steady=all(r.steady for r in records),
    )
