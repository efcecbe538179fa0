"""Slot-level simulation of one spatial realisation.

Per slot: Bernoulli arrivals join each device's FIFO queue, every
backlogged device transmits its head packet, each station decodes its own
device if the SIR exceeds theta, and decoded packets leave the queue.
Fading is redrawn every slot.

Time conventions: a packet generated in slot G and decoded in slot t has
sojourn ``t - G + 1``; it reaches the station at epoch ``t + 1``, so the
age right before the reset is ``t + 1 - G_prev`` where G_prev is the
generation slot of the previously delivered packet.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .config import NetworkConfig, substream
from .topology import SpatialRealization


@dataclass
class DeviceTrace:
    """Per-slot log of one device: age at slot start and delivered generation (-1 if none)."""

    device: int
    aoi: list = field(default_factory=list)
    delivered: list = field(default_factory=list)
    arrivals: list = field(default_factory=list)
    peaks: list = field(default_factory=list)


@dataclass
class SimRecord:
    """Measured statistics of one realisation (measurement phase only).

    `total_arrivals`, `total_deliveries` and `final_queue` span the whole
    run including warm-up.
    """

    realization: int
    n_devices: int
    attempts: np.ndarray
    successes: np.ndarray
    busy_slots: np.ndarray
    idle_slots: np.ndarray
    sojourn: list
    peak_aoi: list
    total_arrivals: np.ndarray
    total_deliveries: np.ndarray
    final_queue: np.ndarray
    warmup_slots: int
    measured_slots: int
    steady: bool
    traces: dict = field(default_factory=dict)

    def success_probability(self, min_attempts: int = 1) -> np.ndarray:
        """successes / attempts per device; NaN below `min_attempts`."""
        out = np.full(self.n_devices, np.nan)
        ok = self.attempts >= max(1, min_attempts)
        out[ok] = self.successes[ok] / self.attempts[ok]
        return out

    def meta_ccdf(self, deltas, min_attempts: int = 1) -> np.ndarray:
        ps = self.success_probability(min_attempts)
        ps = ps[~np.isnan(ps)]
        deltas = np.asarray(deltas, dtype=float)
        if ps.size == 0:
            return np.full(deltas.shape, np.nan)
        return (ps[None, :] > deltas[:, None]).mean(axis=1)

    @property
    def idle_fraction(self) -> float:
        return float(self.idle_slots.sum() / (self.measured_slots * self.n_devices))

    @property
    def mean_sojourn(self) -> float:
        allw = np.concatenate(self.sojourn) if self.sojourn else np.empty(0)
        return float(allw.mean()) if allw.size else float("nan")

    @property
    def network_peak_aoi(self) -> float:
        allp = np.concatenate(self.peak_aoi) if self.peak_aoi else np.empty(0)
        return float(allp.mean()) if allp.size else float("nan")

    def summary(self, min_attempts: int = 50) -> dict:
        ps = self.success_probability(min_attempts)
        return {
            "realization": self.realization,
            "n_devices": self.n_devices,
            "mean_success": float(np.nanmean(ps)) if np.isfinite(ps).any() else float("nan"),
            "idle_fraction": self.idle_fraction,
            "mean_sojourn": self.mean_sojourn,
            "peak_aoi": self.network_peak_aoi,
            "steady": self.steady,
            "warmup_slots": self.warmup_slots,
            "measured_slots": self.measured_slots,
        }


def run_realization(topo: SpatialRealization, cfg: NetworkConfig, seed: int | None = None,
                    realization: int = 0, trace_devices=()) -> SimRecord:
    """Simulate one realisation: warm-up until steady, then measure.

    Warm-up proceeds in windows of ``cfg.warmup_window`` slots until the
    network idle fraction of two consecutive windows differs by less than
    ``cfg.steady_tol``; ``steady`` is False if that does not happen within
    ``cfg.n_slots_max`` slots, and measurement starts anyway.
    """
    seed = cfg.seed if seed is None else seed
    arr_rng = substream(seed, realization, "arrivals")
    fade_rng = substream(seed, realization, "fading")
    n = topo.n_devices
    gain = topo.relative_gain(cfg.eta)
    theta = cfg.theta
    alpha = cfg.alpha
    marginal = cfg.fading == "marginal"
    if marginal:
        log_keep = -np.log1p(theta * gain)

    queues = [deque() for _ in range(n)]
    qlen = np.zeros(n, dtype=np.int64)
    aoi = np.zeros(n, dtype=np.int64)
    last_gen = np.full(n, -1, dtype=np.int64)
    total_arr = np.zeros(n, dtype=np.int64)
    total_del = np.zeros(n, dtype=np.int64)

    attempts = np.zeros(n, dtype=np.int64)
    successes = np.zeros(n, dtype=np.int64)
    busy = np.zeros(n, dtype=np.int64)
    soj = [[] for _ in range(n)]
    peaks = [[] for _ in range(n)]
    traces = {int(i): DeviceTrace(int(i)) for i in trace_devices}

    def step(t, measuring):
        if alpha > 0:
            arrived = np.flatnonzero(arr_rng.random(n) < alpha)
            for i in arrived:
                queues[i].append(t)
            qlen[arrived] += 1
            total_arr[arrived] += 1
        else:
            arrived = ()
        active = np.flatnonzero(qlen > 0)
        k = active.size
        if k:
            sub = gain[np.ix_(active, active)]
            if marginal:
                p_ok = np.exp(log_keep[np.ix_(active, active)].sum(axis=1))
                ok = fade_rng.random(k) < p_ok
            else:
                g = fade_rng.exponential(size=(k, k))
                h = fade_rng.exponential(size=k)
                ok = h > theta * (sub * g).sum(axis=1)
            winners = active[ok]
        else:
            winners = active
        for i in traces:
            tr = traces[i]
            tr.aoi.append(int(aoi[i]))
            tr.arrivals.append(int(i in arrived))
        aoi[:] += 1
        for i in winners:
            gen = queues[i].popleft()
            if measuring:
                soj[i].append(t - gen + 1)
                if last_gen[i] >= 0:
                    peaks[i].append(int(aoi[i]))
            if i in traces:
                traces[i].peaks.append(int(aoi[i]) if last_gen[i] >= 0 else None)
            aoi[i] = t - gen + 1
            last_gen[i] = gen
        qlen[winners] -= 1
        total_del[winners] += 1
        for i in traces:
            traces[i].delivered.append(int(last_gen[i]) if i in set(winners.tolist()) else -1)
        if measuring:
            attempts[active] += 1
            successes[winners] += 1
            busy[active] += 1
        return n - k

    t = 0
    window = cfg.warmup_window
    prev = None
    steady = False
    while t < cfg.n_slots_max:
        idle = 0
        for _ in range(window):
            idle += step(t, False)
            t += 1
        frac = idle / (window * n)
        if prev is not None and abs(frac - prev) < cfg.steady_tol:
            steady = True
            break
        prev = frac
    warmup = t
    for _ in range(cfg.n_slots_max):
        step(t, True)
        t += 1

    return SimRecord(
        realization=realization,
        n_devices=n,
        attempts=attempts,
        successes=successes,
        busy_slots=busy,
        idle_slots=cfg.n_slots_max - busy,
        sojourn=[np.asarray(s, dtype=np.int64) for s in soj],
        peak_aoi=[np.asarray(p, dtype=np.int64) for p in peaks],
        total_arrivals=total_arr,
        total_deliveries=total_del,
        final_queue=qlen.copy(),
        warmup_slots=warmup,
        measured_slots=cfg.n_slots_max,
        steady=steady,
        traces=traces,
    )
