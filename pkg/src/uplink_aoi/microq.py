"""Per-class Geo/Geo/1 queue: stationary law, sojourn time, peak age.

A device of a QoS class sees Bernoulli(alpha) arrivals and succeeds in
each transmission attempt with probability d.  The stationary law used
here counts the packets present when the head-of-line packet is
transmitted (after the slot's arrival, before its departure); that is the
quantity whose emptiness makes a device silent for the slot.

Unbounded quantities (unstable queues) are carried as `UNBOUNDED`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import ParameterError

SOJOURN_MODES = ("system", "printed", "arrival")


class _Unbounded:
    """Singleton marker for an infinite mean; prints and serialises as ``inf``."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "UNBOUNDED"

    def __str__(self):
        return "inf"

    def __float__(self):
        return math.inf

    def __reduce__(self):
        return (_Unbounded, ())


UNBOUNDED = _Unbounded()
Value = Union[float, _Unbounded]


def is_unbounded(value) -> bool:
    return value is UNBOUNDED


def format_value(value, fmt: str = ".12g") -> str:
    """Serialise a possibly-unbounded value; never emits a float infinity."""
    if value is UNBOUNDED or (isinstance(value, float) and math.isinf(value)):
        return "inf"
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), fmt)


@dataclass(frozen=True)
class ArrivalSpec:
    alpha: float

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ParameterError(f"arrival probability must lie in (0, 1], got {self.alpha}")


@dataclass(frozen=True)
class QueueSteadyState:
    alpha: float
    d: float
    stable: bool
    x0: float
    ratio: float

    def queue_length_pmf(self, n_terms: int) -> np.ndarray:
        """Stationary probabilities x_0 .. x_{n_terms-1}; None if unstable."""
        if not self.stable:
            return None
        i = np.arange(n_terms)
        # x_i = R**i x0 / (1-d) for i >= 1, written so d = 1 stays finite
        first = self.alpha / ((1.0 - self.alpha) * self.d)
        x = np.empty(n_terms)
        x[0] = self.x0
        if n_terms > 1:
            x[1:] = first * self.x0 * self.ratio ** (i[1:] - 1)
        return x

    @property
    def mean_queue_length(self) -> float:
        if not self.stable:
            return math.inf
        first = self.alpha / ((1.0 - self.alpha) * self.d)
        return first * self.x0 / (1.0 - self.ratio) ** 2


@dataclass(frozen=True)
class ClassQueueStats:
    d: float
    stable: bool
    x0: float
    ratio: float
    sojourn_pmf: np.ndarray | None
    mean_sojourn: Value


@dataclass(frozen=True)
class PeakAoIResult:
    alpha: float
    per_class: list
    network: Value

    @property
    def mean_sojourn(self) -> Value:
        if self.network is UNBOUNDED:
            return UNBOUNDED
        return self.network - 1.0 / self.alpha


def _check_d(d: float) -> float:
    d = float(d)
    # d = 1 is the interference-free limit reached when every queue is idle
    if not 0 < d <= 1:
        raise ParameterError(f"service probability must lie in (0, 1], got {d}")
    return d


def steady_state(a: ArrivalSpec, d: float) -> QueueSteadyState:
    """Stationary idle probability and geometric ratio of the class queue.

    Stable iff alpha < d.  Then x0 = (d - alpha)/d and
    R = alpha (1 - d) / ((1 - alpha) d); otherwise x0 = 0 and R is reported
    as ``inf``.
    """
    d = _check_d(d)
    alpha = a.alpha
    if alpha >= d:
        return QueueSteadyState(alpha, d, False, 0.0, math.inf)
    ratio = alpha * (1.0 - d) / ((1.0 - alpha) * d)
    return QueueSteadyState(alpha, d, True, (d - alpha) / d, ratio)


def _sojourn_terms(ss: QueueSteadyState, mode: str, m: np.ndarray) -> np.ndarray:
    # closed forms of the negative-binomial mixtures, m >= 1
    d, x0, R = ss.d, ss.x0, ss.ratio
    dbar = 1.0 - d
    first = ss.alpha / ((1.0 - ss.alpha) * d)
    grow = R * d + dbar
    with np.errstate(under="ignore"):
        if mode == "system":
            # sum_v x_{v-1} C(m-1, v-1) d^v dbar^(m-v)
            if dbar == 0.0:
                return np.where(m == 1, x0, np.where(m == 2, 1.0 - x0, 0.0))
            return x0 * d * dbar ** (m - 1) + x0 * d / dbar * (grow ** (m - 1) - dbar ** (m - 1))
        if mode == "printed":
            # sum_v x_v C(m-1, v-1) d^v dbar^(m-v)
            return x0 * first * d * grow ** (m - 1)
        # arrival view: the arriving packet finds (1-R) R^k packets
        return (1.0 - R) * d * grow ** (m - 1)


def sojourn_pmf(a: ArrivalSpec, d: float, truncation: float = 1e-9, mode: str = "system",
                max_terms: int = 1_000_000) -> np.ndarray:
    """Distribution of a packet's time in system, indexed by m = 0, 1, 2, ...

    ``mode="system"`` weights the negative-binomial service of an arriving
    packet by x_{v-1} (it finds v-1 packets and needs v successes); the
    mass sits on m >= 1.  ``mode="printed"`` puts x0 at m = 0 and weights
    the m >= 1 terms by x_v.  ``mode="arrival"`` weights by the content a
    Bernoulli arrival actually finds under first-come first-served service,
    which is what a slot-level simulation of the queue measures.

    The array is cut once the cumulative mass reaches ``1 - truncation``.
    Returns None for an unstable queue.
    """
    if mode not in SOJOURN_MODES:
        raise ParameterError(f"unknown sojourn mode {mode!r}")
    if not 0 < truncation < 1:
        raise ParameterError("truncation must lie in (0, 1)")
    ss = steady_state(a, d)
    if not ss.stable:
        return None
    grow = ss.ratio * ss.d + (1.0 - ss.d)
    # geometric tail: enough terms for the slowest component to drop below truncation
    if grow > 0:
        n = int(math.ceil(math.log(truncation * (1.0 - grow) * 1e-2) / math.log(grow))) + 2 \
            if grow < 1 else max_terms
    else:
        n = 2
    n = min(max(n, 3), max_terms)
    m = np.arange(1, n)
    pmf = np.zeros(n)
    pmf[1:] = _sojourn_terms(ss, mode, m)
    if mode == "printed":
        pmf[0] = ss.x0
    csum = np.cumsum(pmf)
    cut = int(np.searchsorted(csum, 1.0 - truncation)) + 1
    return pmf[:min(cut, n)]


def mean_sojourn(a: ArrivalSpec, d: float, mode: str = "system") -> Value:
    """Mean of `sojourn_pmf` in closed form (no truncation)."""
    ss = steady_state(a, d)
    if not ss.stable:
        return UNBOUNDED
    mean_len = ss.mean_queue_length
    if mode == "system":
        return (1.0 + mean_len) / ss.d
    if mode == "printed":
        return mean_len / ss.d
    if mode == "arrival":
        return 1.0 / (ss.d * (1.0 - ss.ratio))
    raise ParameterError(f"unknown sojourn mode {mode!r}")


def class_stats(a: ArrivalSpec, d: float, truncation: float = 1e-9,
                mode: str = "system") -> ClassQueueStats:
    ss = steady_state(a, d)
    if not ss.stable:
        return ClassQueueStats(ss.d, False, 0.0, ss.ratio, None, UNBOUNDED)
    return ClassQueueStats(ss.d, True, ss.x0, ss.ratio,
                           sojourn_pmf(a, d, truncation, mode), mean_sojourn(a, d, mode))


def peak_aoi(a: ArrivalSpec, table, mode: str = "system") -> PeakAoIResult:
    """Per-class and network-average peak age: 1/alpha plus the mean sojourn.

    `table` is a `QoSClassTable` or any sequence of per-class service
    probabilities.  The network value is unbounded as soon as one class is.
    """
    ds: Sequence[float] = getattr(table, "d", table)
    inter = 1.0 / a.alpha
    per_class = []
    for d in ds:
        w = mean_sojourn(a, d, mode)
        per_class.append(UNBOUNDED if w is UNBOUNDED else inter + w)
    if any(v is UNBOUNDED for v in per_class):
        network = UNBOUNDED
    else:
        waits = [v - inter for v in per_class]
        network = inter + math.fsum(waits) / len(waits)
    return PeakAoIResult(a.alpha, per_class, network)
