"""Success-probability moments, beta-fitted meta distribution, QoS classes.

Interferer activity enters through the network idle probability ``chi``.
Two activity models are supported:

``"per_slot"``
    each interferer is active independently in every slot with probability
    ``1 - chi``; a link's success probability averages over that activity,
    so the b-th moment carries ``((1 - chi) * theta) ** n`` terms.  This is
    the default and is the model the queue-coupled results are built on.
``"frozen"``
    activity is treated as part of the spatial realisation, so only a
    single ``(1 - chi)`` factor multiplies each ``theta ** n`` term.  It
    gives a wider meta distribution for the same mean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDistribution, NumericError, ParameterError, UnsupportedCase
from .specfun import (QuadratureSpec, gauss_2f1, integrate_semi_infinite, lower_inc_gamma,
                      reg_inc_beta)

ACTIVITY_MODELS = ("per_slot", "frozen")


def db_to_linear(value_db: float) -> float:
    return 10.0 ** (value_db / 10.0)


def linear_to_db(value: float) -> float:
    return 10.0 * math.log10(value)


@dataclass(frozen=True)
class MacroParams:
    """Link-level model parameters; `theta` is linear, not dB."""

    theta: float
    eta: float = 4.0
    eps: float = 1.0
    chi: float = 1.0
    activity: str = "per_slot"

    def __post_init__(self):
        if not self.theta > 0:
            raise ParameterError(f"theta must be > 0 (linear scale), got {self.theta}")
        if not self.eta > 2:
            raise ParameterError(f"path-loss exponent must exceed 2, got {self.eta}")
        if not 0 < self.eps <= 1:
            raise ParameterError(f"compensation factor must lie in (0, 1], got {self.eps}")
        if not 0 <= self.chi <= 1:
            raise ParameterError(f"idle probability must lie in [0, 1], got {self.chi}")
        if self.activity not in ACTIVITY_MODELS:
            raise ParameterError(f"activity must be one of {ACTIVITY_MODELS}")

    def with_chi(self, chi: float) -> MacroParams:
        return MacroParams(self.theta, self.eta, self.eps, chi, self.activity)


@dataclass(frozen=True)
class MetaMoments:
    m1: float
    m2: float
    chi_used: float

    def __post_init__(self):
        if not (0 <= self.m2 <= self.m1 + 1e-12 and self.m1 <= 1 + 1e-12):
            raise ParameterError(f"moments violate 0 <= m2 <= m1 <= 1: {self.m1}, {self.m2}")
        if self.m2 < self.m1 ** 2 - 1e-9:
            raise ParameterError(f"negative variance: m1={self.m1}, m2={self.m2}")

    @property
    def variance(self) -> float:
        return self.m2 - self.m1 ** 2

    @property
    def degenerate(self) -> bool:
        return self.m2 <= self.m1 ** 2 + 1e-12

    def beta_shape(self) -> tuple[float, float]:
        """Shape parameters (a, b) of the moment-matched beta distribution."""
        if self.degenerate:
            raise DegenerateDistribution(self.m1)
        k = (self.m1 - self.m2) / (self.m2 - self.m1 ** 2)
        return self.m1 * k, (1.0 - self.m1) * k


@dataclass(frozen=True)
class QoSClassTable:
    """N equiprobable classes; ``d[n]`` is the service probability of class n+1."""

    n_classes: int
    d: np.ndarray
    boundaries: np.ndarray
    degenerate: bool = False
    moments: MetaMoments | None = field(default=None, compare=False)

    def __len__(self):
        return self.n_classes


def moment_closed_form(b: int, p: MacroParams) -> float:
    """b-th moment of the success probability under full inversion (eps = 1)."""
    if p.eps != 1:
        raise UnsupportedCase("closed form only covers eps = 1; use moment_integral")
    if int(b) != b or b < 1:
        raise ParameterError(f"moment order must be a positive integer, got {b}")
    delta = 2.0 / p.eta
    chi_bar = 1.0 - p.chi
    total = 0.0
    for n in range(1, b + 1):
        if p.activity == "per_slot":
            weight = (chi_bar * p.theta) ** n
        else:
            weight = chi_bar * p.theta ** n
        f = gauss_2f1(n, n - delta, n + 1 - delta, -p.theta)
        total += math.comb(b, n) * (-1) ** (n + 1) * weight / (n - delta) * f
    return math.exp(-delta * total)


def moment_integral(b: int, p: MacroParams, q: QuadratureSpec | None = None) -> float:
    """b-th moment for fractional power control (0 < eps < 1).

    Outer integral over z in (0, inf) of exp(-z - 2 z**(1-eps)/eta * K(z)),
    with K(z) the inner integral over y in (0, inf) of
    y**(2/eta - 1) * bracket(y) * gamma(1 + eps, z * y**(2 / (eta (1 - eps)))).
    """
    if p.eps >= 1:
        raise UnsupportedCase("eps = 1 makes the integral form ill-posed; use moment_closed_form")
    if int(b) != b or b < 1:
        raise ParameterError(f"moment order must be a positive integer, got {b}")
    q = q or QuadratureSpec(rel_tol=1e-8, abs_tol=1e-10)
    inner_q = QuadratureSpec(rel_tol=q.rel_tol, abs_tol=q.abs_tol * 1e-2,
                             max_subdivisions=q.max_subdivisions,
                             semi_infinite_cutoff=q.semi_infinite_cutoff)
    theta, chi, eps = p.theta, p.chi, p.eps
    delta = 2.0 / p.eta
    power = 2.0 / (p.eta * (1.0 - eps))
    if chi == 1.0:
        return 1.0

    def bracket(y):
        if p.activity == "per_slot":
            return 1.0 - ((y + theta * chi) / (y + theta)) ** b
        return (1.0 - chi) * (1.0 - (y / (y + theta)) ** b)

    def outer(zs):
        # one shared adaptive partition in y for all 15 outer abscissae
        def g(y):
            with np.errstate(over="ignore"):
                arg = zs[None, :] * (y ** power)[:, None]
            weight = y ** (delta - 1.0) * bracket(y)
            return weight[:, None] * lower_inc_gamma(1.0 + eps, arg)
        inner, _ = integrate_semi_infinite(g, 0.0, inner_q)
        return np.exp(-zs - delta * zs ** (1.0 - eps) * inner)

    val, _ = integrate_semi_infinite(outer, 0.0, q)
    return min(1.0, max(0.0, val))


def moments(p: MacroParams, q: QuadratureSpec | None = None) -> MetaMoments:
    """First two moments, choosing the closed form when eps = 1."""
    if p.eps == 1:
        m1 = moment_closed_form(1, p)
        m2 = moment_closed_form(2, p)
    else:
        m1 = moment_integral(1, p, q)
        m2 = moment_integral(2, p, q)
    return MetaMoments(m1, m2, p.chi)


def meta_cdf(delta: float, m: MetaMoments) -> float:
    """Beta-approximated fraction of links with success probability <= delta."""
    a, b = m.beta_shape()
    return reg_inc_beta(min(1.0, max(0.0, delta)), a, b)


def meta_ccdf(delta: float, m: MetaMoments) -> float:
    """Fraction of links whose success probability exceeds `delta`.

    Raises `DegenerateDistribution` when the moments carry no variance;
    callers then treat the distribution as a point mass at ``m.m1``.
    """
    return 1.0 - meta_cdf(delta, m)


def meta_ccdf_curve(deltas, m: MetaMoments) -> np.ndarray:
    """`meta_ccdf` on a grid, falling back to the point-mass step if degenerate."""
    deltas = np.asarray(deltas, dtype=float)
    if m.degenerate:
        return (m.m1 > deltas).astype(float)
    a, b = m.beta_shape()
    return np.array([1.0 - reg_inc_beta(min(1.0, max(0.0, x)), a, b) for x in deltas])


def _bisect_cdf(target, a, b, tol, max_iter):
    lo, hi = 0.0, 1.0
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        val = reg_inc_beta(mid, a, b)
        if abs(val - target) <= tol:
            return mid
        if val < target:
            lo = mid
        else:
            hi = mid
    raise NumericError("bisection did not converge", target=target, bracket=(lo, hi),
                       iterations=max_iter)


def quantize(n_classes: int, m: MetaMoments, tol: float = 1e-9,
             max_iter: int = 200) -> QoSClassTable:
    """Split the fitted distribution into `n_classes` equiprobable classes.

    Boundary omega_n sits at CDF level (n-1)/N and the representative d_n
    at (n-1/2)/N, so each class's mass is halved by its d_n.
    """
    if int(n_classes) != n_classes or n_classes < 1:
        raise ParameterError(f"number of classes must be a positive integer, got {n_classes}")
    if not tol > 0:
        raise ParameterError("bisection tolerance must be positive")
    n = int(n_classes)
    if m.degenerate:
        d = np.full(n, m.m1)
        bounds = np.concatenate([[0.0], np.full(n - 1, m.m1), [1.0]])
        return QoSClassTable(n, d, bounds, degenerate=True, moments=m)
    a, b = m.beta_shape()
    bounds = np.empty(n + 1)
    bounds[0], bounds[-1] = 0.0, 1.0
    for k in range(1, n):
        bounds[k] = _bisect_cdf(k / n, a, b, tol, max_iter)
    d = np.array([_bisect_cdf((k + 0.5) / n, a, b, tol, max_iter) for k in range(n)])
    return QoSClassTable(n, d, bounds, moments=m)
