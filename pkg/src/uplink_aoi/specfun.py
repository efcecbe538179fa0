"""Special functions and adaptive quadrature.

Everything here is scalar-in/scalar-out unless stated otherwise;
`lower_inc_gamma` and the quadrature routines are vectorised because
the double integral for the success-probability moments evaluates
them on whole node panels at once.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NumericError, ParameterError

_EPS = 1e-16
_FPMIN = 1e-300
_MAXIT = 10_000


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances and limits for the adaptive integrator.

    `semi_infinite_cutoff` is the largest abscissa reached on an improper
    integral; the default is far enough out that, after the
    ``t = u / (1 - u)`` map, it is never the binding limit.
    """

    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_subdivisions: int = 500
    semi_infinite_cutoff: float = 1e15

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ParameterError("quadrature tolerances must be strictly positive")
        if int(self.max_subdivisions) != self.max_subdivisions or self.max_subdivisions < 1:
            raise ParameterError("max_subdivisions must be a positive integer")
        if not self.semi_infinite_cutoff > 0:
            raise ParameterError("semi_infinite_cutoff must be positive")


# --------------------------------------------------------------------------
# regularised incomplete beta


def _betacf(a: float, b: float, x: float) -> float:
    # modified Lentz evaluation of the continued fraction for I_x(a, b)
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _MAXIT + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise NumericError("incomplete beta continued fraction did not converge",
                       a=a, b=b, x=x, iterations=_MAXIT)


def reg_inc_beta(x: float, a: float, b: float) -> float:
    """Regularised incomplete beta function I_x(a, b).

    Parameters
    ----------
    x : float
        Evaluation point in [0, 1].
    a, b : float
        Shape parameters, both > 0.

    Returns
    -------
    float
        Value in [0, 1], with I_0 = 0 and I_1 = 1.
    """
    x, a, b = float(x), float(a), float(b)
    if not (0.0 <= x <= 1.0) or not (a > 0 and b > 0):
        raise ParameterError(f"reg_inc_beta needs x in [0,1], a>0, b>0; got x={x}, a={a}, b={b}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(log_front)
    # the continued fraction converges fast on the side of the mode nearer x
    if x < (a + 1.0) / (a + b + 2.0):
        val = front * _betacf(a, b, x) / a
    else:
        val = 1.0 - front * _betacf(b, a, 1.0 - x) / b
    return min(1.0, max(0.0, val))


# --------------------------------------------------------------------------
# lower incomplete gamma


def _gamma_series(a: float, y: np.ndarray) -> np.ndarray:
    # gamma(a, y) = e^-y y^a sum_n y^n / (a (a+1) ... (a+n))
    term = np.full_like(y, 1.0 / a)
    total = term.copy()
    ap = a
    active = np.ones(y.shape, dtype=bool)
    for _ in range(_MAXIT):
        ap += 1.0
        term = np.where(active, term * y / ap, 0.0)
        total += term
        active &= np.abs(term) >= np.abs(total) * _EPS
        if not active.any():
            break
    else:
        raise NumericError("incomplete gamma series did not converge", a=a)
    return total * np.exp(-y + a * np.log(y))


def _gamma_upper_cf(a: float, y: np.ndarray) -> np.ndarray:
    # Lentz continued fraction for Gamma(a, y); valid for y > a + 1
    bq = y + 1.0 - a
    c = np.full_like(y, 1.0 / _FPMIN)
    d = 1.0 / bq
    h = d.copy()
    active = np.ones(y.shape, dtype=bool)
    for i in range(1, _MAXIT + 1):
        an = -i * (i - a)
        bq = bq + 2.0
        d = an * d + bq
        d = np.where(np.abs(d) < _FPMIN, _FPMIN, d)
        c = bq + an / c
        c = np.where(np.abs(c) < _FPMIN, _FPMIN, c)
        d = 1.0 / d
        delta = np.where(active, d * c, 1.0)
        h *= delta
        active &= np.abs(delta - 1.0) >= _EPS
        if not active.any():
            break
    else:
        raise NumericError("incomplete gamma continued fraction did not converge", a=a)
    return np.exp(-y + a * np.log(y)) * h


def lower_inc_gamma(a: float, y):
    """Lower incomplete gamma function, not regularised.

    ``gamma(a, y) = integral_0^y t**(a-1) exp(-t) dt``.  `y` may be an
    array (including ``inf``, which returns Gamma(a)); `a` is a scalar.
    """
    a = float(a)
    if not a > 0:
        raise ParameterError(f"lower_inc_gamma needs a > 0, got {a}")
    arr = np.asarray(y, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0):
        raise ParameterError("lower_inc_gamma needs y >= 0")
    full = math.gamma(a)
    out = np.empty_like(arr)
    flat_y = arr.reshape(-1)
    flat = out.reshape(-1)
    zero = flat_y == 0.0
    # exp(-y) y^a underflows: the upper tail is exactly 0 in double precision
    with np.errstate(divide="ignore", invalid="ignore"):
        inf = np.isinf(flat_y) | ((flat_y > a + 1.0) & (-flat_y + a * np.log(flat_y) < -750.0))
    use_series = (~zero) & (~inf) & (flat_y < a + 1.0)
    use_cf = (~zero) & (~inf) & (flat_y >= a + 1.0)
    flat[zero] = 0.0
    flat[inf] = full
    if use_series.any():
        flat[use_series] = _gamma_series(a, flat_y[use_series])
    if use_cf.any():
        flat[use_cf] = full - _gamma_upper_cf(a, flat_y[use_cf])
    np.clip(flat, 0.0, full, out=flat)
    if out.ndim == 0:
        return float(out)
    return out


# --------------------------------------------------------------------------
# Gauss hypergeometric function on the negative real axis


def _hyp2f1_series(a, b, c, z, max_terms):
    term = 1.0
    total = 1.0
    for k in range(max_terms):
        term *= (a + k) * (b + k) / ((c + k) * (k + 1.0)) * z
        total += term
        if term == 0.0 or abs(term) < _EPS * abs(total):
            return total
    raise NumericError("2F1 series did not converge", a=a, b=b, c=c, z=z,
                       partial_sum=total, last_term=term, terms=max_terms)


def gauss_2f1(a: float, b: float, c: float, z: float, method: str = "auto",
              max_terms: int = 200_000) -> float:
    """Gauss hypergeometric function 2F1(a, b; c; z) for real z <= 0.

    ``method="series"`` sums the defining power series (needs z > -1);
    ``method="pfaff"`` applies ``2F1(a,b;c;z) = (1-z)**-a 2F1(a,c-b;c;z/(z-1))``
    first, which maps any z <= 0 into [0, 1).  ``"auto"`` uses the series
    on (-0.5, 0] and the Pfaff form below that.
    """
    a, b, c, z = float(a), float(b), float(c), float(z)
    if c <= 0 and c == math.floor(c):
        raise ParameterError(f"2F1 undefined for c a non-positive integer (c={c})")
    if z > 0:
        raise ParameterError(f"gauss_2f1 is restricted to z <= 0, got {z}")
    if method == "auto":
        method = "series" if z > -0.5 else "pfaff"
    if method == "series":
        if z <= -1.0:
            raise ParameterError("power series requires |z| < 1; use the Pfaff form")
        return _hyp2f1_series(a, b, c, z, max_terms)
    if method == "pfaff":
        w = z / (z - 1.0)
        return (1.0 - z) ** (-a) * _hyp2f1_series(a, c - b, c, w, max_terms)
    raise ParameterError(f"unknown 2F1 method {method!r}")


# --------------------------------------------------------------------------
# adaptive Gauss-Kronrod (7/15) quadrature

_XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0,
])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
])
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KRONROD = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GAUSS = np.zeros(15)
_GAUSS[1:7:2] = _WG[:3]
_GAUSS[7] = _WG[3]
_GAUSS[9:15:2] = _WG[2::-1]


def _gk15(f, lo, hi):
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    fx = np.asarray(f(mid + half * _NODES), dtype=float)
    if fx.ndim == 0 or fx.shape[0] != 15:
        fx = np.broadcast_to(fx, (15,) + fx.shape[1:] if fx.ndim else (15,))
    if not np.all(np.isfinite(fx)):
        raise NumericError("integrand returned a non-finite value", interval=(lo, hi))
    k = half * np.tensordot(_KRONROD, fx, axes=(0, 0))
    g = half * np.tensordot(_GAUSS, fx, axes=(0, 0))
    err = float(np.max(np.abs(k - g))) if np.ndim(k) else abs(float(k - g))
    return k, err


def integrate(f: Callable[[np.ndarray], np.ndarray], lo: float, hi: float,
              spec: QuadratureSpec | None = None, initial_panels: int = 1):
    """Adaptive Gauss-Kronrod integral of `f` over a finite interval.

    `f` is called with a 1-d array of 15 abscissae and returns values of
    shape ``(15,)``, or ``(15, k)`` for k integrands sharing one adaptive
    partition (the error test then applies to the worst component).
    Returns ``(value, error_estimate)``.  Raises `NumericError`, with the
    best estimate attached, if the tolerance is not met within
    ``spec.max_subdivisions`` panels.
    """
    spec = spec or QuadratureSpec()
    edges = np.linspace(lo, hi, initial_panels + 1)
    heap = []
    total = 0.0
    err = 0.0
    tie = 0
    for a, b in zip(edges[:-1], edges[1:]):
        val, e = _gk15(f, a, b)
        heapq.heappush(heap, (-e, tie, a, b, val))
        tie += 1
        total = total + val
        err += e

    def converged():
        scale = float(np.min(np.abs(total))) if np.ndim(total) else abs(total)
        return err <= max(spec.abs_tol, spec.rel_tol * scale)

    while not converged():
        if len(heap) >= spec.max_subdivisions:
            raise NumericError("quadrature tolerance not reached", best_estimate=total,
                               error_estimate=err, subdivisions=len(heap))
        neg_e, _, a, b, val = heapq.heappop(heap)
        m = 0.5 * (a + b)
        if not (a < m < b):
            raise NumericError("quadrature interval underflow", best_estimate=total,
                               error_estimate=err, interval=(a, b))
        v1, e1 = _gk15(f, a, m)
        v2, e2 = _gk15(f, m, b)
        heapq.heappush(heap, (-e1, tie, a, m, v1))
        heapq.heappush(heap, (-e2, tie + 1, m, b, v2))
        tie += 2
        total = total + v1 + v2 - val
        err += e1 + e2 + neg_e
    # re-sum to shed the rounding drift of the running updates
    vals = [item[4] for item in heap]
    total = np.sum(vals, axis=0) if np.ndim(vals[0]) else math.fsum(vals)
    err = math.fsum(-item[0] for item in heap)
    return total, err


def integrate_semi_infinite(f: Callable[[np.ndarray], np.ndarray], lower: float = 0.0,
                            spec: QuadratureSpec | None = None):
    """Integral of `f` over (lower, inf) via ``t = lower + u / (1 - u)``.

    Same calling convention and return value as `integrate`.
    """
    spec = spec or QuadratureSpec()
    lower = float(lower)
    if not lower >= 0:
        raise ParameterError("lower limit must be >= 0")
    span = spec.semi_infinite_cutoff - lower
    if span <= 0:
        return 0.0, 0.0
    u_max = span / (1.0 + span)

    def mapped(u):
        one_minus = 1.0 - u
        vals = np.asarray(f(lower + u / one_minus), dtype=float)
        jac = one_minus * one_minus
        return vals / jac.reshape(jac.shape + (1,) * (vals.ndim - 1))

    return integrate(mapped, 0.0, u_max, spec, initial_panels=4)
