"""Certified evaluation of the slowly-convergent series behind the envelope.

The weight series sum_k a_k with a_k = 1 / (C k ln^p(k+2)) converges too
slowly for naive truncation, so brackets are built from partial sums plus
integral tail bounds.  For decreasing a,

    integral_{K+1}^inf a(x) dx  <=  sum_{k>K} a_k  <=  a_{K+1} + integral_{K+1}^inf a(x) dx,

and the integral itself is bracketed through the exact antiderivative of
1 / (C (x+2) ln^p(x+2)), which is -1 / (C (p-1) ln^(p-1)(x+2)):

    1/((x+2) ln^p(x+2))  <=  1/(x ln^p(x+2))  <=  (A+2)/A * 1/((x+2) ln^p(x+2))

for x >= A.  Truncation adapts upward until the bracket width meets the
requested relative tolerance.
"""

import math

import numpy as np

from .errors import ConfigError
from .sgdm import ScheduleVariant, a_coeff

_CHUNK = 1 << 20
_MAX_TERMS = 1 << 26


def _tail_integral_bracket(sched: ScheduleVariant, K: int) -> tuple[float, float]:
    """Bracket for sum_{k >= K+1} a_k."""
    p = sched.log_power
    C = sched.a_coefficient_scale
    if p <= 1.0:
        raise ConfigError(["weight series diverges (log power <= 1)"])
    base = 1.0 / (C * (p - 1.0) * math.log(K + 3.0) ** (p - 1.0))
    lo = base
    hi = float(a_coeff(sched, K + 1)) + (K + 3.0) / (K + 1.0) * base
    return lo, hi


def _partial_sum(sched: ScheduleVariant, K: int, transform=None) -> float:
    total = 0.0
    for lo in range(1, K + 1, _CHUNK):
        hi = min(lo + _CHUNK - 1, K)
        ak = a_coeff(sched, np.arange(lo, hi + 1))
        total += float(np.sum(transform(ak) if transform else ak))
    return total


def gamma1(sched: ScheduleVariant, tol: float) -> tuple[float, float]:
    """Certified bracket for gamma1 = sum_k a_k.

    Returns (value, tail_bound) with value <= gamma1 <= value + tail_bound
    and tail_bound <= tol * value.
    """
    if not (0.0 < tol < 1.0):
        raise ValueError("tol must lie in (0, 1)")
    K = 1 << 17
    while True:
        t_lo, t_hi = _tail_integral_bracket(sched, K)
        partial = _partial_sum(sched, K)
        value = partial + t_lo
        tail_bound = t_hi - t_lo
        if tail_bound <= tol * value:
            return value, tail_bound
        if K >= _MAX_TERMS:
            raise ConfigError(
                [f"gamma1 bracket did not reach tolerance {tol} within {K} terms"]
            )
        K *= 2


def gamma2(sched: ScheduleVariant, sigma: float, tol: float) -> tuple[float, float]:
    """Certified bracket for gamma2 = prod_k (1 + sigma^2 a_k).

    Computed as exp(sum ln(1 + sigma^2 a_k)) over a finite prefix; the tail of
    the log-sum is squeezed between sigma^2 T - sigma^4/2 * a_{K+1} T_hi and
    sigma^2 T_hi using x - x^2/2 <= ln(1+x) <= x.
    """
    if not (0.0 < tol < 1.0):
        raise ValueError("tol must lie in (0, 1)")
    if sigma == 0.0:
        return 1.0, 0.0
    s2 = sigma * sigma
    K = 1 << 17
    while True:
        t_lo, t_hi = _tail_integral_bracket(sched, K)
        log_prefix = _partial_sum(sched, K, transform=lambda a: np.log1p(s2 * a))
        correction = 0.5 * s2 * s2 * float(a_coeff(sched, K + 1)) * t_hi
        log_tail_lo = max(s2 * t_lo - correction, 0.0)
        log_tail_hi = s2 * t_hi
        value = math.exp(log_prefix + log_tail_lo)
        upper = math.exp(log_prefix + log_tail_hi)
        if upper - value <= tol * value:
            return value, upper - value
        if K >= _MAX_TERMS:
            raise ConfigError(
                [f"gamma2 bracket did not reach tolerance {tol} within {K} terms"]
            )
        K *= 2


def riemann_zeta(s: float, n_terms: int = 1 << 14) -> float:
    """zeta(s) for s > 1 by partial sum plus Euler-Maclaurin tail correction.

    Accurate to well under 1e-10 relative for s in (1, 60] at the default
    truncation.
    """
    if s <= 1.0:
        raise ValueError("riemann_zeta requires s > 1")
    N = float(n_terms)
    n = np.arange(1, n_terms, dtype=float)
    partial = float(np.sum(n ** (-s)))
    tail = (
        N ** (1.0 - s) / (s - 1.0)
        + 0.5 * N ** (-s)
        + s * N ** (-s - 1.0) / 12.0
        - s * (s + 1.0) * (s + 2.0) * N ** (-s - 3.0) / 720.0
    )
    return partial + tail
