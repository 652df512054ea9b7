"""Invariant measure, normalized length, digit tail law, mixing-rate constant.

The invariant density on [0, theta] is theta / ((1 + theta*x) * log(1+theta^2)).
Cylinder lengths are exact rationals; everything involving a logarithm is
evaluated with mpmath at generous precision and wrapped in a MeasureValue
carrying a rounding bound.  The mixing-rate series is summed numerically with
a certified integral-comparison tail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

import mpmath
import numpy as np

from .expansion import Cylinder, ThetaParams, cylinder
from .quadfield import DEFAULT_DPS, QuadRat


@dataclass(frozen=True)
class MeasureValue:
    """A high-precision probability together with a rounding bound."""

    value: mpmath.mpf
    error_bound: mpmath.mpf

    def __float__(self) -> float:
        return float(self.value)

    def __repr__(self):
        return f"MeasureValue({self.value} ± {self.error_bound})"


@dataclass(frozen=True)
class MixRate:
    """Certified upper box for the digit-process mixing rate constant.

    The true constant lies in [q_theta, q_theta + tail_bound]; the invariant
    q_theta + tail_bound < 1 is what downstream decay checks rely on.
    """

    m: int
    q_theta: float
    truncation_index: int
    tail_bound: float

    def __post_init__(self):
        if self.q_theta <= 0 or self.tail_bound <= 0:
            raise ValueError("partial sum and tail bound must be positive")
        if self.q_theta + self.tail_bound >= 1:
            raise RuntimeError(
                f"failed to certify the mixing rate below 1 for m={self.m}"
            )


def _rounding_bound(value: mpmath.mpf, ops: int = 8) -> mpmath.mpf:
    # `ops` chained mpf operations, each within 1 ulp
    return abs(value) * mpmath.mpf(2) ** (ops - mpmath.mp.prec)


def _check_domain(x: QuadRat, params: ThetaParams) -> None:
    if x.sign() < 0 or x > params.theta:
        raise ValueError(f"point {x} outside [0, theta]")


def gamma_density(x: QuadRat, params: ThetaParams) -> MeasureValue:
    """Invariant density at x: theta / ((1 + theta*x) * log(1 + theta^2))."""
    _check_domain(x, params)
    one_plus = QuadRat.rational(1, params.m) + params.theta * x
    with mpmath.workdps(DEFAULT_DPS):
        theta_f = params.theta.to_mpf()
        value = theta_f / (one_plus.to_mpf() * params.log_norm)
        return MeasureValue(value, _rounding_bound(value))


def gamma_cdf(x: QuadRat, params: ThetaParams) -> MeasureValue:
    """Invariant distribution function: log(1 + theta*x) / log(1 + theta^2)."""
    _check_domain(x, params)
    one_plus = QuadRat.rational(1, params.m) + params.theta * x
    with mpmath.workdps(DEFAULT_DPS):
        value = mpmath.log(one_plus.to_mpf()) / params.log_norm
        return MeasureValue(value, _rounding_bound(value))


def gamma_quantile(u, params: ThetaParams) -> mpmath.mpf:
    """Inverse of gamma_cdf: ((1 + theta^2)^u - 1) / theta."""
    with mpmath.workdps(DEFAULT_DPS):
        uf = mpmath.mpf(u) if not isinstance(u, Fraction) else mpmath.mpf(u.numerator) / u.denominator
        if uf < 0 or uf > 1:
            raise ValueError(f"quantile argument must be in [0, 1], got {u}")
        base = 1 + mpmath.mpf(1) / params.m
        return (base ** uf - 1) * mpmath.sqrt(params.m)


def tail_p(w: int, params: ThetaParams) -> MeasureValue:
    """Stationary probability that a digit is >= w: log(1+1/w)/log(1+1/m)."""
    if w < params.m:
        raise ValueError(f"tail threshold {w} below the digit floor m={params.m}")
    with mpmath.workdps(DEFAULT_DPS):
        value = mpmath.log1p(mpmath.mpf(1) / w) / params.log_norm
        return MeasureValue(value, _rounding_bound(value))


def lambda_cyl(c: Cylinder) -> Fraction:
    """Exact normalized-length measure of a cylinder: 1/(q_n (q_n + theta q_{n-1})).

    The product is always rational even though q_n itself need not be.
    """
    denom = c.q_n * (c.q_n + QuadRat.theta(c.q_n.m) * c.q_prev)
    return 1 / denom.as_fraction()


def gamma_cyl(c: Cylinder, params: ThetaParams) -> MeasureValue:
    """Invariant measure of a cylinder, via one log of the exact endpoint ratio."""
    one = QuadRat.rational(1, params.m)
    ratio = (one + params.theta * c.hi) / (one + params.theta * c.lo)
    with mpmath.workdps(DEFAULT_DPS):
        value = mpmath.log(ratio.to_mpf()) / params.log_norm
        return MeasureValue(abs(value), _rounding_bound(value))


def child_ratio(word, k: int, params: ThetaParams) -> Fraction:
    """Exact ratio of a child cylinder's length measure to its parent's."""
    if k < params.m:
        raise ValueError(f"child digit {k} below the digit floor m={params.m}")
    parent = lambda_cyl(cylinder(word, params))
    child = lambda_cyl(cylinder(tuple(word) + (k,), params))
    return child / parent


def mixing_rate(m: int, tol: float = 1e-9) -> MixRate:
    """Partial sum of the mixing-rate series with a certified tail bound.

    Series: m * sum_{i>=m} ( m/(i^3 (i+1)) + (i+1-m)/(i (i+1)^3) ).
    For i > I the summand is below m*m/i^4 + m/i^3, so integral comparison
    certifies tail(I) <= m^2/(3 I^3) + m/(2 I^2); I is chosen to push that
    below tol.
    """
    if m < 1:
        raise ValueError("m must be a positive integer")
    if tol <= 0:
        raise ValueError("tol must be positive")

    def tail(index: int) -> float:
        return m * m / (3 * index**3) + m / (2 * index**2)

    upper = max(m, math.isqrt(int(m / (2 * tol))) + 1)
    while tail(upper) > tol:
        upper *= 2

    total = 0.0
    for start in range(m, upper + 1, 10**7):
        i = np.arange(start, min(upper, start + 10**7 - 1) + 1, dtype=np.float64)
        terms = m * (m / (i**3 * (i + 1)) + (i + 1 - m) / (i * (i + 1) ** 3))
        total += float(np.sum(terms))
    # cover float summation rounding on top of the analytic truncation bound
    bound = tail(upper) + 1e-12 * max(1.0, total)
    return MixRate(m=m, q_theta=total, truncation_index=upper, tail_bound=bound)
