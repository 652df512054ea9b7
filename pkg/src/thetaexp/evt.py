"""Extreme-value statistics for the largest digit.

The scaled maximum L_N * log(1+theta^2) / N converges in law to the Frechet
distribution exp(-1/y).  This module provides the empirical side (ECDFs over
trajectory ensembles), an exact small-N oracle by direct cylinder
enumeration, a convergence-rate probe, and an estimator for the decay of the
digit process's psi-mixing coefficient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import partial
from typing import Iterable, List, Optional, Sequence, Tuple

import mpmath
import numpy as np

from .expansion import ThetaParams
from .measure import MeasureValue, _rounding_bound
from .quadfield import DEFAULT_DPS, QuadRat
from .simulate import SimConfig, Trajectory, ensemble_map, ensemble_sum

ENUMERATION_BUDGET = 10**7


class EmpiricalCDF:
    """Right-continuous empirical distribution of a finite sample."""

    def __init__(self, samples: Iterable[float]):
        self._sorted = np.sort(np.asarray(list(samples), dtype=np.float64))
        if self._sorted.size == 0:
            raise ValueError("empty sample")

    def __call__(self, y: float) -> float:
        return float(np.searchsorted(self._sorted, y, side="right")) / self._sorted.size

    @property
    def n(self) -> int:
        return int(self._sorted.size)

    @property
    def samples(self) -> np.ndarray:
        return self._sorted


def frechet_cdf(y: float) -> float:
    """The limit law exp(-1/y) for y > 0 (0 on the nonpositive axis)."""
    if y <= 0:
        return 0.0
    return math.exp(-1.0 / y)


def scaled_maxima(maxima: Sequence[int], n_digits: int, m: int) -> List[float]:
    scale = math.log1p(1.0 / m) / n_digits
    return [v * scale for v in maxima]


def scaled_max_law(results: Sequence[Trajectory], params: ThetaParams) -> EmpiricalCDF:
    """ECDF of L_N * log(1+theta^2) / N over an ensemble of trajectories."""
    if len(results) < 100:
        raise ValueError("need at least 100 trajectories for a usable ECDF")
    lengths = {len(t.max_series) for t in results}
    if len(lengths) != 1:
        raise ValueError("trajectories have mixed lengths")
    n_digits = lengths.pop()
    maxima = [t.max_series[-1] for t in results]
    return EmpiricalCDF(scaled_maxima(maxima, n_digits, params.m))


# ---------------------------------------------------------------------------
# exact small-case oracle
# ---------------------------------------------------------------------------


def exact_max_law(n_digits: int, w: int, params: ThetaParams) -> MeasureValue:
    """gamma(L_N < w) by direct enumeration of all rank-N cylinders with
    digits in [m, w-1]; exact endpoints, one log per cylinder."""
    m = params.m
    if w < m:
        raise ValueError(f"threshold w={w} below digit floor m={m}")
    if n_digits < 1:
        raise ValueError("n_digits must be >= 1")
    n_words = (w - m) ** n_digits
    if n_words > ENUMERATION_BUDGET:
        raise ValueError(
            f"enumeration of {n_words} cylinders exceeds the budget {ENUMERATION_BUDGET}"
        )
    if n_words == 0:
        with mpmath.workdps(DEFAULT_DPS):
            return MeasureValue(mpmath.mpf(0), mpmath.mpf(0))

    theta = params.theta
    one = QuadRat.rational(1, m)

    with mpmath.workdps(DEFAULT_DPS):
        total = mpmath.mpf(0)

        def walk(level, p_prev, q_prev, p_cur, q_cur):
            nonlocal total
            if level == n_digits:
                end_a = p_cur / q_cur
                end_b = (p_cur + theta * p_prev) / (q_cur + theta * q_prev)
                ratio = (one + theta * end_a) / (one + theta * end_b)
                total += abs(mpmath.log(ratio.to_mpf()))
                return
            for digit in range(m, w):
                walk(
                    level + 1,
                    p_cur,
                    q_cur,
                    theta * digit * p_cur + p_prev,
                    theta * digit * q_cur + q_prev,
                )

        walk(0, one, QuadRat.rational(0, m), QuadRat.rational(0, m), one)
        value = total / params.log_norm
        return MeasureValue(value, _rounding_bound(value, ops=4 * max(1, n_words)))


# ---------------------------------------------------------------------------
# convergence-rate probe
# ---------------------------------------------------------------------------

_SEED_MIX = 0x9E3779B97F4A7C15  # splitmix64 increment; decorrelates derived seeds


def _derived_seed(seed: int, salt: int) -> int:
    return (seed + _SEED_MIX * (salt + 1)) % (1 << 64)


def _max_digit(digits: List[int]) -> int:
    return max(digits)


@dataclass(frozen=True)
class RateProbeRow:
    n_digits: int
    empirical: float
    limit: float
    deviation: float
    std_err: float


def rate_probe(
    params: ThetaParams,
    y: float,
    n_grid: Sequence[int],
    n_trajectories: int,
    seed: int,
    bits_per_digit: int = 32,
    workers: Optional[int] = None,
) -> List[RateProbeRow]:
    """Deviation of the scaled-max ECDF from the limit law along a grid of N.

    Reports per-N deviations with binomial standard errors; no numeric decay
    rate is asserted, the qualitative check is left to the caller.
    """
    if list(n_grid) != sorted(set(int(n) for n in n_grid)):
        raise ValueError("n_grid must be strictly increasing")
    if n_trajectories < 1000:
        raise ValueError("need at least 1000 trajectories per grid point")
    if y <= 0:
        raise ValueError("y must be positive")
    rows = []
    limit = frechet_cdf(y)
    for i, n_digits in enumerate(n_grid):
        config = SimConfig(
            m=params.m,
            n_digits=int(n_digits),
            n_trajectories=n_trajectories,
            seed=_derived_seed(seed, i),
            bits_per_digit=bits_per_digit,
        )
        maxima = ensemble_map(config, _max_digit, workers=workers)
        ecdf = EmpiricalCDF(scaled_maxima(maxima, int(n_digits), params.m))
        emp = ecdf(y)
        rows.append(
            RateProbeRow(
                n_digits=int(n_digits),
                empirical=emp,
                limit=limit,
                deviation=abs(emp - limit),
                std_err=math.sqrt(max(emp * (1 - emp), 1.0 / n_trajectories) / n_trajectories),
            )
        )
    return rows


# ---------------------------------------------------------------------------
# psi-mixing probe
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DigitEvent:
    """A single-digit condition: equality or tail, at a fixed digit slot."""

    op: str  # "eq" | "ge"
    value: int

    def __post_init__(self):
        if self.op not in ("eq", "ge"):
            raise ValueError(f"unknown event op {self.op!r}")

    def hit(self, digit: int) -> bool:
        return digit == self.value if self.op == "eq" else digit >= self.value

    def describe(self, slot: str) -> str:
        cmp = "=" if self.op == "eq" else ">="
        return f"{slot} {cmp} {self.value}"


def digit_eq(value: int) -> DigitEvent:
    return DigitEvent("eq", value)


def digit_ge(value: int) -> DigitEvent:
    return DigitEvent("ge", value)


@dataclass(frozen=True)
class MixingEstimate:
    """|joint/(marginal product) - 1| at one gap, with a rough standard error."""

    gap: int
    psi_hat: float
    std_err: float
    event_a: str
    event_b: str


def _mixing_indicators(digits: List[int], gaps, event_a, event_b):
    a_hit = 1 if event_a.hit(digits[0]) else 0
    out = [a_hit]
    for gap in gaps:
        b_hit = 1 if event_b.hit(digits[gap]) else 0
        out.append(b_hit)
        out.append(b_hit & a_hit)
    return tuple(out)


def mixing_probe(
    n_trajectories: int,
    gaps: Sequence[int],
    event_a: DigitEvent,
    event_b: DigitEvent,
    params: ThetaParams,
    seed: int,
    bits_per_digit: int = 32,
    workers: Optional[int] = None,
) -> List[MixingEstimate]:
    """Estimate the mixing coefficient between {a_1 in A} and {a_{1+n} in B}
    for each gap n from one stationary ensemble.

    The ratio form |joint/(p_A p_B) - 1| matches the multiplicative mixing
    bound; a zero marginal is an error, not a silent zero.
    """
    gaps = [int(g) for g in gaps]
    if not gaps or any(g < 1 for g in gaps):
        raise ValueError("gaps must be positive integers")
    if n_trajectories < 100:
        raise ValueError("need at least 100 trajectories")
    config = SimConfig(
        m=params.m,
        n_digits=1 + max(gaps),
        n_trajectories=n_trajectories,
        seed=seed,
        bits_per_digit=bits_per_digit,
    )
    reducer = partial(_mixing_indicators, gaps=gaps, event_a=event_a, event_b=event_b)
    totals = ensemble_sum(config, reducer, workers=workers)
    count_a = totals[0]
    if count_a == 0:
        raise ValueError(f"degenerate event A ({event_a.describe('a_1')}): never hit")
    out = []
    M = n_trajectories
    for i, gap in enumerate(gaps):
        count_b = totals[1 + 2 * i]
        count_j = totals[2 + 2 * i]
        if count_b == 0:
            raise ValueError(
                f"degenerate event B ({event_b.describe(f'a_{{1+{gap}}}')}): never hit"
            )
        ratio = count_j * M / (count_a * count_b)
        psi_hat = abs(ratio - 1.0)
        # delta-method scale; joint-count noise dominates for rare joints
        if count_j > 0:
            std_err = ratio * math.sqrt(1.0 / count_j + 1.0 / count_a + 1.0 / count_b)
        else:
            std_err = M / (count_a * count_b)
        out.append(
            MixingEstimate(
                gap=gap,
                psi_hat=psi_hat,
                std_err=std_err,
                event_a=event_a.describe("a_1"),
                event_b=event_b.describe(f"a_{{1+{gap}}}"),
            )
        )
    return out


def fit_log_slope(estimates: Sequence[MixingEstimate]) -> float:
    """Least-squares slope of log(psi_hat) against the gap (zeros dropped)."""
    xs = [e.gap for e in estimates if e.psi_hat > 0]
    ys = [math.log(e.psi_hat) for e in estimates if e.psi_hat > 0]
    if len(xs) < 2:
        return 0.0
    slope, _ = np.polyfit(np.array(xs, dtype=float), np.array(ys, dtype=float), 1)
    return float(slope)


def envelope_constant(estimates: Sequence[MixingEstimate], q_theta: float) -> float:
    """Smallest K with psi_hat(n) <= K * q_theta^n across the measured gaps."""
    return max(e.psi_hat / q_theta**e.gap for e in estimates)
