"""Seeded Monte Carlo over exact theta-expansion trajectories.

A trajectory is the digit sequence of a stationary starting point drawn by
exact rejection from the invariant law on a dyadic grid.  All randomness
comes from counter-based Philox streams keyed by (seed XOR trajectory
index), so any subset of trajectories can be regenerated independently and
parallel runs are order-independent by construction.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .expansion import (
    DigitSeq,
    EarlyTermination,
    ThetaParams,
    expand,
    expand_ratio,
)
from .quadfield import QuadRat

_MASK64 = (1 << 64) - 1

#: proposals allowed before the rejection sampler gives up (RNG failure guard)
MAX_PROPOSALS = 10_000

#: resampling attempts allowed when starts keep terminating early
MAX_RESAMPLES = 64


class RandomBits:
    """Deterministic big-integer bit source over one Philox stream.

    The 128-bit Philox key is (seed << 64) | stream: streams are independent
    of execution order, and distinct seeds can never collide with each other's
    stream ranges (an XOR-style derivation would permute the same key set).
    """

    def __init__(self, seed: int, stream: int = 0):
        key = ((int(seed) & _MASK64) << 64) | (int(stream) & _MASK64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def getbits(self, nbits: int) -> int:
        if nbits < 1:
            raise ValueError("nbits must be >= 1")
        nbytes = (nbits + 7) // 8
        raw = int.from_bytes(self._gen.bytes(nbytes), "big")
        return raw >> (8 * nbytes - nbits)


@dataclass(frozen=True)
class SimConfig:
    """One reproducible Monte Carlo run."""

    m: int
    n_digits: int
    n_trajectories: int
    seed: int
    bits_per_digit: int = 32
    threshold_preset: Optional[str] = None

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be a positive integer")
        if self.n_digits < 1 or self.n_trajectories < 1:
            raise ValueError("n_digits and n_trajectories must be >= 1")
        if self.bits_per_digit < 8:
            raise ValueError("bits_per_digit must be >= 8")
        if not 0 <= self.seed <= _MASK64:
            raise ValueError("seed must fit in 64 bits")


@dataclass(frozen=True)
class Trajectory:
    """Digits of one run plus the running maxima and the entropy spent."""

    digits: "DigitSeq"
    max_series: Tuple[int, ...]
    source_bits: int

    def __post_init__(self):
        assert len(self.digits.digits) == len(self.max_series)

    @property
    def values(self) -> Tuple[int, ...]:
        return self.digits.digits


class StationarySampler:
    """Exact rejection sampler for the invariant law on a dyadic grid.

    Proposes x = (n/2^bits)*theta uniformly and accepts when an independent
    uniform dyadic u satisfies u*(1 + theta*x) < 1; the comparison reduces to
    integers, so acceptance is exact.  Tracks proposal counts for the
    acceptance-rate diagnostic (expected rate: m*log(1+1/m)).
    """

    def __init__(self, rng: RandomBits, params: ThetaParams, bits: int):
        if bits < 64:
            raise ValueError("need at least 64 bits of proposal resolution")
        self.rng = rng
        self.params = params
        self.bits = bits
        self.proposals = 0
        self.accepted = 0

    def sample_ratio(self) -> Tuple[int, int]:
        """One accepted start as an integer pair (num, den), x = (num/den)*theta."""
        m = self.params.m
        bits = self.bits
        den = 1 << bits
        rhs = m << (2 * bits)  # m * 2^(2 bits)
        for _ in range(MAX_PROPOSALS):
            num = self.rng.getbits(bits)
            accept_u = self.rng.getbits(bits)
            self.proposals += 1
            if num == 0:
                continue
            # u*(1 + theta*x) < 1  <=>  accept_u * (m*2^bits + num) < m*2^(2 bits)
            if accept_u * ((m << bits) + num) < rhs:
                self.accepted += 1
                return num, den
        raise RuntimeError(
            f"rejection sampler made no progress in {MAX_PROPOSALS} proposals"
        )

    def sample(self) -> QuadRat:
        num, den = self.sample_ratio()
        return QuadRat(0, Fraction(num, den), self.params.m)

    def sample_uniform(self) -> QuadRat:
        """Uniform (normalized Lebesgue) start; exploratory, no rejection."""
        num = 0
        while num == 0:
            num = self.rng.getbits(self.bits)
        return QuadRat(0, Fraction(num, 1 << self.bits), self.params.m)


def sample_stationary(rng: RandomBits, params: ThetaParams, bits: int) -> QuadRat:
    """One draw from the discretized invariant law (see StationarySampler)."""
    return StationarySampler(rng, params, bits).sample()


def simulate_trajectory(
    x0: QuadRat,
    params: ThetaParams,
    n_digits: int,
    source_bits: Optional[int] = None,
) -> Trajectory:
    """Exactly the first n_digits digits of x0, with running maxima.

    Raises EarlyTermination when the expansion of x0 is shorter than
    n_digits; the caller is expected to resample with more entropy.
    """
    seq = expand(x0, params, n_digits)
    if len(seq.digits) < n_digits:
        raise EarlyTermination(len(seq.digits), n_digits)
    if source_bits is None:
        rho = x0 * params.theta.inverse()
        if rho.is_rational():
            source_bits = rho.as_fraction().denominator.bit_length() - 1
        else:
            source_bits = max(
                x0.u.denominator.bit_length(), x0.v.denominator.bit_length()
            )
    maxima = []
    running = 0
    for a in seq.digits:
        if a > running:
            running = a
        maxima.append(running)
    return Trajectory(seq, tuple(maxima), source_bits)


def trajectory_digits(config: SimConfig, index: int) -> List[int]:
    """Digit list of trajectory ``index`` under ``config`` (stationary start).

    Resamples on early termination, which with the default entropy budget is
    a practically-never event; the retry count is capped so a systematically
    terminating configuration fails loudly.
    """
    params = ThetaParams(config.m)
    rng = RandomBits(config.seed, index)
    budget = max(64, config.n_digits * config.bits_per_digit)
    sampler = StationarySampler(rng, params, budget)
    for _ in range(MAX_RESAMPLES):
        num, den = sampler.sample_ratio()
        digits, terminated = expand_ratio(num, den, config.m, config.n_digits)
        if len(digits) == config.n_digits:
            return digits
    raise RuntimeError(
        f"trajectory {index}: {MAX_RESAMPLES} starts in a row terminated early; "
        "increase bits_per_digit"
    )


# ---------------------------------------------------------------------------
# ensemble engine
# ---------------------------------------------------------------------------

_WORKER_PAYLOAD = None


def _init_worker(payload):
    global _WORKER_PAYLOAD
    _WORKER_PAYLOAD = payload


def _run_span(span: Tuple[int, int]):
    config, reducer = _WORKER_PAYLOAD
    lo, hi = span
    return [reducer(trajectory_digits(config, index)) for index in range(lo, hi)]


def _sum_span(span: Tuple[int, int]):
    config, reducer = _WORKER_PAYLOAD
    lo, hi = span
    totals = None
    for index in range(lo, hi):
        values = reducer(trajectory_digits(config, index))
        if totals is None:
            totals = list(values)
        else:
            for i, v in enumerate(values):
                totals[i] += v
    return tuple(totals)


def resolve_workers(workers: Optional[int] = None) -> int:
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("THETAEXP_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def ensemble_map(
    config: SimConfig,
    reducer: Callable[[List[int]], object],
    workers: Optional[int] = None,
    span: Optional[int] = None,
) -> list:
    """Apply ``reducer`` to every trajectory's digit list, in index order.

    The result is independent of the worker count: trajectory i is a pure
    function of (config, i) and results are gathered sorted by index.
    ``reducer`` must be picklable (a top-level function or a partial of one).
    """
    total = config.n_trajectories
    nworkers = min(resolve_workers(workers), total)
    if span is None:
        span = 1 if config.n_digits >= 100_000 else max(1, total // (nworkers * 8) or 1)
    spans = [(lo, min(lo + span, total)) for lo in range(0, total, span)]
    if nworkers == 1:
        _init_worker((config, reducer))
        try:
            out: list = []
            for sp in spans:
                out.extend(_run_span(sp))
            return out
        finally:
            _init_worker(None)
    import multiprocessing as mp

    ctx = mp.get_context("fork")
    with ctx.Pool(
        processes=nworkers, initializer=_init_worker, initargs=((config, reducer),)
    ) as pool:
        out = []
        for chunk in pool.imap(_run_span, spans):
            out.extend(chunk)
        return out


def ensemble_sum(
    config: SimConfig,
    reducer: Callable[[List[int]], Sequence[int]],
    workers: Optional[int] = None,
    span: Optional[int] = None,
) -> Tuple[int, ...]:
    """Elementwise integer sum of ``reducer`` over all trajectories.

    Integer addition is associative, so the result does not depend on how
    trajectories are batched across workers.  Meant for counting reducers.
    """
    total = config.n_trajectories
    nworkers = min(resolve_workers(workers), total)
    if span is None:
        span = 1 if config.n_digits >= 100_000 else max(1, total // (nworkers * 8) or 1)
    spans = [(lo, min(lo + span, total)) for lo in range(0, total, span)]

    def _fold(parts) -> Tuple[int, ...]:
        totals = None
        for part in parts:
            if totals is None:
                totals = list(part)
            else:
                for i, v in enumerate(part):
                    totals[i] += v
        return tuple(totals)

    if nworkers == 1:
        _init_worker((config, reducer))
        try:
            return _fold(_sum_span(sp) for sp in spans)
        finally:
            _init_worker(None)
    import multiprocessing as mp

    ctx = mp.get_context("fork")
    with ctx.Pool(
        processes=nworkers, initializer=_init_worker, initargs=((config, reducer),)
    ) as pool:
        return _fold(pool.imap(_sum_span, spans))


# ---------------------------------------------------------------------------
# thresholds and counting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ThresholdFn:
    """A digit-growth threshold n -> phi(n) plus its series behaviour.

    ``series`` records whether sum 1/phi(n) diverges ("divergent"),
    converges ("convergent") or is not classified ("unknown"); the
    recurrence-vs-stabilization verdicts key off it.
    """

    name: str
    fn: Callable[[int], float]
    series: str = "unknown"

    def __call__(self, n: int) -> float:
        return self.fn(n)


def threshold_nlogn() -> ThresholdFn:
    return ThresholdFn("nlogn", lambda n: n * math.log(n) if n > 1 else 0.0, "divergent")


def threshold_nlogn_power(eps: float) -> ThresholdFn:
    if eps <= 0:
        raise ValueError("eps must be positive")
    return ThresholdFn(
        f"nlogn-power:{eps:g}",
        lambda n: n * math.log(n) ** (1.0 + eps) if n > 1 else 0.0,
        "convergent",
    )


def threshold_linear(c: float) -> ThresholdFn:
    if c <= 0:
        raise ValueError("c must be positive")
    return ThresholdFn(f"linear:{c:g}", lambda n: c * n, "divergent")


def threshold_table(values: Sequence[float]) -> ThresholdFn:
    vals = [float(v) for v in values]
    if any(v <= 0 for v in vals):
        raise ValueError("threshold table values must be positive")

    def fn(n: int) -> float:
        return vals[min(n, len(vals)) - 1]

    return ThresholdFn("custom", fn, "unknown")


def make_threshold(spec: str) -> ThresholdFn:
    """Parse "nlogn", "nlogn-power:EPS" or "linear:C"."""
    if spec == "nlogn":
        return threshold_nlogn()
    if spec.startswith("nlogn-power:"):
        return threshold_nlogn_power(float(spec.split(":", 1)[1]))
    if spec.startswith("linear:"):
        return threshold_linear(float(spec.split(":", 1)[1]))
    raise ValueError(f"unknown threshold preset {spec!r}")


def exceedance_bounds(phi: ThresholdFn, n_max: int, m: int) -> List[Optional[int]]:
    """Integer bounds t(n) = max(m, floor(phi(n)) + 1): a digit exceeds the
    threshold iff a_n >= t(n).  Values of phi below the digit floor clamp to m
    (every digit counts); an infinite phi(n) gives None (never exceeded)."""
    out: List[Optional[int]] = []
    for n in range(1, n_max + 1):
        value = phi(n)
        out.append(None if math.isinf(value) else max(m, math.floor(value) + 1))
    return out


@dataclass(frozen=True)
class ExceedanceCount:
    """Observed exceedance count next to its stationary-law expectation."""

    count: int
    expected: float
    n_digits: int

    def __post_init__(self):
        assert 0 <= self.count <= self.n_digits


def expected_exceedances(bounds: Sequence[Optional[int]], m: int) -> float:
    log_norm = math.log1p(1.0 / m)
    return math.fsum(
        math.log1p(1.0 / t) / log_norm for t in bounds if t is not None
    )


def count_exceedances(trajectory: Trajectory, phi: ThresholdFn) -> ExceedanceCount:
    """#{n <= N : a_n > phi(n)} plus the matching sum of tail probabilities."""
    m = trajectory.digits.params.m
    digits = trajectory.values
    bounds = exceedance_bounds(phi, len(digits), m)
    count = sum(1 for a, t in zip(digits, bounds) if t is not None and a >= t)
    return ExceedanceCount(count, expected_exceedances(bounds, m), len(digits))


# ---------------------------------------------------------------------------
# iterated-logarithm statistic
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LilStatistic:
    """The series L_n * loglog(n) / n for n >= 3 and dyadic running minima.

    ``dyadic_min`` holds (n, min of the statistic over the grid points up to
    n), the grid being powers of two plus the final index.
    """

    values: Tuple[float, ...]  # index k holds the statistic at n = k + 3
    dyadic_min: Tuple[Tuple[int, float], ...]


def lil_statistic(trajectory: Trajectory) -> LilStatistic:
    n_total = len(trajectory.max_series)
    if n_total < 3:
        raise ValueError("need at least 3 digits: loglog is undefined below n=3")
    values = []
    dyadic = []
    grid_min = math.inf
    next_grid = 4
    for n in range(3, n_total + 1):
        stat = trajectory.max_series[n - 1] * math.log(math.log(n)) / n
        values.append(stat)
        if n == next_grid or n == n_total:
            if stat < grid_min:
                grid_min = stat
            dyadic.append((n, grid_min))
            if n == next_grid:
                next_grid *= 2
    return LilStatistic(tuple(values), tuple(dyadic))
