"""The theta-expansion dynamical system, exact throughout.

The interval map on [0, theta] sends x to 1/x - theta*floor(1/(x*theta))
and generates digit sequences with digits >= m.  Everything here (digit
extraction, map iteration, convergents, cylinder endpoints) is computed in
Q(sqrt(m)) with no rounding.

Two digit-extraction paths coexist:

* a generic one over ``QuadRat`` for arbitrary exact starting points, fine
  for interactive scale;
* ``expand_ratio`` for points of the form (p/q)*theta, which is the case for
  every Monte Carlo start.  It extracts digits from a certified low-precision
  window of the big integer state and folds the accumulated digit matrix back
  into the exact state in large blocks, so million-digit exact trajectories
  stay affordable.  Both paths produce identical digits (tested).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import List, Sequence, Tuple, Union

import gmpy2
import mpmath

from .quadfield import DEFAULT_DPS, QuadRat

_mpz = gmpy2.mpz

TERMINATED = "terminated"
TRUNCATED = "truncated"


class EarlyTermination(Exception):
    """An expansion ran out of digits before the requested count."""

    def __init__(self, digits_found: int, requested: int):
        super().__init__(
            f"expansion terminated after {digits_found} digits, "
            f"{requested} were requested"
        )
        self.digits_found = digits_found
        self.requested = requested


class ThetaParams:
    """Fixed data of one theta-expansion system: theta^2 = 1/m."""

    __slots__ = ("m", "theta", "log_norm")

    def __init__(self, m: int):
        if m < 1:
            raise ValueError(f"m must be a positive integer, got {m}")
        self.m = m
        self.theta = QuadRat.theta(m)
        with mpmath.workdps(DEFAULT_DPS):
            self.log_norm = mpmath.log1p(mpmath.mpf(1) / m)  # log(1 + theta^2)

    def __eq__(self, other):
        return isinstance(other, ThetaParams) and other.m == self.m

    def __hash__(self):
        return hash(("ThetaParams", self.m))

    def __repr__(self):
        return f"ThetaParams(m={self.m})"


@dataclass(frozen=True)
class DigitSeq:
    """A finite or truncated digit sequence of one expansion."""

    params: ThetaParams
    digits: Tuple[int, ...]
    status: str

    def __post_init__(self):
        m = self.params.m
        if self.status not in (TERMINATED, TRUNCATED):
            raise ValueError(f"unknown status {self.status!r}")
        if any(a < m for a in self.digits):
            raise ValueError(f"digit below the floor m={m}")
        if self.status == TERMINATED and self.digits and self.digits[-1] < m + 1:
            raise ValueError("a terminating expansion must end with a digit >= m+1")

    def __len__(self):
        return len(self.digits)


@dataclass(frozen=True)
class ConvergentPair:
    """Numerator/denominator pair (p_n, q_n) of the n-th convergent."""

    index: int
    p: QuadRat
    q: QuadRat


@dataclass(frozen=True)
class Cylinder:
    """Rank-n cylinder: all points whose first n digits equal ``word``.

    An interval inside [0, theta].  The endpoint at p_n/q_n is the closed
    left end for even n and the closed right end for odd n; the other end,
    (p_n + theta*p_{n-1})/(q_n + theta*q_{n-1}), is open.  The convergent
    data used to build the endpoints is kept for the measure formulas.
    """

    word: Tuple[int, ...]
    lo: QuadRat
    hi: QuadRat
    closed_lo: bool
    closed_hi: bool
    p_n: QuadRat
    q_n: QuadRat
    p_prev: QuadRat
    q_prev: QuadRat

    def contains(self, x: QuadRat) -> bool:
        if x < self.lo or x > self.hi:
            return False
        if x == self.lo:
            return self.closed_lo
        if x == self.hi:
            return self.closed_hi
        return True


# ---------------------------------------------------------------------------
# elementary operations
# ---------------------------------------------------------------------------


def first_digit(x: QuadRat, params: ThetaParams) -> int:
    """floor(1/(x*theta)) for 0 < x <= theta, by exact comparison."""
    if x.sign() <= 0 or x > params.theta:
        raise ValueError(f"first_digit needs 0 < x <= theta, got {x}")
    digit = (x * params.theta).inverse().floor()
    assert digit >= params.m
    return digit


def step(x: QuadRat, params: ThetaParams) -> QuadRat:
    """One application of the interval map; exact; fixes 0."""
    if x.is_zero():
        return x
    if x.sign() < 0 or x > params.theta:
        raise ValueError(f"step needs 0 <= x <= theta, got {x}")
    digit = (x * params.theta).inverse().floor()
    return x.inverse() - params.theta * digit


def expand(x: QuadRat, params: ThetaParams, max_digits: int) -> DigitSeq:
    """Digit sequence of x in (0, theta), stopping at termination or budget."""
    if max_digits < 1:
        raise ValueError("max_digits must be >= 1")
    if x.sign() <= 0 or x >= params.theta:
        raise ValueError(f"expand needs 0 < x < theta, got {x}")
    rho = x * params.theta.inverse()  # x / theta
    if rho.is_rational():
        frac = rho.as_fraction()
        digits, terminated = expand_ratio(
            frac.numerator, frac.denominator, params.m, max_digits
        )
        status = TERMINATED if terminated else TRUNCATED
        return DigitSeq(params, tuple(digits), status)
    digits: List[int] = []
    cur = x
    status = TRUNCATED
    while len(digits) < max_digits:
        digit = (cur * params.theta).inverse().floor()
        digits.append(digit)
        cur = cur.inverse() - params.theta * digit
        if cur.is_zero():
            status = TERMINATED
            break
    return DigitSeq(params, tuple(digits), status)


def convergents(
    seq: Union[DigitSeq, Sequence[int]],
    params: ThetaParams = None,
    up_to: int = None,
) -> List[ConvergentPair]:
    """Exact (p_n, q_n) for n = -1 .. up_to from the usual linear recursion.

    ``seq`` may be a DigitSeq (params taken from it) or a plain digit word.
    """
    if isinstance(seq, DigitSeq):
        digits = seq.digits
        params = seq.params
    else:
        digits = tuple(seq)
        if params is None:
            raise ValueError("params required when passing a bare digit word")
    if up_to is None:
        up_to = len(digits)
    if up_to > len(digits):
        raise ValueError(f"only {len(digits)} digits available, asked for {up_to}")
    one = QuadRat.rational(1, params.m)
    zero = QuadRat.rational(0, params.m)
    theta = params.theta
    out = [ConvergentPair(-1, one, zero), ConvergentPair(0, zero, one)]
    p_prev, p_cur = one, zero
    q_prev, q_cur = zero, one
    for n in range(1, up_to + 1):
        a = digits[n - 1]
        p_prev, p_cur = p_cur, theta * a * p_cur + p_prev
        q_prev, q_cur = q_cur, theta * a * q_cur + q_prev
        out.append(ConvergentPair(n, p_cur, q_cur))
    return out


def evaluate(word: Sequence[int], params: ThetaParams) -> QuadRat:
    """Exact value of the finite continued fraction with the given digits."""
    if not word:
        raise ValueError("empty digit word")
    _check_word(word, params.m)
    value = QuadRat.rational(0, params.m)
    for a in reversed(word):
        value = (params.theta * a + value).inverse()
    return value


def cylinder(word: Sequence[int], params: ThetaParams) -> Cylinder:
    """The rank-n cylinder of a digit word, with exact endpoints.

    The empty word gives the whole space [0, theta).
    """
    _check_word(word, params.m)
    word = tuple(word)
    pairs = convergents(word, params)
    p_prev, q_prev = pairs[-2].p, pairs[-2].q
    p_n, q_n = pairs[-1].p, pairs[-1].q
    end_a = p_n / q_n
    end_b = (p_n + params.theta * p_prev) / (q_n + params.theta * q_prev)
    if len(word) % 2 == 0:
        lo, hi = end_a, end_b
        closed_lo, closed_hi = True, False
    else:
        lo, hi = end_b, end_a
        closed_lo, closed_hi = False, True
    assert lo < hi
    return Cylinder(word, lo, hi, closed_lo, closed_hi, p_n, q_n, p_prev, q_prev)


def _check_word(word: Sequence[int], m: int) -> None:
    for a in word:
        if a < m:
            raise ValueError(f"digit {a} below the floor m={m}")


# ---------------------------------------------------------------------------
# fast exact digit stream for x = (num/den) * theta
# ---------------------------------------------------------------------------
#
# On rho = num/den the map acts as rho -> m/rho - floor(m/rho), i.e. on the
# integer pair (p, q) [rho = p/q] one digit costs one divmod:
#
#     a = (m*q) // p,   (p, q) <- (m*q - a*p, p)
#
# For a stationary start with B bits of entropy the pair keeps ~B bits for
# the whole run, so the plain loop costs O(N*B) bit work.  The window scheme
# below cuts the per-digit cost to an amortised constant plus the unavoidable
# matrix folds: digits are certified from a ~WINDOW_BITS-bit truncation
# carrying explicit interval slack, and the exact pair is only touched every
# ~DEEP_BITS consumed bits via one fused 2x2 integer matrix product.

SMALL_BITS = 8192  # below this, the plain exact loop is fast enough
WINDOW_BITS = 4096  # certified truncation size
DEEP_BITS = 131072  # fold the pending matrix into the exact pair at this size

_IDENTITY = (_mpz(1), _mpz(0), _mpz(0), _mpz(1))


def expand_ratio(
    num: int,
    den: int,
    m: int,
    max_digits: int,
    small_bits: int = SMALL_BITS,
    window_bits: int = WINDOW_BITS,
    deep_bits: int = DEEP_BITS,
) -> Tuple[List[int], bool]:
    """Exact digits of x = (num/den)*theta, 0 < num < den.

    Returns (digits, terminated).  ``terminated`` is exact: it is True iff
    the expansion ends precisely at the last returned digit.
    """
    if not 0 < num < den:
        raise ValueError("need 0 < num < den, i.e. x strictly inside (0, theta)")
    if max_digits < 1:
        raise ValueError("max_digits must be >= 1")
    p, q = _mpz(num), _mpz(den)
    mz = _mpz(m)
    digits: List[int] = []
    while len(digits) < max_digits:
        if p.bit_length() <= small_bits:
            return digits, _plain_loop(p, q, mz, digits, max_digits)
        p, q = _stream_big(p, q, mz, digits, max_digits, small_bits, window_bits, deep_bits)
        if not p:
            return digits, True
    return digits, False


def _plain_loop(p, q, mz, digits, max_digits) -> bool:
    while len(digits) < max_digits:
        a, r = divmod(mz * q, p)
        digits.append(int(a))
        if not r:
            return True
        p, q = r, p
    return False


def _fold_digits(block: Sequence[int], mz) -> Tuple[gmpy2.mpz, ...]:
    """Product of the step matrices [[-a, m], [1, 0]] over a digit block."""
    r11, r12, r21, r22 = _IDENTITY
    for a in block:
        r11, r12, r21, r22 = mz * r21 - a * r11, mz * r22 - a * r12, r11, r12
    return r11, r12, r21, r22


def _stream_big(p, q, mz, digits, max_digits, small_bits, window_bits, deep_bits):
    """Stream certified digits out of a large exact pair.

    Emits at least one digit (or detects termination) before returning, and
    returns the exact pair consistent with everything emitted; p == 0 in the
    returned pair means the expansion ended at the last digit.
    """
    pend = _IDENTITY  # digit matrix not yet folded into the exact pair
    pend_bits = 0
    while True:
        win = _load_window(p, q, pend, pend_bits, window_bits)
        block: List[int] = []
        if win is not None:
            U, EU, V, EV = win
            while len(digits) + len(block) < max_digits:
                a, r = divmod(mz * V, U)
                # floor(m*v/u) equals a on the whole window iff both hold
                if r < a * EU or r + mz * EV >= U:
                    break
                block.append(int(a))
                new_u = r - a * EU
                if new_u <= 0:
                    break
                U, EU, V, EV = new_u, a * EU + mz * EV, U, EU
            if block:
                digits.extend(block)
                pend = _mat_mul(_fold_digits(block, mz), pend)
                pend_bits = max(x.bit_length() for x in pend)
        if block and pend_bits < deep_bits and len(digits) < max_digits:
            continue  # window slack ran out; reload and keep streaming
        p, q = _apply(pend, p, q)
        pend, pend_bits = _IDENTITY, 0
        if not p or len(digits) >= max_digits or p.bit_length() <= small_bits:
            return p, q
        if not block:
            # no certified digit even from a fresh window (huge imminent
            # digit or a near-boundary state): take one exact step
            a, r = divmod(mz * q, p)
            digits.append(int(a))
            if not r:
                return _mpz(0), p
            p, q = r, p
            if len(digits) >= max_digits or p.bit_length() <= small_bits:
                return p, q


def _mat_mul(a, b):
    a11, a12, a21, a22 = a
    b11, b12, b21, b22 = b
    return (
        a11 * b11 + a12 * b21,
        a11 * b12 + a12 * b22,
        a21 * b11 + a22 * b21,
        a21 * b12 + a22 * b22,
    )


def _apply(pend, p, q):
    """Fold the pending digit matrix into the exact pair."""
    if pend is not _IDENTITY:
        r11, r12, r21, r22 = pend
        p, q = r11 * p + r12 * q, r21 * p + r22 * q
        assert p >= 0 and q > 0
    return p, q


def _load_window(p, q, pend, pend_bits, window_bits):
    """Certified truncation [U, U+EU] x [V, V+EV] (common implicit scale) of
    the state pend*(p, q).  None when no usable window exists.

    The matrix-vector products cancel roughly two pend_bits worth of leading
    bits (that is exactly the state shrinkage the emitted digits consumed),
    so the truncation keeps window_bits + 3*pend_bits and doubles on the rare
    occasions that is still not enough.
    """
    r11, r12, r21, r22 = pend
    maxbits = max(p.bit_length(), q.bit_length())
    keep = window_bits + 3 * pend_bits + 64
    while True:
        sigma = maxbits - keep
        if sigma > 0:
            ph, qh = p >> sigma, q >> sigma
        else:
            ph, qh = p, q
        # u/2^sigma lies in [base + negative parts, base + positive parts]
        base_u = r11 * ph + r12 * qh
        base_v = r21 * ph + r22 * qh
        lo_u = base_u + min(r11, 0) + min(r12, 0)
        hi_u = base_u + max(r11, 0) + max(r12, 0)
        lo_v = base_v + min(r21, 0) + min(r22, 0)
        hi_v = base_v + max(r21, 0) + max(r22, 0)
        win = None
        if lo_u > 0 and lo_v > 0:
            shift = max(hi_u.bit_length(), hi_v.bit_length()) - window_bits
            if shift > 0:
                U = lo_u >> shift
                EU = ((hi_u - lo_u) >> shift) + 2
                V = lo_v >> shift
                EV = ((hi_v - lo_v) >> shift) + 2
            else:
                U, EU, V, EV = lo_u, hi_u - lo_u, lo_v, hi_v - lo_v
            if U > 0 and EU.bit_length() + window_bits // 2 < U.bit_length():
                win = (U, EU, V, EV)
        if win is not None or sigma <= 0:
            return win
        keep = min(maxbits, keep * 2)
