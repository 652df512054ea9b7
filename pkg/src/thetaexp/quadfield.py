"""Exact arithmetic in the real quadratic field Q(sqrt(m)).

Every number is stored as ``u + v*theta`` with ``theta = 1/sqrt(m)`` and
``u``, ``v`` arbitrary-precision rationals.  The interval map, its digits,
convergents and cylinder endpoints all live in this field, so the whole
non-statistical part of the library runs without any floating-point error.
Floats and mpmath values appear only at the reporting boundary.
"""

from __future__ import annotations

from fractions import Fraction
from math import isqrt
from typing import Union

import mpmath

# Canonical rational: gcd-reduced, positive denominator (Fraction guarantees both).
Rational = Fraction

#: Working precision (significant decimal digits) for reporting conversions.
DEFAULT_DPS = 60

_Coercible = Union[int, Fraction, "QuadRat"]


class FieldMismatchError(ValueError):
    """Arithmetic between values living in different fields Q(sqrt(m))."""


def _floor_times_sqrt(b: int, m: int) -> int:
    """floor(b * sqrt(m)) for integer b (either sign), exactly."""
    if b >= 0:
        return isqrt(b * b * m)
    t2 = b * b * m
    t = isqrt(t2)
    # -ceil(|b| sqrt(m))
    return -t if t * t == t2 else -t - 1

def _cmp_times_sqrt(b: int, m: int, c: int) -> int:
    """Sign of b*sqrt(m) - c, exactly (m >= 1)."""
    if b >= 0 and c <= 0:
        return 0 if b == 0 and c == 0 else 1
    if b <= 0 and c >= 0:
        return 0 if b == 0 and c == 0 else -1
    lhs = b * b * m
    rhs = c * c
    if lhs == rhs:
        return 0
    if b > 0:  # both positive
        return 1 if lhs > rhs else -1
    return 1 if lhs < rhs else -1  # both negative


class QuadRat:
    """An exact element ``u + v*theta`` of Q(sqrt(m)), theta = 1/sqrt(m).

    Immutable.  For square m = k*k the representation is folded to the
    rational part (v = 0) so equality of values is equality of components.
    """

    __slots__ = ("u", "v", "m", "_root")

    def __init__(self, u: _Coercible, v: _Coercible, m: int):
        if m < 1:
            raise ValueError(f"field parameter m must be a positive integer, got {m}")
        u = Fraction(u)
        v = Fraction(v)
        root = isqrt(m)
        if root * root == m and v:
            u += v / root  # theta = 1/k is rational: fold it
            v = Fraction(0)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "_root", root)

    def __setattr__(self, name, value):
        raise AttributeError("QuadRat is immutable")

    # -- constructors ------------------------------------------------------

    @classmethod
    def rational(cls, value: Union[int, Fraction], m: int) -> "QuadRat":
        return cls(value, 0, m)

    @classmethod
    def theta(cls, m: int) -> "QuadRat":
        """The generator theta = 1/sqrt(m) itself."""
        return cls(0, 1, m)

    # -- coercion ----------------------------------------------------------

    def _coerce(self, other: _Coercible) -> "QuadRat":
        if isinstance(other, QuadRat):
            if other.m != self.m:
                raise FieldMismatchError(
                    f"cannot combine values over m={self.m} and m={other.m}"
                )
            return other
        if isinstance(other, (int, Fraction)):
            return QuadRat(other, 0, self.m)
        return NotImplemented  # type: ignore[return-value]

    # -- ring operations ---------------------------------------------------

    def __add__(self, other: _Coercible) -> "QuadRat":
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return QuadRat(self.u + o.u, self.v + o.v, self.m)

    __radd__ = __add__

    def __neg__(self) -> "QuadRat":
        return QuadRat(-self.u, -self.v, self.m)

    def __sub__(self, other: _Coercible) -> "QuadRat":
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return QuadRat(self.u - o.u, self.v - o.v, self.m)

    def __rsub__(self, other: _Coercible) -> "QuadRat":
        return (-self) + other

    def __mul__(self, other: _Coercible) -> "QuadRat":
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        # (u1 + v1 t)(u2 + v2 t) with t^2 = 1/m
        u = self.u * o.u + self.v * o.v / self.m
        v = self.u * o.v + self.v * o.u
        return QuadRat(u, v, self.m)

    __rmul__ = __mul__

    def inverse(self) -> "QuadRat":
        """Exact reciprocal via the conjugate; raises on zero."""
        if self.is_zero():
            raise ZeroDivisionError("QuadRat zero has no inverse")
        # 1/(u + v t) = (u - v t) / (u^2 - v^2/m)
        norm = self.u * self.u - self.v * self.v / self.m
        return QuadRat(self.u / norm, -self.v / norm, self.m)

    def __truediv__(self, other: _Coercible) -> "QuadRat":
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return self * o.inverse()

    def __rtruediv__(self, other: _Coercible) -> "QuadRat":
        return self.inverse() * other

    # -- predicates and ordering --------------------------------------------

    def is_zero(self) -> bool:
        return not self.u and not self.v

    def is_rational(self) -> bool:
        return not self.v

    def as_fraction(self) -> Fraction:
        if self.v:
            raise ValueError(f"{self!r} is irrational")
        return self.u

    def sign(self) -> int:
        """Exact sign of the represented real, in {-1, 0, 1}."""
        su = (self.u > 0) - (self.u < 0)
        sv = (self.v > 0) - (self.v < 0)
        if sv == 0:
            return su
        if su == 0 or su == sv:
            return sv
        # opposite signs: |u| vs |v|/sqrt(m), squared (exact: m not a square here)
        lhs = self.m * self.u * self.u
        rhs = self.v * self.v
        if lhs == rhs:  # would force sqrt(m) rational; folded case cannot reach this
            return 0
        return su if lhs > rhs else sv

    def _cmp(self, other: _Coercible) -> int:
        return (self - other).sign()

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, Fraction, QuadRat)):
            o = self._coerce(other)
            return self.u == o.u and self.v == o.v
        return NotImplemented

    def __lt__(self, other) -> bool:
        return self._cmp(other) < 0

    def __le__(self, other) -> bool:
        return self._cmp(other) <= 0

    def __gt__(self, other) -> bool:
        return self._cmp(other) > 0

    def __ge__(self, other) -> bool:
        return self._cmp(other) >= 0

    def __hash__(self):
        return hash((self.u, self.v, self.m))

    def __bool__(self) -> bool:
        return not self.is_zero()

    # -- floor --------------------------------------------------------------

    def floor(self) -> int:
        """Exact floor of the represented real.

        Works entirely in integers: write the value as (A + B sqrt(m)) / D
        with D > 0, take the integer-sqrt floor of the irrational part and
        correct the single possible off-by-one with an exact comparison.
        """
        if not self.v:
            return self.u.numerator // self.u.denominator
        a, b = self.u.numerator, self.u.denominator
        c, d = self.v.numerator, self.v.denominator
        # u + v/sqrt(m) = (a d m + b c sqrt(m)) / (b d m)
        big_a = a * d * self.m
        big_b = b * c
        big_d = b * d * self.m
        g = (big_a + _floor_times_sqrt(big_b, self.m)) // big_d
        # value >= g+1  <=>  B sqrt(m) >= (g+1) D - A
        if _cmp_times_sqrt(big_b, self.m, (g + 1) * big_d - big_a) >= 0:
            g += 1
        return g

    # -- reporting conversions ----------------------------------------------

    def to_mpf(self, dps: int = DEFAULT_DPS) -> mpmath.mpf:
        """High-precision float u + v/sqrt(m); reporting only, never exact paths."""
        with mpmath.workdps(dps):
            out = mpmath.mpf(self.u.numerator) / self.u.denominator
            if self.v:
                out += (
                    mpmath.mpf(self.v.numerator)
                    / self.v.denominator
                    / mpmath.sqrt(self.m)
                )
            return +out

    def __float__(self) -> float:
        # via mpmath so huge components overflow to inf instead of raising
        return float(self.to_mpf(dps=40))

    # -- formatting -----------------------------------------------------------

    def encode(self) -> str:
        """Stable exact string: "p/q" or "p/q + r/s θ" (CSV/JSON friendly)."""
        if not self.v:
            return str(self.u)
        if not self.u:
            return f"{self.v} θ"
        sign = "+" if self.v > 0 else "-"
        return f"{self.u} {sign} {abs(self.v)} θ"

    def __str__(self) -> str:
        return self.encode()

    def __repr__(self) -> str:
        return f"QuadRat({self.u!r}, {self.v!r}, m={self.m})"


def parse_rational(text: str) -> Fraction:
    """Parse an exact rational "p" or "p/q"; floats are refused."""
    cleaned = text.strip()
    try:
        value = Fraction(cleaned)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"not an exact rational 'p/q': {text!r}") from exc
    if "." in cleaned or "e" in cleaned.lower():
        raise ValueError(f"float input refused, write an exact rational 'p/q': {text!r}")
    return value
