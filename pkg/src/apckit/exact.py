"""Exact scalar arithmetic for metric computations.

Every metric in this package takes rational values except the l2 product
metric, whose distances are square roots of rationals.  ``Root`` represents
such a value exactly by its square; comparisons against rational scales and
mesh bounds compare squares, so no verifier decision ever goes through
floating point.
"""

from __future__ import annotations

import math
from fractions import Fraction

Rational = (int, Fraction)


def to_fraction(x) -> Fraction:
    """Parse ints, Fractions, strings like '3/4' or '2.5', and floats exactly."""
    if isinstance(x, bool):
        raise TypeError("bool is not a scalar")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValueError(f"non-finite scalar: {x!r}")
        return Fraction(x)
    raise TypeError(f"cannot interpret {x!r} as an exact scalar")


class Root:
    """sqrt(sq) for a non-negative rational sq that is not a perfect square.

    Built only through :func:`root_of`, which returns a plain rational for
    perfect squares, so a live Root is always irrational and never equal to
    a rational.
    """

    __slots__ = ("sq",)

    def __init__(self, sq: Fraction):
        self.sq = sq

    def __repr__(self):
        return f"sqrt({self.sq})"

    def __float__(self):
        return math.sqrt(self.sq.numerator / self.sq.denominator)

    def __hash__(self):
        return hash(("Root", self.sq))

    def __eq__(self, other):
        if isinstance(other, Root):
            return self.sq == other.sq
        if isinstance(other, Rational):
            return False  # non-perfect square is irrational
        return NotImplemented

    def _cmp_rational(self, other):
        # returns -1/0/1 for self vs other (other rational)
        if other < 0:
            return 1
        o = other * other
        if self.sq == o:
            return 0
        return -1 if self.sq < o else 1

    def __lt__(self, other):
        if isinstance(other, Root):
            return self.sq < other.sq
        if isinstance(other, Rational):
            return self._cmp_rational(other) < 0
        return NotImplemented

    def __le__(self, other):
        if isinstance(other, Root):
            return self.sq <= other.sq
        if isinstance(other, Rational):
            return self._cmp_rational(other) <= 0
        return NotImplemented

    def __gt__(self, other):
        if isinstance(other, Root):
            return self.sq > other.sq
        if isinstance(other, Rational):
            return self._cmp_rational(other) > 0
        return NotImplemented

    def __ge__(self, other):
        if isinstance(other, Root):
            return self.sq >= other.sq
        if isinstance(other, Rational):
            return self._cmp_rational(other) >= 0
        return NotImplemented


def root_of(sq):
    """Exact sqrt of a non-negative rational: rational if perfect square, else Root."""
    if isinstance(sq, int):
        if sq < 0:
            raise ValueError("root_of needs a non-negative argument")
        r = math.isqrt(sq)
        return r if r * r == sq else Root(Fraction(sq))
    sq = to_fraction(sq)
    if sq < 0:
        raise ValueError("root_of needs a non-negative argument")
    rn = math.isqrt(sq.numerator)
    rd = math.isqrt(sq.denominator)
    if rn * rn == sq.numerator and rd * rd == sq.denominator:
        v = Fraction(rn, rd)
        return int(v) if v.denominator == 1 else v
    return Root(sq)


def sq_value(x) -> Fraction | int:
    """The exact square of a scalar (int, Fraction, or Root), int-normalized."""
    if isinstance(x, int):
        return x * x
    if isinstance(x, Fraction):
        v = x * x
        return int(v) if v.denominator == 1 else v
    if isinstance(x, Root):
        sq = x.sq
        return int(sq) if sq.denominator == 1 else sq
    raise TypeError(f"not a scalar: {x!r}")


def hyp(a, b):
    """Exact sqrt(a^2 + b^2); the l2 combination of two scalars."""
    if isinstance(a, int) and isinstance(b, int):
        return root_of(a * a + b * b)
    return root_of(sq_value(a) + sq_value(b))


def triangle_le(a, b, c) -> bool:
    """Exact test a <= b + c for non-negative scalars, Roots allowed."""
    if not isinstance(a, Root) and not isinstance(b, Root) and not isinstance(c, Root):
        return a <= b + c
    A, B, C = sq_value(a), sq_value(b), sq_value(c)
    t = A - B - C
    if t <= 0:
        return True
    return t * t <= 4 * B * C


def ceil_scalar(x) -> int:
    """Smallest integer >= x, exact for Roots."""
    if isinstance(x, Rational):
        return math.ceil(x)
    if isinstance(x, Root):
        n = math.isqrt(math.floor(x.sq))
        while n * n < x.sq:
            n += 1
        return n
    raise TypeError(f"not a scalar: {x!r}")


def scalar_float(x) -> float:
    return float(x)
