"""
Exact number carriers.

``fractions.Fraction`` is the exact rational type used throughout. Standardized
moments of profiles with an irrational standard deviation, and odd moments of
the standardized average, pick up a single square root; ``RationalSurd`` keeps
those values exact as ``coefficient * sqrt(radicand)``.
"""

import math
import numbers
from fractions import Fraction
from typing import Union

from core.errors import DomainError


def _square_split(m: int):
    """
    Write m = root^2 * free with free square-free.

    Trial division runs while f^3 <= the remaining cofactor; what is left then
    has at most two prime factors, so it is either square-free or a prime
    square.
    """
    root, free = 1, 1
    f = 2
    while f * f * f <= m:
        count = 0
        while m % f == 0:
            m //= f
            count += 1
        root *= f ** (count // 2)
        if count % 2:
            free *= f
        f += 1 if f == 2 else 2
    s = math.isqrt(m)
    if s * s == m:
        return root * s, free
    return root, free * m


def to_fraction(value) -> Fraction:
    """
    Convert a number or a numeric string to an exact Fraction.

    Floats are converted through their shortest repr, so ``0.3`` becomes
    ``3/10`` rather than the nearest binary fraction.

    Args:
        value: int, Fraction, float, str ("3/10", "0.3") or rational RationalSurd

    Returns:
        Exact Fraction
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(value, numbers.Integral):
        return Fraction(int(value))
    if isinstance(value, RationalSurd):
        return value.to_fraction()
    if isinstance(value, numbers.Real):
        value = float(value)
        if not math.isfinite(value):
            raise DomainError(f"cannot represent {value} exactly")
        return Fraction(repr(value))
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except ValueError as e:
            raise DomainError(f"not a rational number: {value!r}") from e
    raise TypeError(f"cannot convert {type(value).__name__} to Fraction")


def _sign(x: Fraction) -> int:
    return (x > 0) - (x < 0)


class RationalSurd:
    """Exact value ``coefficient * sqrt(radicand)`` with a positive radicand."""

    __slots__ = ("_coefficient", "_radicand")

    def __init__(self, coefficient=0, radicand=1):
        c = to_fraction(coefficient)
        d = to_fraction(radicand)
        if d < 0:
            raise DomainError(f"negative radicand {d}")
        if c == 0 or d == 0:
            self._coefficient = Fraction(0)
            self._radicand = 1
            return

        # sqrt(p/q) = sqrt(p*q)/q keeps the radicand integral
        c /= d.denominator
        root, rad = _square_split(d.numerator * d.denominator)
        c *= root
        self._coefficient = c
        self._radicand = rad

    @classmethod
    def from_power(cls, base, halves: int) -> "RationalSurd":
        """Return ``base ** (halves / 2)`` for a positive rational base."""
        base = to_fraction(base)
        if base <= 0:
            raise DomainError(f"half powers need a positive base, got {base}")
        if halves % 2 == 0:
            return cls(base ** (halves // 2))
        return cls(base ** ((halves - 1) // 2), base)

    @property
    def coefficient(self) -> Fraction:
        return self._coefficient

    @property
    def radicand(self) -> int:
        return self._radicand

    @property
    def is_rational(self) -> bool:
        return self._radicand == 1

    def to_fraction(self) -> Fraction:
        """Return the value as a Fraction; only valid when it is rational."""
        if not self.is_rational:
            raise DomainError(f"{self} is irrational")
        return self._coefficient

    @staticmethod
    def _coerce(other) -> "RationalSurd":
        if isinstance(other, RationalSurd):
            return other
        if isinstance(other, (numbers.Rational, str)) and not isinstance(other, bool):
            return RationalSurd(other)
        raise TypeError

    def __eq__(self, other):
        if isinstance(other, float):
            return float(self) == other
        try:
            other = self._coerce(other)
        except TypeError:
            return NotImplemented
        if _sign(self._coefficient) != _sign(other._coefficient):
            return False
        return (
            self._coefficient**2 * self._radicand
            == other._coefficient**2 * other._radicand
        )

    __hash__ = None

    def __add__(self, other):
        try:
            other = self._coerce(other)
        except TypeError:
            return NotImplemented
        if other._coefficient == 0:
            return self
        if self._coefficient == 0:
            return other
        if self._radicand != other._radicand:
            raise DomainError(f"cannot add {self} and {other} exactly")
        return RationalSurd(self._coefficient + other._coefficient, self._radicand)

    __radd__ = __add__

    def __neg__(self):
        return RationalSurd(-self._coefficient, self._radicand)

    def __abs__(self):
        return RationalSurd(abs(self._coefficient), self._radicand)

    def __sub__(self, other):
        try:
            other = self._coerce(other)
        except TypeError:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        try:
            other = self._coerce(other)
        except TypeError:
            return NotImplemented
        return RationalSurd(
            self._coefficient * other._coefficient, self._radicand * other._radicand
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        try:
            other = self._coerce(other)
        except TypeError:
            return NotImplemented
        if other._coefficient == 0:
            raise ZeroDivisionError("division by zero")
        return RationalSurd(
            self._coefficient / other._coefficient,
            Fraction(self._radicand, other._radicand),
        )

    def __rtruediv__(self, other):
        return self._coerce(other) / self

    def __bool__(self):
        return self._coefficient != 0

    def __float__(self):
        return float(self._coefficient) * math.sqrt(self._radicand)

    def __repr__(self):
        return f"RationalSurd({self._coefficient!r}, {self._radicand})"

    def __str__(self):
        if self.is_rational:
            return str(self._coefficient)
        if self._coefficient == 1:
            return f"sqrt({self._radicand})"
        return f"{self._coefficient}*sqrt({self._radicand})"


ExactValue = Union[Fraction, RationalSurd]
