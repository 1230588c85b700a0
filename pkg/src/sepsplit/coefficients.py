"""Exact scalar arithmetic: rationals and one quadratic extension Q(sqrt(d)).

Every symbolic layer of the library stores its numbers as :class:`Coefficient`:
either a plain rational or an element ``p + q*sqrt(d)`` with fixed non-square
rational ``d > 0``.  All arithmetic is exact; nothing is ever rounded.  A value
whose irrational part cancels is renormalised to a plain rational, so equality
is structural.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Optional, Union

from .errors import ExtensionMismatchError

RationalLike = Union[int, Fraction, "Coefficient"]


def rational_sqrt(value: Fraction) -> Optional[Fraction]:
    """Return the exact rational square root of ``value``, or None."""
    if value < 0:
        return None
    num, den = value.numerator, value.denominator
    rn, rd = math.isqrt(num), math.isqrt(den)
    if rn * rn == num and rd * rd == den:
        return Fraction(rn, rd)
    return None


class Coefficient:
    """Exact number ``p + q*sqrt(d)`` with rational p, q and fixed d.

    ``d is None`` marks a plain rational (q is then zero).  Elements with
    different non-None ``d`` cannot be combined.  Whenever ``sqrt(d)`` is
    itself rational the irrational part is folded away, keeping the
    representation canonical.
    """

    __slots__ = ("p", "q", "d")

    def __init__(self, p, q=0, d: Optional[Fraction] = None):
        p = Fraction(p)
        q = Fraction(q)
        if q == 0:
            d = None
        elif d is None:
            raise ValueError("irrational part requires an extension modulus d")
        else:
            d = Fraction(d)
            if d <= 0:
                raise ValueError("extension modulus d must be positive")
            root = rational_sqrt(d)
            if root is not None:
                p, q, d = p + q * root, Fraction(0), None
        self.p = p
        self.q = q
        self.d = d

    # -- helpers -----------------------------------------------------------

    @staticmethod
    def of(value: RationalLike) -> "Coefficient":
        if isinstance(value, Coefficient):
            return value
        return Coefficient(Fraction(value))

    @staticmethod
    def sqrt_rational(value) -> "Coefficient":
        """Exact square root of a non-negative rational, extending if needed."""
        value = Fraction(value)
        if value < 0:
            raise ValueError("negative radicand")
        if value == 0:
            return Coefficient(0)
        root = rational_sqrt(value)
        if root is not None:
            return Coefficient(root)
        return Coefficient(0, 1, value)

    def _coerce(self, other) -> "Coefficient":
        if isinstance(other, Coefficient):
            return other
        if isinstance(other, (int, Fraction)):
            return Coefficient(other)
        return NotImplemented  # type: ignore[return-value]

    def _join(self, other: "Coefficient") -> Optional[Fraction]:
        if self.d is None:
            return other.d
        if other.d is None or other.d == self.d:
            return self.d
        raise ExtensionMismatchError(
            f"cannot mix sqrt({self.d}) with sqrt({other.d})"
        )

    @property
    def is_rational(self) -> bool:
        return self.d is None

    def as_fraction(self) -> Fraction:
        if self.d is not None:
            raise ValueError(f"{self!r} is not rational")
        return self.p

    # -- ring operations ---------------------------------------------------

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        d = self._join(other)
        return Coefficient(self.p + other.p, self.q + other.q, d)

    __radd__ = __add__

    def __neg__(self):
        return Coefficient(-self.p, -self.q, self.d)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        d = self._join(other)
        if d is None:
            return Coefficient(self.p * other.p)
        p = self.p * other.p + self.q * other.q * d
        q = self.p * other.q + self.q * other.p
        return Coefficient(p, q, d)

    __rmul__ = __mul__

    def inverse(self) -> "Coefficient":
        if self.d is None:
            if self.p == 0:
                raise ZeroDivisionError("inverse of zero coefficient")
            return Coefficient(1 / self.p)
        norm = self.p * self.p - self.q * self.q * self.d
        if norm == 0:
            raise ZeroDivisionError("inverse of zero coefficient")
        return Coefficient(self.p / norm, -self.q / norm, self.d)

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self * other.inverse()

    def __rtruediv__(self, other):
        return self.inverse() * other

    def __pow__(self, exponent: int):
        if not isinstance(exponent, int):
            return NotImplemented
        if exponent < 0:
            return self.inverse() ** (-exponent)
        result = Coefficient(1)
        base = self
        while exponent:
            if exponent & 1:
                result = result * base
            base = base * base
            exponent >>= 1
        return result

    # -- predicates and ordering -------------------------------------------

    def is_zero(self) -> bool:
        return self.p == 0 and self.q == 0

    def __bool__(self):
        return not self.is_zero()

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = Coefficient(other)
        if not isinstance(other, Coefficient):
            return NotImplemented
        if self.q == 0 and other.q == 0:
            return self.p == other.p
        return self.p == other.p and self.q == other.q and self.d == other.d

    def __hash__(self):
        if self.q == 0:
            return hash(self.p)
        return hash((self.p, self.q, self.d))

    def sign(self) -> int:
        """Exact sign of the real number p + q*sqrt(d)."""
        if self.q == 0:
            return 0 if self.p == 0 else (1 if self.p > 0 else -1)
        if self.p == 0:
            return 1 if self.q > 0 else -1
        sp = 1 if self.p > 0 else -1
        sq = 1 if self.q > 0 else -1
        if sp == sq:
            return sp
        # opposite signs: compare p^2 against q^2 d
        lhs, rhs = self.p * self.p, self.q * self.q * self.d
        if lhs == rhs:
            return 0
        return sp if lhs > rhs else sq

    def __gt__(self, other):
        other = self._coerce(other)
        return (self - other).sign() > 0

    def __lt__(self, other):
        other = self._coerce(other)
        return (self - other).sign() < 0

    def __float__(self):
        value = float(self.p)
        if self.q:
            value += float(self.q) * math.sqrt(float(self.d))
        return value

    def to_mpf(self, ctx):
        """Evaluate at the precision of mpmath context ``ctx``."""
        value = ctx.mpf(self.p.numerator) / self.p.denominator
        if self.q:
            root = ctx.sqrt(ctx.mpf(self.d.numerator) / self.d.denominator)
            value += root * ctx.mpf(self.q.numerator) / self.q.denominator
        return value

    def __repr__(self):
        if self.q == 0:
            return f"Coefficient({self.p})"
        return f"Coefficient({self.p} + {self.q}*sqrt({self.d}))"


ZERO = Coefficient(0)
ONE = Coefficient(1)
