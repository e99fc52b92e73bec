"""Exact scalar and vector arithmetic shared by the models.

Two pieces live here:

* :class:`RationalVector`, a vector of rationals stored as a numpy object
  array of Python integers over one common positive denominator.  Pointwise
  model arithmetic (cube, Poisson) on this representation is roughly two
  orders of magnitude faster than an array of :class:`fractions.Fraction`.
* :class:`Surd`, numbers of the form ``a + b*sqrt(d)`` with rational ``a, b``
  and a square-free integer ``d``.  They appear when a function is rescaled
  by an irrational normalising constant and odd moments are taken.
"""

from __future__ import annotations

import math
import re
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Union

import numpy as np

Scalar = Union[int, Fraction]

_RATIONAL_RE = re.compile(r"^\s*([+-]?\d+)\s*(?:/\s*(\d+)\s*)?$")


def parse_rational(text: str) -> Fraction:
    """Parse ``"p/q"`` or an integer literal into an exact :class:`Fraction`."""
    m = _RATIONAL_RE.match(text)
    if not m:
        raise ValueError(f"not a rational literal: {text!r}")
    num = int(m.group(1))
    den = int(m.group(2)) if m.group(2) is not None else 1
    if den == 0:
        raise ValueError(f"zero denominator in {text!r}")
    return Fraction(num, den)


def format_rational(value) -> str:
    """Render an exact value as ``p/q`` (always with a denominator)."""
    if isinstance(value, Surd):
        return str(value)
    value = Fraction(value)
    return f"{value.numerator}/{value.denominator}"


def as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, Rational):
        return Fraction(value.numerator, value.denominator)
    if isinstance(value, str):
        return parse_rational(value)
    raise TypeError(f"expected an exact rational, got {type(value).__name__}")


def _squarefree_split(n: int) -> tuple[int, int]:
    """Return ``(s, d)`` with ``n == s*s*d`` and ``d`` square-free."""
    s, d = 1, 1
    p = 2
    while p * p <= n:
        while n % (p * p) == 0:
            n //= p * p
            s *= p
        if n % p == 0:
            n //= p
            d *= p
        p += 1
    return s, d * n


class Surd:
    """Exact number ``a + b*sqrt(d)``; ``d`` is square-free and ``d > 1`` unless ``b == 0``."""

    __slots__ = ("a", "b", "d")

    def __init__(self, a: Scalar = 0, b: Scalar = 0, d: int = 1):
        a = as_fraction(a)
        b = as_fraction(b)
        if d <= 0:
            raise ValueError("radicand must be positive")
        s, d = _squarefree_split(int(d))
        b = b * s
        if d == 1:
            a, b = a + b, Fraction(0)
        if b == 0:
            d = 1
        self.a, self.b, self.d = a, b, d

    @classmethod
    def sqrt(cls, value: Scalar) -> "Surd":
        """Exact square root of a nonnegative rational."""
        value = as_fraction(value)
        if value < 0:
            raise ValueError("square root of a negative rational")
        # sqrt(p/q) = sqrt(p*q)/q
        return cls(0, Fraction(1, value.denominator), value.numerator * value.denominator) if value else cls(0)

    def is_rational(self) -> bool:
        return self.b == 0

    def _coerce(self, other) -> "Surd":
        if isinstance(other, Surd):
            if other.b != 0 and self.b != 0 and other.d != self.d:
                raise ValueError(f"mixed radicands sqrt({self.d}) and sqrt({other.d})")
            return other
        return Surd(as_fraction(other))

    def __add__(self, other):
        o = self._coerce(other)
        d = self.d if self.b != 0 else o.d
        return Surd(self.a + o.a, self.b + o.b, d)

    __radd__ = __add__

    def __neg__(self):
        return Surd(-self.a, -self.b, self.d)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = self._coerce(other)
        d = self.d if self.b != 0 else o.d
        return Surd(self.a * o.a + self.b * o.b * d, self.a * o.b + self.b * o.a, d)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Surd):
            if not other.is_rational():
                conj = Surd(other.a, -other.b, other.d)
                norm = other.a * other.a - other.b * other.b * other.d
                return (self * conj) / norm
            other = other.a
        other = as_fraction(other)
        return Surd(self.a / other, self.b / other, self.d)

    def __pow__(self, n: int):
        if not isinstance(n, int) or n < 0:
            return NotImplemented
        out = Surd(1)
        for _ in range(n):
            out = out * self
        return out

    def __rtruediv__(self, other):
        return Surd(as_fraction(other)) / self

    def sign(self) -> int:
        a, b, d = self.a, self.b, self.d
        sa = (a > 0) - (a < 0)
        sb = (b > 0) - (b < 0)
        if sb == 0 or sa == sb:
            return sa or sb
        if sa == 0:
            return sb
        # opposite signs: compare a^2 with b^2 d
        diff = a * a - b * b * d
        if diff == 0:
            return 0
        return sa if diff > 0 else sb

    def __eq__(self, other):
        try:
            return (self - other).sign() == 0
        except (TypeError, ValueError):
            return NotImplemented

    def __hash__(self):
        return hash(self.a) if self.b == 0 else hash((self.a, self.b, self.d))

    def __lt__(self, other):
        return (self - other).sign() < 0

    def __le__(self, other):
        return (self - other).sign() <= 0

    def __gt__(self, other):
        return (self - other).sign() > 0

    def __ge__(self, other):
        return (self - other).sign() >= 0

    def __float__(self):
        return float(self.a) + float(self.b) * math.sqrt(self.d)

    def __repr__(self):
        return f"Surd({self.a!s}, {self.b!s}, {self.d})"

    def __str__(self):
        if self.b == 0:
            return format_rational(self.a)
        root = f"{format_rational(abs(self.b))}*sqrt({self.d})"
        sign = "-" if self.b < 0 else ""
        if self.a == 0:
            return sign + root
        return f"{format_rational(self.a)}{sign or '+'}{root}"


def exact_sign(value) -> int:
    if isinstance(value, Surd):
        return value.sign()
    return (value > 0) - (value < 0)


def simplify(value):
    """Collapse a rational :class:`Surd` to a :class:`Fraction`."""
    if isinstance(value, Surd) and value.is_rational():
        return value.a
    return value


def scaled_power(value: Scalar, scale_sq: Fraction, power: int):
    """``value * scale_sq**(power/2)`` exactly; a :class:`Surd` when ``power`` is odd."""
    scale_sq = as_fraction(scale_sq)
    value = as_fraction(value)
    whole = value * scale_sq ** (power // 2)
    if power % 2 == 0:
        return whole
    return simplify(whole * Surd.sqrt(scale_sq))


def _gcd_all(num: np.ndarray, den: int) -> int:
    return math.gcd(den, *num.tolist()) if num.size else den


class RationalVector:
    """Immutable vector of exact rationals: ``num / den`` elementwise.

    ``num`` is a 1-d numpy array with ``dtype=object`` holding Python ints and
    ``den`` a positive int; the pair is kept in lowest terms.
    """

    __slots__ = ("num", "den")

    def __init__(self, num: np.ndarray, den: int = 1, *, reduce: bool = True):
        if den <= 0:
            raise ValueError("denominator must be positive")
        if reduce:
            g = _gcd_all(num, den)
            if g > 1:
                num = num // g
                den //= g
        self.num = num
        self.den = den

    @classmethod
    def from_values(cls, values: Iterable) -> "RationalVector":
        fr = [as_fraction(v) for v in values]
        den = math.lcm(*(f.denominator for f in fr)) if fr else 1
        num = np.empty(len(fr), dtype=object)
        for i, f in enumerate(fr):
            num[i] = f.numerator * (den // f.denominator)
        return cls(num, den)

    @classmethod
    def from_ints(cls, values, den: int = 1) -> "RationalVector":
        num = np.empty(len(values), dtype=object)
        num[:] = [int(v) for v in values]
        return cls(num, den)

    @classmethod
    def zeros(cls, n: int) -> "RationalVector":
        num = np.empty(n, dtype=object)
        num[:] = 0
        return cls(num, 1, reduce=False)

    @classmethod
    def constant(cls, n: int, value) -> "RationalVector":
        v = as_fraction(value)
        num = np.empty(n, dtype=object)
        num[:] = v.numerator
        return cls(num, v.denominator, reduce=False)

    def __len__(self):
        return len(self.num)

    def __getitem__(self, i) -> Fraction:
        return Fraction(self.num[i], self.den)

    def to_fractions(self) -> list[Fraction]:
        return [Fraction(n, self.den) for n in self.num.tolist()]

    def to_float(self) -> np.ndarray:
        # exact big-int division then rounding; avoids overflow of huge numerators
        return np.array([n / self.den for n in self.num.tolist()], dtype=float)

    def _aligned(self, other: "RationalVector"):
        if len(other) != len(self):
            raise ValueError("length mismatch")
        if self.den == other.den:
            return self.num, other.num, self.den
        den = math.lcm(self.den, other.den)
        return self.num * (den // self.den), other.num * (den // other.den), den

    def __add__(self, other):
        if not isinstance(other, RationalVector):
            other = RationalVector.constant(len(self), other)
        a, b, den = self._aligned(other)
        return RationalVector(a + b, den)

    __radd__ = __add__

    def __sub__(self, other):
        if not isinstance(other, RationalVector):
            other = RationalVector.constant(len(self), other)
        a, b, den = self._aligned(other)
        return RationalVector(a - b, den)

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        return RationalVector(-self.num, self.den, reduce=False)

    def __mul__(self, other):
        if isinstance(other, RationalVector):
            if len(other) != len(self):
                raise ValueError("length mismatch")
            return RationalVector(self.num * other.num, self.den * other.den)
        f = as_fraction(other)
        if f.numerator == 0:
            return RationalVector.zeros(len(self))
        num = self.num * f.numerator if f.numerator != 1 else self.num
        return RationalVector(num, self.den * f.denominator)

    __rmul__ = __mul__

    def gather(self, index: np.ndarray) -> "RationalVector":
        return RationalVector(self.num[index], self.den, reduce=False)

    def weighted(self, weights: np.ndarray) -> "RationalVector":
        """Multiply entrywise by an integer array (object or int dtype)."""
        return RationalVector(self.num * weights, self.den)

    def total(self) -> Fraction:
        return Fraction(int(sum(self.num.tolist())), self.den)

    def dot_ints(self, weights) -> Fraction:
        return Fraction(int(sum(a * b for a, b in zip(self.num.tolist(), weights))), self.den)

    def is_zero(self) -> bool:
        return not any(self.num.tolist())

    def nonzero_indices(self) -> list[int]:
        return [i for i, v in enumerate(self.num.tolist()) if v != 0]

    def constant_value(self):
        """The common value if all entries are equal, else ``None``."""
        vals = self.num.tolist()
        if not vals:
            return Fraction(0)
        first = vals[0]
        if all(v == first for v in vals):
            return Fraction(first, self.den)
        return None

    def __eq__(self, other):
        if not isinstance(other, RationalVector):
            return NotImplemented
        return self.den == other.den and len(self) == len(other) and self.num.tolist() == other.num.tolist()

    def __hash__(self):
        return hash((self.den, tuple(self.num.tolist())))

    def __repr__(self):
        return f"RationalVector({[format_rational(v) for v in self.to_fractions()[:8]]}{'...' if len(self) > 8 else ''})"
