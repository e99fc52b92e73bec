"""Spectra of ``-L`` and the spectral polynomials built from them.

Everything here is exact: eigenvalues are :class:`fractions.Fraction`, and
polynomials are sparse maps ``exponent -> Fraction``.

For a spectrum ``0 = l_0 < l_1 < ...``:

* ``Q_k(X) = (X - l_0) ... (X - l_{k-1})``
* ``R_{k+1}(X) = (Q_{k+1}(X) - Q'_{k+1}(0) X) / X**2``
* ``T_{k+1}(X) = R_{k+1}(X + l_k) - R_{k+1}(l_k)``
* ``pi_k = l_1 ... l_k`` with ``pi_0 = 1``
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .rational import as_fraction, format_rational, parse_rational


class SpectrumError(ValueError):
    """Invalid spectrum, or a request beyond the eigenvalues it provides."""


class ConsistencyError(RuntimeError):
    """An exact algebraic step produced an impossible result (a bug, not bad input)."""


class RationalPoly:
    """Univariate polynomial with exact rational coefficients.

    >>> p = RationalPoly({2: 1, 1: -3})
    >>> p(Fraction(1, 2))
    Fraction(-5, 4)
    """

    __slots__ = ("_coeffs",)

    def __init__(self, coeffs: Mapping[int, object] | Sequence | None = None):
        if coeffs is None:
            items: Iterable = ()
        elif isinstance(coeffs, Mapping):
            items = coeffs.items()
        else:
            items = enumerate(coeffs)
        clean = {}
        for e, c in items:
            if e < 0:
                raise ValueError("negative exponent")
            c = as_fraction(c)
            if c:
                clean[int(e)] = clean.get(int(e), Fraction(0)) + c
        self._coeffs = {e: c for e, c in clean.items() if c}

    @classmethod
    def monomial(cls, exponent: int, coeff=1) -> "RationalPoly":
        return cls({exponent: coeff})

    @classmethod
    def from_roots(cls, roots: Iterable) -> "RationalPoly":
        p = cls({0: 1})
        for r in roots:
            p = p * cls({1: 1, 0: -as_fraction(r)})
        return p

    @property
    def coefficients(self) -> dict[int, Fraction]:
        return dict(self._coeffs)

    @property
    def degree(self) -> int:
        """Degree; ``-1`` for the zero polynomial."""
        return max(self._coeffs, default=-1)

    def coeff(self, exponent: int) -> Fraction:
        return self._coeffs.get(exponent, Fraction(0))

    def is_zero(self) -> bool:
        return not self._coeffs

    def __call__(self, x) -> Fraction:
        x = as_fraction(x)
        acc = Fraction(0)
        for e in range(self.degree, -1, -1):
            acc = acc * x + self._coeffs.get(e, 0)
        return acc

    def __add__(self, other):
        other = other if isinstance(other, RationalPoly) else RationalPoly({0: other})
        out = dict(self._coeffs)
        for e, c in other._coeffs.items():
            out[e] = out.get(e, 0) + c
        return RationalPoly(out)

    __radd__ = __add__

    def __neg__(self):
        return RationalPoly({e: -c for e, c in self._coeffs.items()})

    def __sub__(self, other):
        return self + (-other if isinstance(other, RationalPoly) else -as_fraction(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, RationalPoly):
            c = as_fraction(other)
            return RationalPoly({e: v * c for e, v in self._coeffs.items()})
        out: dict[int, Fraction] = {}
        for e1, c1 in self._coeffs.items():
            for e2, c2 in other._coeffs.items():
                out[e1 + e2] = out.get(e1 + e2, 0) + c1 * c2
        return RationalPoly(out)

    __rmul__ = __mul__

    def __eq__(self, other):
        if isinstance(other, RationalPoly):
            return self._coeffs == other._coeffs
        try:
            return self._coeffs == RationalPoly({0: other})._coeffs
        except TypeError:
            return NotImplemented

    def __hash__(self):
        return hash(tuple(sorted(self._coeffs.items())))

    def divmod(self, divisor: "RationalPoly") -> tuple["RationalPoly", "RationalPoly"]:
        """Exact long division; returns ``(quotient, remainder)``."""
        if divisor.is_zero():
            raise ZeroDivisionError("polynomial division by zero")
        rem = dict(self._coeffs)
        quo: dict[int, Fraction] = {}
        dd, lead = divisor.degree, divisor._coeffs[divisor.degree]
        while rem and max(rem) >= dd:
            top = max(rem)
            c = rem[top] / lead
            quo[top - dd] = c
            for e, v in divisor._coeffs.items():
                k = e + top - dd
                rem[k] = rem.get(k, 0) - c * v
                if not rem[k]:
                    del rem[k]
        return RationalPoly(quo), RationalPoly(rem)

    def shift(self, a) -> "RationalPoly":
        """The polynomial ``X -> self(X + a)`` (Horner in the polynomial ring)."""
        step = RationalPoly({1: 1, 0: as_fraction(a)})
        acc = RationalPoly()
        for e in range(self.degree, -1, -1):
            acc = acc * step + self._coeffs.get(e, 0)
        return acc

    def derivative(self) -> "RationalPoly":
        return RationalPoly({e - 1: e * c for e, c in self._coeffs.items() if e})

    def __repr__(self):
        if not self._coeffs:
            return "RationalPoly(0)"
        terms = [f"{format_rational(c)}*X^{e}" for e, c in sorted(self._coeffs.items(), reverse=True)]
        return "RationalPoly(" + " + ".join(terms) + ")"


@dataclass(frozen=True)
class Spectrum:
    """Initial segment of the point spectrum ``0 = l_0 < l_1 < ...`` of ``-L``.

    Either an explicit finite list, or the rule ``l_n = n`` (``natural=True``)
    which generates entries on demand.
    """

    eigenvalues: tuple[Fraction, ...] = ()
    natural: bool = False

    def __post_init__(self):
        if self.natural:
            return
        vals = tuple(as_fraction(v) for v in self.eigenvalues)
        object.__setattr__(self, "eigenvalues", vals)
        if not vals or vals[0] != 0:
            raise SpectrumError("spectrum must start with lambda_0 = 0")
        for i in range(len(vals) - 1):
            if not vals[i] < vals[i + 1]:
                raise SpectrumError(f"spectrum not strictly increasing at index {i + 1}")

    @classmethod
    def nat(cls) -> "Spectrum":
        return cls(natural=True)

    @classmethod
    def of(cls, values: Iterable) -> "Spectrum":
        return cls(tuple(values))

    @property
    def size(self) -> int | None:
        """Number of available eigenvalues, ``None`` when unbounded."""
        return None if self.natural else len(self.eigenvalues)

    def has(self, n: int) -> bool:
        return self.natural or n < len(self.eigenvalues)

    def __getitem__(self, n: int) -> Fraction:
        if n < 0:
            raise IndexError(n)
        if self.natural:
            return Fraction(n)
        if n >= len(self.eigenvalues):
            raise SpectrumError(f"spectrum provides only {len(self.eigenvalues)} eigenvalues; lambda_{n} requested")
        return self.eigenvalues[n]

    def prefix(self, count: int) -> list[Fraction]:
        return [self[i] for i in range(count)]

    def __str__(self):
        if self.natural:
            return "nat"
        return "[" + ", ".join(format_rational(v).removesuffix("/1") for v in self.eigenvalues) + "]"


_SPECTRUM_LINE = re.compile(r"^\s*(?:spectrum\s*=\s*)?(.*?)\s*$")


def parse_spectrum(text: str) -> Spectrum:
    """Parse ``spectrum = nat`` or ``spectrum = [0, 1/2, 3/2]`` (the key is optional)."""
    body = _SPECTRUM_LINE.match(text).group(1)
    if body == "nat":
        return Spectrum.nat()
    if not (body.startswith("[") and body.endswith("]")):
        raise SpectrumError(f"cannot parse spectrum {text!r}: expected 'nat' or '[...]'")
    inner = body[1:-1].strip()
    if not inner:
        raise SpectrumError("empty spectrum list")
    try:
        values = [parse_rational(tok) for tok in inner.split(",")]
    except ValueError as exc:
        raise SpectrumError(str(exc)) from None
    return Spectrum.of(values)


def _require(spectrum: Spectrum, count: int, what: str):
    if not spectrum.has(count - 1):
        raise SpectrumError(f"{what} needs {count} eigenvalues; spectrum has {spectrum.size}")


def build_Q(spectrum: Spectrum, k: int) -> RationalPoly:
    """Monic ``Q_k`` with roots ``l_0, ..., l_{k-1}``; ``Q_0 = 1``."""
    if k < 0:
        raise SpectrumError("k must be a natural number")
    if k:
        _require(spectrum, k, f"Q_{k}")
    return RationalPoly.from_roots(spectrum.prefix(k))


def build_R(spectrum: Spectrum, k: int) -> RationalPoly:
    """``R_{k+1}``, of degree ``k-1``; requires ``k >= 1``."""
    if k < 1:
        raise SpectrumError("R_{k+1} is defined for k >= 1")
    q = build_Q(spectrum, k + 1)
    numerator = q - RationalPoly({1: q.coeff(1)})
    quotient, remainder = numerator.divmod(RationalPoly({2: 1}))
    if not remainder.is_zero():
        raise ConsistencyError(f"X^2 does not divide Q_{k + 1} minus its linear part")
    return quotient


def build_T(spectrum: Spectrum, k: int) -> RationalPoly:
    """``T_{k+1}(X) = R_{k+1}(X + l_k) - R_{k+1}(l_k)``; vanishes at 0."""
    r = build_R(spectrum, k)
    lam_k = spectrum[k]
    return r.shift(lam_k) - r(lam_k)


def pi_k(spectrum: Spectrum, k: int) -> Fraction:
    if k < 0:
        raise SpectrumError("k must be a natural number")
    if k:
        _require(spectrum, k + 1, f"pi_{k}")
    out = Fraction(1)
    for i in range(1, k + 1):
        out *= spectrum[i]
    return out


@dataclass(frozen=True)
class SpectralConditionReport:
    """Outcome of checking ``(-1)^k T_{k+1}(-l_n/2) <= 0`` for ``n = 0..n_max``.

    ``truncated`` is true whenever the spectrum extends past ``n_max`` (always
    for ``nat``): the check then covers only a finite prefix of the condition.
    """

    degree: int
    n_max: int
    values: tuple[Fraction, ...]
    violations: tuple[tuple[int, Fraction], ...]
    truncated: bool
    spectrum: Spectrum = field(default_factory=Spectrum.nat)

    @property
    def checked_indices(self) -> range:
        return range(self.n_max + 1)

    @property
    def holds(self) -> bool:
        return not self.violations


def check_spectral_condition(spectrum: Spectrum, k: int, n_max: int) -> SpectralConditionReport:
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    _require(spectrum, max(k + 1, n_max + 1), "spectral check")
    t = build_T(spectrum, k)
    sign = -1 if k % 2 else 1
    values = tuple(sign * t(-spectrum[n] / 2) for n in range(n_max + 1))
    violations = tuple((n, v) for n, v in enumerate(values) if v > 0)
    truncated = spectrum.natural or n_max + 1 < len(spectrum.eigenvalues)
    return SpectralConditionReport(k, n_max, values, violations, truncated, spectrum)


def consistency_residuals(spectrum: Spectrum, k: int) -> tuple[Fraction, Fraction]:
    """Residuals of ``Q'_{k+1}(0) = (-1)^k pi_k`` and ``R_{k+1}(l_k) = (-1)^{k+1} pi_{k-1}``."""
    q = build_Q(spectrum, k + 1)
    r = build_R(spectrum, k)
    s = -1 if k % 2 else 1
    return q.coeff(1) - s * pi_k(spectrum, k), r(spectrum[k]) + s * pi_k(spectrum, k - 1)
