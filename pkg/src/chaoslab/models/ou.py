"""Ornstein-Uhlenbeck operator ``L f = Delta f - x . grad f`` on polynomials over ``R^N``.

Functions are sparse maps ``multi-exponent -> Fraction``.  Integration against
``gamma_N`` is exact: each coordinate contributes ``E[x^(2m)] = (2m-1)!!``.
Hermite polynomials are kept monic (probabilists' ``He_k``) so that all
coefficients stay rational; the orthonormal ``h_k = He_k / sqrt(k!)`` is only
formed at reporting boundaries (see :func:`hermite_norm_sq`).
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache
from itertools import product
from typing import Iterable, Mapping

import numpy as np

from ..rational import as_fraction, format_rational
from .base import MarkovModel, ModelMismatchError, Samples, chunked_samples
from .cube import _neumaier_step

Exponent = tuple[int, ...]


@lru_cache(maxsize=None)
def gaussian_moment(power: int) -> int:
    """``E[Z^power]`` for a standard normal ``Z``."""
    if power % 2:
        return 0
    out = 1
    for j in range(power - 1, 0, -2):
        out *= j
    return out


@lru_cache(maxsize=None)
def hermite_coefficients(k: int) -> tuple[int, ...]:
    """Coefficients (constant term first) of the monic ``He_k``; ``He_{k+1} = x He_k - k He_{k-1}``."""
    if k == 0:
        return (1,)
    prev, cur = [1], [0, 1]
    for j in range(1, k):
        nxt = [0] + cur
        for i, c in enumerate(prev):
            nxt[i] -= j * c
        prev, cur = cur, nxt
    return tuple(cur)


def hermite_norm_sq(multi_index: Iterable[int]) -> int:
    """``int He_k^2 d gamma_N = prod k_i!``."""
    out = 1
    for k in multi_index:
        out *= math.factorial(k)
    return out


class PolyFunction:
    """Polynomial on ``R^N`` with exact rational coefficients; no zero terms are stored."""

    __slots__ = ("N", "terms")

    def __init__(self, N: int, terms: Mapping[Exponent, object] | None = None):
        self.N = N
        clean: dict[Exponent, Fraction] = {}
        for e, c in (terms or {}).items():
            e = tuple(int(v) for v in e)
            if len(e) != N or min(e, default=0) < 0:
                raise ValueError(f"bad exponent {e} for N={N}")
            c = as_fraction(c)
            if c:
                clean[e] = clean.get(e, Fraction(0)) + c
        self.terms = {e: c for e, c in clean.items() if c}

    @classmethod
    def _raw(cls, N: int, terms: dict[Exponent, Fraction]) -> "PolyFunction":
        obj = cls.__new__(cls)
        obj.N = N
        obj.terms = {e: c for e, c in terms.items() if c}
        return obj

    @classmethod
    def constant(cls, N: int, c=1) -> "PolyFunction":
        return cls(N, {(0,) * N: c})

    @classmethod
    def variable(cls, N: int, i: int) -> "PolyFunction":
        """The coordinate ``x_i`` (1-based)."""
        if not 1 <= i <= N:
            raise IndexError(f"coordinate {i} outside 1..{N}")
        e = [0] * N
        e[i - 1] = 1
        return cls(N, {tuple(e): 1})

    @property
    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=-1)

    def _same(self, other):
        if not isinstance(other, PolyFunction) or other.N != self.N:
            raise ModelMismatchError("polynomials on different dimensions")

    def __add__(self, other):
        out = dict(self.terms)
        if isinstance(other, PolyFunction):
            self._same(other)
            items = other.terms.items()
        else:
            items = [((0,) * self.N, as_fraction(other))]
        for e, c in items:
            out[e] = out.get(e, 0) + c
        return PolyFunction._raw(self.N, out)

    __radd__ = __add__

    def __neg__(self):
        return PolyFunction._raw(self.N, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other if isinstance(other, PolyFunction) else -as_fraction(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, PolyFunction):
            self._same(other)
            out: dict[Exponent, Fraction] = {}
            for e1, c1 in self.terms.items():
                for e2, c2 in other.terms.items():
                    e = tuple(a + b for a, b in zip(e1, e2))
                    out[e] = out.get(e, 0) + c1 * c2
            return PolyFunction._raw(self.N, out)
        c = as_fraction(other)
        return PolyFunction._raw(self.N, {e: v * c for e, v in self.terms.items()})

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self * (1 / as_fraction(other))

    def __pow__(self, n: int):
        out = PolyFunction.constant(self.N)
        for _ in range(n):
            out = out * self
        return out

    def __eq__(self, other):
        if isinstance(other, PolyFunction):
            return self.N == other.N and self.terms == other.terms
        return NotImplemented

    def __hash__(self):
        return hash((self.N, tuple(sorted(self.terms.items()))))

    def derivative(self, i: int) -> "PolyFunction":
        """``d/dx_i`` (1-based)."""
        j = i - 1
        out: dict[Exponent, Fraction] = {}
        for e, c in self.terms.items():
            if e[j]:
                ne = e[:j] + (e[j] - 1,) + e[j + 1 :]
                out[ne] = out.get(ne, 0) + c * e[j]
        return PolyFunction._raw(self.N, out)

    def gradient(self) -> list["PolyFunction"]:
        return [self.derivative(i) for i in range(1, self.N + 1)]

    def compose_univariate(self, coeffs: Iterable) -> "PolyFunction":
        """``phi(f)`` for ``phi(y) = sum_j coeffs[j] y^j``."""
        out = PolyFunction(self.N)
        for c in reversed(list(coeffs)):
            out = out * self + as_fraction(c)
        return out

    def compiled(self) -> list[tuple[float, tuple[tuple[int, int], ...]]]:
        """Sparse ``(coefficient, ((coordinate, power), ...))`` list for repeated evaluation."""
        return [
            (float(c), tuple((i, p) for i, p in enumerate(e) if p))
            for e, c in sorted(self.terms.items())
        ]

    def evaluate(self, points: np.ndarray, compiled=None) -> np.ndarray:
        """Float values at the rows of ``points`` (compensated summation over monomials)."""
        points = np.asarray(points, dtype=float)
        n = points.shape[0]
        total = np.zeros(n)
        comp = np.zeros(n)
        cache: dict[tuple[int, int], np.ndarray] = {}
        for c, factors in compiled if compiled is not None else self.compiled():
            term = np.full(n, c)
            for key in factors:
                if key not in cache:
                    cache[key] = points[:, key[0]] ** key[1]
                term = term * cache[key]
            total, comp = _neumaier_step(total, comp, term)
        return total + comp

    def used_variables(self) -> list[int]:
        """0-based coordinates appearing with a positive exponent."""
        return [i for i in range(self.N) if any(e[i] for e in self.terms)]

    def __repr__(self):
        if not self.terms:
            return f"PolyFunction(N={self.N}, 0)"
        parts = []
        for e, c in sorted(self.terms.items()):
            mono = "*".join(f"x{i + 1}^{p}" if p > 1 else f"x{i + 1}" for i, p in enumerate(e) if p)
            parts.append(f"{format_rational(c)}" + (f"*{mono}" if mono else ""))
        return f"PolyFunction(N={self.N}, " + " + ".join(parts) + ")"


def hermite_product(N: int, multi_index: Iterable[int]) -> PolyFunction:
    """``He_{k_1}(x_1) ... He_{k_N}(x_N)`` with monic factors."""
    multi = tuple(multi_index)
    if len(multi) != N or min(multi, default=0) < 0:
        raise IndexError(f"multi-index {multi} invalid for N={N}")
    factors = [hermite_coefficients(k) for k in multi]
    terms: dict[Exponent, Fraction] = {}
    for choice in product(*(range(len(f)) for f in factors)):
        c = 1
        for f, p in zip(factors, choice):
            c *= f[p]
        if c:
            terms[tuple(choice)] = Fraction(c)
    return PolyFunction(N, terms)


class OUModel(MarkovModel):
    """``R^N`` with ``gamma_N`` and the Ornstein-Uhlenbeck generator; a diffusion."""

    tag = "ou"
    is_diffusion = True

    def __init__(self, N: int):
        if N < 1:
            raise ValueError("dimension must be >= 1")
        self.N = N

    def __repr__(self):
        return f"OUModel(N={self.N})"

    def __eq__(self, other):
        return isinstance(other, OUModel) and other.N == self.N

    def __hash__(self):
        return hash(("ou", self.N))

    def check(self, f):
        if not isinstance(f, PolyFunction) or f.N != self.N:
            raise ModelMismatchError(f"{f!r} does not belong to {self!r}")
        return f

    def constant(self, c=1) -> PolyFunction:
        return PolyFunction.constant(self.N, c)

    def coordinate(self, i: int) -> PolyFunction:
        return PolyFunction.variable(self.N, i)

    def polynomial(self, terms: Mapping[Exponent, object]) -> PolyFunction:
        return PolyFunction(self.N, terms)

    def eigenbasis_element(self, multi_index: Iterable[int]) -> PolyFunction:
        """Monic Hermite product; eigenvalue ``|multi_index|``, squared norm :func:`hermite_norm_sq`."""
        return hermite_product(self.N, multi_index)

    def apply_L(self, f: PolyFunction) -> PolyFunction:
        self.check(f)
        out: dict[Exponent, Fraction] = {}
        for e, c in f.terms.items():
            deg = sum(e)
            if deg:
                out[e] = out.get(e, 0) - deg * c
            for j, p in enumerate(e):
                if p >= 2:
                    ne = e[:j] + (p - 2,) + e[j + 1 :]
                    out[ne] = out.get(ne, 0) + c * p * (p - 1)
        return PolyFunction._raw(self.N, out)

    def integrate(self, f: PolyFunction) -> Fraction:
        self.check(f)
        total = Fraction(0)
        for e, c in f.terms.items():
            m = 1
            for p in e:
                m *= gaussian_moment(p)
                if not m:
                    break
            if m:
                total += c * m
        return total

    def is_zero(self, f) -> bool:
        self.check(f)
        return not f.terms

    def constant_value(self, f):
        self.check(f)
        zero = (0,) * self.N
        if all(e == zero for e in f.terms):
            return f.terms.get(zero, Fraction(0))
        return None

    def _ratio(self, g, f):
        if not f.terms:
            return None
        e, c = next(iter(f.terms.items()))
        lam = g.terms.get(e, Fraction(0)) / c
        return lam if g == f * lam else None

    def gradient_inner(self, f: PolyFunction, g: PolyFunction) -> PolyFunction:
        """``grad f . grad g`` assembled structurally (a sum of squares when ``f is g``)."""
        self.check(f)
        self.check(g)
        out = PolyFunction(self.N)
        for i in range(1, self.N + 1):
            df = f.derivative(i)
            if df.terms:
                out = out + df * (df if g is f else g.derivative(i))
        return out

    def derivative_norm_sq(self, f: PolyFunction, order: int) -> PolyFunction:
        """``|nabla^order f|^2 = sum over ordered index tuples of the squared partial derivative``."""
        self.check(f)
        level = {(): f}
        for _ in range(order):
            nxt = {}
            for idx, g in level.items():
                for i in range(1, self.N + 1):
                    d = g.derivative(i)
                    if d.terms:
                        nxt[idx + (i,)] = d
            level = nxt
        out = PolyFunction(self.N)
        for g in level.values():
            out = out + g * g
        return out

    def sample(self, f: PolyFunction, n: int, seed: int, threads: int = 1, stream: int = 0) -> Samples:
        """``f(X)`` for ``X ~ gamma_N``; only coordinates that ``f`` uses are drawn (they are independent)."""
        self.check(f)
        used = f.used_variables()
        reduced = PolyFunction._raw(len(used), {tuple(e[i] for i in used): c for e, c in f.terms.items()})
        width = max(1, len(used))
        chunk = int(min(1 << 16, max(1 << 12, (1 << 23) // width)))
        compiled = reduced.compiled()

        def draw(rng, size):
            pts = rng.standard_normal((size, width))
            if not used:
                return np.full(size, float(f.terms.get((0,) * self.N, 0))), 0
            return reduced.evaluate(pts, compiled), 0

        return chunked_samples(n, seed, draw, threads=threads, stream=stream, chunk_size=chunk)

    def dump(self, f: PolyFunction) -> str:
        """``e_1,...,e_N<TAB>p/q`` lines sorted by multi-exponent."""
        self.check(f)
        return "".join(f"{','.join(map(str, e))}\t{format_rational(c)}\n" for e, c in sorted(f.terms.items()))
