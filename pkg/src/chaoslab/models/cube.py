"""Discrete cube ``{-1,+1}^N`` with uniform measure and ``L f = 1/2 sum_i D_i f``.

Point ``idx`` in ``range(2**N)`` has ``x_{i+1} = -1`` exactly when bit ``i`` of
``idx`` is set.  Two function representations share the model:

* :class:`CubeFunction` stores all ``2**N`` values (exact enumeration, N <= ~20);
* :class:`WalshPolynomial` stores sparse Walsh coefficients and works for any N.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Mapping

import numpy as np

from ..rational import RationalVector, as_fraction, format_rational
from .base import MarkovModel, ModelMismatchError, Samples, chunked_samples

MAX_ENUMERATION_DIM = 22


@lru_cache(maxsize=None)
def _flip_indices(N: int) -> tuple[np.ndarray, ...]:
    base = np.arange(1 << N, dtype=np.int64)
    return tuple(base ^ (1 << i) for i in range(N))


@lru_cache(maxsize=None)
def _signs(N: int) -> np.ndarray:
    """``(2**N, N)`` int8 matrix of coordinates ``x_i`` at every point."""
    idx = np.arange(1 << N, dtype=np.int64)[:, None]
    bits = (idx >> np.arange(N, dtype=np.int64)[None, :]) & 1
    return (1 - 2 * bits).astype(np.int8)


def _mask_of(A: Iterable[int], N: int) -> int:
    mask = 0
    for i in A:
        if not 1 <= i <= N:
            raise IndexError(f"coordinate {i} outside 1..{N}")
        if mask & (1 << (i - 1)):
            raise ValueError(f"repeated coordinate {i}")
        mask |= 1 << (i - 1)
    return mask


def _hadamard(num: np.ndarray) -> np.ndarray:
    """Unnormalised Walsh-Hadamard transform (its own inverse up to ``2**N``)."""
    n = len(num)
    out = num.copy()
    h = 1
    while h < n:
        view = out.reshape(-1, 2, h)
        a = view[:, 0, :].copy()
        b = view[:, 1, :]
        view[:, 0, :] = a + b
        view[:, 1, :] = a - b
        h *= 2
    return out


class CubeFunction:
    """Exact function on ``{-1,+1}^N`` given by its value vector."""

    __slots__ = ("N", "vec")

    def __init__(self, N: int, vec: RationalVector):
        if len(vec) != 1 << N:
            raise ValueError(f"expected {1 << N} values for N={N}, got {len(vec)}")
        self.N = N
        self.vec = vec

    @classmethod
    def from_values(cls, N: int, values: Iterable) -> "CubeFunction":
        return cls(N, RationalVector.from_values(values))

    @classmethod
    def from_callable(cls, N: int, fn: Callable[[tuple[int, ...]], object]) -> "CubeFunction":
        pts = _signs(N).tolist()
        return cls.from_values(N, (fn(tuple(p)) for p in pts))

    @classmethod
    def from_walsh(cls, N: int, coefficients: Mapping[int, object]) -> "CubeFunction":
        """Materialise ``sum_A a_A W_A`` (keys are bit masks of ``A``)."""
        coeffs = {m: as_fraction(c) for m, c in coefficients.items() if c}
        den = math.lcm(*(c.denominator for c in coeffs.values())) if coeffs else 1
        num = np.empty(1 << N, dtype=object)
        num[:] = 0
        for m, c in coeffs.items():
            if m >> N:
                raise IndexError(f"Walsh mask {m:#x} exceeds dimension {N}")
            num[m] = c.numerator * (den // c.denominator)
        return cls(N, RationalVector(_hadamard(num), den))

    @property
    def values(self) -> list[Fraction]:
        return self.vec.to_fractions()

    def __getitem__(self, idx: int) -> Fraction:
        return self.vec[idx]

    def _same(self, other: "CubeFunction"):
        if not isinstance(other, CubeFunction) or other.N != self.N:
            raise ModelMismatchError("cube functions of different dimension")

    def __add__(self, other):
        if isinstance(other, CubeFunction):
            self._same(other)
            return CubeFunction(self.N, self.vec + other.vec)
        return CubeFunction(self.N, self.vec + as_fraction(other))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, CubeFunction):
            self._same(other)
            return CubeFunction(self.N, self.vec - other.vec)
        return CubeFunction(self.N, self.vec - as_fraction(other))

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        return CubeFunction(self.N, -self.vec)

    def __mul__(self, other):
        if isinstance(other, CubeFunction):
            self._same(other)
            return CubeFunction(self.N, self.vec * other.vec)
        if isinstance(other, WalshPolynomial):
            return NotImplemented
        return CubeFunction(self.N, self.vec * as_fraction(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self * (1 / as_fraction(other))

    def __eq__(self, other):
        if isinstance(other, CubeFunction):
            return self.N == other.N and self.vec == other.vec
        return NotImplemented

    def __hash__(self):
        return hash((self.N, self.vec))

    def walsh_coefficients(self) -> dict[int, Fraction]:
        """Exact ``<f, W_A>`` for every mask ``A`` with a nonzero coefficient."""
        raw = _hadamard(self.vec.num)
        scale = self.vec.den << self.N
        return {m: Fraction(v, scale) for m, v in enumerate(raw.tolist()) if v}

    def to_walsh(self) -> "WalshPolynomial":
        return WalshPolynomial(self.N, self.walsh_coefficients())

    def __repr__(self):
        return f"CubeFunction(N={self.N}, {self.vec!r})"


class WalshPolynomial:
    """Sparse ``sum_A a_A W_A`` on ``{-1,+1}^N``; masks are Python ints (any N)."""

    __slots__ = ("N", "coeffs")

    def __init__(self, N: int, coeffs: Mapping[int, object] | None = None):
        self.N = N
        clean = {}
        for m, c in (coeffs or {}).items():
            c = as_fraction(c)
            if c:
                if m < 0 or m >> N:
                    raise IndexError(f"Walsh mask {m:#x} exceeds dimension {N}")
                clean[m] = c
        self.coeffs = clean

    @classmethod
    def from_subsets(cls, N: int, coeffs: Mapping[tuple[int, ...], object]) -> "WalshPolynomial":
        return cls(N, {_mask_of(A, N): c for A, c in coeffs.items()})

    def _same(self, other):
        if not isinstance(other, WalshPolynomial) or other.N != self.N:
            raise ModelMismatchError("Walsh polynomials of different dimension")

    def __add__(self, other):
        out = dict(self.coeffs)
        if isinstance(other, WalshPolynomial):
            self._same(other)
            for m, c in other.coeffs.items():
                out[m] = out.get(m, 0) + c
        else:
            out[0] = out.get(0, 0) + as_fraction(other)
        return WalshPolynomial(self.N, out)

    __radd__ = __add__

    def __neg__(self):
        return WalshPolynomial(self.N, {m: -c for m, c in self.coeffs.items()})

    def __sub__(self, other):
        return self + (-other if isinstance(other, WalshPolynomial) else -as_fraction(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, WalshPolynomial):
            self._same(other)
            out: dict[int, Fraction] = {}
            for m1, c1 in self.coeffs.items():
                for m2, c2 in other.coeffs.items():
                    m = m1 ^ m2
                    out[m] = out.get(m, 0) + c1 * c2
            return WalshPolynomial(self.N, out)
        c = as_fraction(other)
        return WalshPolynomial(self.N, {m: v * c for m, v in self.coeffs.items()})

    __rmul__ = __mul__

    def __eq__(self, other):
        if isinstance(other, WalshPolynomial):
            return self.N == other.N and self.coeffs == other.coeffs
        return NotImplemented

    def __hash__(self):
        return hash((self.N, tuple(sorted(self.coeffs.items()))))

    @property
    def degree(self) -> int:
        return max((bin(m).count("1") for m in self.coeffs), default=-1)

    def squared_norm(self) -> Fraction:
        """``int f^2 dmu`` by Parseval."""
        return sum((c * c for c in self.coeffs.values()), Fraction(0))

    def to_function(self) -> CubeFunction:
        if self.N > MAX_ENUMERATION_DIM:
            raise ValueError(f"N={self.N} too large for value enumeration")
        return CubeFunction.from_walsh(self.N, self.coeffs)

    def evaluate(self, signs: np.ndarray) -> np.ndarray:
        """Float values at the rows of a ``(n, N)`` matrix of +-1 entries."""
        out = np.zeros(signs.shape[0])
        comp = np.zeros(signs.shape[0])
        for m, c in sorted(self.coeffs.items()):
            term = np.full(signs.shape[0], float(c))
            i = 0
            while m:
                if m & 1:
                    term = term * signs[:, i]
                m >>= 1
                i += 1
            out, comp = _neumaier_step(out, comp, term)
        return out + comp

    def __repr__(self):
        return f"WalshPolynomial(N={self.N}, {len(self.coeffs)} terms)"


def _neumaier_step(total: np.ndarray, comp: np.ndarray, term: np.ndarray):
    t = total + term
    big = np.abs(total) >= np.abs(term)
    comp = comp + np.where(big, (total - t) + term, (term - t) + total)
    return t, comp


class CubeModel(MarkovModel):
    """``{-1,+1}^N``, uniform ``mu``, ``L f = 1/2 sum_i (f(tau_i x) - f(x))``; not a diffusion."""

    tag = "cube"
    is_diffusion = False

    def __init__(self, N: int):
        if N < 1:
            raise ValueError("dimension must be >= 1")
        self.N = N

    def __repr__(self):
        return f"CubeModel(N={self.N})"

    def __eq__(self, other):
        return isinstance(other, CubeModel) and other.N == self.N

    def __hash__(self):
        return hash(("cube", self.N))

    def check(self, f):
        if not isinstance(f, (CubeFunction, WalshPolynomial)) or f.N != self.N:
            raise ModelMismatchError(f"{f!r} does not belong to {self!r}")
        return f

    # -- construction -------------------------------------------------------
    def constant(self, c=1):
        return CubeFunction(self.N, RationalVector.constant(1 << self.N, c))

    def coordinate(self, i: int) -> CubeFunction:
        return self.eigenbasis_element((i,))

    def eigenbasis_element(self, A: Iterable[int]) -> CubeFunction:
        """Walsh function ``W_A = prod_{i in A} x_i`` (1-based ``A``); eigenvalue ``|A|``."""
        mask = _mask_of(A, self.N)
        return CubeFunction.from_walsh(self.N, {mask: 1})

    def function(self, fn: Callable[[tuple[int, ...]], object]) -> CubeFunction:
        return CubeFunction.from_callable(self.N, fn)

    # -- operator -----------------------------------------------------------
    def apply_L(self, f):
        self.check(f)
        if isinstance(f, WalshPolynomial):
            return WalshPolynomial(self.N, {m: -bin(m).count("1") * c for m, c in f.coeffs.items()})
        num = f.vec.num
        acc = -self.N * num
        for flip in _flip_indices(self.N):
            acc = acc + num[flip]
        return CubeFunction(self.N, RationalVector(acc, 2 * f.vec.den))

    def integrate(self, f) -> Fraction:
        self.check(f)
        if isinstance(f, WalshPolynomial):
            return f.coeffs.get(0, Fraction(0))
        return f.vec.total() / (1 << self.N)

    def is_zero(self, f) -> bool:
        self.check(f)
        if isinstance(f, WalshPolynomial):
            return not f.coeffs
        return f.vec.is_zero()

    def constant_value(self, f):
        self.check(f)
        if isinstance(f, WalshPolynomial):
            if all(m == 0 for m in f.coeffs):
                return f.coeffs.get(0, Fraction(0))
            return None
        return f.vec.constant_value()

    def _ratio(self, g, f):
        if isinstance(f, WalshPolynomial):
            if not f.coeffs:
                return None
            m, c = next(iter(f.coeffs.items()))
            lam = g.coeffs.get(m, Fraction(0)) / c
        else:
            nz = f.vec.nonzero_indices()
            if not nz:
                return None
            lam = g[nz[0]] / f[nz[0]]
        return lam if g == f * lam else None

    def min_value(self, f) -> Fraction:
        self.check(f)
        if isinstance(f, WalshPolynomial):
            f = f.to_function()
        return Fraction(min(f.vec.num.tolist()), f.vec.den)

    # -- distributions --------------------------------------------------------
    def atoms(self, f) -> list[tuple[Fraction, Fraction]]:
        """Exact law of ``f``: sorted ``(value, probability)`` pairs."""
        self.check(f)
        if isinstance(f, WalshPolynomial):
            f = f.to_function()
        counts: dict[int, int] = {}
        for v in f.vec.num.tolist():
            counts[v] = counts.get(v, 0) + 1
        total = 1 << self.N
        return [(Fraction(v, f.vec.den), Fraction(c, total)) for v, c in sorted(counts.items())]

    def sample(self, f, n: int, seed: int, threads: int = 1, stream: int = 0) -> Samples:
        """Draw ``f(X)`` for uniform ``X``; exact enumeration via :meth:`atoms` is preferred for small N."""
        self.check(f)
        if isinstance(f, CubeFunction):
            table = f.vec.to_float()

            def draw(rng, size):
                idx = rng.integers(0, 1 << self.N, size=size)
                return table[idx], 0

        else:

            def draw(rng, size):
                signs = rng.integers(0, 2, size=(size, self.N), dtype=np.int8) * 2 - 1
                return f.evaluate(signs), 0

        return chunked_samples(n, seed, draw, threads=threads, stream=stream)

    # -- dump -----------------------------------------------------------------
    def dump(self, f) -> str:
        """``index<TAB>p/q`` lines sorted by point index (hex bit pattern)."""
        self.check(f)
        if isinstance(f, WalshPolynomial):
            f = f.to_function()
        width = max(1, (self.N + 3) // 4)
        return "".join(f"{i:0{width}x}\t{format_rational(v)}\n" for i, v in enumerate(f.values))
