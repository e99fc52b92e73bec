"""One-dimensional Poisson model on a truncated lattice ``{0, ..., M}``.

``L f(j) = theta (f(j+1) - f(j)) - j (f(j) - f(j-1))`` with ``f(-1) = 0``.

A :class:`PoissonFunction` stores exact values on ``{0..M}`` together with
two pieces of provenance:

``zero_tail``
    the represented function on N vanishes above ``M`` (finitely supported
    data).  Then ``L`` is computed exactly, using ``f(M+1) = 0``.
``exact_below``
    values at indices ``>= exact_below`` are boundary-contaminated: they were
    computed from an unknown ``f(M+1)``.  Every application of ``L`` to a
    function without a zero tail moves this marker down by one.

Integrals use the weights ``theta^j / j!`` normalised over ``{0..M}`` and
report a rigorous bound on the neglected relative tail mass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

import numpy as np

from ..rational import RationalVector, as_fraction, format_rational
from .base import MarkovModel, ModelMismatchError, Samples, chunked_samples

DEFAULT_TAIL = Fraction(1, 10**30)


class BoundaryContaminationError(ValueError):
    """An integrand reaches the truncation boundary, so its integral is not trustworthy."""


class PoissonFunction:
    __slots__ = ("theta", "vec", "exact_below", "zero_tail")

    def __init__(self, theta, vec: RationalVector, exact_below: int | None = None, zero_tail: bool = True):
        self.theta = as_fraction(theta)
        self.vec = vec
        top = len(vec)
        self.exact_below = top if exact_below is None else max(0, min(exact_below, top))
        self.zero_tail = zero_tail

    @property
    def M(self) -> int:
        return len(self.vec) - 1

    @property
    def values(self) -> list[Fraction]:
        return self.vec.to_fractions()

    def __getitem__(self, j: int) -> Fraction:
        return self.vec[j]

    def _same(self, other: "PoissonFunction"):
        if not isinstance(other, PoissonFunction) or other.theta != self.theta or other.M != self.M:
            raise ModelMismatchError("Poisson functions with different theta or truncation")

    def _exact_zero(self) -> np.ndarray:
        zero = np.array([v == 0 for v in self.vec.num.tolist()], dtype=bool)
        zero[self.exact_below :] = False
        return zero

    def __add__(self, other):
        if isinstance(other, PoissonFunction):
            self._same(other)
            return PoissonFunction(
                self.theta,
                self.vec + other.vec,
                min(self.exact_below, other.exact_below),
                self.zero_tail and other.zero_tail,
            )
        c = as_fraction(other)
        return PoissonFunction(self.theta, self.vec + c, self.exact_below, self.zero_tail and c == 0)

    __radd__ = __add__

    def __neg__(self):
        return PoissonFunction(self.theta, -self.vec, self.exact_below, self.zero_tail)

    def __sub__(self, other):
        return self + (-other if isinstance(other, PoissonFunction) else -as_fraction(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, PoissonFunction):
            self._same(other)
            n = len(self.vec)
            exact = np.zeros(n, dtype=bool)
            exact[: min(self.exact_below, other.exact_below)] = True
            exact |= self._exact_zero() | other._exact_zero()
            bad = np.flatnonzero(~exact)
            eb = int(bad[0]) if bad.size else n
            return PoissonFunction(self.theta, self.vec * other.vec, eb, self.zero_tail or other.zero_tail)
        c = as_fraction(other)
        return PoissonFunction(self.theta, self.vec * c, self.exact_below, self.zero_tail or c == 0)

    __rmul__ = __mul__

    def __eq__(self, other):
        if isinstance(other, PoissonFunction):
            return self.theta == other.theta and self.vec == other.vec
        return NotImplemented

    def __hash__(self):
        return hash((self.theta, self.vec))

    def __repr__(self):
        return (
            f"PoissonFunction(theta={self.theta}, M={self.M}, exact_below={self.exact_below}, "
            f"zero_tail={self.zero_tail}, {self.vec!r})"
        )


@dataclass(frozen=True)
class PoissonIntegral:
    """Truncated-normalised integral plus the relative tail mass it ignores."""

    value: Fraction
    tail_bound: Fraction
    touches_boundary: bool


def _tail_bound(theta: Fraction, M: int, weight_top: Fraction) -> Fraction:
    """Upper bound for ``sum_{j > M} theta^j / j!`` given ``weight_top = theta^M / M!``."""
    nxt = weight_top * theta / (M + 1)
    ratio = theta / (M + 2)
    if ratio >= 1:
        raise ValueError(f"truncation M={M} too small for theta={theta}")
    return nxt / (1 - ratio)


def default_truncation(theta, tol: Fraction = DEFAULT_TAIL) -> int:
    """Smallest ``M`` whose relative tail weight beyond ``M`` is below ``tol``."""
    theta = as_fraction(theta)
    if theta <= 0:
        raise ValueError("theta must be positive")
    w = Fraction(1)
    z = Fraction(1)
    M = 0
    while True:
        if theta < M + 2 and _tail_bound(theta, M, w) / z < tol:
            return M
        M += 1
        w = w * theta / M
        z += w


class PoissonModel(MarkovModel):
    """Poisson(theta) law on N with the birth-death generator; not a diffusion."""

    tag = "poisson"
    is_diffusion = False

    def __init__(self, theta=1, M: int | None = None):
        self.theta = as_fraction(theta)
        if self.theta <= 0:
            raise ValueError("theta must be positive")
        self.M = default_truncation(self.theta) if M is None else int(M)
        if self.M < 2:
            raise ValueError("truncation must be at least 2")
        a, b = self.theta.numerator, self.theta.denominator
        fact_M = math.factorial(self.M)
        # theta^j / j! = W_j / (b^M M!)
        self._weights = [a**j * b ** (self.M - j) * (fact_M // math.factorial(j)) for j in range(self.M + 1)]
        self._weight_total = sum(self._weights)
        w_top = self.theta**self.M / fact_M
        z = Fraction(self._weight_total, b**self.M * fact_M)
        self.tail_bound = _tail_bound(self.theta, self.M, w_top) / z
        self._j = np.empty(self.M + 1, dtype=object)
        self._j[:] = list(range(self.M + 1))

    @property
    def N(self) -> int:
        return 1

    def __repr__(self):
        return f"PoissonModel(theta={self.theta}, M={self.M})"

    def __eq__(self, other):
        return isinstance(other, PoissonModel) and (other.theta, other.M) == (self.theta, self.M)

    def __hash__(self):
        return hash(("poisson", self.theta, self.M))

    def check(self, f):
        if not isinstance(f, PoissonFunction) or f.theta != self.theta or f.M != self.M:
            raise ModelMismatchError(f"{f!r} does not belong to {self!r}")
        return f

    # -- construction -------------------------------------------------------
    def function(self, values: Iterable) -> PoissonFunction:
        """Finitely supported function: the given leading values, zero elsewhere on N."""
        vals = [as_fraction(v) for v in values]
        if len(vals) > self.M + 1:
            raise ValueError(f"{len(vals)} values exceed truncation M={self.M}")
        vals += [Fraction(0)] * (self.M + 1 - len(vals))
        return PoissonFunction(self.theta, RationalVector.from_values(vals), zero_tail=True)

    def polynomial(self, coeffs: Iterable) -> PoissonFunction:
        """``sum_i coeffs[i] j^i`` sampled on the lattice; its tail above ``M`` is not zero."""
        cs = [as_fraction(c) for c in coeffs]
        vals = [sum((c * j**i for i, c in enumerate(cs)), Fraction(0)) for j in range(self.M + 1)]
        return PoissonFunction(self.theta, RationalVector.from_values(vals), zero_tail=not any(cs))

    def constant(self, c=1) -> PoissonFunction:
        return self.polynomial([c])

    def eigenbasis_element(self, n: int) -> PoissonFunction:
        """Monic Charlier polynomial ``c_n(j; theta)``; ``-L c_n = n c_n`` away from the boundary."""
        if not 0 <= n <= self.M - 2:
            raise IndexError(f"Charlier degree {n} outside 0..{self.M - 2}")
        th = self.theta
        prev = [Fraction(0)] * (self.M + 1)
        cur = [Fraction(1)] * (self.M + 1)
        for d in range(n):
            nxt = [(j - d - th) * cur[j] - d * th * prev[j] for j in range(self.M + 1)]
            prev, cur = cur, nxt
        return PoissonFunction(th, RationalVector.from_values(cur), zero_tail=False)

    # -- operator -----------------------------------------------------------
    def apply_L(self, f: PoissonFunction) -> PoissonFunction:
        self.check(f)
        a, b = self.theta.numerator, self.theta.denominator
        n = f.vec.num
        up = np.empty_like(n)
        up[:-1] = n[1:]
        up[-1] = 0
        down = np.empty_like(n)
        down[1:] = n[:-1]
        down[0] = 0
        num = a * (up - n) - b * self._j * (n - down)
        vec = RationalVector(num, f.vec.den * b)
        if f.zero_tail and f.exact_below == self.M + 1:
            return PoissonFunction(self.theta, vec, self.M + 1, zero_tail=(n[-1] == 0))
        return PoissonFunction(self.theta, vec, f.exact_below - 1, zero_tail=False)

    def interior_limit(self, f: PoissonFunction) -> int:
        """Indices below this value are trusted for pointwise statements."""
        if f.zero_tail and f.exact_below == self.M + 1:
            return self.M + 1
        return min(f.exact_below, self.M - 1)

    def touches_boundary(self, f: PoissonFunction) -> bool:
        self.check(f)
        if not f.zero_tail or f.exact_below <= self.M:
            return True
        return bool(f.vec.num[-1] != 0 or f.vec.num[-2] != 0)

    def integrate(self, f: PoissonFunction) -> PoissonIntegral:
        self.check(f)
        value = f.vec.dot_ints(self._weights) / self._weight_total
        return PoissonIntegral(value, self.tail_bound, self.touches_boundary(f))

    def expectation(self, f: PoissonFunction) -> Fraction:
        res = self.integrate(f)
        if res.touches_boundary:
            raise BoundaryContaminationError("integrand reaches the truncation boundary")
        return res.value

    def is_zero(self, f) -> bool:
        self.check(f)
        lim = self.interior_limit(f)
        return not any(f.vec.num[:lim].tolist())

    def constant_value(self, f):
        self.check(f)
        vals = f.vec.num[: self.interior_limit(f)].tolist()
        if vals and all(v == vals[0] for v in vals):
            return Fraction(vals[0], f.vec.den)
        return None

    def _ratio(self, g, f):
        lim = min(self.interior_limit(f), self.interior_limit(g))
        fv, gv = f.vec.num[:lim].tolist(), g.vec.num[:lim].tolist()
        for i, v in enumerate(fv):
            if v:
                lam = Fraction(gv[i] * f.vec.den, g.vec.den * v)
                break
        else:
            return None
        # compare g and lam*f on the trusted indices only
        for x, y in zip(fv, gv):
            if Fraction(y, g.vec.den) != lam * Fraction(x, f.vec.den):
                return None
        return lam

    def is_eigenfunction(self, f, lam) -> bool:
        return self._ratio(self.apply_L(f), f) == -as_fraction(lam)

    def min_value(self, f) -> Fraction:
        vals = f.vec.num[: self.interior_limit(f)].tolist()
        return Fraction(min(vals), f.vec.den)

    def sample(self, f: PoissonFunction, n: int, seed: int, threads: int = 1, stream: int = 0) -> Samples:
        """``f(J)`` for ``J ~ Poisson(theta)``; draws above ``M`` are rejected and counted."""
        self.check(f)
        table = f.vec.to_float()
        lam = float(self.theta)

        def draw(rng, size):
            out = np.empty(size, dtype=np.int64)
            filled = rejected = 0
            while filled < size:
                j = rng.poisson(lam, size - filled)
                ok = j[j <= self.M]
                rejected += len(j) - len(ok)
                out[filled : filled + len(ok)] = ok
                filled += len(ok)
            return table[out], rejected

        return chunked_samples(n, seed, draw, threads=threads, stream=stream)

    def dump(self, f: PoissonFunction) -> str:
        self.check(f)
        return "".join(f"{j}\t{format_rational(v)}\n" for j, v in enumerate(f.values))
