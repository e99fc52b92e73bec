"""Exact moments of Gaussian quadratic chaos in diagonal form.

A second-order OU chaos ``x^T A x - tr A`` is, after an orthogonal change of
coordinates, ``sum_i beta_i (z_i^2 - 1)`` with ``beta`` the eigenvalues of
``A``; its carré du champ is ``|2 A x|^2 = sum_i 4 beta_i^2 z_i^2``.  With
``U`` the chaos and ``V`` its carré du champ, the joint cumulant generating
function is

    K(s, t) = sum_i [ t b_i + 1/2 sum_{n >= 2} (2 (s a_i + t b_i))^n / n ]

(``a_i = beta_i``, ``b_i = 4 beta_i^2``), so every mixed moment ``E[U^a V^b]``
is a finite rational computation.  Multiplicities keep the cost independent
of the dimension.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable

import numpy as np

from .models.base import Samples, chunked_samples
from .rational import as_fraction, scaled_power

Series = dict[tuple[int, int], Fraction]


def _mul(p: Series, q: Series, order: int) -> Series:
    out: Series = {}
    for (i1, j1), c1 in p.items():
        for (i2, j2), c2 in q.items():
            if i1 + i2 + j1 + j2 <= order:
                key = (i1 + i2, j1 + j2)
                out[key] = out.get(key, Fraction(0)) + c1 * c2
    return {k: v for k, v in out.items() if v}


def _exp(p: Series, order: int) -> Series:
    """``exp(p)`` truncated at total degree ``order``; ``p`` has no constant term."""
    out: Series = {(0, 0): Fraction(1)}
    term: Series = {(0, 0): Fraction(1)}
    for n in range(1, order + 1):
        term = {k: v / n for k, v in _mul(term, p, order).items()}
        for k, v in term.items():
            out[k] = out.get(k, Fraction(0)) + v
    return out


@dataclass(frozen=True)
class QuadraticChaos:
    """``F = sqrt(scale_sq) * sum_i beta_i (z_i^2 - 1)``; ``betas`` holds ``(beta, multiplicity)``."""

    betas: tuple[tuple[Fraction, int], ...]
    scale_sq: Fraction = Fraction(1)

    def __post_init__(self):
        merged: dict[Fraction, int] = {}
        for b, r in self.betas:
            b = as_fraction(b)
            if r < 0:
                raise ValueError("negative multiplicity")
            if b and r:
                merged[b] = merged.get(b, 0) + int(r)
        if not merged:
            raise ValueError("quadratic chaos with no nonzero eigenvalue")
        object.__setattr__(self, "betas", tuple(sorted(merged.items())))
        object.__setattr__(self, "scale_sq", as_fraction(self.scale_sq))

    @property
    def dimension(self) -> int:
        return sum(r for _, r in self.betas)

    @cached_property
    def _mgf(self) -> Series:
        order = 4
        K: Series = {}
        for beta, r in self.betas:
            a, b = beta, 4 * beta * beta
            lin: Series = {(1, 0): a, (0, 1): b}
            power: Series = {(0, 0): Fraction(1)}
            K[(0, 1)] = K.get((0, 1), Fraction(0)) + r * b
            for n in range(1, order + 1):
                power = _mul(power, lin, order)
                if n >= 2:
                    for key, v in power.items():
                        K[key] = K.get(key, Fraction(0)) + r * Fraction(2**n, 2 * n) * v
        return _exp({k: v for k, v in K.items() if v}, order)

    def raw_moment(self, a: int, b: int) -> Fraction:
        """``E[U^a V^b]`` for the unscaled chaos ``U`` and ``V = Gamma(U)``; ``a + b <= 4``."""
        if a + b > 4:
            raise ValueError("moments are tabulated up to total order 4")
        return self._mgf.get((a, b), Fraction(0)) * math.factorial(a) * math.factorial(b)

    def moment(self, a: int, b: int = 0):
        """``E[F^a Gamma(F)^b]``; a :class:`Surd` when ``a`` is odd and the scale is irrational."""
        return scaled_power(self.raw_moment(a, b), self.scale_sq, a + 2 * b)

    # convenience accessors used by the experiment tables
    @property
    def norm_sq(self) -> Fraction:
        return self.moment(2)

    @property
    def fourth_moment(self) -> Fraction:
        return self.moment(4)

    @property
    def third_moment(self):
        return self.moment(3)

    @property
    def var_gamma(self) -> Fraction:
        return self.moment(0, 2) - self.moment(0, 1) ** 2

    def sample(self, n: int, seed: int, threads: int = 1, stream: int = 0) -> Samples:
        """Draws of ``F`` via ``beta (chi^2_r - r)`` per eigenvalue block (equal in law)."""
        blocks = [(float(b), r) for b, r in self.betas]
        s = math.sqrt(self.scale_sq)

        def draw(rng, size):
            out = np.zeros(size)
            for b, r in blocks:
                out += b * (rng.chisquare(r, size) - r)
            return s * out, 0

        return chunked_samples(n, seed, draw, threads=threads, stream=stream)


def from_eigenvalues(values: Iterable, scale_sq=1) -> QuadraticChaos:
    counts: dict[Fraction, int] = {}
    for v in values:
        v = as_fraction(v)
        counts[v] = counts.get(v, 0) + 1
    return QuadraticChaos(tuple(counts.items()), scale_sq)
