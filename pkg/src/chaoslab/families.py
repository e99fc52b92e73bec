"""Sequences of chaos used by the convergence experiments.

Each member exposes ``moment(a, b) = E[G^a Gamma(G)^b]`` exactly (``a + b <= 4``)
and a way to measure the distance of ``G`` to a target law.

* ``paired-product`` (OU): ``G = m^{-1/2} sum_i x_{2i-1} x_{2i}`` on ``R^{2m}``;
  exact moments from the diagonal quadratic form, samples from the polynomial.
* ``paired-product`` (cube): the same expression on ``{-1,1}^{2m}``; moments and
  law from the binomial distribution of ``sum_i eps_i`` (the pair products are
  independent fair signs).
* ``constant-coefficient`` (OU): ``G = sum_{i != j} x_i x_j / sqrt(2N(N-1))``;
  moments and samples from the diagonal form with eigenvalues ``N-1`` and ``-1``.
* ``chi-square`` (OU): ``G = sum_i (x_i^2 - 1) / 2``; ``G + N/2`` is exactly ``g_{N/2}``.
* ``random`` (cube or OU): a seeded random product-form chaos of degree ``k``
  evaluated with the generic exact engine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .gamma import carre_du_champ
from .models.base import MarkovModel
from .models.chaos import materialize_chaos, random_chaos
from .models.cube import CubeModel
from .models.ou import OUModel, PolyFunction
from .quadratic import QuadraticChaos
from .rational import Surd, as_fraction, scaled_power, simplify
from .stein import EmpiricalDistance, estimate_distance, ks_from_atoms, ks_from_sorted, mc_error, target_cdf

FAMILIES = ("paired-product", "constant-coefficient", "chi-square", "random")


class FamilyError(ValueError):
    """Unknown family or a family/model/size combination that does not exist."""


@dataclass
class Member:
    """One element ``G`` of a family at size ``N``."""

    family: str
    model: MarkovModel
    N: int
    k: int
    moment_fn: object
    sampler: object = None
    atoms: object = None
    natural_p: Fraction | None = None
    F: object = None
    scale_sq: Fraction = Fraction(1)
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def eigenvalue(self) -> Fraction:
        return Fraction(self.k)

    def moment(self, a: int, b: int = 0):
        key = (a, b)
        if key not in self._cache:
            self._cache[key] = simplify(self.moment_fn(a, b))
        return self._cache[key]

    # -- normal experiment quantities -----------------------------------------
    @property
    def norm_sq(self) -> Fraction:
        return self.moment(2)

    @property
    def fourth_moment(self) -> Fraction:
        return self.moment(4)

    @property
    def var_gamma(self) -> Fraction:
        return self.moment(0, 2) - self.moment(0, 1) ** 2

    @property
    def variance_term(self) -> Fraction:
        lam = self.eigenvalue
        return self.moment(0, 2) - 2 * lam * self.moment(0, 1) + lam * lam

    @property
    def stein_bound(self):
        """``sqrt(int (Gamma - lam)^2) / lam``, exact."""
        return simplify(Surd.sqrt(self.variance_term) / self.eigenvalue)

    # -- gamma experiment quantities ------------------------------------------
    def gamma_criterion(self, p):
        p = as_fraction(p)
        return simplify(self.moment(4) - 6 * self.moment(3) + 6 * p - 3 * p * p)

    def gamma_variance(self):
        """``Var(Gamma - lam G)``."""
        lam = self.eigenvalue
        mean = self.moment(0, 1) - lam * self.moment(1)
        second = self.moment(0, 2) - 2 * lam * self.moment(1, 1) + lam * lam * self.moment(2)
        return simplify(second - mean * mean)

    def eq22_slack(self, p):
        return simplify(self.gamma_criterion(p) - Fraction(3, self.k * self.k) * self.gamma_variance())

    # -- distances ---------------------------------------------------------------
    def distance(self, target: str, n: int, seed: int, p=None, threads: int = 1) -> EmpiricalDistance:
        cdf = target_cdf(target, p)
        shift = float(p) if target == "gamma" else 0.0
        pf = None if p is None else as_fraction(p)
        if self.atoms is not None:
            atoms = [(float(v) + shift, w) for v, w in self.atoms()]
            return EmpiricalDistance(target, ks_from_atoms(atoms, cdf), "exact", p=pf)
        if self.sampler is None:
            return estimate_distance(self.model, self.F, target, "mc", n, seed, p, self.scale_sq, threads)
        smp = self.sampler(n, seed, threads)
        xs = np.sort(smp.values + shift)
        return EmpiricalDistance(target, ks_from_sorted(xs, cdf), "mc", n, seed, mc_error(n), pf,
                                 smp.rejection_rate)


def _model_moments(model: MarkovModel, F, s: Fraction):
    gam = carre_du_champ(model, F)
    powers_f = {0: None, 1: F}
    powers_g = {0: None, 1: gam}

    def power(table, base, n):
        if n not in table:
            table[n] = power(table, base, n - 1) * base
        return table[n]

    def moment(a, b):
        parts = [x for x in (power(powers_f, F, a) if a else None, power(powers_g, gam, b) if b else None) if x is not None]
        if not parts:
            return Fraction(1)
        f = parts[0] if len(parts) == 1 else parts[0] * parts[1]
        return scaled_power(model.expectation(f), s, a + 2 * b)

    return moment


# -- built-in families -----------------------------------------------------------


def paired_product_ou(N: int) -> Member:
    if N < 2 or N % 2:
        raise FamilyError("paired-product family needs an even dimension N = 2m")
    m = N // 2
    s = Fraction(1, m)
    q = QuadraticChaos(((Fraction(1, 2), m), (Fraction(-1, 2), m)), s)
    model = OUModel(N)
    F = PolyFunction(N, {tuple(1 if j in (2 * i, 2 * i + 1) else 0 for j in range(N)): 1 for i in range(m)})
    return Member("paired-product", model, N, 2, q.moment, F=F, scale_sq=s)


def _binomial_atoms(m: int):
    """Exact law of ``m^{-1/2} sum_{i<=m} eps_i`` as sorted ``(float value, probability)``."""
    total = 1 << m
    root = math.sqrt(m)
    return [((2 * j - m) / root, Fraction(math.comb(m, j), total)) for j in range(m + 1)]


def paired_product_cube(N: int) -> Member:
    if N < 2 or N % 2:
        raise FamilyError("paired-product family needs an even dimension N = 2m")
    m = N // 2
    s = Fraction(1, m)
    total = 1 << m
    raw = {}

    def sum_moment(a):
        if a not in raw:
            raw[a] = Fraction(sum(math.comb(m, j) * (2 * j - m) ** a for j in range(m + 1)), total)
        return raw[a]

    def moment(a, b):
        # Gamma(G) = sum over blocks |A| a_A^2 = 2 m (1/m), a constant
        return scaled_power(sum_moment(a), s, a) * 2**b

    return Member("paired-product", CubeModel(N), N, 2, moment, atoms=lambda: _binomial_atoms(m), scale_sq=s)


def constant_coefficient_ou(N: int) -> Member:
    if N < 2:
        raise FamilyError("constant-coefficient family needs N >= 2")
    s = Fraction(1, 2 * N * (N - 1))
    q = QuadraticChaos(((Fraction(N - 1), 1), (Fraction(-1), N - 1)), s)
    return Member("constant-coefficient", OUModel(N), N, 2, q.moment, sampler=q.sample, natural_p=Fraction(1),
                  scale_sq=s)


def chi_square_ou(N: int) -> Member:
    if N < 1:
        raise FamilyError("chi-square family needs N >= 1")
    q = QuadraticChaos(((Fraction(1, 2), N),), 1)
    terms = {(0,) * N: Fraction(-N, 2)}
    for i in range(N):
        terms[tuple(2 if j == i else 0 for j in range(N))] = Fraction(1, 2)
    return Member("chi-square", OUModel(N), N, 2, q.moment, natural_p=Fraction(N, 2), F=PolyFunction(N, terms))


def random_member(model_tag: str, N: int, k: int, seed: int) -> Member:
    spec = random_chaos(model_tag, N, k, seed)
    ch = materialize_chaos(spec)
    atoms = None
    if isinstance(ch.model, CubeModel) and N <= 20:
        atoms = lambda: [(float(v), w) for v, w in ch.model.atoms(ch.F)]  # noqa: E731
    return Member("random", ch.model, N, k, _model_moments(ch.model, ch.F, ch.scale_sq), atoms=atoms, F=ch.F,
                  scale_sq=ch.scale_sq, natural_p=ch.norm_sq)


def build_member(family: str, model_tag: str, N: int, k: int = 2, seed: int = 0) -> Member:
    if family == "random":
        return random_member(model_tag, N, k, seed)
    if k != 2:
        raise FamilyError(f"family {family!r} has degree 2")
    table = {
        ("paired-product", "ou"): paired_product_ou,
        ("paired-product", "cube"): paired_product_cube,
        ("constant-coefficient", "ou"): constant_coefficient_ou,
        ("chi-square", "ou"): chi_square_ou,
    }
    try:
        return table[(family, model_tag)](N)
    except KeyError:
        raise FamilyError(f"family {family!r} is not available on model {model_tag!r}") from None


__all__ = [
    "FAMILIES",
    "FamilyError",
    "Member",
    "build_member",
    "chi_square_ou",
    "constant_coefficient_ou",
    "paired_product_cube",
    "paired_product_ou",
    "random_member",
]
