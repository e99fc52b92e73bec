"""Stein-type distance bounds for normal and gamma targets, and their empirical counterparts.

The bounds of this module assume a diffusion generator.  They are still
computed on the cube and Poisson models (the algebra is identical), but the
returned records carry ``applicable=False`` there and must not be read as
upper bounds on a distance.

Functions are passed as a rational ``F`` together with ``scale_sq``; the
function under study is ``G = sqrt(scale_sq) * F``.  Quantities of odd degree
in ``G`` are therefore :class:`~chaoslab.rational.Surd` values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy import special

from .gamma import ChaosPreconditionError, DiffusionRequiredError, _require_chaos, carre_du_champ, diffusion_identities
from .models.base import MarkovModel, NotEigenfunctionError
from .models.cube import MAX_ENUMERATION_DIM, CubeModel
from .rational import Surd, as_fraction, exact_sign, scaled_power, simplify
from .reports import VerificationReport, identity_report, inequality_report
from .spectrum import Spectrum, build_R, check_spectral_condition, pi_k

KOLMOGOROV_CONSTANT = 1
TV_CONSTANT = 2
DELTA = 0.05


def _sqrt_float(value) -> float:
    return math.sqrt(max(float(value), 0.0))


@dataclass(frozen=True)
class SteinNormalBound:
    eigenvalue: Fraction
    variance_term: Fraction
    var_gamma: Fraction
    norm_sq: Fraction
    applicable: bool = True

    @property
    def kolmogorov_exact(self):
        """``sqrt(variance_term) / lam`` as an exact surd."""
        return simplify(Surd.sqrt(self.variance_term) / self.eigenvalue)

    @property
    def kolmogorov(self) -> float:
        return KOLMOGOROV_CONSTANT * _sqrt_float(self.variance_term) / float(self.eigenvalue)

    @property
    def total_variation(self) -> float:
        return TV_CONSTANT * _sqrt_float(self.variance_term) / float(self.eigenvalue)


@dataclass(frozen=True)
class SteinGammaBound:
    p: Fraction
    eigenvalue: Fraction
    discrepancy: object
    norm_sq: Fraction
    applicable: bool = True

    @property
    def is_variance(self) -> bool:
        """With ``int G^2 = p`` the discrepancy equals ``Var(Gamma - lam G)``."""
        return self.norm_sq == self.p

    @property
    def kolmogorov(self) -> float:
        return KOLMOGOROV_CONSTANT * _sqrt_float(self.discrepancy) / float(self.eigenvalue)

    @property
    def total_variation(self) -> float:
        return TV_CONSTANT * _sqrt_float(self.discrepancy) / float(self.eigenvalue)


def _eigenvalue(model: MarkovModel, F, k: int | None) -> Fraction:
    lam = model.find_eigenvalue(F)
    if lam is None or lam == 0:
        raise NotEigenfunctionError("Stein bounds require a nonconstant eigenfunction")
    if k is not None and lam != k:
        raise NotEigenfunctionError(f"eigenvalue {lam} does not match degree {k}")
    return lam


def normal_bound(model: MarkovModel, F, k: int | None = None, scale_sq=1) -> SteinNormalBound:
    """``int (Gamma(G) - lam)^2`` and ``Var(Gamma(G))`` exactly, with the distance bounds they imply."""
    s = as_fraction(scale_sq)
    lam = _eigenvalue(model, F, k)
    gam = carre_du_champ(model, F)
    e_g = model.expectation(gam)
    e_g2 = model.expectation(gam * gam)
    variance_term = s * s * e_g2 - 2 * lam * s * e_g + lam * lam
    var_gamma = s * s * (e_g2 - e_g * e_g)
    norm_sq = s * model.expectation(F * F)
    return SteinNormalBound(lam, variance_term, var_gamma, norm_sq, model.is_diffusion)


def _gamma_terms(model, F, s):
    """Moments of ``G = sqrt(s) F`` needed by the gamma bounds."""
    gam = carre_du_champ(model, F)
    E = model.expectation
    return {
        "G": scaled_power(E(F), s, 1),
        "G2": s * E(F * F),
        "Gam": s * E(gam),
        "Gam2": s * s * E(gam * gam),
        "GGam": scaled_power(E(F * gam), s, 3),
        "G2Gam": s * s * E(F * F * gam),
    }


def gamma_bound(model: MarkovModel, F, p, k: int | None = None, scale_sq=1) -> SteinGammaBound:
    """Discrepancy ``int (Gamma(G) - lam (G + p))^2`` for the target ``g_p``."""
    p = as_fraction(p)
    if p <= 0:
        raise ValueError("gamma target requires p > 0")
    s = as_fraction(scale_sq)
    lam = _eigenvalue(model, F, k)
    t = _gamma_terms(model, F, s)
    disc = (
        t["Gam2"]
        + lam * lam * t["G2"]
        + lam * lam * p * p
        - 2 * lam * t["GGam"]
        - 2 * lam * p * t["Gam"]
        + 2 * lam * lam * p * t["G"]
    )
    return SteinGammaBound(p, lam, simplify(disc), t["G2"], model.is_diffusion)


def _tag(model):
    return model.tag, getattr(model, "N", 1)


def theorem10_constants(spectrum: Spectrum, k: int) -> tuple[Fraction, Fraction]:
    """``A_k = 2 (-1)^k lam_k R_{k+1}(lam_k/2) / pi_{k-1}`` and ``B_k = (-1)^k lam_k^2 R_{k+1}(lam_k/2) / pi_{k-1}``."""
    lam = spectrum[k]
    r = build_R(spectrum, k)(lam / 2)
    sign = -1 if k % 2 else 1
    base = sign * r / pi_k(spectrum, k - 1)
    return 2 * lam * base, lam * lam * base


def verify_theorem10(spectrum: Spectrum, model: MarkovModel, F, k: int, p=None, scale_sq=1,
                     n_max: int | None = None) -> VerificationReport:
    """``Var(Gamma - lam G) <= lam int G^2 Gamma + A int G Gamma - p B - p^2 lam^2`` with ``int G^2 = p``."""
    tag, N = _tag(model)
    s = as_fraction(scale_sq)
    _require_chaos(spectrum, model, F, k)
    n_max = 2 * k if n_max is None else n_max
    rep = check_spectral_condition(spectrum, k, n_max)
    if not rep.holds:
        raise ChaosPreconditionError(f"spectral condition fails at {rep.violations[:3]}")
    lam = spectrum[k]
    t = _gamma_terms(model, F, s)
    p = t["G2"] if p is None else as_fraction(p)
    if t["G2"] != p:
        raise ChaosPreconditionError(f"int G^2 = {t['G2']} differs from p = {p}")
    # Var(Gamma - lam G) from raw moments; E[G] = 0 for lam > 0
    mean = t["Gam"] - lam * t["G"]
    second = t["Gam2"] - 2 * lam * t["GGam"] + lam * lam * t["G2"]
    lhs = simplify(second - mean * mean)
    A, B = theorem10_constants(spectrum, k)
    rhs = simplify(lam * t["G2Gam"] + A * t["GGam"] - p * B - p * p * lam * lam)
    return inequality_report("theorem10", tag, N, k, lhs, rhs, p=p, A=A, B=B)


def verify_eq22(model: MarkovModel, F, k: int, p=None, scale_sq=1) -> VerificationReport:
    """Even ``k``, ``S = N``: ``(3/k^2) Var(Gamma - k G) <= int G^4 - 6 int G^3 + 6p - 3p^2``."""
    if k % 2:
        raise ValueError("the fourth-moment gamma criterion needs an even degree")
    if not model.is_diffusion:
        raise DiffusionRequiredError("diffusion identity unavailable on a non-diffusion model")
    tag, N = _tag(model)
    s = as_fraction(scale_sq)
    _require_chaos(Spectrum.nat(), model, F, k)
    ids = diffusion_identities(model, F, k)
    if not all(r.passed for r in ids):
        raise ChaosPreconditionError("diffusion moment identities fail")
    lam = Fraction(k)
    t = _gamma_terms(model, F, s)
    p = t["G2"] if p is None else as_fraction(p)
    if t["G2"] != p:
        raise ChaosPreconditionError(f"int G^2 = {t['G2']} differs from p = {p}")
    E = model.expectation
    f2 = F * F
    g4 = s * s * E(f2 * f2)
    g3 = scaled_power(E(f2 * F), s, 3)
    mean = t["Gam"] - lam * t["G"]
    var = t["Gam2"] - 2 * lam * t["GGam"] + lam * lam * t["G2"] - mean * mean
    lhs = simplify(Fraction(3, k * k) * var)
    rhs = simplify(g4 - 6 * g3 + 6 * p - 3 * p * p)
    return inequality_report("eq22", tag, N, k, lhs, rhs, identities=ids, fourth=g4, third=g3, p=p)


# -- distances -------------------------------------------------------------------


def normal_cdf(x):
    return special.ndtr(x)


def gamma_cdf(x, p: float):
    """CDF of ``g_p`` (shape ``p``, scale 1)."""
    x = np.asarray(x, dtype=float)
    return special.gammainc(float(p), np.clip(x, 0.0, None))


def target_cdf(target: str, p=None) -> Callable:
    if target == "normal":
        return normal_cdf
    if target == "gamma":
        if p is None or as_fraction(p) <= 0:
            raise ValueError("gamma target requires p > 0")
        pf = float(p)
        return lambda x: gamma_cdf(x, pf)
    raise ValueError(f"unsupported target {target!r}")


def mc_error(n: int, delta: float = DELTA) -> float:
    """Distribution-free deviation proxy ``sqrt(ln(2/delta) / (2n))``."""
    return math.sqrt(math.log(2 / delta) / (2 * n))


def ks_from_sorted(xs: np.ndarray, cdf: Callable) -> float:
    """``max_i max(i/n - cdf(x_i), cdf(x_i) - (i-1)/n)`` over a sorted sample."""
    n = len(xs)
    if n == 0:
        raise ValueError("empty sample")
    c = cdf(xs)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - c), np.max(c - (i - 1) / n)))


def ks_from_atoms(atoms: Sequence[tuple[float, object]], cdf: Callable) -> float:
    """Kolmogorov distance between a finite law (sorted ``(value, probability)``) and a continuous CDF."""
    values = np.array([float(v) for v, _ in atoms])
    probs = [as_fraction(w) for _, w in atoms]
    after = []
    acc = Fraction(0)
    for w in probs:
        acc += w
        after.append(acc)
    after_f = np.array([float(a) for a in after])
    before_f = np.array([float(a - w) for a, w in zip(after, probs)])
    c = cdf(values)
    return float(max(np.max(np.abs(after_f - c)), np.max(np.abs(c - before_f))))


@dataclass(frozen=True)
class EmpiricalDistance:
    target: str
    estimate: float
    method: str
    n: int | None = None
    seed: int | None = None
    error_proxy: float = 0.0
    p: Fraction | None = None
    rejection_rate: float = 0.0


def estimate_distance(model: MarkovModel, F, target: str = "normal", method: str = "auto", n: int = 10**6,
                      seed: int = 0, p=None, scale_sq=1, threads: int = 1) -> EmpiricalDistance:
    """Kolmogorov distance of ``G`` (normal) or ``G + p`` (gamma ``g_p``) to the target law."""
    cdf = target_cdf(target, p)
    shift = float(p) if target == "gamma" else 0.0
    scale = math.sqrt(as_fraction(scale_sq))
    exact_ok = isinstance(model, CubeModel) and model.N <= MAX_ENUMERATION_DIM
    if method == "auto":
        method = "exact" if exact_ok and model.N <= 20 else "mc"
    if method == "exact":
        if not exact_ok:
            raise ValueError("exact enumeration is available on the cube only")
        atoms = [(scale * float(v) + shift, w) for v, w in model.atoms(F)]
        return EmpiricalDistance(target, ks_from_atoms(atoms, cdf), "exact", p=None if p is None else as_fraction(p))
    if method != "mc":
        raise ValueError(f"unknown method {method!r}")
    if n <= 0:
        raise ValueError("sample count must be positive")
    smp = model.sample(F, n, seed, threads=threads)
    xs = np.sort(smp.values * scale + shift)
    return EmpiricalDistance(target, ks_from_sorted(xs, cdf), "mc", n, seed, mc_error(n),
                             None if p is None else as_fraction(p), smp.rejection_rate)


__all__ = [
    "EmpiricalDistance",
    "SteinGammaBound",
    "SteinNormalBound",
    "estimate_distance",
    "gamma_bound",
    "gamma_cdf",
    "ks_from_atoms",
    "ks_from_sorted",
    "mc_error",
    "normal_bound",
    "normal_cdf",
    "target_cdf",
    "theorem10_constants",
    "verify_eq22",
    "verify_theorem10",
]
