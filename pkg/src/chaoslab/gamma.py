"""Carré du champ, iterated gradients and the chaos identities built on them.

All checks are exact.  Integrals go through ``model.expectation``, which on the
truncated Poisson model refuses integrands that reach the lattice boundary;
the verifiers turn that refusal into a ``boundary-skip`` report.

Functions are always the rational representative ``F``; checks that depend on
the normalisation use the homogeneous forms with ``c = int F^2 dmu``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .models.base import MarkovModel, NotEigenfunctionError
from .models.cube import CubeModel, _flip_indices
from .models.ou import OUModel
from .models.poisson import BoundaryContaminationError, PoissonModel
from .rational import as_fraction
from .reports import (
    VerificationReport,
    identity_report,
    inequality_report,
    predicate_report,
    skip_report,
)
from .spectrum import (
    RationalPoly,
    Spectrum,
    build_Q,
    build_R,
    build_T,
    check_spectral_condition,
    consistency_residuals,
    pi_k,
)

HALF = Fraction(1, 2)


class TowerMismatchError(RuntimeError):
    """The shortcut ``(L/2 + lam)^(m-1) Gamma`` disagrees with the raw recursion."""


class ChaosPreconditionError(ValueError):
    """The function is not a chaos of the requested degree."""


class DiffusionRequiredError(ValueError):
    """A diffusion-only identity was requested on a non-diffusion model."""


def _tag(model: MarkovModel) -> tuple[str, int]:
    return model.tag, getattr(model, "N", 1)


def _E(model: MarkovModel, f) -> Fraction:
    return model.expectation(f)


# -- Gamma and Gamma_m ---------------------------------------------------------


def carre_du_champ(model: MarkovModel, f, g=None):
    """``Gamma(f, g) = (L(fg) - f Lg - g Lf) / 2``; ``Gamma(f)`` when ``g`` is omitted."""
    g = f if g is None else g
    model.check(f)
    model.check(g)
    lf = model.apply_L(f)
    lg = lf if g is f else model.apply_L(g)
    return (model.apply_L(f * g) - f * lg - g * lf) * HALF


class _IteratedGradients:
    """Memoised ``Gamma_m(L^a f, L^b g)`` keyed by ``(m, a, b)``."""

    def __init__(self, model: MarkovModel, f, g):
        self.model = model
        self.symmetric = g is f
        self.powers_f = [f]
        self.powers_g = self.powers_f if self.symmetric else [g]
        self.memo: dict[tuple[int, int, int], object] = {}

    def _power(self, seq: list, a: int):
        while len(seq) <= a:
            seq.append(self.model.apply_L(seq[-1]))
        return seq[a]

    def get(self, m: int, a: int = 0, b: int = 0):
        if self.symmetric and a > b:
            a, b = b, a
        key = (m, a, b)
        if key in self.memo:
            return self.memo[key]
        if m == 0:
            out = self._power(self.powers_f, a) * self._power(self.powers_g, b)
        else:
            prev = self.get(m - 1, a, b)
            out = (self.model.apply_L(prev) - self.get(m - 1, a, b + 1) - self.get(m - 1, a + 1, b)) * HALF
        self.memo[key] = out
        return out


def iterated_gradient(model: MarkovModel, f, g=None, m: int = 1):
    """``Gamma_m(f, g)`` by the bracket recursion; ``Gamma_0(f, g) = fg``."""
    if m < 0:
        raise ValueError("m must be >= 0")
    g = f if g is None else g
    model.check(f)
    model.check(g)
    return _IteratedGradients(model, f, g).get(m)


@dataclass
class GammaTower:
    """``levels[m-1] = Gamma_m(F)`` for ``m = 1..m_max``."""

    model: MarkovModel
    F: object
    eigenvalue: Fraction | None
    levels: list = field(default_factory=list)

    @property
    def m_max(self) -> int:
        return len(self.levels)

    def level(self, m: int):
        """``Gamma_m(F)``; ``m = 0`` gives ``F^2``."""
        if m == 0:
            return self.F * self.F
        return self.levels[m - 1]


def build_gamma_tower(model: MarkovModel, F, m_max: int, verify: bool = True) -> GammaTower:
    """Tower by ``Gamma_m = (L/2 + lam) Gamma_{m-1}``, cross-checked against the raw recursion."""
    if m_max < 1:
        raise ValueError("m_max must be >= 1")
    model.check(F)
    lam = model.find_eigenvalue(F)
    if lam is None:
        raise NotEigenfunctionError("tower requires an exact eigenfunction")
    levels = [carre_du_champ(model, F)]
    for _ in range(m_max - 1):
        g = levels[-1]
        levels.append(model.apply_L(g) * HALF + g * lam)
    if verify:
        raw = _IteratedGradients(model, F, F)
        for m, short in enumerate(levels, 1):
            if not model.is_zero(short - raw.get(m)):
                raise TowerMismatchError(f"Gamma_{m}: shortcut and recursion disagree")
    return GammaTower(model, F, lam, levels)


def Q_of_gamma(spectrum: Spectrum, model: MarkovModel, F, k: int, tower: GammaTower | None = None):
    """``Q_k(Gamma)(F) = sum_{i=1..k} q_i Gamma_i`` with ``q_i`` the coefficients of ``Q_k``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if tower is None or tower.m_max < k:
        tower = build_gamma_tower(model, F, k)
    q = build_Q(spectrum, k)
    out = None
    for i in range(1, k + 1):
        c = q.coeff(i)
        if c:
            term = tower.level(i) * c
            out = term if out is None else out + term
    return out if out is not None else tower.level(1) * 0


def apply_operator_poly(model: MarkovModel, poly: RationalPoly, g):
    """``P(L/2) g`` by Horner in the operator argument."""
    if poly.is_zero():
        return g * 0
    acc = g * poly.coeff(poly.degree)
    for e in range(poly.degree - 1, -1, -1):
        acc = model.apply_L(acc) * HALF
        c = poly.coeff(e)
        if c:
            acc = acc + g * c
    return acc


# -- chaos criterion -----------------------------------------------------------


def is_chaos(spectrum: Spectrum, model: MarkovModel, F, k: int) -> VerificationReport:
    """Eigen-relation at ``lam_k`` and ``Q_{k+1}(Gamma)(F) = 0``; failure is reported, not raised."""
    tag, N = _tag(model)
    lam_k = spectrum[k]
    lam = model.find_eigenvalue(F)
    if lam != lam_k:
        return predicate_report("chaos", tag, N, k, False, lam, lam_k, None,
                                reason=f"not an eigenfunction at lambda_{k}", eigenvalue=lam)
    tower = build_gamma_tower(model, F, k + 1)
    qk1 = Q_of_gamma(spectrum, model, F, k + 1, tower)
    zero = model.is_zero(qk1)
    details: dict = {"tower": tower, "eigenvalue": lam}
    # equivalent criterion: Q_k(Gamma) constant and L Q_k(Gamma) = 2 Q_{k+1}(Gamma)
    qk = Q_of_gamma(spectrum, model, F, k, tower)
    details["Qk_constant"] = model.constant_value(qk) is not None
    details["L_Qk_relation"] = model.is_zero(model.apply_L(qk) - qk1 * 2)
    return predicate_report("chaos", tag, N, k, zero, lam, lam_k, None, **details)


def _require_chaos(spectrum, model, F, k) -> GammaTower:
    rep = is_chaos(spectrum, model, F, k)
    if not rep.passed:
        raise ChaosPreconditionError(f"function is not a {k}-chaos: {rep.details.get('reason', 'Q_{k+1}(Gamma) != 0')}")
    return rep.details["tower"]


# -- identities ----------------------------------------------------------------


def verify_lemma3(model: MarkovModel, F, n: int, m: int, tower: GammaTower | None = None) -> VerificationReport:
    """``int Gamma_n Gamma_m = int Gamma_{n-1} Gamma_{m+1}`` for ``n, m >= 1``."""
    if n < 1 or m < 1:
        raise ValueError("requires n >= 1 and m >= 1")
    tag, N = _tag(model)
    if tower is None or tower.m_max < max(n, m + 1):
        tower = build_gamma_tower(model, F, max(n, m + 1))
    lam = tower.eigenvalue
    name = f"lemma3[n={n};m={m}]"
    try:
        lhs = _E(model, tower.level(n) * tower.level(m))
        rhs = _E(model, tower.level(n - 1) * tower.level(m + 1))
    except BoundaryContaminationError as exc:
        return skip_report(name, tag, N, int(lam), str(exc))
    return identity_report(name, tag, N, int(lam), lhs, rhs)


def verify_theorem6(spectrum: Spectrum, model: MarkovModel, F, k: int,
                    tower: GammaTower | None = None) -> VerificationReport:
    """``pi_{k-1} int Gamma^2 = pi_k int F^2 Gamma + (-1)^k int Gamma T_{k+1}(L/2) Gamma``."""
    tag, N = _tag(model)
    if tower is None:
        tower = _require_chaos(spectrum, model, F, k)
    gam = tower.level(1)
    t = build_T(spectrum, k)
    sign = -1 if k % 2 else 1
    try:
        lhs = pi_k(spectrum, k - 1) * _E(model, gam * gam)
        tail = _E(model, gam * apply_operator_poly(model, t, gam))
        rhs = pi_k(spectrum, k) * _E(model, F * F * gam) + sign * tail
    except BoundaryContaminationError as exc:
        return skip_report("theorem6", tag, N, k, str(exc))
    return identity_report("theorem6", tag, N, k, lhs, rhs)


def verify_reduction(spectrum: Spectrum, model: MarkovModel, F, k: int,
                     tower: GammaTower | None = None) -> VerificationReport:
    """Low-degree forms: ``int Gamma^2 = l1 int F^2 Gamma`` (k=1) and
    ``int Gamma L Gamma / 2 - l1 int Gamma^2 + l1 l2 int F^2 Gamma = 0`` (k=2)."""
    if k not in (1, 2):
        raise ValueError("explicit reductions exist for k = 1 and k = 2 only")
    tag, N = _tag(model)
    if tower is None:
        tower = _require_chaos(spectrum, model, F, k)
    gam = tower.level(1)
    l1 = spectrum[1]
    name = f"reduction_k{k}"
    try:
        g2 = _E(model, gam * gam)
        f2g = _E(model, F * F * gam)
        if k == 1:
            return identity_report(name, tag, N, k, g2, l1 * f2g)
        glg = _E(model, gam * model.apply_L(gam))
    except BoundaryContaminationError as exc:
        return skip_report(name, tag, N, k, str(exc))
    return identity_report(name, tag, N, k, glg / 2 - l1 * g2 + l1 * spectrum[2] * f2g, Fraction(0))


def integral_Qk(spectrum: Spectrum, model: MarkovModel, F, k: int,
                tower: GammaTower | None = None) -> VerificationReport:
    """``int Q_k(Gamma)(F) = Q_k(lam_k) int F^2``."""
    tag, N = _tag(model)
    if tower is None or tower.m_max < k:
        tower = build_gamma_tower(model, F, k)
    try:
        lhs = _E(model, Q_of_gamma(spectrum, model, F, k, tower))
        rhs = build_Q(spectrum, k)(spectrum[k]) * _E(model, F * F)
    except BoundaryContaminationError as exc:
        return skip_report("integral_Qk", tag, N, k, str(exc))
    return identity_report("integral_Qk", tag, N, k, lhs, rhs)


def verify_consistency(spectrum: Spectrum, k: int) -> list[VerificationReport]:
    """The two exact coefficient identities linking ``Q_{k+1}``, ``R_{k+1}`` and ``pi``."""
    tag = "spectrum"
    q = build_Q(spectrum, k + 1)
    r = build_R(spectrum, k)
    sign = -1 if k % 2 else 1
    r1, r2 = consistency_residuals(spectrum, k)
    assert r1 == q.coeff(1) - sign * pi_k(spectrum, k) and r2 == r(spectrum[k]) + sign * pi_k(spectrum, k - 1)
    return [
        identity_report("consistency_Q1", tag, 0, k, q.coeff(1), sign * pi_k(spectrum, k)),
        identity_report("consistency_R", tag, 0, k, r(spectrum[k]), -sign * pi_k(spectrum, k - 1)),
    ]


# -- inequalities --------------------------------------------------------------


def _moments(model, F, gam):
    """``(c, int Gamma, int Gamma^2, int F^2 Gamma)``."""
    return (_E(model, F * F), _E(model, gam), _E(model, gam * gam), _E(model, F * F * gam))


def default_n_max(model: MarkovModel, k: int) -> int:
    """Eigenvalue indices relevant to ``Gamma(F)`` for a ``k``-chaos."""
    if isinstance(model, CubeModel):
        return min(model.N, 2 * k)
    return 2 * k


def verify_bound_cor7(spectrum: Spectrum, model: MarkovModel, F, k: int, n_max: int | None = None,
                      tower: GammaTower | None = None) -> VerificationReport:
    """``Var(Gamma)/c^2 <= lam_k (int F^2 Gamma / c^2 - lam_k)`` with ``c = int F^2``."""
    tag, N = _tag(model)
    if tower is None:
        tower = _require_chaos(spectrum, model, F, k)
    n_max = default_n_max(model, k) if n_max is None else n_max
    spec = check_spectral_condition(spectrum, k, n_max)
    if not spec.holds:
        raise ChaosPreconditionError(f"spectral condition fails at {spec.violations[:3]}")
    lam = spectrum[k]
    try:
        c, g1, g2, f2g = _moments(model, F, tower.level(1))
    except BoundaryContaminationError as exc:
        return skip_report("cor7", tag, N, k, str(exc))
    var = (g2 - g1 * g1) / (c * c)
    rhs = lam * (f2g / (c * c) - lam)
    return inequality_report("cor7", tag, N, k, var, rhs, norm_sq=c, spectral=spec)


def diffusion_identities(model: MarkovModel, F, k: int, lam=None) -> list[VerificationReport]:
    """``lam int F^4 = 3 int F^2 Gamma`` and ``lam int F^3 = 2 int F Gamma`` (diffusions only)."""
    if not model.is_diffusion:
        raise DiffusionRequiredError("diffusion identity unavailable on a non-diffusion model")
    tag, N = _tag(model)
    lam = model.find_eigenvalue(F) if lam is None else as_fraction(lam)
    if lam is None:
        raise NotEigenfunctionError("diffusion identities require an eigenfunction")
    gam = carre_du_champ(model, F)
    f2 = F * F
    return [
        identity_report("diffusion_F4", tag, N, k, lam * _E(model, f2 * f2), 3 * _E(model, f2 * gam)),
        identity_report("diffusion_F3", tag, N, k, lam * _E(model, f2 * F), 2 * _E(model, F * gam)),
    ]


def fourth_moment_form(model: MarkovModel, F, k: int, tower: GammaTower | None = None) -> VerificationReport:
    """``Var(Gamma)/c^2 <= lam^2 (int F^4 / (3 c^2) - 1)``, after checking the diffusion identities."""
    if not model.is_diffusion:
        raise DiffusionRequiredError("diffusion identity unavailable on a non-diffusion model")
    tag, N = _tag(model)
    if tower is None:
        tower = build_gamma_tower(model, F, 1)
    lam = tower.eigenvalue
    ids = diffusion_identities(model, F, k, lam)
    c, g1, g2, f2g = _moments(model, F, tower.level(1))
    f4 = _E(model, F * F * F * F)
    ids.append(identity_report("diffusion_F2Gamma", tag, N, k, lam * (f4 / (3 * c * c) - 1), f2g / (c * c) - lam))
    var = (g2 - g1 * g1) / (c * c)
    rhs = lam * lam * (f4 / (3 * c * c) - 1)
    rep = inequality_report("eq20", tag, N, k, var, rhs, identities=ids, fourth_moment=f4 / (c * c), norm_sq=c)
    if not all(r.passed for r in ids):
        return predicate_report("eq20", tag, N, k, False, var, rhs, rep.residual, identities=ids)
    return rep


# -- curvature -----------------------------------------------------------------


def check_curvature_rigidity(model: MarkovModel, rho, F) -> VerificationReport:
    """``Gamma_2(F) - rho Gamma(F)``: its structural or pointwise sign, and constancy of ``Gamma``
    when ``F`` is an eigenfunction at ``rho``."""
    rho = as_fraction(rho)
    tag, N = _tag(model)
    gam = carre_du_champ(model, F)
    diff = iterated_gradient(model, F, m=2) - gam * rho
    lam = model.find_eigenvalue(F)
    gamma_const = model.constant_value(gam) is not None
    details = {"eigenvalue": lam, "gamma_constant": gamma_const, "difference": diff}
    if isinstance(model, OUModel):
        ok = True
        if rho == 1:
            # Bochner identity for OU: Gamma_2 - Gamma = |Hess F|^2, a sum of squares
            ok = model.is_zero(diff - model.derivative_norm_sq(F, 2))
        else:
            ok = rho <= 1 and model.is_zero(diff - model.derivative_norm_sq(F, 2) - gam * (1 - rho))
        details["sum_of_squares"] = ok
        if lam == rho:
            ok = ok and gamma_const
        return predicate_report("curvature", tag, N, 0, ok, None, None, None, **details)
    lo = model.min_value(diff)
    ok = lo >= 0
    if ok and lam == rho:
        ok = gamma_const
    return predicate_report("curvature", tag, N, 0, ok, lo, Fraction(0), lo, **details)


# -- even degree: sign condition in place of the chaos equation -----------------


def relaxed_even_bound(spectrum: Spectrum, model: MarkovModel, F, k: int) -> VerificationReport:
    """Even ``k``: if ``Q_{k+1}(Gamma)(F) >= 0`` pointwise (spectrum ``spectrum``, with
    ``spectrum[k]`` the eigenvalue of ``F``) and ``T_{k+1}`` has the right sign at the
    model's true eigenvalues, then ``int Gamma^2 <= lam_k int F^2 Gamma``.

    Reports ``pass`` when the implication holds (including vacuously) and records
    whether the hypotheses were met in ``details``.
    """
    if k % 2:
        raise ValueError("the sign relaxation applies to even k")
    if not isinstance(model, CubeModel):
        raise ValueError("pointwise sign checks are implemented on the cube")
    tag, N = _tag(model)
    lam = spectrum[k]
    if model.find_eigenvalue(F) != lam:
        raise NotEigenfunctionError(f"F must be an eigenfunction at {lam}")
    tower = build_gamma_tower(model, F, k + 1)
    q = Q_of_gamma(spectrum, model, F, k + 1, tower)
    sign_ok = model.min_value(q) >= 0
    t = build_T(spectrum, k)
    true_spec_ok = all(t(Fraction(-n, 2)) <= 0 for n in range(N + 1))
    gam = tower.level(1)
    lhs = _E(model, gam * gam)
    rhs = lam * _E(model, F * F * gam)
    bound = lhs <= rhs
    ok = bound or not (sign_ok and true_spec_ok)
    return predicate_report("relaxed_even", tag, N, k, ok, lhs, rhs, rhs - lhs,
                            sign_condition=sign_ok, spectral_condition=true_spec_ok, bound_holds=bound)


# -- Lemma 9 on explicit matrices ------------------------------------------------


def cube_generator_matrix(N: int) -> np.ndarray:
    """Integer matrix of ``2L`` on ``{-1,1}^N`` (object dtype)."""
    size = 1 << N
    A = np.zeros((size, size), dtype=object)
    for flip in _flip_indices(N):
        A[np.arange(size), flip] += 1
    A[np.arange(size), np.arange(size)] -= N
    return A


def _operator_poly_matrix(N: int, poly: RationalPoly) -> np.ndarray:
    """Integer matrix ``D * P(L)`` for a positive integer ``D``."""
    coeffs = [poly.coeff(j) for j in range(max(poly.degree, 0) + 1)]
    d = max(poly.degree, 0)
    den = math.lcm(*(c.denominator for c in coeffs)) if coeffs else 1
    # D * P(L) = sum_j (den * c_j * 2^(d-j)) (2L)^j, with D = den * 2^d
    A = cube_generator_matrix(N)
    size = 1 << N
    out = np.zeros((size, size), dtype=object)
    power = np.identity(size, dtype=int).astype(object)
    for j, c in enumerate(coeffs):
        w = c * den * 2 ** (d - j)
        if w:
            out = out + power * int(w)
        if j < d:
            power = power.dot(A)
    return out


def is_psd_exact(M: np.ndarray) -> bool:
    """Exact positive-semidefiniteness of a symmetric integer matrix (fraction-free elimination)."""
    a = [list(map(int, row)) for row in M.tolist()]
    n = len(a)
    alive = list(range(n))
    prev = 1
    while alive:
        p = alive[0]
        piv = a[p][p]
        if piv < 0:
            return False
        rest = alive[1:]
        if piv == 0:
            if any(a[p][j] for j in rest):
                return False
            alive = rest
            continue
        for i in rest:
            ai = a[i]
            for j in rest:
                ai[j] = (piv * ai[j] - ai[p] * a[p][j]) // prev
        prev = piv
        alive = rest
    return True


def lemma9_check(N: int, poly: RationalPoly) -> VerificationReport:
    """Quadratic-form nonnegativity of ``P(L)`` against ``P(-n) >= 0`` for ``n = 0..N``."""
    psd = is_psd_exact(_operator_poly_matrix(N, poly))
    spectral = all(poly(-n) >= 0 for n in range(N + 1))
    return predicate_report("lemma9", "cube", N, poly.degree, psd == spectral, psd, spectral, None,
                            psd=psd, spectral=spectral, poly=poly)


def verify_all_lemma3(model, F, tower: GammaTower, max_sum: int = 5) -> list[VerificationReport]:
    out = []
    for n in range(1, max_sum):
        for m in range(1, max_sum - n + 1):
            out.append(verify_lemma3(model, F, n, m, tower))
    return out


__all__ = [
    "ChaosPreconditionError",
    "DiffusionRequiredError",
    "GammaTower",
    "Q_of_gamma",
    "TowerMismatchError",
    "apply_operator_poly",
    "build_gamma_tower",
    "carre_du_champ",
    "check_curvature_rigidity",
    "cube_generator_matrix",
    "default_n_max",
    "diffusion_identities",
    "fourth_moment_form",
    "integral_Qk",
    "is_chaos",
    "is_psd_exact",
    "iterated_gradient",
    "lemma9_check",
    "relaxed_even_bound",
    "verify_all_lemma3",
    "verify_bound_cor7",
    "verify_consistency",
    "verify_lemma3",
    "verify_reduction",
    "verify_theorem6",
]
