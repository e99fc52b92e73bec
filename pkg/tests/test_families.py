import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from chaoslab.families import (
    FamilyError,
    _model_moments,
    build_member,
    chi_square_ou,
    constant_coefficient_ou,
    paired_product_cube,
    paired_product_ou,
)
from chaoslab.models import CubeModel, OUModel, PolyFunction
from chaoslab.quadratic import QuadraticChaos, from_eigenvalues
from chaoslab.rational import Surd

betas = st.lists(st.fractions(min_value=-3, max_value=3, max_denominator=4).filter(bool), min_size=1, max_size=3)


def diagonal_poly(bs):
    """``sum_i b_i (x_i^2 - 1)`` as an exact OU polynomial."""
    N = len(bs)
    terms = {(0,) * N: -sum(bs)}
    for i, b in enumerate(bs):
        terms[tuple(2 if j == i else 0 for j in range(N))] = b
    return OUModel(N), PolyFunction(N, terms)


@given(betas, st.sampled_from([Fraction(1), Fraction(1, 3), Fraction(2)]))
def test_quadratic_moments_match_symbolic_oracle(bs, s):
    q = from_eigenvalues(bs, s)
    m, F = diagonal_poly(bs)
    oracle = _model_moments(m, F, s)
    for a in range(5):
        for b in range(5 - a):
            assert q.moment(a, b) == oracle(a, b), (a, b)


def test_quadratic_known_values():
    q = QuadraticChaos(((Fraction(1, 2), 1),))
    assert (q.norm_sq, q.fourth_moment, q.var_gamma) == (Fraction(1, 2), Fraction(15, 4), 2)
    assert q.third_moment == 1
    for m in (1, 4, 64):
        q = QuadraticChaos(((Fraction(1, 2), m), (Fraction(-1, 2), m)), Fraction(1, m))
        assert q.fourth_moment == 3 + Fraction(6, m)
        assert q.var_gamma == Fraction(4, m)
        assert q.dimension == 2 * m


def test_quadratic_guards():
    with pytest.raises(ValueError):
        QuadraticChaos(((Fraction(0), 3),))
    with pytest.raises(ValueError):
        QuadraticChaos(((Fraction(1), 1),)).raw_moment(3, 2)


def test_quadratic_sampling_mean_and_variance():
    q = QuadraticChaos(((Fraction(1, 2), 3), (Fraction(-1), 2)), Fraction(1, 2))
    x = q.sample(400_000, seed=8).values
    assert abs(x.mean()) < 5 * math.sqrt(float(q.norm_sq) / len(x))
    assert abs(x.var() - float(q.norm_sq)) < 0.02


def test_multiplicity_merge():
    a = QuadraticChaos(((Fraction(1), 2), (Fraction(1), 3)))
    b = QuadraticChaos(((Fraction(1), 5),))
    assert a == b


# -- families ----------------------------------------------------------------------------


def test_paired_product_ou_against_oracle_m4():
    mem = paired_product_ou(8)
    oracle = _model_moments(mem.model, mem.F, mem.scale_sq)
    for a, b in [(2, 0), (4, 0), (0, 1), (0, 2), (3, 0), (1, 1), (2, 1)]:
        assert mem.moment(a, b) == oracle(a, b)
    assert mem.fourth_moment == 3 + Fraction(6, 4)
    assert mem.var_gamma == 1


@pytest.mark.parametrize("m", [4, 16, 64, 256])
def test_paired_product_closed_forms(m):
    mem = paired_product_ou(2 * m)
    assert mem.norm_sq == 1
    assert mem.fourth_moment == 3 + Fraction(6, m)
    assert mem.var_gamma == Fraction(4, m)
    assert mem.stein_bound == 1 / Surd.sqrt(m)


@pytest.mark.parametrize("m", [1, 2, 4, 8])
def test_paired_product_cube_against_enumeration(m):
    mem = paired_product_cube(2 * m)
    model = CubeModel(2 * m)
    F = model.constant(0)
    for i in range(m):
        F = F + model.eigenbasis_element((2 * i + 1, 2 * i + 2))
    oracle = _model_moments(model, F, Fraction(1, m))
    for a, b in [(2, 0), (4, 0), (0, 1), (0, 2), (3, 0), (2, 1)]:
        assert mem.moment(a, b) == oracle(a, b)
    assert mem.var_gamma == 0
    atoms = model.atoms(F)
    expected = [(float(v) / math.sqrt(m), w) for v, w in atoms]
    got = paired_product_cube(2 * m).atoms()
    assert [w for _, w in got] == [w for _, w in expected]
    assert np.allclose([v for v, _ in got], [v for v, _ in expected])


def test_cube_pair_m1_distance_exceeds_vacuous_bound():
    mem = paired_product_cube(2)
    d = mem.distance("normal", 0, 0)
    assert d.method == "exact"
    assert abs(d.estimate - (0.5 * (1 + math.erf(1 / math.sqrt(2))) - 0.5)) < 1e-12
    assert mem.stein_bound == 0  # the non-diffusion caveat: no bound is implied


def test_ou_pair_m1_bound_dominates():
    mem = paired_product_ou(2)
    d = mem.distance("normal", 200_000, 3)
    assert float(mem.stein_bound) == 1.0
    assert d.estimate <= float(mem.stein_bound) + 3 * d.error_proxy


@pytest.mark.parametrize("N", [2, 3, 4])
def test_constant_coefficient_against_symbolic(N):
    mem = constant_coefficient_ou(N)
    model = OUModel(N)
    terms = {}
    for i in range(N):
        for j in range(i + 1, N):
            e = [0] * N
            e[i] = e[j] = 1
            terms[tuple(e)] = 2
    oracle = _model_moments(model, PolyFunction(N, terms), mem.scale_sq)
    for a in range(5):
        for b in range(5 - a):
            assert mem.moment(a, b) == oracle(a, b), (a, b)
    assert mem.norm_sq == 1


def test_chi_square_family_is_exact_gamma():
    for N in (1, 2, 5):
        mem = chi_square_ou(N)
        p = Fraction(N, 2)
        assert mem.norm_sq == p
        assert mem.gamma_criterion(p) == 0
        assert mem.gamma_variance() == 0
        assert mem.eq22_slack(p) == 0


def test_eq22_slack_nonnegative_constant_coefficient():
    for N in (2, 3, 4, 8, 16):
        mem = constant_coefficient_ou(N)
        assert mem.eq22_slack(1) >= 0


def test_ou_paired_stein_bound_strictly_decreasing():
    bounds = [paired_product_ou(2 * m).stein_bound for m in (1, 4, 16, 64, 256)]
    assert all(b > c for b, c in zip(bounds, bounds[1:]))


def test_build_member_dispatch():
    assert build_member("paired-product", "cube", 4).model == CubeModel(4)
    assert build_member("random", "cube", 5, 3, seed=2).k == 3
    with pytest.raises(FamilyError):
        build_member("chi-square", "cube", 4)
    with pytest.raises(FamilyError):
        build_member("paired-product", "ou", 3)
    with pytest.raises(FamilyError):
        build_member("paired-product", "ou", 4, k=3)


def test_random_member_moments_exact():
    mem = build_member("random", "ou", 3, 2, seed=4)
    assert mem.norm_sq == 1
    # a normalised diffusion chaos has int F^4 >= 3, with the excess controlling Var(Gamma)
    assert mem.fourth_moment >= 3
    assert mem.var_gamma <= 4 * (mem.fourth_moment / 3 - 1)
