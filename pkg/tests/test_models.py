import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from chaoslab.gamma import carre_du_champ
from chaoslab.models import (
    ChaosSpec,
    ChaosSpecError,
    CubeFunction,
    CubeModel,
    ModelMismatchError,
    OUModel,
    PoissonModel,
    PolyFunction,
    build_model,
    dump_spec,
    gaussian_moment,
    hermite_norm_sq,
    load_function,
    materialize_chaos,
    parse_spec,
    random_chaos,
)
from chaoslab.models.base import chunked_samples
from chaoslab.models.poisson import BoundaryContaminationError, default_truncation

small = st.fractions(min_value=-5, max_value=5, max_denominator=6)


def cube_oracle_L(N, values):
    """Direct flip-difference formula on explicit points."""
    pts = list(itertools.product(*[[0, 1]] * N))
    index = {p: sum(b << i for i, b in enumerate(p)) for p in pts}
    out = [Fraction(0)] * (1 << N)
    for p in pts:
        x = index[p]
        acc = Fraction(0)
        for i in range(N):
            q = list(p)
            q[i] ^= 1
            acc += values[index[tuple(q)]] - values[x]
        out[x] = acc / 2
    return out


def isserlis_count(power):
    """Number of perfect matchings of ``power`` points, by recursion on the first point."""
    if power == 0:
        return 1
    if power % 2:
        return 0
    return (power - 1) * isserlis_count(power - 2)


@st.composite
def cube_functions(draw, N=None):
    N = N or draw(st.integers(1, 6))
    vals = draw(st.lists(small, min_size=1 << N, max_size=1 << N))
    return CubeFunction.from_values(N, vals)


@st.composite
def ou_polys(draw, N=None, max_deg=4):
    N = N or draw(st.integers(1, 3))
    n_terms = draw(st.integers(1, 5))
    terms = {}
    for _ in range(n_terms):
        e = tuple(draw(st.lists(st.integers(0, max_deg), min_size=N, max_size=N)))
        if sum(e) <= max_deg + 2:
            terms[e] = draw(small)
    return PolyFunction(N, terms)


# -- cube ---------------------------------------------------------------------------


def test_cube_point_indexing():
    m = CubeModel(3)
    x1 = m.coordinate(1)
    # bit 0 set means x_1 = -1
    assert x1[0b000] == 1 and x1[0b001] == -1 and x1[0b110] == 1


def test_cube_L_on_pair_product():
    m = CubeModel(2)
    f = m.eigenbasis_element((1, 2))
    assert m.apply_L(f) == f * -2
    assert m.apply_L(f).values == cube_oracle_L(2, f.values)


@given(cube_functions())
def test_cube_L_matches_oracle(f):
    m = CubeModel(f.N)
    assert m.apply_L(f).values == cube_oracle_L(f.N, f.values)


@given(cube_functions())
def test_cube_walsh_round_trip(f):
    assert CubeFunction.from_walsh(f.N, f.walsh_coefficients()) == f


@given(cube_functions(), st.data())
def test_cube_integration_by_parts(f, data):
    m = CubeModel(f.N)
    g = data.draw(cube_functions(N=f.N))
    assert m.integrate(f * -m.apply_L(g)) == m.integrate(g * -m.apply_L(f))
    assert m.integrate(m.apply_L(f)) == 0


def test_cube_integration_by_parts_n12():
    rng = np.random.default_rng(5)
    m = CubeModel(12)
    f = CubeFunction.from_values(12, [Fraction(int(v), 3) for v in rng.integers(-5, 6, 1 << 12)])
    g = CubeFunction.from_values(12, [Fraction(int(v), 7) for v in rng.integers(-5, 6, 1 << 12)])
    assert m.integrate(f * -m.apply_L(g)) == m.integrate(g * -m.apply_L(f))


@pytest.mark.parametrize("N", [1, 3, 5])
def test_cube_walsh_eigen_and_orthonormal(N):
    m = CubeModel(N)
    subsets = [A for r in range(N + 1) for A in itertools.combinations(range(1, N + 1), r)]
    basis = {A: m.eigenbasis_element(A) for A in subsets}
    for A, w in basis.items():
        assert m.apply_L(w) == w * -len(A)
    for A, B in itertools.product(subsets, repeat=2):
        assert m.integrate(basis[A] * basis[B]) == (1 if A == B else 0)


def test_cube_basic_values():
    m = CubeModel(3)
    g = m.coordinate(2) + 5
    assert m.multiply(m.constant(1), g) == g
    assert m.integrate(m.eigenbasis_element((1, 2))) == 0


def test_cube_not_diffusion():
    m = CubeModel(2)
    f = m.coordinate(1)
    lhs = carre_du_champ(m, f * f, f)  # Gamma(phi(f), f) with phi(x) = x^2
    rhs = f * 2 * carre_du_champ(m, f)
    assert lhs != rhs
    # f^2 = 1 on the cube, so the left side vanishes while the right is 2 x_1
    assert m.is_zero(lhs) and rhs == f * 2


def test_cube_atoms_and_dump():
    m = CubeModel(2)
    f = m.eigenbasis_element((1, 2))
    assert m.atoms(f) == [(-1, Fraction(1, 2)), (1, Fraction(1, 2))]
    text = m.dump(f)
    assert text.splitlines()[1] == "1\t-1/1"
    assert load_function(m, text) == f


def test_cube_mismatch():
    with pytest.raises(ModelMismatchError):
        CubeModel(2).apply_L(CubeModel(3).constant())
    with pytest.raises(ModelMismatchError):
        CubeModel(2).constant() + CubeModel(3).constant()


def test_cube_enumeration_n10():
    m = CubeModel(10)
    spec = random_chaos("cube", 10, 3, 4)
    F = materialize_chaos(spec).F
    atoms = m.atoms(F)
    assert sum(w for _, w in atoms) == 1
    assert sum(w * 1024 for _, w in atoms) == 1024


# -- OU -------------------------------------------------------------------------------


def test_ou_basic_examples():
    m = OUModel(1)
    x = m.coordinate(1)
    assert m.apply_L(x) == x * -1
    assert m.multiply(x, x) == m.polynomial({(2,): 1})
    h = m.polynomial({(2,): 1, (0,): -1})
    assert h * h == m.polynomial({(4,): 1, (2,): -2, (0,): 1})
    assert m.integrate(x * x) == 1
    assert m.integrate(m.polynomial({(8,): 1})) == 105 == isserlis_count(8)


@pytest.mark.parametrize("p", range(0, 13))
def test_gaussian_moment_matches_matchings(p):
    assert gaussian_moment(p) == isserlis_count(p)


@given(ou_polys(), st.data())
def test_ou_integration_by_parts(f, data):
    m = OUModel(f.N)
    g = data.draw(ou_polys(N=f.N))
    assert m.integrate(f * -m.apply_L(g)) == m.integrate(g * -m.apply_L(f))
    assert m.integrate(m.apply_L(f)) == 0


@given(ou_polys(), st.data())
def test_ou_carre_du_champ_is_gradient_inner(f, data):
    m = OUModel(f.N)
    g = data.draw(ou_polys(N=f.N))
    assert carre_du_champ(m, f, g) == m.gradient_inner(f, g)


@given(ou_polys(max_deg=3), st.lists(small, min_size=1, max_size=4), st.data())
def test_ou_chain_rule(f, phi, data):
    m = OUModel(f.N)
    g = data.draw(ou_polys(N=f.N, max_deg=3))
    dphi = [c * i for i, c in enumerate(phi)][1:] or [0]
    assert carre_du_champ(m, f.compose_univariate(phi), g) == f.compose_univariate(dphi) * carre_du_champ(m, f, g)


@pytest.mark.parametrize("N", [1, 2, 3])
def test_ou_hermite_eigen_and_orthogonal(N):
    m = OUModel(N)
    idx = [e for e in itertools.product(range(4), repeat=N) if sum(e) <= 4]
    basis = {e: m.eigenbasis_element(e) for e in idx}
    for e, h in basis.items():
        assert m.apply_L(h) == h * -sum(e)
    for a, b in itertools.combinations_with_replacement(idx, 2):
        expected = hermite_norm_sq(a) if a == b else 0
        assert m.integrate(basis[a] * basis[b]) == expected


def test_ou_dump_round_trip():
    m = OUModel(2)
    f = m.polynomial({(1, 1): Fraction(1, 3), (2, 0): -1, (0, 0): 1})
    text = m.dump(f)
    assert text == "0,0\t1/1\n1,1\t1/3\n2,0\t-1/1\n"
    assert load_function(m, text) == f


def test_ou_evaluate_matches_exact():
    m = OUModel(2)
    f = m.polynomial({(3, 1): Fraction(1, 3), (0, 2): -2, (0, 0): 5})
    pts = np.array([[0.5, -1.0], [2.0, 3.0]])
    expected = [float(Fraction(1, 3)) * x**3 * y - 2 * y * y + 5 for x, y in pts]
    assert np.allclose(f.evaluate(pts), expected, rtol=1e-15)


def test_ou_sampling_moments():
    m = OUModel(2)
    x1 = m.coordinate(1)
    s = m.sample(x1, 10**6, seed=3).values
    assert abs(s.mean()) < 4 / math.sqrt(10**6)
    xy = m.sample(m.coordinate(1) * m.coordinate(2), 10**6, seed=4).values
    fourth = float(np.mean(xy**4))
    # E[(xy)^4] = 9; the eighth moment 105^2 bounds the spread of (xy)^4
    assert abs(fourth - 9) < 5 * math.sqrt(105**2 - 81) / math.sqrt(10**6)


def test_sampling_independent_of_threads():
    m = OUModel(3)
    f = m.polynomial({(1, 1, 0): 1, (0, 1, 1): -1})
    a = m.sample(f, 200_000, seed=11, threads=1).values
    b = m.sample(f, 200_000, seed=11, threads=4).values
    assert np.array_equal(a, b)
    c = CubeModel(4).sample(CubeModel(4).coordinate(2), 150_000, seed=2, threads=3).values
    d = CubeModel(4).sample(CubeModel(4).coordinate(2), 150_000, seed=2, threads=1).values
    assert np.array_equal(c, d)


def test_chunked_samples_sizes():
    out = chunked_samples(10, 0, lambda rng, n: (rng.random(n), 0), chunk_size=3)
    assert len(out.values) == 10
    assert len(chunked_samples(0, 0, lambda rng, n: (rng.random(n), 0)).values) == 0


# -- Poisson -------------------------------------------------------------------------


def test_poisson_default_truncation():
    assert default_truncation(1) == 28
    m = PoissonModel(1)
    assert m.M == 28 and m.tail_bound < Fraction(1, 10**30)


def test_poisson_first_charlier():
    m = PoissonModel(1)
    f = m.polynomial([-1, 1])
    lf = m.apply_L(f)
    for j in range(m.M):
        assert lf[j] == -(j - 1)
    assert m.is_eigenfunction(f, 1)


def test_poisson_second_charlier():
    m = PoissonModel(1)
    c2 = m.eigenbasis_element(2)
    for j in range(m.M + 1):
        assert c2[j] == j * j - 3 * j + 1
    lc = m.apply_L(c2)
    for j in range(m.M):
        assert lc[j] == -2 * c2[j]


@pytest.mark.parametrize("theta", [Fraction(1), Fraction(5, 2)])
def test_poisson_charlier_eigen(theta):
    m = PoissonModel(theta)
    for n in range(6):
        assert m.is_eigenfunction(m.eigenbasis_element(n), n)


def test_poisson_carre_du_champ_formula():
    theta = Fraction(3, 2)
    m = PoissonModel(theta)
    vals = [Fraction(v, 3) for v in [2, -1, 4, 0, 5, 1]]
    f = m.function(vals)
    gam = carre_du_champ(m, f)
    ext = vals + [Fraction(0)] * (m.M + 2 - len(vals))

    def D(j):
        return ext[j] - (ext[j - 1] if j else 0)

    for j in range(m.M):
        assert 2 * gam[j] == theta * D(j + 1) ** 2 + j * D(j) ** 2


def test_poisson_gamma_of_first_charlier():
    m = PoissonModel(1)
    gam = carre_du_champ(m, m.polynomial([-1, 1]))
    for j in range(m.M - 1):
        assert gam[j] == Fraction(1 + j, 2)


@given(st.lists(small, min_size=1, max_size=8), st.lists(small, min_size=1, max_size=8))
def test_poisson_integration_by_parts(a, b):
    m = PoissonModel(2)
    f, g = m.function(a), m.function(b)
    assert m.expectation(f * -m.apply_L(g)) == m.expectation(g * -m.apply_L(f))
    assert m.expectation(m.apply_L(f)) == 0


def test_poisson_boundary_contamination():
    m = PoissonModel(1)
    c = m.eigenbasis_element(3)
    with pytest.raises(BoundaryContaminationError):
        m.expectation(c * c)
    res = m.integrate(c * c)
    assert res.touches_boundary
    # the truncated value is within the tail bound of 3! theta^3
    assert abs(res.value - 6) < Fraction(1, 10**15)


def test_poisson_sampling_rejections():
    m = PoissonModel(1, M=3)
    s = m.sample(m.polynomial([0, 1]), 100_000, seed=1)
    assert s.values.max() <= 3
    assert 0 < s.rejection_rate < 0.05


def test_poisson_dump_round_trip():
    m = PoissonModel(1)
    f = m.function([1, Fraction(-2, 3)])
    assert load_function(m, m.dump(f)) == f


def test_build_model_tags():
    assert build_model("cube", 3) == CubeModel(3)
    assert build_model("ou", 2) == OUModel(2)
    assert build_model("poisson", theta=2) == PoissonModel(2)
    with pytest.raises(ValueError):
        build_model("torus", 2)


# -- chaos specs ----------------------------------------------------------------------


def test_materialize_cube_pair():
    ch = materialize_chaos(ChaosSpec("cube", 3, 2, {(1, 2): 1}))
    assert ch.norm_sq == 1 and ch.F == CubeModel(3).eigenbasis_element((1, 2))


def test_materialize_ou_pair():
    ch = materialize_chaos(ChaosSpec("ou", 2, 2, {(1, 2): 1}))
    m = ch.model
    assert ch.norm_sq == 1
    assert m.apply_L(ch.F) == ch.F * -2


def test_materialize_ou_hermite_normalisation():
    ch = materialize_chaos(ChaosSpec("ou", 1, 2, {(2,): 1}, form="hermite", scale_sq=Fraction(1, 2)))
    assert ch.F == OUModel(1).polynomial({(2,): 1, (0,): -1})
    assert ch.norm_sq == 1


@pytest.mark.parametrize("coeffs", [{(1, 1): 1}, {(2, 1): 1}, {}, {(1, 2): 0}])
def test_bad_specs(coeffs):
    with pytest.raises(ChaosSpecError):
        ChaosSpec("cube", 3, 2, coeffs)


def test_random_chaos_examples():
    spec = random_chaos("cube", 4, 4, seed=9)
    assert list(spec.coefficients) == [(1, 2, 3, 4)]
    assert abs(next(iter(spec.coefficients.values()))) == 1
    spec = random_chaos("cube", 8, 2, seed=1)
    assert len(spec.coefficients) == 28
    assert materialize_chaos(spec).norm_sq == 1
    spec = random_chaos("ou", 3, 2, seed=7)
    assert all(len(set(i)) == 2 for i in spec.coefficients)
    ch = materialize_chaos(spec)
    assert ch.model.apply_L(ch.F) == ch.F * -2
    with pytest.raises(ChaosSpecError):
        random_chaos("cube", 3, 4, seed=0)


@given(st.sampled_from(["cube", "ou"]), st.integers(1, 6), st.data(), st.integers(0, 2**32))
def test_random_chaos_normalised(model, N, data, seed):
    k = data.draw(st.integers(1, N))
    ch = materialize_chaos(random_chaos(model, N, k, seed))
    assert ch.norm_sq == 1
    assert ch.model.is_eigenfunction(ch.F, k)


def test_random_chaos_deterministic():
    assert random_chaos("cube", 6, 3, 17) == random_chaos("cube", 6, 3, 17)


@pytest.mark.parametrize("spec", [
    ChaosSpec("cube", 4, 2, {(1, 2): Fraction(1, 2), (3, 4): -3}),
    ChaosSpec("ou", 2, 3, {(3, 0): 1, (1, 2): Fraction(-2, 5)}, form="hermite", scale_sq=Fraction(1, 6)),
    ChaosSpec("poisson", 1, 2, {(2,): Fraction(3, 2)}, form="charlier", theta=Fraction(1, 2)),
])
def test_spec_file_round_trip(spec):
    assert parse_spec(dump_spec(spec)) == spec


def test_spec_file_format():
    text = dump_spec(ChaosSpec("cube", 4, 2, {(1, 2): Fraction(1, 2)}))
    assert text == "cube,4,2\n1,2\t1/2\n"


def test_poisson_charlier_norm():
    ch = materialize_chaos(random_chaos("poisson", 1, 2, seed=3))
    (c,) = ch.spec.coefficients.values()
    assert ch.norm_sq == c * c * 2
