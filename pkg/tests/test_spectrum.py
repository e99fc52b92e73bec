from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from chaoslab.spectrum import (
    RationalPoly,
    Spectrum,
    SpectrumError,
    build_Q,
    build_R,
    build_T,
    check_spectral_condition,
    consistency_residuals,
    parse_spectrum,
    pi_k,
)

NAT = Spectrum.nat()
X = RationalPoly.monomial(1)

positive_fracs = st.fractions(min_value=Fraction(1, 7), max_value=5, max_denominator=9)


@st.composite
def spectra(draw, min_size=3, max_size=9):
    gaps = draw(st.lists(positive_fracs, min_size=min_size - 1, max_size=max_size - 1))
    vals, acc = [Fraction(0)], Fraction(0)
    for g in gaps:
        acc += g
        vals.append(acc)
    return Spectrum.of(vals)


def brute_product(roots):
    out = [Fraction(1)]
    for r in roots:
        nxt = [Fraction(0)] * (len(out) + 1)
        for i, c in enumerate(out):
            nxt[i + 1] += c
            nxt[i] -= r * c
        out = nxt
    return RationalPoly(out)


# -- construction ----------------------------------------------------------------


def test_q0_is_one():
    assert build_Q(NAT, 0) == RationalPoly([1])


def test_q2_and_q3_closed_forms():
    S = Spectrum.of([0, Fraction(1, 2), Fraction(3, 2), 4])
    l1, l2 = S[1], S[2]
    assert build_Q(S, 2) == X * X - X * l1
    assert build_Q(S, 3) == X * X * X - X * X * (l1 + l2) + X * (l1 * l2)


def test_r_low_degrees():
    S = Spectrum.of([0, Fraction(2, 3), Fraction(5, 2)])
    assert build_R(S, 1) == RationalPoly([1])
    assert build_R(S, 2) == X - (S[1] + S[2])


def test_r4_on_naturals_against_expansion():
    q4 = brute_product([0, 1, 2, 3])
    stripped = q4 - X * q4.coeff(1)
    quotient, rem = stripped.divmod(X * X)
    assert rem.is_zero()
    assert build_R(NAT, 3) == quotient == RationalPoly([11, -6, 1])


def test_t_low_degrees():
    assert build_T(NAT, 1).is_zero()
    assert build_T(Spectrum.of([0, Fraction(1, 3), 2]), 2) == X


def test_t4_on_naturals_against_binomial_shift():
    r = RationalPoly([11, -6, 1])
    # (X+3)^2 - 6(X+3) + 11 - r(3)
    shifted = RationalPoly([9 - 18 + 11, 6 - 6, 1]) - r(3)
    assert r(3) == 2
    assert build_T(NAT, 3) == shifted == X * X


def test_pi_values():
    assert pi_k(NAT, 0) == 1
    assert pi_k(NAT, 4) == 24
    assert pi_k(Spectrum.of([0, Fraction(1, 2), Fraction(3, 2)]), 2) == Fraction(3, 4)


def test_preconditions():
    S = Spectrum.of([0, 1, 2])
    with pytest.raises(SpectrumError):
        build_Q(S, 4)
    with pytest.raises(SpectrumError):
        build_R(S, 0)
    with pytest.raises(SpectrumError):
        build_T(S, 0)
    with pytest.raises(SpectrumError):
        pi_k(S, 3)


@pytest.mark.parametrize("values", [[1, 2], [0, 2, 1], [0, 1, 1], [0, -1]])
def test_spectrum_invariants_rejected(values):
    with pytest.raises(SpectrumError):
        Spectrum.of(values)


def test_parse_spectrum_forms():
    assert parse_spectrum("nat").natural
    S = parse_spectrum("[0, 1/2, 3/2, 2]")
    assert S.prefix(4) == [0, Fraction(1, 2), Fraction(3, 2), 2]
    with pytest.raises(SpectrumError):
        parse_spectrum("[0, x]")
    with pytest.raises(SpectrumError):
        parse_spectrum("0, 1")


# -- spectral condition ------------------------------------------------------------


def test_k1_holds_trivially():
    rep = check_spectral_condition(NAT, 1, 50)
    assert rep.holds and all(v == 0 for v in rep.values)


def test_k2_values_are_minus_half_n():
    rep = check_spectral_condition(NAT, 2, 100)
    assert rep.holds
    assert list(rep.values) == [Fraction(-n, 2) for n in range(101)]


@pytest.mark.parametrize("k", range(3, 11))
def test_naturals_satisfy_condition(k):
    rep = check_spectral_condition(NAT, k, 200)
    assert rep.holds and not rep.violations
    assert rep.checked_indices == range(201)
    assert rep.truncated


def test_explicit_spectrum_report_is_exact():
    S = Spectrum.of([0, 1, Fraction(3, 2), 2])
    rep = check_spectral_condition(S, 3, 3)
    # (-1)^3 T_4(-lam_n/2) with T_4(X) = X^2 + (2 lam_3 - lam_1 - lam_2 - lam_3 ... ) computed independently
    r = brute_product(S.prefix(4))
    r = (r - X * r.coeff(1)).divmod(X * X)[0]
    expected = [-(r.shift(S[3])(-S[n] / 2) - r(S[3])) for n in range(4)]
    assert list(rep.values) == expected
    assert rep.holds == all(v <= 0 for v in expected)
    assert not rep.truncated


def test_violation_detected():
    # k=3: -T_4(-l/2) <= 0 iff l >= 2(l_3 - l_1 - l_2); fails at l_1 when l_3 is far out
    S = Spectrum.of([0, 1, 2, 10])
    rep = check_spectral_condition(S, 3, 3)
    assert not rep.holds
    assert [n for n, _ in rep.violations] == [1, 2, 3]
    assert all(v > 0 for _, v in rep.violations)


# -- properties --------------------------------------------------------------------


@given(spectra(), st.data())
def test_r_reconstructs_q(S, data):
    k = data.draw(st.integers(1, S.size - 1))
    q = build_Q(S, k + 1)
    assert X * X * build_R(S, k) + X * q.coeff(1) == q


@given(spectra(), st.data())
def test_t_vanishes_at_zero(S, data):
    k = data.draw(st.integers(1, S.size - 1))
    assert build_T(S, k)(0) == 0


@given(spectra(max_size=11), st.data())
def test_consistency_identities_random(S, data):
    k = data.draw(st.integers(1, S.size - 1))
    sign = -1 if k % 2 else 1
    assert build_Q(S, k + 1).coeff(1) == sign * pi_k(S, k)
    assert build_R(S, k)(S[k]) == -sign * pi_k(S, k - 1)
    assert consistency_residuals(S, k) == (0, 0)


@pytest.mark.parametrize("k", range(1, 11))
def test_consistency_identities_naturals(k):
    assert consistency_residuals(NAT, k) == (0, 0)


@given(spectra(), st.lists(st.fractions(min_value=-6, max_value=6, max_denominator=11), min_size=20, max_size=20),
       st.data())
def test_coefficients_round_trip(S, points, data):
    k = data.draw(st.integers(0, S.size))
    q = build_Q(S, k)
    rebuilt = RationalPoly(dict(q.coefficients))
    for x in points:
        prod = Fraction(1)
        for lam in S.prefix(k):
            prod *= x - lam
        assert rebuilt(x) == prod == q(x)


@given(st.lists(st.fractions(min_value=-4, max_value=4, max_denominator=5), max_size=5),
       st.lists(st.fractions(min_value=-4, max_value=4, max_denominator=5), min_size=1, max_size=4))
def test_poly_divmod(a, b):
    p, d = RationalPoly(a), RationalPoly(b)
    if d.is_zero():
        return
    q, r = p.divmod(d)
    assert q * d + r == p
    assert r.is_zero() or r.degree < d.degree


@given(st.lists(st.fractions(min_value=-4, max_value=4, max_denominator=5), max_size=6),
       st.fractions(min_value=-3, max_value=3, max_denominator=4),
       st.fractions(min_value=-3, max_value=3, max_denominator=4))
def test_poly_shift_and_derivative(coeffs, a, x):
    p = RationalPoly(coeffs)
    assert p.shift(a)(x) == p(x + a)
    h = Fraction(1, 10**6)
    if not p.is_zero():
        # exact derivative agrees with the symmetric difference up to O(h^2)
        approx = (p(x + h) - p(x - h)) / (2 * h)
        assert abs(approx - p.derivative()(x)) < Fraction(1, 10**6)
