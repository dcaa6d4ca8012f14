from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from slopelab.qseries import (
    InsufficientLength,
    NegativeWeight,
    QExpansion,
    WeightUnsupported,
    bernoulli,
    complementary_basis,
    delta_series,
    dim_M1,
    dim_pnew,
    dim_S1,
    dim_S_gamma0,
    eisenstein_series,
    hecke_tp,
    inverse_mod,
    lift_weight,
    miller_cusp_basis,
    mul_exact,
    mul_mod,
    tp_matrix,
    up_operator,
    vp_operator,
)


def sigma(n, e):
    return sum(d**e for d in range(1, n + 1) if n % d == 0)


def test_bernoulli_values():
    assert bernoulli(0) == 1
    assert bernoulli(1) == Fraction(-1, 2)
    assert bernoulli(4) == Fraction(-1, 30)
    assert bernoulli(12) == Fraction(-691, 2730)
    assert bernoulli(7) == 0


def test_e4_prefix():
    assert list(eisenstein_series(4, 3).coeffs) == [1, 240, 2160]
    # exact mode clears denominators
    assert list(eisenstein_series(12, 3).coeffs) == [691, 65520, 65520 * 2049]
    assert eisenstein_series(12, 5, 5, 4)[0] == 1


@pytest.mark.parametrize("k", [4, 6, 8, 10, 12, 14, 16])
def test_eisenstein_matches_sigma_formula(k):
    E = eisenstein_series(k, 12)
    factor = -2 * k / bernoulli(k)
    for n in range(1, 12):
        assert Fraction(E[n], E[0]) == factor * sigma(n, k - 1)


def test_eisenstein_rejects_bad_weights():
    for k in (2, 3, 0, -4):
        with pytest.raises(WeightUnsupported):
            eisenstein_series(k, 4)


def test_e4_is_hasse_lift_at_5():
    E = eisenstein_series(4, 50)
    assert all(c % 5 == 0 for c in (E - QExpansion(4, (1,) + (0,) * 49)).coeffs)


@pytest.mark.parametrize("p", [5, 7, 11, 13])
def test_hasse_lift_congruent_to_one(p):
    E = eisenstein_series(p - 1, 200, p, 1)
    assert E.coeffs == (1,) + (0,) * 199


def test_eisenstein_mod_requires_p_integral():
    # -2k/B_k at k=12 has 691 in its denominator
    with pytest.raises(WeightUnsupported):
        eisenstein_series(12, 4, 691, 2)


def test_delta_prefix():
    assert list(delta_series(7).coeffs) == [0, 1, -24, 252, -1472, 4830, -6048]


def test_dimensions():
    assert [dim_M1(k) for k in (0, 2, 4, 12, 14, 24)] == [1, 0, 1, 2, 1, 3]
    assert dim_S1(16) == 1 and dim_S1(36) == 3
    assert dim_S_gamma0(20, 5) == 9
    assert dim_S_gamma0(8, 5) == 3
    assert dim_S_gamma0(2, 11) == 1
    assert dim_S_gamma0(12, 2) == 2
    assert dim_pnew(26, 5) == 9


def test_lift_weights():
    assert [lift_weight(p) for p in (2, 3, 5, 7)] == [4, 6, 4, 6]


# --- complementary spaces ------------------------------------------------------

def test_complementary_weight_zero():
    (f,) = complementary_basis(5, 0, 0, 6)
    assert f.coeffs == (1, 0, 0, 0, 0, 0)


def test_complementary_k16_layers():
    layer0 = complementary_basis(5, 16, 0, 8)
    assert [next(i for i, c in enumerate(f.coeffs) if c) for f in layer0] == [0, 1]
    assert complementary_basis(5, 16, 1, 8) == []


def test_complementary_negative_weight():
    with pytest.raises(NegativeWeight):
        complementary_basis(5, -8, 0, 4)


@pytest.mark.parametrize("p,k", [(5, 0), (5, 2), (2, 14), (3, 4), (7, 10)])
def test_complementary_layers_are_echelon(p, k):
    seen = []
    for i in range(8):
        lead = [next(j for j, c in enumerate(f.coeffs) if c) for f in complementary_basis(p, k, i, 40)]
        assert lead == sorted(set(lead))
        for f, c in zip(complementary_basis(p, k, i, 40), lead):
            assert f[c] == 1
        seen += lead
    assert seen == list(range(len(seen)))


# --- operators ------------------------------------------------------------------

def test_up_operator_extracts():
    f = QExpansion(0, (10, 11, 12, 13, 14, 15))
    assert up_operator(f, 2).coeffs == (10, 12, 14)


@settings(max_examples=50, deadline=None)
@given(st.sampled_from([2, 3, 5]), st.lists(st.integers(-100, 100), min_size=1, max_size=30))
def test_up_after_vp_is_identity(p, c):
    f = QExpansion(0, tuple(c))
    g = up_operator(vp_operator(f, p), p)
    assert g.coeffs == f.coeffs[: len(g)]


def test_up5_delta():
    assert up_operator(delta_series(30), 5)[1] == 4830


def test_t5_on_delta():
    D = delta_series(40)
    T = hecke_tp(D, 5, 12)
    assert T[1] == 4830
    assert all(T[n] == 4830 * D[n] for n in range(len(T)))


@pytest.mark.parametrize("p,k", [(2, 4), (3, 6), (5, 8), (7, 12)])
def test_tp_on_eisenstein(p, k):
    E = eisenstein_series(k, 60)
    T = hecke_tp(E, p, k)
    lam = 1 + p ** (k - 1)
    assert all(T[n] == lam * E[n] for n in range(len(T)))


def test_tp_zero_and_length():
    z = QExpansion(12, (0,) * 20)
    assert hecke_tp(z, 5, 12).coeffs == (0,) * 4
    with pytest.raises(InsufficientLength):
        hecke_tp(z, 5, 12, length=10)


@pytest.mark.parametrize("k", [12, 16, 18, 20, 22, 26])
def test_hecke_commute(k):
    A, B = tp_matrix(k, 2), tp_matrix(k, 3)
    n = len(A)
    AB = [[sum(A[i][t] * B[t][j] for t in range(n)) for j in range(n)] for i in range(n)]
    BA = [[sum(B[i][t] * A[t][j] for t in range(n)) for j in range(n)] for i in range(n)]
    assert AB == BA


def test_tp_matrix_delta():
    assert tp_matrix(12, 2) == [[-24]]
    assert tp_matrix(12, 5) == [[4830]]


def test_miller_basis_echelon():
    rows = miller_cusp_basis(36, 10)
    for c, f in enumerate(rows, 1):
        assert f[c] == 1
        assert all(f[j] == 0 for j in range(1, len(rows) + 1) if j != c)


# --- truncated arithmetic ---------------------------------------------------------

series = st.lists(st.integers(-10**8, 10**8), min_size=1, max_size=25)


@settings(max_examples=100, deadline=None)
@given(series, series, series)
def test_product_associative(a, b, c):
    A, B, C = (QExpansion(0, tuple(x)) for x in (a, b, c))
    assert ((A * B) * C).coeffs == (A * (B * C)).coeffs
    assert len(A * B) == min(len(A), len(B))


@settings(max_examples=100, deadline=None)
@given(series, series, st.sampled_from([2, 5, 7]), st.integers(1, 40))
def test_mul_mod_matches_exact(a, b, p, M):
    n = min(len(a), len(b))
    mod = p**M
    a, b = [x % mod for x in a], [x % mod for x in b]
    assert mul_mod(a, b, n, mod) == [x % mod for x in mul_exact(a, b, n)]


@settings(max_examples=100, deadline=None)
@given(series, st.sampled_from([2, 5]), st.integers(1, 30))
def test_inverse_mod(a, p, M):
    mod = p**M
    a = [(1 + p * a[0]) % mod] + [x % mod for x in a[1:]]
    inv = inverse_mod(a, len(a), mod)
    assert mul_mod(a, inv, len(a), mod) == [1] + [0] * (len(a) - 1)


def test_power_and_mismatched_lengths():
    E = eisenstein_series(4, 10, 5, 6)
    assert (E**3).coeffs == (E * E * E).coeffs
    assert len(E + eisenstein_series(4, 4, 5, 6)) == 4
    assert ((E**-1) * E).coeffs == (1,) + (0,) * 9
