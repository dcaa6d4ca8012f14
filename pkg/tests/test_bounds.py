import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from slopelab.bounds import (
    STANDARD,
    STAR,
    HypothesisNotMet,
    InconsistentInputs,
    ReductionType,
    StarConditionFails,
    blz_reduction,
    count_in_class,
    cs_bounds,
    linv_from_logderiv,
    logderiv_from_linv,
    m_function,
    obstruction_check,
    optimized_log_bound,
    progression_lower_bound,
    star_condition,
    weight_w,
    witness_weight,
    x_set,
    x_set_check,
)
from slopelab.padic_core import Valuation, vp

F = Fraction
S33 = frozenset({3})


# --- weight coordinate ---------------------------------------------------------------

def test_weight_examples():
    a, b = weight_w(5, 16, 10).w, weight_w(5, 516, 10).w
    assert vp((a.r - b.r) % 5**10, 5) == 4
    assert weight_w(2, 14, 20).w.valuation().value == 3
    assert weight_w(5, 0, 8).w.r == 0


@pytest.mark.parametrize("p", [2, 3, 5, 7])
def test_weight_difference_identity(p):
    rng = random.Random(p)
    M = 40
    for _ in range(200):
        k, kp = rng.randrange(0, 10**6), rng.randrange(0, 10**6)
        if k == kp:
            continue
        expected = 1 + (p == 2) + vp(k - kp, p)
        if expected >= M:
            continue
        d = (weight_w(p, k, M).w.r - weight_w(p, kp, M).w.r) % p**M
        assert vp(d, p) == expected


# --- classifier --------------------------------------------------------------------

def test_blz_examples():
    r = blz_reduction(5, 16, 7)
    assert not r.is_reducible and r.spair == {3}
    assert blz_reduction(5, 7, 2).is_reducible
    with pytest.raises(HypothesisNotMet) as info:
        blz_reduction(5, 16, 3)
    assert info.value.lhs == 3
    assert blz_reduction(5, 16, 3, STAR).spair == {3}


@settings(max_examples=200, deadline=None)
@given(st.sampled_from([5, 7, 11]), st.integers(2, 400), st.integers(1, 200))
def test_spair_closed_under_negation(p, k, h):
    try:
        r = blz_reduction(p, k, h, STAR)
    except HypothesisNotMet:
        return
    assert {(-s) % (p + 1) for s in r.spair} == set(r.spair)
    assert r.is_reducible == ((k - 1) % (p + 1) == 0)


def test_obstruction_examples():
    assert obstruction_check(5, 20, S33, 7)
    assert not obstruction_check(5, 28, S33, 7)
    assert not any(obstruction_check(5, kp, S33, 0) for kp in range(6, 60))


# --- X sets -------------------------------------------------------------------------

def test_x_set_examples():
    assert x_set(5, 16, S33, 7) == [20, 24]
    assert x_set(2, 14, {1}, 7) == []
    assert x_set(5, 16, S33, F(1, 2)) == []


@settings(max_examples=300, deadline=None)
@given(st.sampled_from([3, 5, 7, 11, 13]), st.integers(0, 500),
       st.integers(0, 20), st.fractions(F(1, 3), F(40), max_denominator=6))
def test_x_set_members_recheck(p, k, s, h):
    spair = {s % (p + 1)}
    got = x_set(p, k, spair, h)
    assert all(x_set_check(p, k, spair, h, kp) for kp in got)
    # brute force over a window that contains everything allowed by (iii)
    brute = [kp for kp in range(0, int(2 * (p - 1) * (h + 2)) + 10) if x_set_check(p, k, spair, h, kp)]
    assert got == brute


# --- m-functions ----------------------------------------------------------------------

def test_m_examples():
    v, f = m_function(5, 7)
    assert v.argument == F(13, 12) and f == 0
    assert m_function(5, 100)[1] == 1
    v, f = m_function(7, F(1, 4))
    assert not v.active and f == 0 and str(v) == "0"


def test_star_m_function():
    v, f = m_function(5, 7, 3, STAR)
    assert v.argument == F(26, 12) and f == 0
    assert m_function(5, 100, 3, STAR)[1] == floor_brute(5, 398, 12)


def floor_brute(p, num, den):
    t = 0
    while den * p ** (t + 1) <= num:
        t += 1
    return t


@settings(max_examples=300, deadline=None)
@given(st.sampled_from([5, 7, 11, 13]), st.fractions(F(1, 10), F(10**6), max_denominator=50))
def test_m_monotone_in_b(p, h):
    f1, f2, f3 = (m_function(p, h, b)[1] for b in (1, 2, 3))
    assert f1 >= f2 >= f3 >= 0


@pytest.mark.parametrize("p", [5, 7, 11])
@pytest.mark.parametrize("b", [1, 2, 3])
@pytest.mark.parametrize("variant", [STANDARD, STAR])
def test_m_non_decreasing_in_h(p, b, variant):
    prev = -1
    for n in range(1, 3000):
        f = m_function(p, F(n, 7), b, variant)[1]
        assert f >= prev
        prev = f


def test_floor_matches_float_away_from_boundaries():
    for h in range(2, 500):
        v, f = m_function(5, h)
        if v.active:
            x = math.log(v.argument, 5)
            if abs(x - round(x)) > 1e-9:
                assert f == math.floor(x)


def test_optimized_log():
    assert optimized_log_bound(5, 26) == 2
    assert optimized_log_bound(5, 25) == 1
    assert optimized_log_bound(2, 6) == 2
    assert optimized_log_bound(5, F(7, 2)) is None


# --- counting and witnesses ----------------------------------------------------------------

@pytest.mark.parametrize("p", [5, 7, 11, 13])
def test_witness_exists_exhaustive(p):
    for h in range(1, 21):
        if not star_condition(p, h):
            continue
        fm = m_function(p, h)[1]
        for r in range(p - 1):
            for s in range((p + 1) // 2 + 1):
                spair = {s, (-s) % (p + 1)}
                X = x_set(p, r, spair, h)
                assert X
                assert any(vp(kp - r, p) >= fm if kp != r else True for kp in X)


@settings(max_examples=500, deadline=None)
@given(st.fractions(F(-1000), F(1000), max_denominator=20),
       st.fractions(F(0), F(300), max_denominator=20), st.integers(1, 40))
def test_progression_lemma(x1, length, n):
    x2 = x1 + length
    need = progression_lower_bound(length, n)
    for r in range(n):
        brute = sum(1 for x in range(math.floor(x1), math.ceil(x2) + 1) if x1 < x < x2 and x % n == r)
        assert brute == count_in_class(x1, x2, n, r)
        assert brute >= need


def test_witness_examples():
    irr = ReductionType.irreducible(5, 3)
    assert witness_weight(5, 16, 7, irr) == 20
    kp = witness_weight(5, 16, 100, irr)
    assert vp(kp - 16, 5) >= 1 and obstruction_check(5, kp, irr, 100)
    red = ReductionType.reducible(7)
    kp = witness_weight(7, 10, 10, red, b=2)
    assert vp(kp - 10, 7) >= m_function(7, 10, 2)[1]
    with pytest.raises(StarConditionFails):
        witness_weight(7, 10, F(1, 4), red)
    with pytest.raises(ValueError):
        witness_weight(3, 10, 10, red)


# --- bound report --------------------------------------------------------------------

def test_cs_examples():
    r = cs_bounds(2, 6, v_ap=6, v_apprime=-1)
    assert r.csw_logderiv == 7 and r.csk_logderiv == 5
    r = cs_bounds(5, 4, v_L=-2)
    assert r.csk_logderiv == 2 and r.logderiv_informative
    r = cs_bounds(5, 4, v_L=2)
    assert r.csk_logderiv <= 0 and not r.logderiv_informative


def test_cs_absent_inputs_are_unavailable():
    r = cs_bounds(5, 7)
    assert r.csw_logderiv is None and "logderiv" not in r.components
    assert r.combined == r.floor_m[(3, STANDARD)]


def test_cs_combined_is_max():
    r = cs_bounds(5, 26, v_L=-4, optimized=True)
    assert r.combined == max(r.components.values())
    assert set(r.components) == {"floor_m", "optimized_log", "logderiv"}
    assert r.to_dict()["combined"] == str(r.combined)


def test_cs_inconsistent():
    with pytest.raises(InconsistentInputs):
        cs_bounds(2, 6, v_ap=6, v_apprime=-1, v_L=0)
    # consistent pair, and a lower-bound input that cannot be contradicted
    cs_bounds(2, 6, v_ap=6, v_apprime=-1, v_L=-4)
    cs_bounds(2, 6, v_ap=6, v_apprime=Valuation.at_least(F(-1)), v_L=0)


@settings(max_examples=200, deadline=None)
@given(st.sampled_from([2, 3, 5, 7]), st.fractions(F(-100), F(100), max_denominator=12))
def test_linv_round_trip(p, v):
    assert linv_from_logderiv(p, logderiv_from_linv(p, v)) == v
    assert logderiv_from_linv(p, linv_from_logderiv(p, v)) == v


def test_linv_for_p2_example():
    assert linv_from_logderiv(2, -7) == -4
