"""Acceptance criteria, one test each. Every test prints a PASS/FAIL line
(visible in ``pytest -v`` output) before asserting."""

import math
import random
import time
from fractions import Fraction

import pytest

from slopelab.bounds import (
    count_in_class,
    cs_bounds,
    linv_from_logderiv,
    logderiv_from_linv,
    m_function,
    progression_lower_bound,
    star_condition,
    weight_w,
    x_set,
)
from slopelab.derivative import ap_logderiv_valuation, bk_check, fd_table, fd_valuation
from slopelab.gmlab import (
    MFN_CONJECTURE,
    MFN_PAPER,
    correlation_report,
    gm_row,
    load_linvariants,
    obstruction_multiset,
)
from slopelab.padic_core import gauss_valuation, newton_polygon, val_int, vp
from slopelab.upmatrix import certified_for_slope, classical_oracle, d_multiplicity

F = Fraction


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail=""):
        with capsys.disabled():
            print(f"\nCRITERION {n}: {'PASS' if ok else 'FAIL'} {detail}".rstrip())
        return ok
    return emit


def slope_row(k, h):
    s = certified_for_slope(5, k, h)
    return [x for x in s.slopes() if x <= h]


def check_slope_row(k, prefix, d7):
    got = slope_row(k, F(max(prefix)))[: len(prefix)]
    return got == [F(x) for x in prefix] and d_multiplicity(5, k, 7) == d7, got


# 1 -------------------------------------------------------------------------

def test_criterion_1_slope_rows(report):
    t = time.perf_counter()
    rows = {20: ([1, 9, 9], 0), 36: ([1, 4, 5, 17, 17], 0), 116: ([1, 5, 6, 7, 8, 9, 14], 1)}
    results = {k: check_slope_row(k, *v) for k, v in rows.items()}
    dt = time.perf_counter() - t
    ok = all(r[0] for r in results.values()) and dt < 600
    report(1, ok, f"k=20,36,116 prefixes and d(k,7) in {dt:.1f}s")
    assert ok, results


# 2 -------------------------------------------------------------------------

@pytest.mark.parametrize("k,prefix,d7", [
    (516, [1, 6, 7, 7, 7, 8, 14, 15], 3),
    (2516, [1, 7, 7, 7, 7, 7, 14, 15], 5),
    (12516, [1, 7, 7, 7, 7, 7, 14, 15], 5),
])
def test_criterion_2_large_weight_rows(report, k, prefix, d7):
    t = time.perf_counter()
    good, got = check_slope_row(k, prefix, d7)
    dt = time.perf_counter() - t
    ok = good and dt < 1800
    report(2, ok, f"k={k} d(k,7)={d7} prefix={','.join(map(str, got))} in {dt:.1f}s")
    assert ok


# 3 -------------------------------------------------------------------------

GM_ROWS = {
    8: [0, 1, 3, 3, 3], 10: [0, 1, 3, 3, 3], 12: [0, 0, 3, 3, 3], 14: [0, 0, 3, 3, 5],
    16: [0, 0, 1, 3, 5], 18: [0, 0, 3, 3, 5], 20: [0, 0, 3, 3, 3], 22: [0, 0, 3, 3, 3],
    24: [0, 0, 3, 3, 5], 26: [0, 0, 1, 3, 5],
}
GM_ROWS_EXTENDED = {
    16: [0, 0, 1, 3, 5, 5, 5, 5, 5, 5],
    20: [0, 0, 3, 3, 3, 5, 7, 7, 7, 7],
    26: [0, 0, 1, 3, 5, 5, 5, 7, 9, 9],
}


def test_criterion_3_gm_rows(report):
    t = time.perf_counter()
    got = {k: list(gm_row(5, k, 4).d) for k in GM_ROWS}
    bad = {k: v for k, v in got.items() if v != GM_ROWS[k]}
    ext = {k: list(gm_row(5, k, 9).d) for k in GM_ROWS_EXTENDED}
    bad_ext = {k: v for k, v in ext.items() if v != GM_ROWS_EXTENDED[k]}
    explicit = got[16][2] == 1 and got[16][4] == 5 and got[14][4] == 5
    ok = not bad and not bad_ext and explicit
    n = sum(len(v) for v in got.values())
    report(3, ok, f"{n} entries j<=4, extended j<=9 for k=16,20,26 in {time.perf_counter() - t:.1f}s")
    assert ok, (bad, bad_ext)


# 4 -------------------------------------------------------------------------

COLUMN3 = {
    8: [1, 2, 2], 10: [1, 2, 2], 12: [1, 2, 2], 14: [2, 2, 2, 4, 4], 16: [2, 3, 3, 4, 4],
    18: [2, 2, 2, 4, 4], 20: [2, 2, 2, 5, 5, 6, 6], 22: [2, 2, 2, 5, 5, 6, 6],
    24: [2, 2, 2, 4, 4, 7, 7], 26: [2, 3, 3, 4, 4, 7, 7, 8, 8],
}


def test_criterion_4_obstruction_lists(report):
    recs = {r.k: r for r in load_linvariants()}
    got = {k: obstruction_multiset(5, k, recs[k], MFN_PAPER) for k in COLUMN3}
    ok = got == COLUMN3
    report(4, ok, f"{len(got)} rows")
    assert ok, got


# 5 -------------------------------------------------------------------------

def test_criterion_5_correlation(report):
    recs = load_linvariants()
    ks = range(8, 27, 2)
    paper = correlation_report(5, ks, recs, MFN_PAPER, j_max=9)
    conj = correlation_report(5, ks, recs, MFN_CONJECTURE, j_max=9)
    e12 = next(e for e in paper.entries if e.k == 12)
    ok = (paper.mismatches == [12] and sorted(e12.expected) == [1, 2, 2]
          and sorted(e12.observed) == [2, 2, 2] and conj.verdict and len(conj.entries) == 10)
    report(5, ok, f"h-1 mismatches {paper.mismatches}; h mismatches {conj.mismatches}")
    assert ok


# 6 -------------------------------------------------------------------------

def test_criterion_6_derivatives_and_logderiv(report):
    t = time.perf_counter()
    rows = fd_table(2, 14, 3, 19)
    vals = [r.value_valuation.value for r in rows]
    certified = all(r.certified and r.value_valuation.exact for r in rows)
    ld = ap_logderiv_valuation(2, 14, 6)
    rep = cs_bounds(2, 6, v_ap=6, v_apprime=6 + ld.value.value)
    dt = time.perf_counter() - t
    ok = (vals == [0, 7, 19] and certified and ld.value.exact and ld.value.value == -7
          and rep.csw_logderiv == 7 and dt < 900)
    report(6, ok, f"c_i' valuations {','.join(map(str, vals))}, v(a'/a)={ld.value}, CS^w>={rep.csw_logderiv} in {dt:.1f}s")
    assert ok


# 7 -------------------------------------------------------------------------

def test_criterion_7_oracle(report):
    bad = []
    for k in range(8, 41, 2):
        s = certified_for_slope(5, k, k - 1)
        engine = [x for x in s.slopes() if x < k - 1]
        oracle = [x for x in classical_oracle(5, k) if x < k - 1]
        if engine != oracle:
            bad.append((k, engine, oracle))
    ok = not bad
    report(7, ok, "p=5, even k in 8..40" + (f"; mismatches {bad}" if bad else ""))
    assert ok


# 8 -------------------------------------------------------------------------

def _roots_poly(alphas):
    c = [1]
    for a in alphas:
        c = [x - a * y for x, y in zip(c + [0], [0] + c)]
    return c


def _planted_roots(rng):
    for _ in range(500):
        p = rng.choice([2, 3, 5, 7])
        vs = [rng.randrange(0, 7) for _ in range(rng.randrange(1, 10))]
        alphas = [p**v * (u if u % p else u + 1) for v, u in ((v, rng.randrange(1, 60)) for v in vs)]
        got = newton_polygon([val_int(x, p) for x in _roots_poly(alphas)]).slopes()
        if got != sorted(F(v) for v in vs):
            return False
    return True


def _gauss(rng):
    for _ in range(200):
        p = rng.choice([2, 3, 5, 7])
        A = [rng.randrange(-10**6, 10**6) for _ in range(rng.randrange(1, 8))]
        B = [rng.randrange(-10**6, 10**6) for _ in range(rng.randrange(1, 8))]
        m = F(rng.randrange(0, 30), rng.randrange(1, 7))
        AB = [sum(A[i] * B[n - i] for i in range(len(A)) if 0 <= n - i < len(B))
              for n in range(len(A) + len(B) - 1)]
        g = lambda c: gauss_valuation([val_int(x, p) for x in c], m)
        if g(AB) != g(A) + g(B):
            return False
    return True


def _weight_identity(rng):
    M = 40
    for p in (2, 3, 5, 7):
        n = 0
        while n < 200:
            k, kp = rng.randrange(10**7), rng.randrange(10**7)
            want = 1 + (p == 2) + vp(k - kp, p) if k != kp else M
            if want >= M:
                continue
            d = (weight_w(p, k, M).w.r - weight_w(p, kp, M).w.r) % p**M
            if vp(d, p) != want:
                return False
            n += 1
    return True


def _witness_counting():
    for p in (5, 7, 11, 13):
        for h in range(1, 21):
            if not star_condition(p, h):
                continue
            fm = m_function(p, h)[1]
            for r in range(p - 1):
                for s in range(p + 1):
                    X = x_set(p, r, {s}, h)
                    if not X or not any(vp(kp - r, p) >= fm for kp in X if kp != r):
                        return False
    return True


def _progressions(rng):
    for _ in range(500):
        x1 = F(rng.randrange(-10**4, 10**4), rng.randrange(1, 13))
        length = F(rng.randrange(0, 4000), rng.randrange(1, 13))
        n = rng.randrange(1, 50)
        need = progression_lower_bound(length, n)
        for r in range(n):
            lo, hi = math.floor(x1), math.ceil(x1 + length)
            brute = sum(1 for x in range(lo, hi + 1) if x1 < x < x1 + length and x % n == r)
            if brute < need or brute != count_in_class(x1, x1 + length, n, r):
                return False
    return True


def _linv_round_trip(rng):
    for _ in range(200):
        p = rng.choice([2, 3, 5, 7])
        v = F(rng.randrange(-500, 500), rng.randrange(1, 10))
        if linv_from_logderiv(p, logderiv_from_linv(p, v)) != v:
            return False
        if logderiv_from_linv(p, linv_from_logderiv(p, v)) != v:
            return False
    return True


def _fd_oracle(rng):
    M = 80
    for p in (2, 5):
        for _ in range(100):
            a, sv = rng.randrange(0, 15), rng.randrange(5, 25)
            u = rng.randrange(1, p**5)
            u += u % p == 0
            higher = [rng.randrange(-10**5, 10**5) for _ in range(rng.randrange(0, 4))]
            coeffs = [rng.randrange(p**M), u * p**a] + higher
            w0 = rng.randrange(p**M)
            step = p**sv * (2 * rng.randrange(p**3) * p + 1)
            Fw = lambda w: sum(c * (w - w0) ** j for j, c in enumerate(coeffs))
            v, ok = fd_valuation(p, Fw(w0) % p**M, Fw(w0 + step) % p**M, 0, M, sv)
            if (a < sv) != ok or (ok and v.value != a):
                return False
    return True


def test_criterion_8_property_suites(report):
    rng = random.Random(20261014)
    parts = {
        "newton-planted-500": _planted_roots(rng),
        "gauss-200": _gauss(rng),
        "remark-weight-200x4": _weight_identity(rng),
        "witness-count-exhaustive": _witness_counting(),
        "progression-500": _progressions(rng),
        "linv-round-trip": _linv_round_trip(rng),
        "bk-k14-i6": bk_check(14, 6).ok,
        "fd-oracle-100x2": _fd_oracle(rng),
    }
    failed = [n for n, v in parts.items() if not v]
    ok = not failed
    report(8, ok, f"{len(parts) - len(failed)}/{len(parts)} suites" + (f"; failed {failed}" if failed else ""))
    assert ok
