"""w-derivatives of characteristic-series coefficients by finite differences,
the valuation of a_p'/a_p, and two verification harnesses (maximum modulus
on discs, integrality of the p=2 series).

The series used here is the overconvergent cuspidal one: only the ordinary
Eisenstein factor (1 - t) is removed. The critical Eisenstein series is a
genuine overconvergent cusp form, so its factor stays.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Sequence

from .bounds import v2
from .padic_core import Valuation, gauss_valuation, val_int, vp
from .qseries import inverse_mod, mul_mod
from .upmatrix import (
    CharSeries,
    KatzBasisSpec,
    PrecisionInsufficient,
    certified_for_slope,
    certified_series,
)


class NotCertified(ArithmeticError):
    pass


class TailNotDominated(ArithmeticError):
    pass


class ViolationFound(AssertionError):
    pass


@dataclass(frozen=True)
class FDResult:
    p: int
    k: int
    i: int
    step_valuation: int
    value_valuation: Valuation
    certified: bool

    def lower_bound(self) -> Fraction:
        return self.value_valuation.value


def fd_valuation(p: int, f_k: int, f_kp: int, dw: int, prec: int, step_valuation: int) -> tuple[Valuation, bool]:
    """Valuation of (F(w') - F(w)) / (w' - w) from values known mod p^prec.

    The Taylor expansion of an integral F about w gives
    (F(w') - F(w))/dw = F'(w) + O(dw), so the value is F'(w)'s valuation
    whenever it is below v(dw).
    """
    diff = f_kp - f_k
    known = prec if diff % p**prec == 0 else min(prec, vp(diff, p))
    if known >= prec:
        lower = Fraction(prec - step_valuation)
        return Valuation.at_least(min(lower, step_valuation)), False
    v = Fraction(known - step_valuation)
    if v < step_valuation:
        return Valuation(v), True
    return Valuation.at_least(step_valuation), False


def step_weight(p: int, k: int, e: int) -> int:
    return k + 2 * (p - 1) * p**e


def step_valuation_for(p: int, e: int) -> int:
    """v_p(w_{k'} - w_k) for k' = k + 2(p-1)p^e."""
    return 1 + v2(p) + vp(2 * (p - 1), p) + e


def default_fd_spec(p: int, k: int, e: int) -> KatzBasisSpec:
    target = 2 * step_valuation_for(p, e) + 12
    rate = Fraction(4, 3) if p == 2 else Fraction(p - 1, p + 1) * (1 if p > 3 else 3)
    i_max = max(10, math.ceil(target / rate) + 4)
    return KatzBasisSpec(p, k, i_max, 0, target + 10)


def _pair(p: int, k: int, e: int, spec: KatzBasisSpec | None, use_cache: bool
          ) -> tuple[CharSeries, CharSeries, KatzBasisSpec]:
    spec = spec or default_fd_spec(p, k, e)
    kp = step_weight(p, k, e)
    a = certified_series(spec, "dagger", use_cache)
    b = certified_series(KatzBasisSpec(p, kp, spec.i_max, 0, spec.p_prec), "dagger", use_cache)
    return a, b, spec


def fd_table(p: int, k: int, n: int, step_exponent: int, spec: KatzBasisSpec | None = None,
             use_cache: bool = True, max_retries: int = 3) -> list[FDResult]:
    """FDResults for c_1'..c_n' at weight k, escalating size until every
    valuation below the step is read or the step itself is the barrier."""
    step = step_valuation_for(p, step_exponent)
    dw_val = step
    for _ in range(max_retries + 1):
        a, b, spec = _pair(p, k, step_exponent, spec, use_cache)
        out, short = [], False
        for i in range(1, n + 1):
            if i > len(a.coeffs) or i > len(b.coeffs):
                short = True
                break
            prec = min(a.coeff_prec[i - 1], b.coeff_prec[i - 1])
            v, ok = fd_valuation(p, a.coeffs[i - 1], b.coeffs[i - 1], 0, prec, dw_val)
            if not ok and prec < 2 * step:
                short = True
            out.append(FDResult(p, k, i, step, v, ok))
        if not short:
            return out
        spec = KatzBasisSpec(p, k, math.ceil(spec.i_max * 3 / 2), 0, spec.p_prec + step)
    return out if len(out) == n else _raise_short(p, k, n)


def _raise_short(p: int, k: int, n: int):
    raise PrecisionInsufficient(f"series at p={p}, k={k} too short for {n} derivatives")


def coeff_derivative_valuation(p: int, k: int, i: int, step_exponent: int,
                               spec: KatzBasisSpec | None = None, use_cache: bool = True) -> FDResult:
    return fd_table(p, k, i, step_exponent, spec, use_cache)[i - 1]


# --------------------------------------------------------------------------
# a_p' / a_p

def bk_derivative_tail(i: int) -> Fraction:
    """p=2 lower bound v_2(c_i'(w_k)) >= 3(lambda_i - 1) for even k."""
    lam = i * (i + 1) // 2
    return Fraction(3 * (lam - 1))


@dataclass(frozen=True)
class LogDerivative:
    p: int
    k: int
    slope: Fraction
    numerator: Fraction  # v(d_w P at t = 1/a_p)
    denominator: Fraction  # v(d_t P at t = 1/a_p)
    value: Valuation  # v(a_p'/a_p)
    argmin: int
    fd: tuple[FDResult, ...]


def _slope_factor(coeffs: Sequence[int], precs: Sequence[int], p: int, c: int, n: int
                  ) -> tuple[list[int], int]:
    """Distinguished factor of G(u) = P(p^{-c} u) / p^mu by Weierstrass division.

    Returns (D, K): D monic of degree n (low degree first) mod p^K, whose
    roots are p^c/beta over the reciprocal roots beta of P with v(beta) < c.
    """
    g = [1] + list(coeffs)
    prec = [10**9] + list(precs)
    vals = [vp(x, p) if x else None for x in g]
    if n and vals[n] is None:
        raise PrecisionInsufficient("vertex coefficient vanished")
    mu = (vals[n] - c * n) if n else 0
    G, K = [], None
    for i, x in enumerate(g):
        e = c * i + mu
        left = prec[i] - e
        if left <= 0 or (e > 0 and x and vals[i] < e):
            break
        G.append((x * p ** (-e)) if e <= 0 else x // p**e)
        if i <= n + 2:
            K = left if K is None else min(K, left)
    if len(G) <= n or K is None:
        raise PrecisionInsufficient("series too short for the slope factor")
    mod = p**K
    G = [x % mod for x in G]
    L = len(G) - n
    alpha, tau = G[:n], G[n:]
    inv = inverse_mod(tau, L, mod)
    q = inv
    for _ in range(K + 2):
        qa = mul_mod(q, alpha, L + n, mod) if n else [0] * (L + n)
        one = [(-x) % mod for x in qa[n:n + L]]
        one[0] = (one[0] + 1) % mod
        nq = mul_mod(inv, one, L, mod)
        if nq == q:
            break
        q = nq
    qa = mul_mod(q, alpha, L + n, mod) if n else [0] * (L + n)
    return qa[:n] + [1], K


def _monic_divide(num: list[int], den: list[int], mod: int) -> list[int]:
    """Quotient of monic polynomials (low degree first) mod ``mod``."""
    num = num[:]
    dq = len(num) - len(den)
    quo = [0] * (dq + 1)
    for i in range(dq, -1, -1):
        coef = num[i + len(den) - 1] % mod
        quo[i] = coef
        for j, d in enumerate(den):
            num[i + j] = (num[i + j] - coef * d) % mod
    return quo


def segment_discriminant_valuation(s: CharSeries, slope: Fraction) -> Fraction:
    """v(alpha - beta) for the two reciprocal roots on a slope segment of length 2."""
    poly = s.polygon()
    segs = poly.polygon.segments
    idx = [j for j, (sl, _) in enumerate(segs) if sl == slope]
    if not idx:
        raise ValueError(f"no slope {slope} in the certified polygon")
    j = idx[0]
    d = segs[j][1]
    if d != 2:
        raise ValueError("discriminant only for segments of length 2")
    below = sum(m for _, m in segs[:j])
    prev = segs[j - 1][0] if j else None
    nxt = segs[j + 1][0] if j + 1 < len(segs) else poly.next_slope_lower
    if nxt is None:
        raise PrecisionInsufficient("slope segment is not closed")
    c_hi = math.floor(slope) + 1
    if not c_hi < nxt:
        raise ValueError(f"no integer strictly between {slope} and {nxt}")
    hi, K = _slope_factor(s.coeffs, s.coeff_prec, s.p, c_hi, below + 2)
    if below:
        c_lo = math.ceil(slope) - 1
        if not prev < c_lo:
            raise ValueError(f"no integer strictly between {prev} and {slope}")
        lo, K2 = _slope_factor(s.coeffs, s.coeff_prec, s.p, c_lo, below)
        K = min(K, K2)
        mod = s.p**K
        # move to u = p^{c_hi} t
        lo = [x * s.p ** ((c_hi - c_lo) * (below - i)) % mod for i, x in enumerate(lo)]
        quad = _monic_divide(hi, lo, mod)
    else:
        mod = s.p**K
        quad = hi
    disc = (quad[1] * quad[1] - 4 * quad[0]) % mod
    if disc == 0:
        raise PrecisionInsufficient("segment discriminant vanished to working precision")
    # roots u = p^c / beta: v(u_a - u_b) = c + v(alpha - beta) - 2 slope
    return Fraction(vp(disc, s.p), 2) - c_hi + 2 * slope


def _denominator(series: CharSeries, s: Fraction) -> Fraction:
    """v(d_t P at t = 1/alpha) = s + sum over other roots of v(1 - beta/alpha)."""
    pol = series.polygon()
    segs = pol.polygon.segments
    mult = pol.polygon.multiplicity(s)
    if mult == 0:
        raise ValueError(f"no slope {s} at weight {series.k}")
    den = s + sum((sl - s) * m for sl, m in segs if sl < s)
    if mult == 2:
        den += segment_discriminant_valuation(series, s) - s
    elif mult > 2:
        raise ValueError("slope segments of length > 2 are not supported")
    return den


def ap_logderiv_valuation(
    p: int, k: int, slope: Fraction | int, *, n_terms: int = 3, step_exponent: int | None = None,
    spec: KatzBasisSpec | None = None, tail_bound: Optional[Callable[[int], Fraction]] = None,
    use_cache: bool = True, max_retries: int = 6,
) -> LogDerivative:
    """v(a_p'/a_p) = s + v(d_w P(w_k, 1/a_p)) - v(d_t P(w_k, 1/a_p))."""
    s = Fraction(slope)
    if tail_bound is None:
        if p != 2 or k % 2:
            raise TailNotDominated("no tail bound available; pass tail_bound")
        tail_bound = bk_derivative_tail
    if step_exponent is None:
        step_exponent = 19 if p == 2 else 8
    fd = fd_table(p, k, n_terms, step_exponent, use_cache=use_cache, max_retries=min(3, max_retries))
    terms = []
    for r in fd:
        lo = r.value_valuation.value
        if not r.certified:
            lo = max(lo, tail_bound(r.i))
        terms.append((lo - r.i * s, r.certified, r.i))
    exact = [t for t in terms if t[1]]
    if not exact:
        raise TailNotDominated("no certified derivative term")
    best = min(exact)
    for t in terms:
        if t is not best and t[0] <= best[0]:
            raise TailNotDominated(f"term i={t[2]} not dominated by i={best[2]}")
    # tail beyond the computed range; tail_bound(i) - i*s is assumed convex,
    # so once it increases it stays above the minimum
    i = n_terms + 1
    while True:
        b_i = tail_bound(i) - i * s
        if b_i <= best[0]:
            raise TailNotDominated(f"tail bound at i={i} is {b_i}, not above {best[0]}")
        if tail_bound(i + 1) - (i + 1) * s >= b_i:
            break
        i += 1
        if i > 10_000:
            raise TailNotDominated("tail bound never dominates")
    num = best[0]
    # denominator from the weight-k series
    den = None
    for _ in range(4):
        series = certified_for_slope(p, k, s + 1, kind="dagger", spec=spec, use_cache=use_cache,
                                     max_retries=max_retries)
        try:
            den = _denominator(series, s)
            break
        except PrecisionInsufficient:
            sp = series.spec
            spec = KatzBasisSpec(p, k, math.ceil(sp.i_max * 3 / 2), 0, 2 * sp.p_prec)
    if den is None:
        raise PrecisionInsufficient(f"denominator at slope {s} not resolved")
    return LogDerivative(p, k, s, num, den, Valuation(s + num - den), best[2], tuple(fd))


# --------------------------------------------------------------------------
# harnesses

@dataclass(frozen=True)
class MaxModulusReport:
    p: int
    m: Fraction
    sample_valuations: tuple[Valuation, ...]
    constant: bool
    inequality_holds: Optional[bool]
    gauss: Valuation
    gauss_below_samples: bool


def _eval(F: Sequence[int], w: int) -> int:
    acc = 0
    for c in reversed(F):
        acc = acc * w + c
    return acc


def max_modulus_check(F: Sequence[int], p: int, m: Fraction | int, samples: int = 200,
                      seed: int = 0) -> MaxModulusReport:
    """Sample F on points with v_p(w) >= m and test constancy, the
    v(F(0)) - v(F'(0)) <= m inequality, and the Gauss-valuation floor."""
    m = Fraction(m)
    e = math.ceil(m)
    rng = random.Random(seed)
    pts = [p**e * u for u in range(p * p)]
    pts += [p**e * rng.randrange(p**12) for _ in range(max(0, samples - len(pts)))]
    sv = tuple(val_int(_eval(F, w), p) for w in pts)
    constant = len(set(sv)) == 1
    ineq = None
    if constant:
        v0 = val_int(F[0] if F else 0, p)
        d = F[1] if len(F) > 1 else 0
        v1 = val_int(d, p)
        ineq = True if v1.is_inf else (not v0.is_inf and v0.value - v1.value <= m)
    gv = gauss_valuation([val_int(c, p) for c in F] or [Valuation.inf()], m)
    below = all(gv <= v for v in sv)
    return MaxModulusReport(p, m, sv, constant, ineq, gv, below)


@dataclass(frozen=True)
class BKReport:
    k: int
    rows: tuple[tuple[int, int, Valuation, bool], ...]  # (i, bound, valuation, ok)

    @property
    def ok(self) -> bool:
        return all(r[3] for r in self.rows)


def bk_check(k: int, i_max: int, spec: KatzBasisSpec | None = None, use_cache: bool = True,
             max_retries: int = 3) -> BKReport:
    """v_2(c_i(w_k)) >= lambda_i * min(3, v_2(w_k)) on the overconvergent cuspidal series."""
    if k % 2:
        raise ValueError("k must be even")
    vw = 2 + vp(k, 2) if k else math.inf
    m = min(3, vw)
    spec = spec or KatzBasisSpec(2, k, 40, 0, 3 * (i_max + 1) * (i_max + 2) // 2 + 20)
    for _ in range(max_retries + 1):
        s = certified_series(spec, "dagger", use_cache)
        rows = [(0, 0, Valuation(Fraction(0)), True)]
        undecided = False
        vals = s.valuations()
        for i in range(1, i_max + 1):
            bound = (i * (i + 1) // 2) * m
            v = vals[i] if i < len(vals) else Valuation.at_least(0)
            if v.exact:
                if v.value < bound:
                    raise ViolationFound(f"v_2(c_{i}(w_{k})) = {v} < {bound}")
                rows.append((i, bound, v, True))
            elif v.value >= bound:
                rows.append((i, bound, v, True))
            else:
                undecided = True
                rows.append((i, bound, v, False))
        if not undecided:
            return BKReport(k, tuple(rows))
        spec = KatzBasisSpec(2, k, math.ceil(spec.i_max * 3 / 2), 0, spec.p_prec + 20)
    return BKReport(k, tuple(rows))
