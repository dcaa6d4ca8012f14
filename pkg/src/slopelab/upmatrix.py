"""The U_p operator on a Katz-style basis of overconvergent forms of tame
level 1, its characteristic series, and slope data.

Construction. Let E be the Eisenstein lift of a power of the Hasse invariant
(E_{p-1}, or E_4 at p=2, E_6 at p=3) of weight ``step``. Write
k = k0 + step*n with 0 <= k0 < step. Multiplication by E^n identifies
weight-k forms with weight-k0 forms, and U_p on weight k becomes
g -> U_p(g * G^n) on weight k0, with G = E(q)/E(q^p). The weight-k0 basis is
e_{i,c} = w_{i,c} / E^i where w_{i,c} = E4^a E6^b Delta^c ranges over the
Delta-graded complement of E*M_{k0+(i-1)step} in M_{k0+i*step}. Every e has
q-expansion q^c + ..., with each c in [0, basis size) used once, so
coordinates come from plain back-substitution and the truncated matrix is
exactly the upper-left block of the full operator.

The characteristic polynomial of that block is computed without division
(Berkowitz) in Z/p^M. Its agreement with a larger build is what certifies
coefficients; see :func:`certify`.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from .padic_core import (
    CertifiedPolygon,
    NewtonPolygon,
    Valuation,
    certified_polygon,
    format_rational,
    newton_polygon,
    parse_rational,
    residue_valuation,
    val_int,
    vp,
)
from .qseries import (
    MonomialFactory,
    dim_M1,
    dim_pnew,
    dim_S1,
    eisenstein_coefficients,
    inverse_mod,
    lift_weight,
    monomial_exponents,
    mul_mod,
    pow_mod,
    substitute_qp,
    tp_matrix,
)

ALGORITHM = "katz-twist-berkowitz-2"


class PrecisionExhausted(ArithmeticError):
    pass


class PrecisionInsufficient(ArithmeticError):
    def __init__(self, message: str, series: "CharSeries | None" = None) -> None:
        super().__init__(message)
        self.series = series


class OracleRangeExceeded(ValueError):
    pass


# --------------------------------------------------------------------------
# basis specification

@dataclass(frozen=True)
class KatzBasisSpec:
    p: int
    k: int
    i_max: int
    q_prec: int = 0  # 0 selects p*(basis size) + 10
    p_prec: int = 30

    def __post_init__(self) -> None:
        if self.k < 0 or self.k % 2:
            raise ValueError(f"weight must be even and >= 0, got {self.k}")
        if self.i_max < 0 or self.p_prec < 1:
            raise ValueError("i_max must be >= 0 and p_prec >= 1")
        if self.q_prec == 0:
            object.__setattr__(self, "q_prec", self.p * self.basis_size + 10)
        if self.q_prec < self.p * self.basis_size:
            raise ValueError(
                f"q_prec {self.q_prec} < p * basis size = {self.p * self.basis_size}"
            )

    @property
    def step(self) -> int:
        return lift_weight(self.p)

    @property
    def lift(self) -> str:
        return f"E_{self.step}"

    @property
    def k0(self) -> int:
        return self.k % self.step

    @property
    def twist(self) -> int:
        return self.k // self.step

    @property
    def basis_size(self) -> int:
        return dim_M1(self.k0 + self.i_max * self.step)

    def layer_sizes(self) -> list[int]:
        dims = [dim_M1(self.k0 + i * self.step) for i in range(self.i_max + 1)]
        return [dims[0]] + [b - a for a, b in zip(dims, dims[1:])]

    def enlarged(self, layers: int = 5, digits: int = 8) -> "KatzBasisSpec":
        big = KatzBasisSpec(self.p, self.k, self.i_max + layers, 0, self.p_prec + digits)
        scale = self.q_prec - self.p * self.basis_size
        return replace(big, q_prec=self.p * big.basis_size + max(scale, 0))


def index_layers(p: int, k: int, n: int) -> list[int]:
    """Layer i (power of E in the denominator) of basis elements 0..n-1."""
    step = lift_weight(p)
    k0 = k % step
    out: list[int] = []
    i = 0
    while len(out) < n:
        out += [i] * (dim_M1(k0 + i * step) - len(out))
        i += 1
    return out[:n]


def entry_rates(p: int) -> tuple[Fraction, Fraction]:
    """(alpha, beta) with v(A[t][s]) >= alpha*layer(t) - beta*layer(s) - C.

    alpha = h*p/(p+1) and beta = h/(p+1), h being the Hasse power of the
    lift. Conjugating by p^(beta*layer) makes row t grow like
    (alpha - beta)*layer(t) = step/(p+1) * layer(t).
    """
    h = lift_weight(p) // (p - 1)
    return Fraction(h * p, p + 1), Fraction(h, p + 1)


def fit_row_slack(A: Sequence[Sequence[int]], p: int, k: int, M: int) -> Fraction:
    """Smallest C making the entry bound of :func:`entry_rates` hold on A."""
    alpha, beta = entry_rates(p)
    lays = index_layers(p, k, len(A))
    mod = p**M
    slack = Fraction(0)
    for t, row in enumerate(A):
        for s, x in enumerate(row):
            if x % mod:
                slack = max(slack, alpha * lays[t] - beta * lays[s] - vp(x, p))
    return slack


def _katz_basis(spec: KatzBasisSpec, L: int, mod: int) -> list[list[int]]:
    p, step = spec.p, spec.step
    fac = MonomialFactory(L, mod)
    E = eisenstein_coefficients(step, L, mod)
    Einv = inverse_mod(E, L, mod)
    scale = [1] + [0] * (L - 1)
    basis: list[list[int]] = []
    lo = 0
    for i in range(spec.i_max + 1):
        weight = spec.k0 + i * step
        hi = dim_M1(weight)
        if i:
            scale = mul_mod(scale, Einv, L, mod)
        for c in range(lo, hi):
            w = fac.monomial(*monomial_exponents(weight, c))
            basis.append(mul_mod(w, scale, L, mod) if i else w)
        lo = max(lo, hi)
    return basis


def up_matrix(spec: KatzBasisSpec) -> list[list[int]]:
    """Matrix of U_p (weight k) on the basis; entry [t][s] is the e_t-coordinate of U(e_s)."""
    p, mod = spec.p, spec.p**spec.p_prec
    ell = spec.basis_size
    if ell == 0:
        return []
    L = max(spec.q_prec, p * (ell - 1) + 1)
    basis = _katz_basis(spec, L, mod)
    E = eisenstein_coefficients(spec.step, L, mod)
    G = mul_mod(E, inverse_mod(substitute_qp(E, p, L), L, mod), L, mod)
    Gn = pow_mod(G, spec.twist, L, mod) if spec.twist else None
    cols: list[list[int]] = []
    for e in basis:
        f = mul_mod(e, Gn, L, mod) if Gn is not None else e
        r = [f[p * j] for j in range(ell)]
        x = [0] * ell
        for t in range(ell):
            b = basis[t]
            if b[t] % p:
                inv = 1 if b[t] == 1 else pow(b[t], -1, mod)
            else:
                raise PrecisionExhausted(f"leading coefficient of basis element {t} is not a unit")
            xt = r[t] * inv % mod
            x[t] = xt
            if xt:
                for j in range(t + 1, ell):
                    if b[j]:
                        r[j] = (r[j] - xt * b[j]) % mod
        cols.append(x)
    return [[cols[s][t] for s in range(ell)] for t in range(ell)]


# --------------------------------------------------------------------------
# characteristic series

def berkowitz(A: Sequence[Sequence[int]], mod: int | None = None) -> list[int]:
    """[1, e_1, ..., e_n] with det(1 - tA) = sum e_i t^i, division free."""
    n = len(A)
    red = (lambda x: x % mod) if mod else (lambda x: x)
    poly = [1]  # det(xI - A_r), leading coefficient first
    for r in range(n):
        a = A[r][r]
        R = [A[r][j] for j in range(r)]
        C = [A[i][r] for i in range(r)]
        col = [1, red(-a)]
        v = C
        for _ in range(r):
            col.append(red(-sum(x * y for x, y in zip(R, v))))
            v = [red(sum(A[i][j] * v[j] for j in range(r))) for i in range(r)]
        # Toeplitz (r+2) x (r+1) times poly
        poly = [red(sum(col[i - j] * poly[j] for j in range(max(0, i - r - 1), min(i, r) + 1)))
                for i in range(r + 2)]
    return poly


@dataclass(frozen=True)
class CharSeries:
    """Truncated det(1 - tU_p) at weight k: coefficients c_1..c_n mod p^M.

    ``coeff_prec[i-1]`` is the number of p-adic digits of c_i believed
    correct (M until a certification pass lowers it); the valuation of c_i
    is exact when it is below that count.
    """

    p: int
    k: int
    coeffs: tuple[int, ...]
    p_prec: int
    certified_count: int = 0
    coeff_prec: tuple[int, ...] = ()
    N: int = 1
    spec: KatzBasisSpec | None = field(default=None, compare=False)
    row_slack: Fraction | None = None  # see fit_row_slack; None disables tail bounds
    kind: str = "full"

    def __post_init__(self) -> None:
        if not self.coeff_prec:
            object.__setattr__(self, "coeff_prec", (self.p_prec,) * len(self.coeffs))
        if len(self.coeff_prec) != len(self.coeffs):
            raise ValueError("coeff_prec length mismatch")
        if not 0 <= self.certified_count <= len(self.coeffs):
            raise ValueError("certified_count out of range")

    def __len__(self) -> int:
        return len(self.coeffs)

    def tail_bounds(self, n: int) -> list[int] | None:
        """Lower bounds for v(c_0..c_n) of the untruncated series.

        After conjugating the operator matrix by p^(beta*layer), row t has
        valuation at least (alpha - beta)*layer(t) - row_slack, so c_N is
        bounded by the sum of the first N row bounds. The full series
        vanishes at t = 1 and the dagger series at t = p^{1-k}, so removing
        either linear factor gives a tail sum; removing (1 - p^{k-1} t) also
        allows the direct min-convolution bound, and the larger one is used.
        """
        if self.row_slack is None:
            return None
        alpha, beta = entry_rates(self.p)
        extra = 2 if self.kind == "full" else 3 * n + 60
        S = Fraction(0)
        T = [0]
        for lay in index_layers(self.p, self.k, n + extra):
            S += (alpha - beta) * lay - self.row_slack
            T.append(max(0, math.ceil(S)))
        if self.kind == "full":
            return T[: n + 1]
        D = [0] + T[2:]
        if self.kind == "dagger":
            return D[: n + 1]
        a = self.k - 1
        closed = D[-1] - D[-2] >= a  # convexity: later terms cannot go lower
        out = []
        for m in range(n + 1):
            direct = min(a * (m - j) + D[j] for j in range(m + 1))
            if closed:
                direct = max(direct, min(D[j] - a * (j - m) for j in range(m + 1, len(D))))
            out.append(direct)
        return out

    def valuations(self) -> list[Valuation]:
        """[v(c_0)=0, v(c_1), ...], lower bounds where precision ran out."""
        T = self.tail_bounds(len(self.coeffs))
        out = [Valuation(Fraction(0))]
        for i, (c, a) in enumerate(zip(self.coeffs, self.coeff_prec), 1):
            v = residue_valuation(c, self.p, self.p_prec)
            if v.is_inf or not v.exact or v.value >= a:
                lo = min(a, self.p_prec)
                out.append(Valuation.at_least(max(lo, T[i]) if T else lo))
            else:
                out.append(v)
        return out

    def extended_valuations(self) -> list[Valuation]:
        """valuations() followed by tail bounds past the truncation, far
        enough that no later point can lower the pessimistic hull."""
        vals = self.valuations()
        n = len(self.coeffs)
        T = self.tail_bounds(4 * n + 60)
        if T is None:
            return vals
        for N in range(n + 1, len(T) - 1):
            vals.append(Valuation.at_least(T[N]))
            if T[N] > 0 and (T[N + 1] - T[N]) * (N - n) >= T[N]:
                break
        return vals

    def polygon(self) -> CertifiedPolygon:
        return certified_polygon(self.extended_valuations())

    def slopes(self) -> list[Fraction]:
        """Certain slopes (those of the certified polygon prefix)."""
        return self.polygon().polygon.slopes()


def char_series(matrix: Sequence[Sequence[int]], n_max: int, p: int, M: int, k: int = 0,
                spec: KatzBasisSpec | None = None) -> CharSeries:
    n = len(matrix)
    if n_max > n:
        raise ValueError(f"n_max {n_max} exceeds dimension {n}")
    mod = p**M
    e = berkowitz(matrix, mod)
    trace = sum(matrix[i][i] for i in range(n)) % mod
    if n and (e[1] + trace) % mod:
        raise AssertionError("trace identity failed")
    return CharSeries(p, k, tuple(e[1:n_max + 1]), M, spec=spec)


def divide_linear(s: CharSeries, alpha: int, drop: int = 1) -> CharSeries:
    """s / (1 - alpha t), truncated by ``drop`` terms; precision propagates."""
    mod = s.p**s.p_prec
    alpha_val = vp(alpha, s.p) if alpha % mod else s.p_prec
    out, prec = [], []
    b, bp = 1, s.p_prec
    for c, a in zip(s.coeffs, s.coeff_prec):
        b = (c + alpha * b) % mod
        bp = min(a, bp + alpha_val, s.p_prec)
        out.append(b)
        prec.append(bp)
    n = max(0, len(out) - drop)
    cert = min(s.certified_count, n)
    res = CharSeries(s.p, s.k, tuple(out[:n]), s.p_prec, 0, tuple(prec[:n]), spec=s.spec,
                     row_slack=s.row_slack)
    return replace(res, certified_count=min(cert, _exact_run(res)))


def cuspidal_char_series(full: CharSeries, critical: bool = True) -> CharSeries:
    """Remove the level-1 Eisenstein factors from a full series.

    Always removes (1 - t) (ordinary Eisenstein). With ``critical=True`` the
    factor (1 - p^{k-1} t) is removed too, giving the series whose slopes
    below k-1 are the classical cuspidal slopes. ``critical=False`` keeps it:
    the critical-slope Eisenstein series is an overconvergent cusp form, and
    that series is the one that varies analytically in the weight.
    """
    if full.k < 4 and critical:
        raise ValueError("cuspidal series needs k >= 4")
    s = divide_linear(full, 1)
    if critical:
        s = divide_linear(s, full.p ** (full.k - 1) % full.p**full.p_prec)
    return s


def mul_linear(s: CharSeries, alpha: int) -> CharSeries:
    """s * (1 - alpha t) on the available coefficients."""
    mod = s.p**s.p_prec
    prev = [1] + list(s.coeffs)
    out = [(prev[i + 1] - alpha * prev[i]) % mod for i in range(len(s.coeffs))]
    return CharSeries(s.p, s.k, tuple(out), s.p_prec, 0, spec=s.spec)


def _exact_run(s: CharSeries) -> int:
    run = 0
    for v in s.valuations()[1:]:
        if not v.exact:
            break
        run += 1
    return run


# --------------------------------------------------------------------------
# cache

def _cache_dir() -> Path | None:
    d = os.environ.get("SLOPELAB_CACHE", ".slopelab-cache")
    if d.lower() in ("", "0", "off", "none"):
        return None
    return Path(d)


def _cache_path(spec: KatzBasisSpec) -> Path | None:
    d = _cache_dir()
    if d is None:
        return None
    return d / f"p{spec.p}_N1_k{spec.k}_i{spec.i_max}_q{spec.q_prec}_M{spec.p_prec}_{ALGORITHM}.json"


def series_to_json(s: CharSeries, spec: KatzBasisSpec) -> dict:
    return {
        "p": s.p, "N": 1, "k": s.k, "i_max": spec.i_max, "q_prec": spec.q_prec,
        "p_prec": s.p_prec, "algorithm": ALGORITHM,
        "coeffs": [str(c) for c in s.coeffs], "certified_count": s.certified_count,
        "row_slack": None if s.row_slack is None else format_rational(s.row_slack),
    }


def _slack_from_json(x) -> Fraction | None:
    return None if x is None else parse_rational(x)


def _cache_load(spec: KatzBasisSpec) -> CharSeries | None:
    path = _cache_path(spec)
    if path is None or not path.exists():
        return None
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError):
        return None
    if data.get("algorithm") != ALGORITHM or data.get("p_prec") != spec.p_prec:
        return None
    coeffs = tuple(int(c) for c in data["coeffs"])
    return CharSeries(spec.p, spec.k, coeffs, spec.p_prec, spec=spec, row_slack=_slack_from_json(data.get("row_slack")))


def _cache_store(s: CharSeries, spec: KatzBasisSpec) -> None:
    path = _cache_path(spec)
    if path is None:
        return
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        with os.fdopen(fd, "w") as fh:
            json.dump(series_to_json(s, spec), fh, separators=(",", ":"))
        os.replace(tmp, path)
    except OSError:
        pass


def build_series(spec: KatzBasisSpec, use_cache: bool = True) -> CharSeries:
    """Full (uncertified) characteristic series of the truncated matrix."""
    if use_cache:
        hit = _cache_load(spec)
        if hit is not None:
            return hit
    A = up_matrix(spec)
    s = char_series(A, len(A), spec.p, spec.p_prec, spec.k, spec)
    s = replace(s, row_slack=fit_row_slack(A, spec.p, spec.k, spec.p_prec))
    if use_cache:
        _cache_store(s, spec)
    return s


# --------------------------------------------------------------------------
# certification

def certify(base: CharSeries, enlarged: CharSeries) -> CharSeries:
    """Lower each coefficient's precision to its agreement with a larger build."""
    M = base.p_prec
    mod = base.p**M
    prec = []
    for i in range(len(base.coeffs)):
        other = enlarged.coeffs[i] if i < len(enlarged.coeffs) else 0
        d = (base.coeffs[i] - other) % mod
        prec.append(M if d == 0 else min(M, vp(d, base.p)))
    slack = None
    if base.row_slack is not None and enlarged.row_slack is not None:
        slack = max(base.row_slack, enlarged.row_slack)
    s = replace(base, coeff_prec=tuple(prec), certified_count=0, row_slack=slack)
    T = s.tail_bounds(len(prec))
    if T is not None:
        # an exact valuation under its bound means the bound is too optimistic
        vals = s.valuations()
        worst = max((T[i] - v.value for i, v in enumerate(vals) if v.exact and not v.is_inf), default=0)
        if worst > 0:
            s = replace(s, row_slack=slack + math.ceil(worst))
    return replace(s, certified_count=_exact_run(s))


SERIES_KINDS = ("full", "cuspidal", "dagger")


def derived_series(full: CharSeries, kind: str) -> CharSeries:
    """``full``; ``cuspidal`` (both level-1 Eisenstein factors removed);
    ``dagger`` (only the ordinary factor removed)."""
    if kind == "full":
        return full
    if kind == "cuspidal":
        return replace(cuspidal_char_series(full, critical=True), kind=kind)
    if kind == "dagger":
        return replace(cuspidal_char_series(full, critical=False), kind=kind)
    raise ValueError(f"unknown series kind {kind!r}")


def certified_series(spec: KatzBasisSpec, kind: str = "full", use_cache: bool = True) -> CharSeries:
    """Series of the given kind, certified against the enlarged build of the same kind."""
    base = derived_series(build_series(spec, use_cache), kind)
    big = derived_series(build_series(spec.enlarged(), use_cache), kind)
    return certify(base, big)


def default_spec(p: int, k: int, h_max: Fraction | int) -> KatzBasisSpec:
    """Starting size for certifying slopes <= h_max (escalation does the rest)."""
    h = max(1, math.ceil(Fraction(h_max)))
    hasse = lift_weight(p) // (p - 1)
    i_max = max(4, math.ceil(Fraction((h + 2) * (p + 1), (p - 1) * hasse)) + 2)
    return KatzBasisSpec(p, k, i_max, 0, 2 * h + 15)


def _precision_bound(s: CharSeries) -> bool:
    """True when the first uncertain coefficient past the certain prefix is
    limited by p_prec (agreement is total) rather than by truncation."""
    vals = s.valuations()
    end = s.polygon().end_index
    for i in range(end + 1, len(vals)):
        if not vals[i].exact:
            return s.coeff_prec[i - 1] >= s.p_prec
    return False


def _digits_for(s: CharSeries, h: Fraction) -> int:
    """Digits that make every coefficient up to the last possible vertex of
    slope <= h readable: the polygon lies above the tail bounds T, so a
    vertex at N with all slopes <= h needs T_N <= h*N."""
    T = s.tail_bounds(4 * len(s.coeffs) + 60)
    if T is None:
        return 0
    last = max((N for N in range(len(T)) if T[N] <= h * N), default=0)
    return math.ceil(h * last) + 10


def certified_for_slope(
    p: int, k: int, h: Fraction | int, *, kind: str = "cuspidal",
    max_retries: int = 6, spec: KatzBasisSpec | None = None, use_cache: bool = True,
) -> CharSeries:
    """A certified series whose polygon determines every slope <= h.

    Escalates layers or precision; raises PrecisionInsufficient after
    ``max_retries`` enlargements.
    """
    h = Fraction(h)
    spec = spec or default_spec(p, k, h)
    last = None
    for _ in range(max_retries + 1):
        s = certified_series(spec, kind, use_cache)
        last = s
        if len(s.coeffs) and s.polygon().determines(h):
            return s
        if _precision_bound(s):
            M = max(math.ceil(spec.p_prec * 3 / 2) + 10, _digits_for(s, h))
            spec = KatzBasisSpec(p, k, spec.i_max, 0, M)
        else:
            spec = KatzBasisSpec(p, k, math.ceil(spec.i_max * 3 / 2) + 1, 0, spec.p_prec)
    raise PrecisionInsufficient(f"slopes <= {h} at p={p}, k={k} not certified", last)


def slopes_upto(p: int, k: int, h: Fraction | int, **kw) -> list[Fraction]:
    s = certified_for_slope(p, k, h, **kw)
    return [x for x in s.slopes() if x <= Fraction(h)]


def d_multiplicity(p: int, k: int, h: Fraction | int, max_retries: int = 6,
                   use_cache: bool = True) -> int:
    """Multiplicity of slope h in the cuspidal series at weight k (0 < h < k-1)."""
    h = Fraction(h)
    if not 0 < h < k - 1:
        raise ValueError("d(k, h) needs 0 < h < k - 1")
    s = certified_for_slope(p, k, h + 1, max_retries=max_retries, use_cache=use_cache)
    return s.polygon().polygon.multiplicity(h)


# --------------------------------------------------------------------------
# classical oracle

def classical_oracle(p: int, k: int, max_dim: int = 6) -> list[Fraction]:
    """Slopes of U_p on S_k(Gamma_0(p)) from classical T_p data (exact)."""
    if k < 4 or k % 2:
        raise ValueError("need even k >= 4")
    d = dim_S1(k)
    if d > max_dim:
        raise OracleRangeExceeded(f"dim S_{k} = {d} exceeds {max_dim}")
    out: list[Fraction] = []
    if d:
        e = berkowitz(tp_matrix(k, p))
        poly = newton_polygon([val_int(c, p) for c in e])
        if poly.degree != d:
            raise ArithmeticError("T_p has a zero eigenvalue")
        for h in poly.slopes():
            out += [h, k - 1 - h]
    out += [Fraction(k - 2, 2)] * dim_pnew(k, p)
    return sorted(out)


def polygon_of(vals: Sequence[Valuation]) -> NewtonPolygon:
    return certified_polygon(vals).polygon
