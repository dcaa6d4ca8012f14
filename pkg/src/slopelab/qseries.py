"""Truncated q-expansions: Eisenstein series, Delta, Miller-style monomial
bases, dimension formulas and the classical Hecke operators.

Two coefficient regimes are used. The U_p engine works with residues mod
p^M (lists of ints in ``[0, p^M)``) and multiplies by Kronecker substitution;
the small classical oracle works with exact integers.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from fractions import Fraction
from math import comb
from typing import Sequence

from .padic_core import PadicScalar


class WeightUnsupported(ValueError):
    pass


class NegativeWeight(ValueError):
    pass


class InsufficientLength(ValueError):
    pass


# --------------------------------------------------------------------------
# series kernels on plain lists

def mul_mod(a: Sequence[int], b: Sequence[int], n: int, mod: int) -> list[int]:
    """First n coefficients of a*b mod ``mod`` (entries assumed in [0, mod))."""
    a = list(a[:n])
    b = list(b[:n])
    while a and a[-1] == 0:
        a.pop()
    while b and b[-1] == 0:
        b.pop()
    if not a or not b:
        return [0] * n
    if len(a) < 8 or len(b) < 8:
        out = [0] * n
        for i, x in enumerate(a):
            if x:
                for j in range(min(len(b), n - i)):
                    out[i + j] += x * b[j]
        return [c % mod for c in out]
    width = (2 * mod.bit_length() + max(len(a), len(b)).bit_length() + 8) // 8
    A = int.from_bytes(b"".join(x.to_bytes(width, "little") for x in a), "little")
    B = int.from_bytes(b"".join(x.to_bytes(width, "little") for x in b), "little")
    raw = (A * B).to_bytes(width * (len(a) + len(b)), "little")
    m = min(n, len(a) + len(b) - 1)
    out = [int.from_bytes(raw[i * width:(i + 1) * width], "little") % mod for i in range(m)]
    return out + [0] * (n - m)


def mul_exact(a: Sequence[int], b: Sequence[int], n: int) -> list[int]:
    out = [0] * n
    for i, x in enumerate(a[:n]):
        if x:
            for j in range(min(len(b), n - i)):
                out[i + j] += x * b[j]
    return out


def pow_mod(a: Sequence[int], e: int, n: int, mod: int) -> list[int]:
    result = [1 % mod] + [0] * (n - 1)
    base = [x % mod for x in a[:n]] + [0] * max(0, n - len(a))
    while e:
        if e & 1:
            result = mul_mod(result, base, n, mod)
        e >>= 1
        if e:
            base = mul_mod(base, base, n, mod)
    return result


def inverse_mod(a: Sequence[int], n: int, mod: int) -> list[int]:
    """Inverse of a power series with unit constant term, by Newton iteration."""
    if a[0] % mod == 0:
        raise ZeroDivisionError("constant term is not invertible")
    inv0 = pow(a[0], -1, mod)
    b = [inv0]
    prec = 1
    while prec < n:
        prec = min(2 * prec, n)
        ab = mul_mod(a, b, prec, mod)
        # b <- b * (2 - a b)
        two_minus = [(-x) % mod for x in ab]
        two_minus[0] = (two_minus[0] + 2) % mod
        b = mul_mod(b, two_minus, prec, mod)
    return b + [0] * (n - len(b))


def substitute_qp(a: Sequence[int], p: int, n: int) -> list[int]:
    """Coefficients of f(q^p), truncated to length n."""
    out = [0] * n
    for i, x in enumerate(a):
        if i * p >= n:
            break
        out[i * p] = x
    return out


# --------------------------------------------------------------------------
# Bernoulli numbers and classical series

_bern_lock = threading.Lock()
_bern: list[Fraction] = [Fraction(1)]


def bernoulli(n: int) -> Fraction:
    """B_n with B_1 = -1/2, via sum_{j<=m} C(m+1, j) B_j = 0 (memoized)."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 1:
        return Fraction(-1, 2)
    if n > 1 and n % 2:
        return Fraction(0)
    with _bern_lock:
        while len(_bern) <= n:
            m = len(_bern)
            s = sum(comb(m + 1, j) * bj for j, bj in enumerate(_bern))
            _bern.append(-s / (m + 1))
        return _bern[n]


def _sigma_table(e: int, L: int, mod: int | None) -> list[int]:
    sig = [0] * L
    for d in range(1, L):
        de = pow(d, e, mod) if mod else d**e
        for n in range(d, L, d):
            sig[n] += de
    if mod:
        sig = [s % mod for s in sig]
    return sig


@dataclass(frozen=True)
class QExpansion:
    """A truncated q-series of weight k; ``modulus`` is None for exact integers."""

    weight: int
    coeffs: tuple[int, ...]
    p: int | None = None
    M: int | None = None

    @property
    def modulus(self) -> int | None:
        return None if self.M is None else self.p**self.M

    def __len__(self) -> int:
        return len(self.coeffs)

    def __getitem__(self, n: int) -> int:
        return self.coeffs[n]

    def scalars(self) -> list[PadicScalar]:
        if self.M is None:
            raise ValueError("exact expansion has no residue scalars")
        return [PadicScalar(self.p, self.M, c) for c in self.coeffs]

    def _like(self, coeffs: Sequence[int], weight: int | None = None) -> "QExpansion":
        mod = self.modulus
        if mod is not None:
            coeffs = [c % mod for c in coeffs]
        return QExpansion(self.weight if weight is None else weight, tuple(coeffs), self.p, self.M)

    def reduce(self, p: int, M: int) -> "QExpansion":
        mod = p**M
        return QExpansion(self.weight, tuple(c % mod for c in self.coeffs), p, M)

    def truncate(self, L: int) -> "QExpansion":
        return self._like(self.coeffs[:L])

    def __add__(self, other: "QExpansion") -> "QExpansion":
        n = min(len(self), len(other))
        return self._like([a + b for a, b in zip(self.coeffs[:n], other.coeffs[:n])])

    def __sub__(self, other: "QExpansion") -> "QExpansion":
        n = min(len(self), len(other))
        return self._like([a - b for a, b in zip(self.coeffs[:n], other.coeffs[:n])])

    def scale(self, c: int) -> "QExpansion":
        return self._like([c * a for a in self.coeffs])

    def __mul__(self, other: "QExpansion") -> "QExpansion":
        n = min(len(self), len(other))
        mod = self.modulus
        if mod is None:
            prod = mul_exact(self.coeffs, other.coeffs, n)
        else:
            prod = mul_mod(self.coeffs, other.coeffs, n, mod)
        return QExpansion(self.weight + other.weight, tuple(prod), self.p, self.M)

    def __pow__(self, e: int) -> "QExpansion":
        if e < 0:
            return self.inverse() ** (-e)
        mod = self.modulus
        n = len(self)
        if mod is not None:
            coeffs = pow_mod(self.coeffs, e, n, mod)
        else:
            coeffs = [1] + [0] * (n - 1)
            base = list(self.coeffs)
            k = e
            while k:
                if k & 1:
                    coeffs = mul_exact(coeffs, base, n)
                k >>= 1
                if k:
                    base = mul_exact(base, base, n)
        return QExpansion(self.weight * e, tuple(coeffs), self.p, self.M)

    def inverse(self) -> "QExpansion":
        mod = self.modulus
        if mod is None:
            raise ValueError("inverse needs a modulus")
        return QExpansion(-self.weight, tuple(inverse_mod(self.coeffs, len(self), mod)), self.p, self.M)


def _modulus(p: int | None, M: int | None) -> int | None:
    if (p is None) != (M is None):
        raise ValueError("give both p and M, or neither")
    return None if p is None else p**M


def eisenstein_coefficients(k: int, L: int, mod: int | None = None) -> list[int]:
    """E_k with constant term 1 (mod ``mod``), or its primitive integer multiple.

    In exact mode the series is cleared of denominators: the constant term
    is the denominator of 2k/B_k (1 for k = 4, 6, 8, 10, 14).
    """
    if k < 4 or k % 2:
        raise WeightUnsupported(f"Eisenstein series needs even k >= 4, got {k}")
    factor = Fraction(-2 * k) / bernoulli(k)
    sig = _sigma_table(k - 1, L, mod)
    if mod is None:
        den, num = factor.denominator, factor.numerator
        return [den] + [num * s for s in sig[1:]]
    if factor.denominator % _prime_of(mod) == 0:
        raise WeightUnsupported(f"E_{k} is not integral at this prime")
    f = factor.numerator * pow(factor.denominator, -1, mod) % mod
    return [1 % mod] + [f * s % mod for s in sig[1:]]


def _prime_of(mod: int) -> int:
    p = 2
    while mod % p:
        p += 1
    return p


def eisenstein_series(k: int, L: int, p: int | None = None, M: int | None = None) -> QExpansion:
    mod = _modulus(p, M)
    return QExpansion(k, tuple(eisenstein_coefficients(k, L, mod)), p, M)


def delta_coefficients(L: int, mod: int | None = None) -> list[int]:
    """Delta = q prod (1-q^n)^24 using Jacobi's identity for eta^3."""
    eta3 = [0] * L
    n = 0
    while n * (n + 1) // 2 < L:
        eta3[n * (n + 1) // 2] = (-1) ** n * (2 * n + 1)
        n += 1
    if mod is None:
        e6 = mul_exact(eta3, eta3, L)
        e12 = mul_exact(e6, e6, L)
        e24 = mul_exact(e12, e12, L)
    else:
        eta3 = [c % mod for c in eta3]
        e24 = pow_mod(eta3, 8, L, mod)
    return [0] + e24[: L - 1]


def delta_series(L: int, p: int | None = None, M: int | None = None) -> QExpansion:
    mod = _modulus(p, M)
    return QExpansion(12, tuple(delta_coefficients(L, mod)), p, M)


# --------------------------------------------------------------------------
# dimensions

def dim_M1(k: int) -> int:
    """dim M_k(SL_2(Z)) (0 for odd or negative k)."""
    if k < 0 or k % 2:
        return 0
    if k % 12 == 2:
        return k // 12
    return k // 12 + 1


def dim_S1(k: int) -> int:
    if k < 12 or k % 2:
        return 0
    return dim_M1(k) - 1


def dim_S_gamma0(k: int, N: int) -> int:
    """dim S_k(Gamma_0(N)) for N in {1} or prime, k even >= 2."""
    if k % 2 or k < 2:
        return 0
    if N == 1:
        return dim_S1(k)
    p = N
    mu = p + 1
    nu2 = 1 if p == 2 else (0 if p % 4 == 3 else 2)
    nu3 = 1 if p == 3 else (0 if p % 3 == 2 else 2)
    cusps = 2
    if k == 2:
        g = 1 + Fraction(mu, 12) - Fraction(nu2, 4) - Fraction(nu3, 3) - Fraction(cusps, 2)
        return int(g)
    d = (
        Fraction((k - 1) * mu, 12)
        + (k // 4 - Fraction(k - 1, 4)) * nu2
        + (k // 3 - Fraction(k - 1, 3)) * nu3
        - Fraction(cusps, 2)
    )
    assert d.denominator == 1
    return int(d)


def dim_pnew(k: int, p: int) -> int:
    return dim_S_gamma0(k, p) - 2 * dim_S1(k)


# --------------------------------------------------------------------------
# monomial bases

def lift_weight(p: int) -> int:
    """Weight of the Eisenstein lift of a Hasse power used for prime p."""
    if p == 2:
        return 4
    if p == 3:
        return 6
    return p - 1


def monomial_exponents(weight: int, c: int) -> tuple[int, int, int]:
    """(a, b, c) with E4^a E6^b Delta^c of the given weight, b in {0, 1}."""
    r = weight - 12 * c
    if r < 0 or r == 2 or r % 2:
        raise ValueError(f"no monomial of weight {weight} with Delta^{c}")
    b = 0 if r % 4 == 0 else 1
    return ((r - 6 * b) // 4, b, c)


class MonomialFactory:
    """Caches powers of E4 and Delta so many monomials share the work."""

    def __init__(self, L: int, mod: int | None) -> None:
        self.L, self.mod = L, mod
        e4 = eisenstein_coefficients(4, L, mod)
        e6 = eisenstein_coefficients(6, L, mod)
        self._e6 = e6
        self._e4pows = [[1] + [0] * (L - 1), e4]
        self._dpows = [[1] + [0] * (L - 1), delta_coefficients(L, mod)]

    def _mul(self, a: Sequence[int], b: Sequence[int]) -> list[int]:
        if self.mod is None:
            return mul_exact(a, b, self.L)
        return mul_mod(a, b, self.L, self.mod)

    def _power(self, table: list[list[int]], e: int) -> list[int]:
        while len(table) <= e:
            table.append(self._mul(table[-1], table[1]))
        return table[e]

    def monomial(self, a: int, b: int, c: int) -> list[int]:
        f = self._mul(self._power(self._e4pows, a), self._power(self._dpows, c))
        if b:
            f = self._mul(f, self._e6)
        return f


def complementary_basis(
    p: int, k: int, i: int, L: int, M: int | None = None,
    factory: MonomialFactory | None = None,
) -> list[QExpansion]:
    """Delta-graded monomials completing the layer of weight k + i*(lift weight).

    Returns E4^a E6^b Delta^c for c in [dim M_{k_i - lw}, dim M_{k_i}), each
    with leading term q^c (empty layers are legal).
    """
    lw = lift_weight(p)
    weight = k + i * lw
    if weight < 0 or i < 0:
        raise NegativeWeight(f"layer weight {weight} is negative")
    lo = dim_M1(weight - lw) if i > 0 else 0
    hi = dim_M1(weight)
    mod = None if M is None else p**M
    if factory is None:
        factory = MonomialFactory(L, mod)
    out = []
    for c in range(lo, hi):
        coeffs = factory.monomial(*monomial_exponents(weight, c))
        out.append(QExpansion(weight, tuple(coeffs), None if M is None else p, M))
    return out


def miller_cusp_basis(k: int, L: int) -> list[list[int]]:
    """Integral echelon basis f_c = q^c + O(q^{d+1}) (c = 1..d) of S_k(SL_2(Z))."""
    d = dim_S1(k)
    if d == 0:
        return []
    fac = MonomialFactory(L, None)
    rows = [fac.monomial(*monomial_exponents(k, c)) for c in range(1, d + 1)]
    # rows[c-1] = q^c + ..., unitriangular; clear the other leading positions
    for j in range(d - 1, -1, -1):
        for i in range(j):
            x = rows[i][j + 1]
            if x:
                rows[i] = [a - x * b for a, b in zip(rows[i], rows[j])]
    return rows


# --------------------------------------------------------------------------
# operators

def up_operator(f: QExpansion, p: int) -> QExpansion:
    n = (len(f) - 1) // p + 1
    return QExpansion(f.weight, tuple(f.coeffs[p * j] for j in range(n)), f.p, f.M)


def vp_operator(f: QExpansion, p: int) -> QExpansion:
    """f(q) -> f(q^p) at the same length."""
    return QExpansion(f.weight, tuple(substitute_qp(f.coeffs, p, len(f))), f.p, f.M)


def hecke_tp(f: QExpansion, p: int, k: int, length: int | None = None) -> QExpansion:
    """(T_p f)_n = a_{np} + p^{k-1} a_{n/p}."""
    best = (len(f) - 1) // p + 1
    if length is None:
        length = best
    if length > best or length < 1:
        raise InsufficientLength(f"need {p * (length - 1) + 1} coefficients, have {len(f)}")
    a = f.coeffs
    pk = p ** (k - 1)
    out = [a[n * p] + (pk * a[n // p] if n % p == 0 else 0) for n in range(length)]
    mod = f.modulus
    if mod is not None:
        out = [c % mod for c in out]
    return QExpansion(f.weight, tuple(out), f.p, f.M)


def tp_matrix(k: int, p: int) -> list[list[int]]:
    """Matrix of T_p on the Miller basis of S_k(SL_2(Z)); row c holds T_p(f_c)."""
    d = dim_S1(k)
    L = p * (d + 1) + 1
    basis = miller_cusp_basis(k, L)
    mat = []
    for f in basis:
        tf = hecke_tp(QExpansion(k, tuple(f)), p, k, d + 1)
        mat.append([tf[c] for c in range(1, d + 1)])
    return mat
