"""Exact p-adic primitives: valuations, residues mod p^M, Gauss valuations and
Newton polygons.

Everything here is immutable. Valuations are exact rationals; a valuation may
also be a *lower bound* (``exact=False``), which is how precision loss is
carried into slope reading.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import total_ordering
from typing import Iterable, Sequence, Union

Rational = Union[int, Fraction]


class AllInfinite(ValueError):
    """No finite coefficient beyond the constant term."""


@total_ordering
@dataclass(frozen=True)
class Valuation:
    """A rational valuation or +infinity.

    ``exact=False`` marks a lower bound ("valuation >= value").
    """

    value: Fraction | None  # None is +infinity
    exact: bool = True

    def __post_init__(self) -> None:
        if self.value is not None and not isinstance(self.value, Fraction):
            object.__setattr__(self, "value", Fraction(self.value))

    @classmethod
    def inf(cls) -> "Valuation":
        return cls(None)

    @classmethod
    def at_least(cls, value: Rational) -> "Valuation":
        return cls(Fraction(value), exact=False)

    @property
    def is_inf(self) -> bool:
        return self.value is None

    def __add__(self, other: "Valuation | Rational") -> "Valuation":
        if not isinstance(other, Valuation):
            other = Valuation(Fraction(other))
        exact = self.exact and other.exact
        if self.is_inf or other.is_inf:
            return Valuation(None, exact)
        return Valuation(self.value + other.value, exact)

    __radd__ = __add__

    def __sub__(self, other: Rational) -> "Valuation":
        if isinstance(other, Valuation):
            raise TypeError("difference of valuations is not a valuation")
        return self + (-Fraction(other))

    def _key(self) -> tuple[int, Fraction]:
        return (1, Fraction(0)) if self.value is None else (0, self.value)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, Valuation):
            return self._key() == other._key()
        if isinstance(other, (int, Fraction)):
            return self.value is not None and self.value == other
        if isinstance(other, float) and other == float("inf"):
            return self.value is None
        return NotImplemented

    def __lt__(self, other: "Valuation | Rational") -> bool:
        if not isinstance(other, Valuation):
            other = Valuation(Fraction(other))
        return self._key() < other._key()

    def __hash__(self) -> int:
        return hash(self._key())

    def __str__(self) -> str:
        if self.value is None:
            return "inf"
        text = format_rational(self.value)
        return text if self.exact else ">=" + text


def format_rational(x: Rational) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def parse_rational(text: str | int) -> Fraction:
    if isinstance(text, int):
        return Fraction(text)
    return Fraction(str(text).strip())


def val_int(n: int, p: int) -> Valuation:
    """p-adic valuation of an integer; +infinity for 0."""
    if n == 0:
        return Valuation.inf()
    n = abs(n)
    e = 0
    while n % p == 0:
        n //= p
        e += 1
    return Valuation(Fraction(e))


def vp(n: int, p: int) -> int:
    """Integer valuation of a nonzero integer (raises on 0)."""
    if n == 0:
        raise ValueError("valuation of 0 is infinite")
    n = abs(n)
    e = 0
    while n % p == 0:
        n //= p
        e += 1
    return e


def val_rational(x: Rational, p: int) -> Valuation:
    x = Fraction(x)
    if x == 0:
        return Valuation.inf()
    return Valuation(Fraction(vp(x.numerator, p) - vp(x.denominator, p)))


def residue_valuation(r: int, p: int, M: int) -> Valuation:
    """Valuation of a residue mod p^M: exact below M, a lower bound at M."""
    r %= p**M
    if r == 0:
        return Valuation.at_least(M)
    return Valuation(Fraction(min(vp(r, p), M)))


@dataclass(frozen=True)
class PadicScalar:
    """An element of Z/p^M with its valuation tracked."""

    p: int
    M: int
    r: int

    def __post_init__(self) -> None:
        if self.M < 1:
            raise ValueError("precision must be positive")
        object.__setattr__(self, "r", self.r % self.p**self.M)

    @property
    def modulus(self) -> int:
        return self.p**self.M

    def valuation(self) -> Valuation:
        return residue_valuation(self.r, self.p, self.M)

    def _coerce(self, other: "PadicScalar | int") -> tuple["PadicScalar", int]:
        if isinstance(other, PadicScalar):
            if other.p != self.p:
                raise ValueError("mismatched primes")
            return other, min(self.M, other.M)
        return PadicScalar(self.p, self.M, other), self.M

    def __add__(self, other: "PadicScalar | int") -> "PadicScalar":
        o, M = self._coerce(other)
        return PadicScalar(self.p, M, self.r + o.r)

    __radd__ = __add__

    def __sub__(self, other: "PadicScalar | int") -> "PadicScalar":
        o, M = self._coerce(other)
        return PadicScalar(self.p, M, self.r - o.r)

    def __rsub__(self, other: int) -> "PadicScalar":
        return PadicScalar(self.p, self.M, other - self.r)

    def __neg__(self) -> "PadicScalar":
        return PadicScalar(self.p, self.M, -self.r)

    def __mul__(self, other: "PadicScalar | int") -> "PadicScalar":
        o, M = self._coerce(other)
        return PadicScalar(self.p, M, self.r * o.r)

    __rmul__ = __mul__

    def __pow__(self, e: int) -> "PadicScalar":
        return PadicScalar(self.p, self.M, pow(self.r, e, self.modulus))


def gauss_valuation(coeff_valuations: Sequence[Valuation], m: Rational) -> Valuation:
    """inf_i (v(r_i) + m*i): the valuation of F on the closed disc v(w) >= m."""
    if not coeff_valuations:
        raise ValueError("empty coefficient list")
    m = Fraction(m)
    return min(v + m * i for i, v in enumerate(coeff_valuations))


@dataclass(frozen=True)
class NewtonPolygon:
    """Slopes (strictly increasing) with multiplicities."""

    segments: tuple[tuple[Fraction, int], ...]
    degree: int = field(default=-1)

    def __post_init__(self) -> None:
        segs = tuple((Fraction(s), int(m)) for s, m in self.segments)
        object.__setattr__(self, "segments", segs)
        if self.degree < 0:
            object.__setattr__(self, "degree", sum(m for _, m in segs))
        for (a, _), (b, _) in zip(segs, segs[1:]):
            if not a < b:
                raise ValueError("slopes must strictly increase")

    def slopes(self) -> list[Fraction]:
        return [s for s, m in self.segments for _ in range(m)]

    def multiplicity(self, h: Rational) -> int:
        h = Fraction(h)
        return sum(m for s, m in self.segments if s == h)

    def count_below(self, h: Rational, strict: bool = True) -> int:
        h = Fraction(h)
        return sum(m for s, m in self.segments if (s < h if strict else s <= h))


def _lower_hull(points: Sequence[tuple[int, Fraction]]) -> list[tuple[int, Fraction]]:
    hull: list[tuple[int, Fraction]] = []
    for pt in points:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            # drop hull[-1] if it lies on or above the chord hull[-2] -> pt
            if (y2 - y1) * (pt[0] - x1) >= (pt[1] - y1) * (x2 - x1):
                hull.pop()
            else:
                break
        hull.append(pt)
    return hull


def _segments(hull: Sequence[tuple[int, Fraction]]) -> list[tuple[Fraction, int]]:
    return [
        (Fraction(y2 - y1) / (x2 - x1), x2 - x1)
        for (x1, y1), (x2, y2) in zip(hull, hull[1:])
    ]


def newton_polygon(coeff_valuations: Sequence[Valuation]) -> NewtonPolygon:
    """Lower convex hull slopes of the points (i, v(c_i)).

    Lower-bound valuations are used at face value; use
    :func:`certified_polygon` when the distinction matters.
    """
    if not coeff_valuations or coeff_valuations[0] != 0:
        raise ValueError("constant term must have valuation 0")
    pts = [(i, v.value) for i, v in enumerate(coeff_valuations) if not v.is_inf]
    if len(pts) < 2:
        raise AllInfinite("no finite coefficient beyond index 0")
    hull = _lower_hull(pts)
    return NewtonPolygon(tuple(_segments(hull)), hull[-1][0])


@dataclass(frozen=True)
class CertifiedPolygon:
    """The part of a Newton polygon that survives imprecise coefficients.

    ``polygon`` holds segments that are provably segments of the true polygon
    (given that exact valuations are exact and bounds are valid lower bounds);
    every true slope past them is at least ``next_slope_lower`` (``None`` when
    nothing is known beyond the prefix).
    """

    polygon: NewtonPolygon
    next_slope_lower: Fraction | None
    end_index: int
    end_value: Fraction

    def determines(self, h: Rational) -> bool:
        """True if every slope <= h is known with its multiplicity."""
        return self.next_slope_lower is not None and self.next_slope_lower > Fraction(h)

    def slopes_through(self, h: Rational) -> list[Fraction]:
        h = Fraction(h)
        return [s for s in self.polygon.slopes() if s <= h]


def certified_polygon(coeff_valuations: Sequence[Valuation]) -> CertifiedPolygon:
    """Newton polygon prefix that is certain given exact/lower-bound data.

    The pessimistic hull (bounds taken at face value) lies below the true
    polygon; vertices of it that are exact points are true vertices, so the
    leading run of exact vertices is certain, and the slope leaving the last
    one bounds all later true slopes from below.
    """
    if not coeff_valuations or coeff_valuations[0] != 0:
        raise ValueError("constant term must have valuation 0")
    pts = [(i, v.value) for i, v in enumerate(coeff_valuations) if not v.is_inf]
    exact = {i for i, v in enumerate(coeff_valuations) if v.exact and not v.is_inf}
    hull = _lower_hull(pts)
    stop = 0
    while stop + 1 < len(hull) and hull[stop + 1][0] in exact:
        stop += 1
    certain = hull[: stop + 1]
    segs = _segments(certain)
    if stop + 1 < len(hull):
        (x1, y1), (x2, y2) = hull[stop], hull[stop + 1]
        nxt: Fraction | None = Fraction(y2 - y1) / (x2 - x1)
    else:
        nxt = None
    return CertifiedPolygon(
        NewtonPolygon(tuple(segs), certain[-1][0]), nxt, certain[-1][0], Fraction(certain[-1][1])
    )


def floor_log(n: int, p: int) -> int:
    """Largest t >= 0 with p^t <= n (n >= 1), by integer comparison."""
    if n < 1:
        raise ValueError("floor_log needs n >= 1")
    t, q = 0, p
    while q <= n:
        t += 1
        q *= p
    return t


def multiset(values: Iterable[int]) -> list[int]:
    return sorted(values)
