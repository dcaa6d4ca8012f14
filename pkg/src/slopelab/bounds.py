"""Weight coordinates, the small-slope reduction classifier, the sets X_{k,s,h},
the m-functions and the constant-slope radius lower bounds.

All logarithms are floors computed by integer powering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Optional

from .padic_core import PadicScalar, Valuation, floor_log, format_rational as fr, vp

STANDARD = "standard"
STAR = "star"
VARIANTS = (STANDARD, STAR)


class HypothesisNotMet(ValueError):
    def __init__(self, inequality: str, lhs: int, rhs: Fraction) -> None:
        super().__init__(f"{inequality} fails: {lhs} is not < {rhs} (excess {lhs - rhs})")
        self.inequality, self.lhs, self.rhs = inequality, lhs, rhs


class StarConditionFails(ValueError):
    pass


class WitnessNotFound(RuntimeError):
    pass


class InconsistentInputs(ValueError):
    pass


def v2(p: int) -> int:
    """v_p(2)."""
    return 1 if p == 2 else 0


# --------------------------------------------------------------------------
# weight coordinate

def generator(p: int) -> int:
    return 5 if p == 2 else 1 + p


@dataclass(frozen=True)
class WeightCoord:
    p: int
    k: int
    M: int
    w: PadicScalar

    @property
    def gamma(self) -> int:
        return generator(self.p)


def weight_w(p: int, k: int, M: int) -> WeightCoord:
    """w_k = gamma^k - 1 mod p^M (k >= 0)."""
    mod = p**M
    r = (pow(generator(p), k, mod) - 1) % mod if k >= 0 else (pow(pow(generator(p), -1, mod), -k, mod) - 1) % mod
    return WeightCoord(p, k, M, PadicScalar(p, M, r))


def weight_difference_valuation(p: int, k: int, kp: int) -> Optional[int]:
    """1 + v_p(2) + v_p(k - k'); None when k = k'."""
    if k == kp:
        return None
    return 1 + v2(p) + vp(k - kp, p)


# --------------------------------------------------------------------------
# reduction classifier

class ReductionKind(Enum):
    REDUCIBLE = "reducible"
    IRREDUCIBLE = "irreducible"


@dataclass(frozen=True)
class ReductionType:
    kind: ReductionKind
    modulus: int  # p + 1
    spair: frozenset = field(default_factory=frozenset)

    @classmethod
    def reducible(cls, p: int) -> "ReductionType":
        return cls(ReductionKind.REDUCIBLE, p + 1, frozenset({0}))

    @classmethod
    def irreducible(cls, p: int, s: int) -> "ReductionType":
        m = p + 1
        return cls(ReductionKind.IRREDUCIBLE, m, frozenset({s % m, (-s) % m}))

    @property
    def is_reducible(self) -> bool:
        return self.kind is ReductionKind.REDUCIBLE

    def label(self) -> str:
        if self.is_reducible:
            return "reducible"
        return "irreducible s=" + ",".join(map(str, sorted(self.spair)))


def _hypothesis(p: int, k: int, h: Fraction, variant: str) -> tuple[str, int]:
    if variant == STANDARD:
        return "floor((k-2)/(p-1)) < h", (k - 2) // (p - 1)
    if variant == STAR:
        return "floor((k-1)/(p+1)) < h", (k - 1) // (p + 1)
    raise ValueError(f"unknown variant {variant!r}")


def blz_reduction(p: int, k: int, h: Fraction | int, variant: str = STANDARD) -> ReductionType:
    h = Fraction(h)
    if p <= 3 or k < 2 or h <= 0:
        raise ValueError("need p > 3, k >= 2, h > 0")
    name, lhs = _hypothesis(p, k, h, variant)
    if not lhs < h:
        raise HypothesisNotMet(name, lhs, h)
    if (k - 1) % (p + 1) == 0:
        return ReductionType.reducible(p)
    return ReductionType.irreducible(p, k - 1)


def _spair_set(p: int, spair) -> set[int]:
    if isinstance(spair, ReductionType):
        spair = spair.spair
    m = p + 1
    out = set()
    for s in spair:
        out |= {s % m, (-s) % m}
    return out


def obstruction_check(p: int, kp: int, spair, h: Fraction | int) -> bool:
    """Congruence condition k'-1 not = +-s mod p+1 and floor((k'-2)/(p-1)) < h."""
    h = Fraction(h)
    if (kp - 1) % (p + 1) in _spair_set(p, spair):
        return False
    return (kp - 2) // (p - 1) < h


def x_set(p: int, k: int, spair, h: Fraction | int) -> list[int]:
    """Integers k' = k mod p-1, k'-1 != +-s mod p+1, floor((k'-2)/(p-1)) < h < (k'-2)/2."""
    h = Fraction(h)
    if p == 2 or h <= 0:
        return []
    bad = _spair_set(p, spair)
    lo = math.floor(2 * h + 2) + 1  # (k'-2)/2 > h
    # floor((k'-2)/(p-1)) < h  <=>  floor((k'-2)/(p-1)) <= ceil(h) - 1
    hi = (math.ceil(h) - 1) * (p - 1) + (p - 2) + 2
    out = []
    first = lo + ((k - lo) % (p - 1))
    for kp in range(first, hi + 1, p - 1):
        if (kp - 1) % (p + 1) not in bad:
            out.append(kp)
    return out


def x_set_check(p: int, k: int, spair, h: Fraction | int, kp: int) -> bool:
    """Independent re-check of the three defining conditions."""
    h = Fraction(h)
    return (
        (kp - k) % (p - 1) == 0
        and (kp - 1) % (p + 1) not in _spair_set(p, spair)
        and (kp - 2) // (p - 1) < h < Fraction(kp - 2, 2)
    )


# --------------------------------------------------------------------------
# m-functions

@dataclass(frozen=True)
class LogValue:
    """log_p(numerator / denominator) when ``active``, else the value 0."""

    p: int
    numerator: int
    denominator: int

    @property
    def active(self) -> bool:
        return self.numerator >= self.denominator

    @property
    def argument(self) -> Fraction:
        return Fraction(self.numerator, self.denominator)

    def floor(self) -> int:
        if not self.active:
            return 0
        # largest t with denominator * p^t <= numerator
        return floor_log(self.numerator // self.denominator, self.p)

    def __float__(self) -> float:
        return math.log(self.argument, self.p) if self.active else 0.0

    def __str__(self) -> str:
        if not self.active:
            return "0"
        return f"log_{self.p}({self.argument})"


def m_function(p: int, h: Fraction | int, b: int = 3, variant: str = STANDARD) -> tuple[LogValue, int]:
    """m_p^{(b)}(h) (standard) or its star analogue, with its exact floor."""
    h = Fraction(h)
    if h <= 0:
        raise ValueError("h must be positive")
    if b not in (1, 2, 3):
        raise ValueError("b must be 1, 2 or 3")
    if variant == STANDARD:
        num = math.ceil((p - 3) * h) - 1
    elif variant == STAR:
        num = math.ceil((p - 1) * h) - 2
    else:
        raise ValueError(f"unknown variant {variant!r}")
    val = LogValue(p, num, b * (p - 1))
    return val, val.floor()


def star_condition(p: int, h: Fraction | int, b: int = 3, variant: str = STANDARD) -> bool:
    return m_function(p, h, b, variant)[0].active


def optimized_log_bound(p: int, h: Fraction | int) -> Optional[int]:
    """floor(log_p(h-1)) (p >= 3) or floor(log_2(h-2)) (p = 2), for integers h >= 3."""
    h = Fraction(h)
    if h.denominator != 1 or h < 3:
        return None
    n = int(h) - (2 if p == 2 else 1)
    return floor_log(n, p)


def progression_lower_bound(length: Fraction, n: int) -> int:
    """floor((ceil(l) - 1) / n): guaranteed members of each class mod n in an open interval."""
    return (math.ceil(Fraction(length)) - 1) // n


def count_in_class(x1: Fraction, x2: Fraction, n: int, r: int) -> int:
    """Integers x in the open interval (x1, x2) with x = r mod n."""
    lo = math.floor(Fraction(x1)) + 1
    hi = math.ceil(Fraction(x2)) - 1
    if hi < lo:
        return 0
    first = lo + ((r - lo) % n)
    return 0 if first > hi else (hi - first) // n + 1


# --------------------------------------------------------------------------
# witness

def _pval_gap(p: int, a: int, b: int) -> float:
    return math.inf if a == b else vp(a - b, p)


def witness_weight(p: int, k: int, h: Fraction | int, reduction: ReductionType,
                   b: int = 3, variant: str = STANDARD) -> int:
    """k' in X_{k,s,h} with v_p(k'-k) maximal (smallest k' on ties)."""
    h = Fraction(h)
    if p <= 3:
        raise ValueError("witness search needs p > 3")
    val, floor_m = m_function(p, h, b, variant)
    if not val.active:
        raise StarConditionFails(f"condition fails for p={p}, h={h}, b={b}")
    cands = x_set(p, k, reduction, h)
    if not cands:
        raise WitnessNotFound(f"X is empty for p={p}, k={k}, h={h}")
    best = max(cands, key=lambda kp: (_pval_gap(p, kp, k), -kp))
    if not (x_set_check(p, k, reduction, h, best) and obstruction_check(p, best, reduction, h)
            and h < Fraction(best - 2, 2)):
        raise WitnessNotFound("witness failed self-check")
    if _pval_gap(p, best, k) < floor_m:
        raise WitnessNotFound(f"best witness {best} has v_p(k'-k) < {floor_m}")
    return best


# --------------------------------------------------------------------------
# bound report

def logderiv_from_linv(p: int, v_L: Fraction | int) -> Fraction:
    """v_p(a_p'/a_p) from v_p(L): v_L = 2 v_p(2) + 1 + v(a'/a)."""
    return Fraction(v_L) - 2 * v2(p) - 1


def linv_from_logderiv(p: int, v_ld: Fraction | int) -> Fraction:
    return Fraction(v_ld) + 2 * v2(p) + 1


def csk_from_csw(p: int, csw: Fraction | int) -> Fraction:
    return max(Fraction(0), Fraction(csw) - 1 - v2(p))


@dataclass(frozen=True)
class BoundReport:
    p: int
    h: Fraction
    floor_m: dict  # (b, variant) -> int
    b: int
    variant: str
    optimized_log: Optional[int]
    csw_logderiv: Optional[Fraction]
    csk_logderiv: Optional[Fraction]
    combined: Fraction
    components: dict

    @property
    def logderiv_informative(self) -> bool:
        return self.csk_logderiv is not None and self.csk_logderiv > 0

    def to_dict(self) -> dict:
        return {
            "p": self.p, "h": fr(self.h), "b": self.b, "variant": self.variant,
            "floor_m": {f"b{b}_{v}": x for (b, v), x in sorted(self.floor_m.items())},
            "optimized_log": self.optimized_log,
            "csw_logderiv": None if self.csw_logderiv is None else fr(self.csw_logderiv),
            "csk_logderiv": None if self.csk_logderiv is None else fr(self.csk_logderiv),
            "components": {k: fr(v) for k, v in self.components.items()},
            "combined": fr(self.combined),
        }


def _rat(v: Valuation | Fraction | int | None) -> tuple[Optional[Fraction], bool]:
    if v is None:
        return None, True
    if isinstance(v, Valuation):
        if v.is_inf:
            raise ValueError("infinite valuation is not a usable input")
        return v.value, v.exact
    return Fraction(v), True


def cs_bounds(
    p: int, h: Fraction | int, v_ap: Valuation | Fraction | int | None = None,
    v_apprime: Valuation | Fraction | int | None = None,
    v_L: Fraction | int | None = None, *, b: int = 3, variant: str = STANDARD,
    optimized: bool = False,
) -> BoundReport:
    """Every lower bound for the constant-slope radius available from the inputs.

    ``combined`` is on the k-normalized scale (CS^k).
    """
    h = Fraction(h)
    ap, ap_exact = _rat(v_ap)
    if ap is None:
        ap = h
    apr, apr_exact = _rat(v_apprime)
    csw = None
    if apr is not None:
        csw = ap - apr
    if v_L is not None:
        from_l = -logderiv_from_linv(p, v_L)
        if csw is not None and ap_exact and apr_exact and from_l != csw:
            raise InconsistentInputs(
                f"v(a')={apr}, v(a)={ap} give {csw}, but v(L)={v_L} gives {from_l}")
        csw = from_l if csw is None else csw
    csk = None if csw is None else csk_from_csw(p, csw)
    floors = {(bb, var): m_function(p, h, bb, var)[1] for bb in (1, 2, 3) for var in VARIANTS}
    comps: dict[str, Fraction] = {"floor_m": Fraction(floors[(b, variant)])}
    opt = optimized_log_bound(p, h) if optimized else None
    if opt is not None:
        comps["optimized_log"] = Fraction(opt)
    if csk is not None:
        comps["logderiv"] = csk
    return BoundReport(p, h, floors, b, variant, opt, csw, csk, max(comps.values()), comps)
