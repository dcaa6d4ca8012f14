"""Gouvea-Mazur experiment: d_j(k) rows, jump multisets, obstruction
multisets from L-invariant valuation data, and correlation reports."""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .padic_core import floor_log, format_rational, parse_rational
from .qseries import dim_pnew
from .upmatrix import d_multiplicity, certified_for_slope

MFN_PAPER = "paper_h_minus_1"
MFN_CONJECTURE = "conjecture_h"
MFNS = (MFN_PAPER, MFN_CONJECTURE)


class SchemaError(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


class MissingData(KeyError):
    pass


@dataclass(frozen=True)
class LInvariantRecord:
    p: int
    k: int
    valuations: tuple[Fraction, ...]
    N: int = 1

    def to_json(self) -> dict:
        return {"p": self.p, "N": self.N, "k": self.k,
                "linv_valuations": [_json_rational(v) for v in self.valuations]}


def _json_rational(v: Fraction) -> int | str:
    return v.numerator if v.denominator == 1 else format_rational(v)


def default_fixture() -> Path:
    return Path(str(resources.files("slopelab") / "data" / "linv_p5.jsonl"))


def load_linvariants(path: str | Path | None = None, check_dimension: bool = True) -> list[LInvariantRecord]:
    """Parse a JSONL file of L-invariant valuations (bundled p=5 data by default)."""
    path = Path(path) if path is not None else default_fixture()
    out = []
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"line {lineno}: {exc}") from None
        if not isinstance(obj, dict) or not {"p", "k", "linv_valuations"} <= obj.keys():
            raise SchemaError(f"line {lineno}: need keys p, k, linv_valuations")
        p, k, N = obj["p"], obj["k"], obj.get("N", 1)
        if not all(isinstance(x, int) and not isinstance(x, bool) for x in (p, k, N)):
            raise SchemaError(f"line {lineno}: p, N, k must be integers")
        if N != 1:
            raise SchemaError(f"line {lineno}: only tame level N=1 is supported")
        if k % 2 or k < 2:
            raise SchemaError(f"line {lineno}: k must be even and >= 2")
        vals = obj["linv_valuations"]
        if not isinstance(vals, list):
            raise SchemaError(f"line {lineno}: linv_valuations must be a list")
        try:
            parsed = tuple(sorted(parse_rational(v) for v in vals))
        except (ValueError, ZeroDivisionError, TypeError):
            raise SchemaError(f"line {lineno}: bad valuation in {vals!r}") from None
        if check_dimension and len(parsed) != dim_pnew(k, p):
            raise DimensionMismatch(
                f"line {lineno}: k={k} has {len(parsed)} values, p-new dimension is {dim_pnew(k, p)}")
        out.append(LInvariantRecord(p, k, parsed, N))
    return out


def _mfn_term(p: int, hk: Fraction, mfn: str) -> int:
    if mfn == MFN_PAPER:
        x = hk - 1
    elif mfn == MFN_CONJECTURE:
        x = hk
    else:
        raise ValueError(f"unknown mfn {mfn!r}")
    if x < 1:
        raise ValueError("slope term needs h_k >= 2")
    return floor_log(math.floor(x), p) + 1


def obstruction_multiset(p: int, k: int, record: LInvariantRecord, mfn: str = MFN_PAPER) -> list[int]:
    """max(floor(log_p(h)) + 1, ceil(-v)) per form, h = h_k - 1 or h_k."""
    if k % 2 or k < 8:
        raise ValueError("need even k >= 8")
    hk = Fraction(k - 2, 2)
    base = _mfn_term(p, hk, mfn)
    return sorted(max(base, math.ceil(-v)) for v in record.valuations)


@dataclass(frozen=True)
class GMRow:
    p: int
    k: int
    j_max: int
    d: tuple[int, ...]
    robust: bool = False

    @property
    def h_k(self) -> Fraction:
        return Fraction(self.k - 2, 2)


def gm_row(p: int, k: int, j_max: int, robust: bool = False, use_cache: bool = True,
           max_retries: int = 6) -> GMRow:
    """d_j(k) = d(k + (p-1)p^j, h_k) for j = 0..j_max (min over u in robust mode)."""
    if k % 2:
        raise ValueError("k must be even")
    hk = Fraction(k - 2, 2)
    us = range(1, p) if robust else (1,)
    d = []
    for j in range(j_max + 1):
        d.append(min(d_multiplicity(p, k + u * (p - 1) * p**j, hk, max_retries=max_retries,
                                    use_cache=use_cache) for u in us))
    return GMRow(p, k, j_max, tuple(d), robust)


def jump_multiset(row: GMRow | Sequence[int]) -> list[int]:
    """j with multiplicity d_j - d_{j-1} wherever positive (d_{-1} = 0)."""
    d = row.d if isinstance(row, GMRow) else tuple(row)
    out, prev = [], 0
    for j, x in enumerate(d):
        if x > prev:
            out += [j] * (x - prev)
        prev = x
    return out


def multiset_diff(expected: Sequence[int], observed: Sequence[int]) -> dict:
    e, o = Counter(expected), Counter(observed)
    return {"missing": sorted((e - o).elements()), "extra": sorted((o - e).elements())}


@dataclass(frozen=True)
class CorrelationEntry:
    k: int
    expected: tuple[int, ...]
    observed: tuple[int, ...]
    row: tuple[int, ...]

    @property
    def match(self) -> bool:
        return sorted(self.expected) == sorted(self.observed)

    def diff(self) -> dict:
        return multiset_diff(self.expected, self.observed)


@dataclass(frozen=True)
class CorrelationReport:
    p: int
    mfn: str
    entries: tuple[CorrelationEntry, ...] = field(default_factory=tuple)

    @property
    def verdict(self) -> bool:
        return all(e.match for e in self.entries)

    @property
    def mismatches(self) -> list[int]:
        return [e.k for e in self.entries if not e.match]


def correlation_report(p: int, k_range: Iterable[int], records: Sequence[LInvariantRecord],
                       mfn: str = MFN_PAPER, j_max: int = 9, robust: bool = False,
                       use_cache: bool = True) -> CorrelationReport:
    by_k = {r.k: r for r in records if r.p == p}
    ks = sorted(set(k_range))
    missing = [k for k in ks if k not in by_k]
    if missing:
        raise MissingData(f"no L-invariant data for k in {missing}")
    entries = []
    for k in ks:
        exp = obstruction_multiset(p, k, by_k[k], mfn)
        row = gm_row(p, k, j_max, robust, use_cache)
        entries.append(CorrelationEntry(k, tuple(exp), tuple(jump_multiset(row)), row.d))
    return CorrelationReport(p, mfn, tuple(entries))


@dataclass(frozen=True)
class GapStats:
    p: int
    per_k: dict  # k -> (inside, total)

    @staticmethod
    def _frac(inside: int, total: int) -> Optional[Fraction]:
        return Fraction(inside, total) if total else None

    def fraction(self, k: int) -> Optional[Fraction]:
        return self._frac(*self.per_k[k])

    @property
    def aggregate(self) -> Optional[Fraction]:
        return self._frac(sum(a for a, _ in self.per_k.values()), sum(b for _, b in self.per_k.values()))


def classical_slopes(p: int, k: int, use_cache: bool = True, max_retries: int = 6) -> list[Fraction]:
    """Slopes of U_p on S_k(Gamma_0(p)): engine slopes below k-1, plus k-1 paired with 0."""
    s = certified_for_slope(p, k, Fraction(k - 1), use_cache=use_cache, max_retries=max_retries)
    below = [x for x in s.slopes() if x < k - 1]
    return sorted(below + [Fraction(k - 1)] * below.count(0))


def gouvea_gap_stats(p: int, k_range: Iterable[int], use_cache: bool = True,
                     max_retries: int = 6) -> GapStats:
    """Slopes strictly inside ((k-1)/(p+1), (k-2)/2), per weight."""
    per = {}
    for k in sorted(set(k_range)):
        sl = classical_slopes(p, k, use_cache, max_retries)
        lo, hi = Fraction(k - 1, p + 1), Fraction(k - 2, 2)
        per[k] = (sum(1 for x in sl if lo < x < hi), len(sl))
    return GapStats(p, per)
