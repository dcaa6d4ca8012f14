"""Command-line interface.

Every command prints a TSV table (header row first) or, with ``--json``, a
single JSON document carrying ``schema_version``. Exit codes: 0 success or
all rows match, 1 verification mismatch, 2 usage error, 3 precision still
insufficient after the escalation limit.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from typing import Any, Callable, Sequence

from . import bounds, derivative, gmlab, upmatrix
from .padic_core import Valuation, format_rational, parse_rational, vp

SCHEMA_VERSION = 1
MAX_RETRIES = 3
EMPIRICAL = "empirically certified"

EXIT_OK, EXIT_MISMATCH, EXIT_USAGE, EXIT_PRECISION = 0, 1, 2, 3

# Reference values the verify command checks against.
TABLE1 = {1: 0, 2: 7, 3: 19, 4: 34, 5: 60, 6: 78, 7: 106, 8: 140, 9: 179}
TABLE1_SLOPE = 6
TABLE2 = {
    8: [1, 2, 2], 10: [1, 2, 2], 12: [1, 2, 2], 14: [2, 2, 2, 4, 4], 16: [2, 3, 3, 4, 4],
    18: [2, 2, 2, 4, 4], 20: [2, 2, 2, 5, 5, 6, 6], 22: [2, 2, 2, 5, 5, 6, 6],
    24: [2, 2, 2, 4, 4, 7, 7], 26: [2, 3, 3, 4, 4, 7, 7, 8, 8],
}
# k -> (slope prefix, d(k,7), starred)
TABLE3 = {
    20: ([1, 9, 9], 0, False),
    36: ([1, 4, 5, 17, 17], 0, False),
    116: ([1, 5, 6, 7, 8, 9, 14], 1, False),
    516: ([1, 6, 7, 7, 7, 8, 14, 15], 3, True),
    2516: ([1, 7, 7, 7, 7, 7, 14, 15], 5, True),
    12516: ([1, 7, 7, 7, 7, 7, 14, 15], 5, True),
}
TABLE4 = {
    8: [0, 1, 3, 3, 3, 3, 3, 3, 3, 3],
    10: [0, 1, 3, 3, 3, 3, 3, 3, 3, 3],
    12: [0, 0, 3, 3, 3, 3, 3, 3, 3, 3],
    14: [0, 0, 3, 3, 5, 5, 5, 5, 5, 5],
    16: [0, 0, 1, 3, 5, 5, 5, 5, 5, 5],
    18: [0, 0, 3, 3, 5, 5, 5, 5, 5, 5],
    20: [0, 0, 3, 3, 3, 5, 7, 7, 7, 7],
    22: [0, 0, 3, 3, 3, 5, 7, 7, 7, 7],
    24: [0, 0, 3, 3, 5, 5, 5, 7, 7, 7],
    26: [0, 0, 1, 3, 5, 5, 5, 7, 9, 9],
}
TABLE4_STARRED_FROM = 3  # columns j >= 3 come from the Katz-basis engine only


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# formatting

def fmt(x: Any) -> str:
    if x is None:
        return "-"
    if isinstance(x, bool):
        return "yes" if x else "no"
    if isinstance(x, Valuation):
        return str(x)
    if isinstance(x, Fraction):
        return format_rational(x)
    if isinstance(x, (list, tuple)):
        return ",".join(fmt(y) for y in x)
    return str(x)


def jsonable(x: Any) -> Any:
    if isinstance(x, Valuation):
        return {"value": None if x.is_inf else format_rational(x.value),
                "exact": x.exact, "text": str(x)}
    if isinstance(x, Fraction):
        return format_rational(x)
    if isinstance(x, (list, tuple)):
        return [jsonable(y) for y in x]
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    return x


class Output:
    """Collects one table; renders it as TSV or as a JSON document."""

    def __init__(self, command: str, columns: Sequence[str], meta: dict | None = None) -> None:
        self.command = command
        self.columns = list(columns)
        self.rows: list[list[Any]] = []
        self.meta = dict(meta or {})
        self.notes: list[str] = []

    def add(self, *row: Any) -> None:
        if len(row) != len(self.columns):
            raise ValueError("row width does not match header")
        self.rows.append(list(row))

    def note(self, text: str) -> None:
        self.notes.append(text)

    def render(self, as_json: bool) -> str:
        if as_json:
            doc = {"schema_version": SCHEMA_VERSION, "command": self.command,
                   **jsonable(self.meta),
                   "columns": self.columns,
                   "rows": [dict(zip(self.columns, jsonable(r))) for r in self.rows],
                   "notes": self.notes}
            return json.dumps(doc, sort_keys=True, indent=2) + "\n"
        lines = ["\t".join(self.columns)]
        lines += ["\t".join(fmt(x) for x in r) for r in self.rows]
        lines += [f"# {n}" for n in self.notes]
        return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# argument types

def rational(text: str) -> Fraction:
    try:
        return parse_rational(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from None


def krange(text: str) -> list[int]:
    try:
        a, b = text.split("..")
        lo, hi = int(a), int(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected A..B, got {text!r}") from None
    if lo > hi:
        raise argparse.ArgumentTypeError(f"empty range {text!r}")
    return [k for k in range(lo, hi + 1) if k % 2 == 0]


def prime(text: str) -> int:
    try:
        p = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if p < 2 or any(p % d == 0 for d in range(2, int(p**0.5) + 1)):
        raise argparse.ArgumentTypeError(f"{p} is not prime")
    return p


def even_weight(text: str) -> int:
    try:
        k = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if k < 0 or k % 2:
        raise argparse.ArgumentTypeError("weight must be even and >= 0")
    return k


# --------------------------------------------------------------------------
# commands

def cmd_slopes(a: argparse.Namespace) -> tuple[Output, int]:
    kind = "cuspidal" if a.cuspidal else "full"
    if a.cuspidal and a.k < 4:
        raise UsageError("--cuspidal needs k >= 4")
    hmax = a.hmax if a.hmax is not None else Fraction(10)
    s = upmatrix.certified_for_slope(a.p, a.k, hmax, kind=kind, max_retries=MAX_RETRIES,
                                     use_cache=not a.no_cache)
    poly = s.polygon()
    shown = [(sl, m) for sl, m in poly.polygon.segments if sl <= hmax]
    hidden = [sl for sl, _ in poly.polygon.segments if sl > hmax]
    # lower bound for every slope not listed
    nxt = hidden[0] if hidden else poly.next_slope_lower
    out = Output("slopes", ["slope", "multiplicity"],
                 {"p": a.p, "k": a.k, "kind": kind, "hmax": hmax, "next_slope_lower": nxt})
    for slope, mult in shown:
        out.add(slope, mult)
    return out, EXIT_OK


def cmd_d(a: argparse.Namespace) -> tuple[Output, int]:
    if not 0 < a.h < a.k - 1:
        raise UsageError("d needs 0 < h < k - 1")
    d = upmatrix.d_multiplicity(a.p, a.k, a.h, max_retries=MAX_RETRIES, use_cache=not a.no_cache)
    out = Output("d", ["p", "k", "h", "d"])
    out.add(a.p, a.k, a.h, d)
    return out, EXIT_OK


def cmd_gm_row(a: argparse.Namespace) -> tuple[Output, int]:
    row = gmlab.gm_row(a.p, a.k, a.jmax, robust=a.robust, use_cache=not a.no_cache,
                       max_retries=MAX_RETRIES)
    out = Output("gm-row", ["j", "weight", "d"],
                 {"p": a.p, "k": a.k, "h_k": row.h_k, "robust": a.robust,
                  "jumps": gmlab.jump_multiset(row)})
    for j, d in enumerate(row.d):
        out.add(j, a.k + (a.p - 1) * a.p**j, d)
    return out, EXIT_OK


def cmd_bounds(a: argparse.Namespace) -> tuple[Output, int]:
    if a.v_linv is not None and (a.v_ap is not None or a.v_apprime is not None):
        raise UsageError("give either --v-ap/--v-apprime or --v-linv")
    rep = bounds.cs_bounds(a.p, a.h, a.v_ap, a.v_apprime, a.v_linv, b=a.b,
                           variant=a.variant, optimized=a.optimized)
    out = Output("bounds", ["quantity", "value"], {"p": a.p, "h": a.h, "b": a.b,
                                                   "variant": a.variant})
    for (b, var), x in sorted(rep.floor_m.items()):
        out.add(f"floor_m[b={b},{var}]", x)
    out.add("optimized_log", rep.optimized_log)
    out.add("csw_logderiv", rep.csw_logderiv)
    out.add("csk_logderiv", rep.csk_logderiv)
    for name, x in sorted(rep.components.items()):
        out.add(f"component[{name}]", x)
    out.add("combined_csk", rep.combined)
    if rep.csk_logderiv is not None and not rep.logderiv_informative:
        out.note("log-derivative bound gives no information (CS^k >= 0 is trivial)")
    return out, EXIT_OK


def cmd_blz(a: argparse.Namespace) -> tuple[Output, int]:
    r = bounds.blz_reduction(a.p, a.k, a.h, a.variant)
    out = Output("blz", ["p", "k", "h", "variant", "reduction", "spair"])
    out.add(a.p, a.k, a.h, a.variant, r.kind.value, sorted(r.spair))
    return out, EXIT_OK


def cmd_witness(a: argparse.Namespace) -> tuple[Output, int]:
    r = bounds.blz_reduction(a.p, a.k, a.h, a.variant)
    kp = bounds.witness_weight(a.p, a.k, a.h, r, b=a.b, variant=a.variant)
    _, floor_m = bounds.m_function(a.p, a.h, a.b, a.variant)
    out = Output("witness", ["p", "k", "h", "reduction", "witness", "v_p(k'-k)", "floor_m"])
    out.add(a.p, a.k, a.h, r.label(), kp, vp(kp - a.k, a.p) if kp != a.k else None, floor_m)
    return out, EXIT_OK


def cmd_logderiv(a: argparse.Namespace) -> tuple[Output, int]:
    spec = None
    if a.imax is not None:
        spec = upmatrix.default_spec(a.p, a.k, a.slope + 1)
        spec = upmatrix.KatzBasisSpec(a.p, a.k, a.imax, 0, spec.p_prec)
    ld = derivative.ap_logderiv_valuation(a.p, a.k, a.slope, spec=spec, use_cache=not a.no_cache,
                                          max_retries=MAX_RETRIES)
    csw = -ld.value.value  # v(a) - v(a') = -v(a'/a)
    out = Output("logderiv", ["quantity", "value"], {"p": a.p, "k": a.k, "slope": a.slope})
    out.add("v(d_w P)", ld.numerator)
    out.add("v(d_t P)", ld.denominator)
    out.add("v(a'/a)", ld.value)
    out.add("argmin_i", ld.argmin)
    out.add("csw_lower_bound", csw)
    out.add("v(L)", bounds.linv_from_logderiv(a.p, ld.value.value))
    return out, EXIT_OK


def cmd_check_correlation(a: argparse.Namespace) -> tuple[Output, int]:
    records = gmlab.load_linvariants(a.linv)
    mfn = gmlab.MFN_PAPER if a.mfn == "paper" else gmlab.MFN_CONJECTURE
    rep = gmlab.correlation_report(a.p, a.krange, records, mfn, j_max=a.jmax, robust=a.robust,
                                   use_cache=not a.no_cache)
    out = Output("check-correlation", ["k", "expected", "observed", "match", "missing", "extra"],
                 {"p": a.p, "mfn": mfn, "verdict": rep.verdict, "mismatches": rep.mismatches})
    for e in rep.entries:
        diff = e.diff()
        out.add(e.k, list(e.expected), list(e.observed), e.match, diff["missing"], diff["extra"])
    return out, EXIT_OK if rep.verdict else EXIT_MISMATCH


# --------------------------------------------------------------------------
# verify

def _verify_table1(a: argparse.Namespace) -> tuple[Output, bool]:
    n, e = (9, 180) if a.extended else (3, 19)
    rows = derivative.fd_table(2, 14, n, e, use_cache=not a.no_cache, max_retries=MAX_RETRIES)
    out = Output("verify", ["i", "v(c_i')", "v(c_i' a^-i)", "certified", "expected", "status"],
                 {"table": 1, "p": 2, "k": 14, "step_exponent": e})
    ok = True
    for r in rows:
        v = r.value_valuation
        good = r.certified and v.exact and v.value == TABLE1[r.i]
        ok &= good
        shifted = Valuation(v.value - r.i * TABLE1_SLOPE, v.exact)
        out.add(r.i, v, shifted, r.certified, TABLE1[r.i], "ok" if good else "MISMATCH")
    return out, ok


def _verify_table2(a: argparse.Namespace) -> tuple[Output, bool]:
    records = {r.k: r for r in gmlab.load_linvariants(a.linv) if r.p == 5}
    out = Output("verify", ["k", "v(L)", "obstructions", "expected", "status"], {"table": 2, "p": 5})
    ok = True
    for k, exp in sorted(TABLE2.items()):
        if k not in records:
            out.add(k, None, None, exp, "MISSING")
            ok = False
            continue
        got = gmlab.obstruction_multiset(5, k, records[k], gmlab.MFN_PAPER)
        good = got == exp
        ok &= good
        out.add(k, list(records[k].valuations), got, exp, "ok" if good else "MISMATCH")
    return out, ok


def _verify_table3(a: argparse.Namespace) -> tuple[Output, bool]:
    out = Output("verify", ["k", "slopes", "expected", "d(k,7)", "expected_d", "status", "note"],
                 {"table": 3, "p": 5, "h": 7})
    ok = True
    for k, (prefix, d_exp, starred) in sorted(TABLE3.items()):
        h = Fraction(max(prefix))
        s = upmatrix.certified_for_slope(5, k, h, max_retries=MAX_RETRIES, use_cache=not a.no_cache)
        got = [x for x in s.slopes() if x <= h][: len(prefix)]
        d = upmatrix.d_multiplicity(5, k, 7, max_retries=MAX_RETRIES, use_cache=not a.no_cache)
        good = got == [Fraction(x) for x in prefix] and d == d_exp
        ok &= good
        out.add(k, got, prefix, d, d_exp, "ok" if good else "MISMATCH", EMPIRICAL if starred else "")
    return out, ok


def _verify_table4(a: argparse.Namespace) -> tuple[Output, bool]:
    j_max = 9 if a.extended else 4
    out = Output("verify", ["k", "j", "weight", "d", "expected", "status", "note"],
                 {"table": 4, "p": 5, "j_max": j_max})
    ok = True
    for k, exp in sorted(TABLE4.items()):
        row = gmlab.gm_row(5, k, j_max, use_cache=not a.no_cache, max_retries=MAX_RETRIES)
        for j, d in enumerate(row.d):
            good = d == exp[j]
            ok &= good
            out.add(k, j, k + 4 * 5**j, d, exp[j], "ok" if good else "MISMATCH",
                    EMPIRICAL if j >= TABLE4_STARRED_FROM else "")
    return out, ok


VERIFIERS: dict[int, Callable[[argparse.Namespace], tuple[Output, bool]]] = {
    1: _verify_table1, 2: _verify_table2, 3: _verify_table3, 4: _verify_table4,
}


def cmd_verify(a: argparse.Namespace) -> tuple[Output, int]:
    out, ok = VERIFIERS[a.table](a)
    bad = [r for r in out.rows if r[out.columns.index("status")] != "ok"]
    out.meta["verdict"] = ok
    for r in bad:
        out.note("diff: " + ", ".join(f"{c}={fmt(x)}" for c, x in zip(out.columns, r)))
    return out, EXIT_OK if ok else EXIT_MISMATCH


# --------------------------------------------------------------------------
# parser

class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # exit code 2, as argparse does, but quieter
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="slopelab", description="U_p slopes, constant-slope radius bounds "
                 "and Gouvea-Mazur data for tame level 1.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="emit one JSON document")
    common.add_argument("--no-cache", action="store_true", help="do not read or write the series cache")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("slopes", parents=[common], help="certified slopes at one weight")
    s.add_argument("--p", type=prime, required=True)
    s.add_argument("--k", type=even_weight, required=True)
    s.add_argument("--cuspidal", action="store_true", help="remove both Eisenstein factors")
    s.add_argument("--hmax", type=rational, help="largest slope to certify")
    s.set_defaults(func=cmd_slopes)

    s = sub.add_parser("d", parents=[common], help="multiplicity d(k,h)")
    s.add_argument("--p", type=prime, required=True)
    s.add_argument("--k", type=even_weight, required=True)
    s.add_argument("--h", type=rational, required=True)
    s.set_defaults(func=cmd_d)

    s = sub.add_parser("gm-row", parents=[common], help="d_j(k) for j = 0..jmax")
    s.add_argument("--p", type=prime, required=True)
    s.add_argument("--k", type=even_weight, required=True)
    s.add_argument("--jmax", type=int, required=True)
    s.add_argument("--robust", action="store_true", help="minimum over u = 1..p-1")
    s.set_defaults(func=cmd_gm_row)

    s = sub.add_parser("bounds", parents=[common], help="constant-slope radius lower bounds")
    s.add_argument("--p", type=prime, required=True)
    s.add_argument("--h", type=rational, required=True)
    s.add_argument("--v-ap", type=rational)
    s.add_argument("--v-apprime", type=rational)
    s.add_argument("--v-linv", type=rational)
    s.add_argument("--b", type=int, choices=(1, 2, 3), default=3)
    s.add_argument("--variant", choices=bounds.VARIANTS, default=bounds.STANDARD)
    s.add_argument("--optimized", action="store_true")
    s.set_defaults(func=cmd_bounds)

    s = sub.add_parser("blz", parents=[common], help="inertial reduction label")
    s.add_argument("--p", type=prime, required=True)
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--h", type=rational, required=True)
    s.add_argument("--variant", choices=bounds.VARIANTS, default=bounds.STANDARD)
    s.set_defaults(func=cmd_blz)

    s = sub.add_parser("witness", parents=[common], help="obstructing weight k'")
    s.add_argument("--p", type=prime, required=True)
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--h", type=rational, required=True)
    s.add_argument("--b", type=int, choices=(1, 2, 3), default=3)
    s.add_argument("--variant", choices=bounds.VARIANTS, default=bounds.STANDARD)
    s.set_defaults(func=cmd_witness)

    s = sub.add_parser("logderiv", parents=[common], help="v_p(a_p'/a_p) by finite differences")
    s.add_argument("--p", type=prime, required=True)
    s.add_argument("--k", type=even_weight, required=True)
    s.add_argument("--slope", type=rational, required=True)
    s.add_argument("--imax", type=int, help="starting number of basis layers")
    s.set_defaults(func=cmd_logderiv)

    s = sub.add_parser("check-correlation", parents=[common], help="jump lists vs L-invariant data")
    s.add_argument("--p", type=prime, required=True)
    s.add_argument("--krange", type=krange, required=True, help="A..B (even weights)")
    s.add_argument("--linv", help="JSONL fixture (default: bundled p=5 data)")
    s.add_argument("--mfn", choices=("paper", "conjecture"), default="paper",
                   help="slope term: floor(log_p(h-1))+1 or floor(log_p(h))+1")
    s.add_argument("--jmax", type=int, default=9)
    s.add_argument("--robust", action="store_true")
    s.set_defaults(func=cmd_check_correlation)

    s = sub.add_parser("verify", parents=[common], help="reproduce a reference table from scratch")
    s.add_argument("--table", type=int, choices=(1, 2, 3, 4), required=True)
    s.add_argument("--extended", action="store_true", help="Table 1: i <= 9; Table 4: j <= 9")
    s.add_argument("--linv", help="Table 2 fixture (default: bundled p=5 data)")
    s.set_defaults(func=cmd_verify)
    return ap


USAGE_ERRORS = (UsageError, bounds.HypothesisNotMet, bounds.StarConditionFails,
                gmlab.SchemaError, gmlab.DimensionMismatch, gmlab.MissingData,
                bounds.InconsistentInputs, derivative.TailNotDominated, ValueError, OSError)


def run(argv: Sequence[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        out, code = args.func(args)
    except (upmatrix.PrecisionInsufficient, upmatrix.PrecisionExhausted) as exc:
        print(f"slopelab: precision insufficient: {exc}", file=stderr)
        return EXIT_PRECISION
    except USAGE_ERRORS as exc:
        print(f"slopelab: error: {exc}", file=stderr)
        return EXIT_USAGE
    stdout.write(out.render(args.json))
    return code


def main() -> None:
    raise SystemExit(run())


if __name__ == "__main__":
    main()
