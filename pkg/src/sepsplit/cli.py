"""Command-line front end.

Subcommands mirror the library pipelines:

* ``interpolate``  -- formal interpolating Hamiltonian of a map family
* ``formal-sep``   -- formal separatrix tables (optionally Laurent data)
* ``splitting``    -- one full splitting measurement at a parameter value
* ``sweep``        -- delta sweep plus the even-series asymptotic fit
* ``verify``       -- built-in property suites

Every artifact embeds the resolved configuration and the library version so
reruns are reproducible; exact data is serialized as integer rationals and
numeric data as full-precision decimal strings.

Exit codes: 0 success, 2 validation error, 3 convergence failure,
4 precision shortfall.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from typing import List, Optional

from mpmath import mp

from . import __version__
from .errors import ConvergenceError, PrecisionError, SepsplitError
from .maps import MapFamily, get_map
from .interpolate import interpolate, simplify
from .formal_sep import build_formal_separatrix, laurent_reexpand
from .numerics import PrecisionPolicy, splitting_record, evaluate_manifold
from .asymptotics import SweepPlan, normalize_amplitude, run_sweep

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_CONVERGENCE = 3
EXIT_PRECISION = 4


@dataclass
class RunConfig:
    """Resolved invocation settings, embedded into every artifact."""

    subcommand: str
    map_source: str
    order: Optional[int] = None
    eps: Optional[str] = None
    grid: Optional[str] = None
    digits: str = "auto"
    out: Optional[str] = None
    trace: Optional[str] = None
    laurent: Optional[List[int]] = None
    suite: Optional[str] = None
    workers: int = 1

    def to_json(self) -> dict:
        doc = {k: v for k, v in self.__dict__.items() if v is not None}
        doc["version"] = __version__
        return doc


def _resolve_digits(spec: str, family: MapFamily, delta: float,
                    policy: PrecisionPolicy) -> int:
    if spec == "auto":
        return policy.digits_for_delta(family, delta)
    return int(spec)


def _emit(doc: dict, path: Optional[str]):
    text = json.dumps(doc, indent=2)
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _parse_grid(spec: str) -> SweepPlan:
    kind, *rest = spec.split(":")
    if kind not in ("geom", "lin") or len(rest) != 3:
        raise SepsplitError(f"grid must be geom:lo:hi:n or lin:lo:hi:n, got '{spec}'")
    lo, hi, count = float(rest[0]), float(rest[1]), int(rest[2])
    if kind == "geom":
        return SweepPlan.geometric(lo, hi, count)
    return SweepPlan.linear(lo, hi, count)


def cmd_interpolate(args) -> int:
    family = get_map(args.map)
    ham = interpolate(family, args.order)
    if args.mechanical:
        ham = simplify(ham, args.order)
    doc = ham.to_json()
    doc["config"] = RunConfig("interpolate", args.map, order=args.order,
                              out=args.out).to_json()
    _emit(doc, args.out)
    return EXIT_OK


def cmd_formal_sep(args) -> int:
    family = get_map(args.map)
    mech, orig, ham = build_formal_separatrix(family, args.order)
    state = mech.state
    doc = {
        "format": "sepsplit-formal-separatrix/1",
        "order": args.order,
        "extension_modulus": None if state.d is None else
            {"num": state.d.numerator, "den": state.d.denominator},
        "x": {str(n): _eta_json(p) for n, p in state.x.items()},
        "y_factored": "y = mu(delta) * dx/dt with mu = sqrt(2 beta)",
        "beta": {str(n): _coeff_json(c) for n, c in state.a.items()},
        "energy": {str(n): _coeff_json(c) for n, c in state.c.items()},
        "original_frame_x": {str(k): _eta_json(p) for k, p in orig.x.coeffs.items()},
        "original_frame_y": {str(k): _eta_json(p) for k, p in orig.y.coeffs.items()},
    }
    if args.laurent:
        m_max, k_max = args.laurent
        table = laurent_reexpand(orig, m_max, k_max)
        doc["laurent"] = {
            "m_max": m_max, "k_max": k_max,
            "x": [[_coeff_json(c) for c in row] for row in table.x_rows],
            "y": [[_coeff_json(c) for c in row] for row in table.y_rows],
        }
    doc["config"] = RunConfig("formal-sep", args.map, order=args.order,
                              laurent=args.laurent, out=args.out).to_json()
    _emit(doc, args.out)
    return EXIT_OK


def _coeff_json(c) -> dict:
    doc = {"num": c.p.numerator, "den": c.p.denominator}
    if c.q:
        doc["q_num"] = c.q.numerator
        doc["q_den"] = c.q.denominator
    return doc


def _eta_json(poly) -> dict:
    return {
        "P": [_coeff_json(c) for c in poly.P],
        "Q": [_coeff_json(c) for c in poly.Q],
    }


def cmd_splitting(args) -> int:
    family = get_map(args.map)
    policy = PrecisionPolicy()
    with mp.workdps(30):
        eps = mp.mpf(args.eps)
        if eps <= 0:
            raise SepsplitError("splitting requires eps > 0 (saddle side)")
        delta = float(mp.root(eps, 4))
    digits = _resolve_digits(args.digits, family, delta, policy)
    record = splitting_record(family, str(delta), policy=policy, digits=digits)
    normalize_amplitude(record)
    doc = record.to_json()
    doc["format"] = "sepsplit-splitting/1"
    doc["config"] = RunConfig("splitting", args.map, eps=args.eps,
                              digits=args.digits, out=args.out,
                              trace=args.trace).to_json()
    _emit(doc, args.out)
    if args.trace:
        _write_trace(args.trace, family, record)
    return EXIT_OK


def _write_trace(path: str, family: MapFamily, record) -> None:
    """Orbit points of both manifold parametrizations around the loop."""
    from .numerics import find_saddle, parametrize_manifold

    digits = record.digits
    saddle = find_saddle(family, record.eps, digits)
    rows = ["manifold,t,x,y"]
    with mp.workdps(digits):
        for kind in ("unstable", "stable"):
            par = parametrize_manifold(family, saddle, kind, digits)
            base = record.orbits[0].t_unstable if kind == "unstable" \
                else record.orbits[0].t_stable
            for i in range(-40, 9):
                t = base + i * saddle.log_multiplier / 8
                (pt, _) = evaluate_manifold(par, t, derivative=False)
                rows.append(",".join([kind, mp.nstr(t, digits),
                                      mp.nstr(pt[0], digits), mp.nstr(pt[1], digits)]))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(rows) + "\n")


def cmd_sweep(args) -> int:
    family = get_map(args.map)
    plan = _parse_grid(args.grid)
    plan.order = args.order
    plan.map_source = args.map
    if args.digits != "auto":
        plan.digits_override = int(args.digits)
    workers = args.workers or int(os.environ.get("SEPSPLIT_WORKERS", "1"))
    report = run_sweep(family, plan, workers=workers)
    doc = report.to_json()
    doc["config"] = RunConfig("sweep", args.map, order=args.order, grid=args.grid,
                              digits=args.digits, out=args.out,
                              workers=workers).to_json()
    _emit(doc, args.out)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write("\n".join(report.csv_rows()) + "\n")
    return EXIT_OK


def cmd_verify(args) -> int:
    from . import property_suites

    suites = {
        "algebra": property_suites.algebra_suite,
        "eta": property_suites.eta_suite,
        "all": property_suites.all_suites,
    }
    if args.suite not in suites:
        raise SepsplitError(f"unknown suite '{args.suite}'; have {sorted(suites)}")
    failures = suites[args.suite](cases=args.cases, seed=args.seed)
    if failures:
        for name, detail in failures:
            print(f"FAIL {name}: {detail}")
        return EXIT_VALIDATION
    print(f"suite '{args.suite}' passed ({args.cases} randomized cases)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sepsplit",
        description="Separatrix splitting near a saddle-centre bifurcation",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("interpolate", help="formal interpolating Hamiltonian")
    p.add_argument("--map", required=True)
    p.add_argument("--order", type=int, required=True)
    p.add_argument("--mechanical", action="store_true",
                   help="also simplify to mechanical form")
    p.add_argument("--out")
    p.set_defaults(func=cmd_interpolate)

    p = sub.add_parser("formal-sep", help="formal separatrix tables")
    p.add_argument("--map", required=True)
    p.add_argument("--order", type=int, required=True)
    p.add_argument("--laurent", nargs=2, type=int, metavar=("M_MAX", "K_MAX"))
    p.add_argument("--out")
    p.set_defaults(func=cmd_formal_sep)

    p = sub.add_parser("splitting", help="one splitting measurement")
    p.add_argument("--map", required=True)
    p.add_argument("--eps", required=True)
    p.add_argument("--order", type=int, default=4,
                   help="recorded for provenance; measurement is numerical")
    p.add_argument("--digits", default="auto")
    p.add_argument("--trace", help="CSV path for orbit points")
    p.add_argument("--out")
    p.set_defaults(func=cmd_splitting)

    p = sub.add_parser("sweep", help="delta sweep and asymptotic fit")
    p.add_argument("--map", required=True)
    p.add_argument("--grid", required=True, help="geom:lo:hi:n or lin:lo:hi:n")
    p.add_argument("--order", type=int, default=4)
    p.add_argument("--digits", default="auto")
    p.add_argument("--workers", type=int, default=0,
                   help="0 = take SEPSPLIT_WORKERS, default 1")
    p.add_argument("--csv", help="companion CSV path")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="randomized property suites")
    p.add_argument("--suite", default="all")
    p.add_argument("--cases", type=int, default=1000)
    p.add_argument("--seed", type=int, default=20240901)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SepsplitError, ValueError, OSError) as exc:
        if isinstance(exc, PrecisionError):
            print(f"precision failure: {exc}", file=sys.stderr)
            return EXIT_PRECISION
        if isinstance(exc, ConvergenceError):
            print(f"convergence failure: {exc}", file=sys.stderr)
            return EXIT_CONVERGENCE
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
