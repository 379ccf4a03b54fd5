"""Command-line interface.

Exit codes: 0 success, 2 parse/validation failure, 3 infeasible mechanism,
4 property violation (``verify`` and ``sweep``).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import model
from .engine import run_mechanism
from .errors import Infeasible, ParseError, ValidationError
from .mechanisms import MechanismKind
from .oracle import (DEFAULT_BUDGET, DEFAULT_FACTORS, DEFAULT_RESOLUTION, MisreportGrid,
                     brute_force_outcome, check_properties)
from .scenario_io import (POLICIES, atomic_write, dumps_scenario, generate_scenario,
                          load_scenario, save_scenario, write_report)
from .sweep import run_sweep

log = logging.getLogger("powermech")

EXIT_OK, EXIT_INVALID, EXIT_INFEASIBLE, EXIT_VIOLATION = 0, 2, 3, 4


def _factors(text: str) -> MisreportGrid:
    try:
        return MisreportGrid(tuple(float(f) for f in text.split(",")))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _range(text: str) -> tuple[float, float]:
    lo, _, hi = text.partition(",")
    return float(lo), float(hi)


def _dump(doc, out: str | None) -> None:
    text = json.dumps(doc, indent=2) + "\n"
    if out:
        atomic_write(Path(out), text)
    else:
        sys.stdout.write(text)


def cmd_allocate(args) -> int:
    s = load_scenario(args.scenario)
    result = run_mechanism(s, eps=args.tolerance)
    props = check_properties(s, truthfulness=False, oracle=False, eps=args.tolerance,
                             result=result)
    write_report(result, props, args.out)
    log.info("welfare %.6g, report written to %s", result.welfare, args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    s = load_scenario(args.scenario)
    result = run_mechanism(s, eps=args.tolerance)
    props = check_properties(s, grid=args.grid, resolution=args.resolution,
                             budget=args.budget, eps=args.tolerance, result=result)
    if args.out:
        write_report(result, props, args.out)
    for name, v in props.verdicts.items():
        print(f"{name:24s} {v.status:9s} margin={v.margin:.6g}")
    return EXIT_OK if props.ok else EXIT_VIOLATION


def cmd_sweep(args) -> int:
    summary = run_sweep(args.seed, args.count, args.mechanism, max_users=args.max_users,
                        n_slots=args.slots, policy=args.policy, grid=args.grid,
                        truthfulness=not args.no_truth, oracle=not args.no_oracle,
                        resolution=args.resolution, jobs=args.jobs)
    _dump(summary.to_dict(), args.out)
    return EXIT_OK if summary.ok else EXIT_VIOLATION


def cmd_oracle(args) -> int:
    s = load_scenario(args.scenario)
    result = run_mechanism(s, eps=args.tolerance)
    alloc, best = brute_force_outcome(s, args.resolution, args.budget)
    doc = {
        "engine_welfare": result.welfare,
        "oracle_welfare": best,
        "difference": result.welfare - best,
        "oracle_grants": alloc.grants.tolist(),
    }
    _dump(doc, args.out)
    return EXIT_OK


def cmd_generate(args) -> int:
    s = generate_scenario(args.seed, args.users, args.slots, args.demand_range,
                          args.policy, args.mechanism, fixed_level=args.fixed_level,
                          slot_duration=args.slot_duration, c=args.c, k=args.k,
                          step=args.step)
    if args.out:
        save_scenario(s, args.out)
    else:
        sys.stdout.write(dumps_scenario(s))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="powermech",
                                description="VCG-style power allocation mechanisms")
    p.add_argument("--tolerance", type=float, default=model.EPS,
                   help="feasibility/sign tolerance (default %(default)g)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    mechs = [m.value for m in MechanismKind]

    a = sub.add_parser("allocate", help="run a scenario's mechanism and write a report")
    a.add_argument("--scenario", required=True)
    a.add_argument("--out", required=True, help="report JSON path (trends CSV goes alongside)")
    a.set_defaults(func=cmd_allocate)

    v = sub.add_parser("verify", help="check game-theoretic properties of one scenario")
    v.add_argument("--scenario", required=True)
    v.add_argument("--grid", type=_factors, default=MisreportGrid(DEFAULT_FACTORS),
                   help="comma-separated misreport factors (must include 1.0)")
    v.add_argument("--resolution", type=float, default=DEFAULT_RESOLUTION)
    v.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    v.add_argument("--out")
    v.set_defaults(func=cmd_verify)

    w = sub.add_parser("sweep", help="property campaign over generated scenarios")
    w.add_argument("--seed", type=int, required=True)
    w.add_argument("--count", type=int, required=True)
    w.add_argument("--mechanism", choices=mechs, required=True)
    w.add_argument("--max-users", type=int, default=6)
    w.add_argument("--slots", type=int)
    w.add_argument("--policy", choices=POLICIES)
    w.add_argument("--grid", type=_factors, default=MisreportGrid(DEFAULT_FACTORS))
    w.add_argument("--resolution", type=float, default=DEFAULT_RESOLUTION)
    w.add_argument("--no-truth", action="store_true", help="skip misreport sweeps")
    w.add_argument("--no-oracle", action="store_true", help="skip brute-force welfare check")
    w.add_argument("--jobs", type=int, default=1)
    w.add_argument("--out")
    w.set_defaults(func=cmd_sweep)

    o = sub.add_parser("oracle", help="compare engine welfare with brute force")
    o.add_argument("--scenario", required=True)
    o.add_argument("--resolution", type=float, default=DEFAULT_RESOLUTION)
    o.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    o.add_argument("--out")
    o.set_defaults(func=cmd_oracle)

    g = sub.add_parser("generate", help="write a seeded random scenario")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--users", type=int, default=4)
    g.add_argument("--slots", type=int, default=1)
    g.add_argument("--demand-range", type=_range, default=(0.5, 5.0))
    g.add_argument("--policy", choices=POLICIES, default="tight")
    g.add_argument("--mechanism", choices=mechs, default="case3")
    g.add_argument("--fixed-level", type=float)
    g.add_argument("--slot-duration", type=float, default=1.0)
    g.add_argument("--c", type=float, default=1.0)
    g.add_argument("--k", type=float, default=1.0)
    g.add_argument("--step", type=float, help="snap demands and production to this lattice")
    g.add_argument("--out")
    g.set_defaults(func=cmd_generate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Infeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
