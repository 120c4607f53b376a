"""Command line entry point: ``cloudfogvec run|sweep|export-lp|verify``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import harness
from .config import load_config
from .milp import build_model, export_model
from .solver import STATUS_OPTIMAL, Solution, solve, verify
from .workload import CASES, PATTERNS, STRATEGIES, Scenario, make_scenario
from .topology import MULTI_ZONE, ONE_ZONE

EXIT_OK = 0
EXIT_FAILED = 1  # infeasible under --strict, failed verification or invariant
EXIT_IO = 3


def _scenario(args) -> Scenario:
    sc = load_config(args.config) if args.config else Scenario()
    changes = {}
    for flag, name in (
        ("arch", "architecture"), ("pattern", "pattern"), ("case", "case"),
        ("strategy", "strategy"), ("rr_hops", "rr_hops"), ("cc_servers", "cc_servers"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            changes[name] = value
    if getattr(args, "demand", None):
        changes["demands"] = tuple(args.demand)
    drr = getattr(args, "drr", None)
    if drr:
        changes["drr"] = drr[0]
    return sc.with_(**changes)


def _add_scenario_flags(p, multi=False):
    p.add_argument("--config", help="TOML scenario document")
    p.add_argument("--arch", choices=(ONE_ZONE, MULTI_ZONE))
    p.add_argument("--pattern", choices=PATTERNS)
    p.add_argument("--case", choices=CASES)
    p.add_argument("--strategy", choices=STRATEGIES)
    nargs = "+" if multi else 1
    p.add_argument("--demand", type=float, nargs=nargs, help="demand per task, MIPS")
    p.add_argument("--drr", type=float, nargs=nargs, help="data rate ratio, Mb/s per MIPS")
    p.add_argument("--rr-hops", type=int)
    p.add_argument("--cc-servers", type=int)
    p.add_argument("--seed", type=int, help="accepted for compatibility; runs are deterministic")
    p.add_argument("--out", help="output file (default: stdout)")


def _emit(text: str, out: str | None):
    if out is None:
        sys.stdout.write(text)
        return
    with open(out, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _one_demand(sc: Scenario) -> float:
    if len(sc.demands) != 1:
        raise SystemExit("run needs exactly one --demand (or a config with one demand)")
    return sc.demands[0]


def solution_document(sc: Scenario, omega: float, model, sol: Solution) -> dict:
    doc = {
        "scenario": sc.to_dict(),
        "demand": omega,
        "status": sol.status,
        "objective": sol.objective,
        "breakdown": sol.breakdown.as_dict() if sol.feasible else None,
        "allocation": [
            {"task": t, "pn": pn, "mips": x} for (t, pn), x in sorted(sol.allocation.items())
        ],
        "values": {},
    }
    if sol.values is not None:
        doc["values"] = {n: float(v) for n, v in zip(model.names, sol.values) if v != 0}
    return doc


def cmd_run(args) -> int:
    sc = _scenario(args)
    omega = _one_demand(sc)
    topo = sc.topology()
    mask, tasks = make_scenario(sc, omega, topology=topo)
    model = build_model(topo, tasks, mask)
    sol = solve(model, time_limit=args.time_limit)
    lines = [f"status {sol.status}"]
    rep = verify(sol, model) if sol.feasible else None
    if rep:
        lines.append(f"total_w {sol.objective:.6f}")
        lines += [f"{k} {v:.6f}" for k, v in sol.breakdown.as_dict().items()]
        for (t, pn), x in sorted(sol.allocation.items()):
            lines.append(f"task {t} -> {pn} {x:g} MIPS")
        lines.append("verified" if rep.ok() else "verification FAILED")
    print("\n".join(lines), file=sys.stderr if args.out else sys.stdout)
    if args.out:
        _emit(json.dumps(solution_document(sc, omega, model, sol), indent=2) + "\n", args.out)
    if rep and not rep.ok():
        return EXIT_FAILED
    if args.strict and sol.status != STATUS_OPTIMAL:
        return EXIT_FAILED
    return EXIT_OK


def cmd_sweep(args) -> int:
    sc = _scenario(args)
    if args.case and args.strategy:
        combos = [(sc.case, sc.strategy)]
    elif args.case:
        combos = [(c, s) for c, s in harness.CASE_GRID if c == sc.case]
    elif args.strategy:
        combos = [(c, s) for c, s in harness.CASE_GRID if s == sc.strategy]
    else:
        combos = list(harness.CASE_GRID)
    records = harness.run_grid(
        sc, combos, drrs=args.drr, workers=args.workers, time_limit=args.time_limit
    )
    text = harness.to_csv(records, include_timing=args.timing)
    _emit(text, args.out)
    sys.stderr.write(harness.summary(records))
    problems = harness.check_invariants(records)
    for p in problems:
        sys.stderr.write(f"invariant violated: {p}\n")
    if args.strict and (problems or not all(r.ok for r in records)):
        return EXIT_FAILED
    return EXIT_OK


def cmd_export(args) -> int:
    sc = _scenario(args)
    omega = _one_demand(sc)
    topo = sc.topology()
    mask, tasks = make_scenario(sc, omega, topology=topo)
    model = build_model(topo, tasks, mask)
    _emit(export_model(model, args.format), args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    with open(args.solution, encoding="utf-8") as fh:
        doc = json.load(fh)
    sc = Scenario.from_dict(doc["scenario"])
    topo = sc.topology()
    mask, tasks = make_scenario(sc, doc["demand"], topology=topo)
    model = build_model(topo, tasks, mask)
    index = {n: i for i, n in enumerate(model.names)}
    values = [0.0] * model.n_vars
    for name, v in doc["values"].items():
        if name not in index:
            print(f"unknown variable {name}", file=sys.stderr)
            return EXIT_FAILED
        values[index[name]] = v
    sol = Solution.from_values(model, values, doc.get("status", STATUS_OPTIMAL), strict=False)
    rep = verify(sol, model)
    print("\n".join(rep.lines()))
    print("ok" if rep.ok() else "FAILED")
    return EXIT_OK if rep.ok() else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cloudfogvec", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="solve one demand point")
    _add_scenario_flags(p)
    p.add_argument("--strict", action="store_true", help="exit nonzero unless optimal")
    p.add_argument("--time-limit", type=float, default=300.0)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="solve a demand sweep over cases and strategies")
    _add_scenario_flags(p, multi=True)
    p.add_argument("--strict", action="store_true",
                   help="exit nonzero on any non-optimal point or broken invariant")
    p.add_argument("--time-limit", type=float, default=300.0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--timing", action="store_true", help="fill in solve_time_s")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("export-lp", help="write the model in LP or MPS format")
    _add_scenario_flags(p)
    p.add_argument("--format", choices=("lp", "mps"), default="lp")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("verify", help="re-check a solution file written by run --out")
    p.add_argument("solution")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
