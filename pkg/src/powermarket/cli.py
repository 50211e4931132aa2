"""Command-line surface: validate, solve, sweep, verify, emit-lp.

Exit codes: 0 success (optimal and all checks pass), 1 input/parse error,
2 verification failure, 3 infeasible or unbounded model.  The default
output directory can be set with the POWERMARKET_OUT_DIR environment
variable.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .formulate import build_lp, write_mps
from .metrics import build_report, report_to_json, write_report_csv
from .model import Co2Cap, PolicyConfig, SupportDispatched, validate
from .scenario import ScenarioError, load_plan, load_scenario
from .solve import solve, solve_external, write_solution_file, SolveError
from .sweep import run_sweep, sweep_manifest, write_sweep_csv
from .verify import (
    check_cap_tax_equivalence,
    check_subsidy_tax_lift,
    report_to_json as verify_report_json,
    verify_solution,
)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_VERIFY = 2
EXIT_INFEASIBLE = 3


def _out_dir(args) -> str:
    out = args.out_dir or os.environ.get("POWERMARKET_OUT_DIR", ".")
    os.makedirs(out, exist_ok=True)
    return out


def _load(path):
    try:
        return load_scenario(path)
    except FileNotFoundError:
        print(f"error: scenario file '{path}' not found", file=sys.stderr)
        raise SystemExit(EXIT_INPUT)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_INPUT)


def cmd_validate(args) -> int:
    system, policy, _ = _load(args.scenario)
    violations = validate(system, policy)
    if violations:
        for v in violations:
            print(f"{v.entity}: {v.rule} ({v.message})")
        return EXIT_INPUT
    print(f"ok: {len(system.nodes)} node(s), {system.snapshots} snapshot(s), "
          f"{len(system.technologies)} technology placement(s)")
    return EXIT_OK


def cmd_solve(args) -> int:
    system, policy, options = _load(args.scenario)
    out = _out_dir(args)
    name = options["name"]
    kvl = args.kvl or options.get("kvl", False)
    suppress = args.suppress_negative_prices or options.get(
        "suppress_negative_prices", False)

    lp = build_lp(system, policy, enforce_kvl=kvl)
    if args.emit_lp:
        write_mps(lp, os.path.join(out, f"{name}.mps"))
    if args.external_solution:
        try:
            sol = solve_external(lp, args.external_solution)
        except (SolveError, FileNotFoundError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INPUT
    else:
        sol = solve(lp)
    if sol.status != "optimal":
        print(f"model is {sol.status}: {sol.message}", file=sys.stderr)
        return EXIT_INFEASIBLE

    write_solution_file(sol, os.path.join(out, f"{name}.sol"))
    report = build_report(system, lp, sol, policy, suppress_negative=suppress)
    with open(os.path.join(out, f"{name}.metrics.json"), "w", encoding="utf-8") as fh:
        fh.write(report_to_json(report))
    write_report_csv(report, os.path.join(out, f"{name}.metrics.csv"), scenario=name)

    checks = verify_solution(system, lp, sol, policy)
    with open(os.path.join(out, f"{name}.verification.json"), "w",
              encoding="utf-8") as fh:
        fh.write(verify_report_json(checks))
    failures = [c for c in checks if c.verdict == "fail"]
    for c in failures:
        print(f"check failed: {c.check} {c.entity} residual={c.residual:.3e}",
              file=sys.stderr)
    print(f"solved '{name}': objective {sol.objective!r}, "
          f"{len(checks)} checks, {len(failures)} failure(s)")
    return EXIT_VERIFY if failures else EXIT_OK


def cmd_emit_lp(args) -> int:
    system, policy, options = _load(args.scenario)
    out = _out_dir(args)
    lp = build_lp(system, policy, enforce_kvl=args.kvl or options.get("kvl", False))
    path = os.path.join(out, f"{options['name']}.mps")
    write_mps(lp, path)
    print(path)
    return EXIT_OK


def cmd_sweep(args) -> int:
    try:
        plan, jobs = load_plan(args.plan)
    except FileNotFoundError:
        print(f"error: plan file '{args.plan}' not found", file=sys.stderr)
        return EXIT_INPUT
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if args.jobs:
        jobs = args.jobs
    out = _out_dir(args)
    result = run_sweep(plan, parallelism=jobs)
    write_sweep_csv(plan, result, os.path.join(out, f"{plan.name}.csv"))
    with open(os.path.join(out, f"{plan.name}.manifest.json"), "w",
              encoding="utf-8") as fh:
        json.dump(sweep_manifest(plan, result), fh, indent=2, sort_keys=True)
    solved = sum(1 for p in result.points if p.status == "optimal")
    print(f"sweep '{plan.name}': {solved}/{len(result.points)} points optimal, "
          f"verified={result.all_verified}")
    return EXIT_OK if result.all_verified else EXIT_VERIFY


def cmd_verify(args) -> int:
    system, policy, options = _load(args.scenario)
    out = _out_dir(args)
    lp = build_lp(system, policy, enforce_kvl=options.get("kvl", False))
    sol = solve(lp)
    if sol.status != "optimal":
        print(f"model is {sol.status}: {sol.message}", file=sys.stderr)
        return EXIT_INFEASIBLE
    checks = verify_solution(system, lp, sol, policy)
    if isinstance(policy.co2, Co2Cap):
        checks.append(check_cap_tax_equivalence(system, policy))
    if isinstance(policy.support, SupportDispatched):
        checks.append(check_subsidy_tax_lift(system, policy))
    with open(os.path.join(out, f"{options['name']}.verification.json"), "w",
              encoding="utf-8") as fh:
        fh.write(verify_report_json(checks))
    counts = {"pass": 0, "fail": 0, "inconclusive": 0}
    for c in checks:
        counts[c.verdict] += 1
        if c.verdict != "pass":
            print(f"{c.verdict}: {c.check} {c.entity} residual={c.residual!r}")
    print(f"verification: {counts['pass']} pass, {counts['fail']} fail, "
          f"{counts['inconclusive']} inconclusive")
    return EXIT_OK if counts["fail"] == 0 else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="powermarket",
        description="Long-term electricity market equilibria with policy "
                    "instruments: solve, sweep, verify.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a scenario file")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("solve", help="solve a scenario and write metrics")
    p.add_argument("scenario")
    p.add_argument("--out-dir", default=None)
    p.add_argument("--emit-lp", action="store_true",
                   help="also write the LP in MPS interchange format")
    p.add_argument("--external-solution", default=None, metavar="PATH",
                   help="read a solution file instead of solving in-process")
    p.add_argument("--kvl", action="store_true",
                   help="enforce voltage-law cycle constraints")
    p.add_argument("--suppress-negative-prices", action="store_true",
                   help="also report metrics with prices floored at zero")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("emit-lp", help="write the LP without solving")
    p.add_argument("scenario")
    p.add_argument("--out-dir", default=None)
    p.add_argument("--kvl", action="store_true")
    p.set_defaults(func=cmd_emit_lp)

    p = sub.add_parser("sweep", help="run a scenario grid from a plan file")
    p.add_argument("plan")
    p.add_argument("--out-dir", default=None)
    p.add_argument("--jobs", type=int, default=0, metavar="N",
                   help="worker processes (default: plan setting or 1)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="solve and run all theorem checks")
    p.add_argument("scenario")
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
