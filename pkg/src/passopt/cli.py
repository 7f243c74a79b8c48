"""Command-line interface.

Subcommands: gen, solve, eval, dataset, report.  Exit codes: 0 success,
2 invalid input, 3 solver non-convergence under --strict.  PASSOPT_WORKERS
sets the number of batch worker processes.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import batch, scenario_io
from .channel import effective_channel, sinr_and_rate
from .scenario import check_feasibility


def _add_gen(sub):
    p = sub.add_parser("gen", help="generate a scenario set")
    p.add_argument("--count", type=int, default=64)
    p.add_argument("--master-seed", type=int, default=0)
    p.add_argument("--users", type=int, default=2)
    p.add_argument("--pas", type=int, default=8)
    p.add_argument("--span-x", type=float, default=20.0)
    p.add_argument("--span-y", type=float, default=10.0)
    p.add_argument("--pass-height", type=float, default=2.5)
    p.add_argument("--carrier-freq", type=float, default=30e9)
    p.add_argument("--refractive-index", type=float, default=1.4)
    p.add_argument("--power-dbm", type=float, default=10.0)
    p.add_argument("--noise-dbm", type=float, default=-90.0)
    p.add_argument("--min-spacing", type=float, default=None)
    p.add_argument("-o", "--output", required=True)


def _add_solve(sub):
    p = sub.add_parser("solve", help="run one method over a scenario set")
    p.add_argument("scenarios")
    p.add_argument("--method", required=True, choices=sorted(batch.METHOD_CLI_NAMES))
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--save-solutions", default=None,
                   help="also write per-scenario solution JSON files here")
    p.add_argument("--budget", type=int, default=2000,
                   help="evaluation budget for kdl-search")
    p.add_argument("--resolution", type=float, default=1e-3,
                   help="grid resolution for the oracle")
    p.add_argument("--max-outer", type=int, default=None)
    p.add_argument("--max-inner", type=int, default=None)
    p.add_argument("--strict", action="store_true",
                   help="exit 3 if any scenario fails to converge")


def _add_eval(sub):
    p = sub.add_parser("eval", help="score externally supplied solutions")
    p.add_argument("scenarios")
    p.add_argument("solutions")
    p.add_argument("-o", "--output", required=True)


def _add_dataset(sub):
    p = sub.add_parser("dataset", help="export trainer features")
    p.add_argument("scenarios")
    p.add_argument("-o", "--output", required=True)


def _add_report(sub):
    p = sub.add_parser("report", help="aggregate result CSVs into plot data")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("series", nargs="+",
                   help="entries of the form X:results.csv (or a bare path, "
                        "which gets x = its position)")


def _cmd_gen(args) -> int:
    params = {
        "n_users": args.users,
        "pas_per_waveguide": args.pas,
        "span_x": args.span_x,
        "span_y": args.span_y,
        "pass_height": args.pass_height,
        "carrier_freq": args.carrier_freq,
        "refractive_index": args.refractive_index,
        "max_power_dbm": args.power_dbm,
        "noise_power_dbm": args.noise_dbm,
        "min_spacing": args.min_spacing,
    }
    payload = scenario_io.gen_scenarios(args.count, params, args.master_seed)
    scenario_io.write_json(payload, args.output)
    print(f"wrote {args.count} scenarios to {args.output}")
    return 0


def _cmd_solve(args) -> int:
    payload = scenario_io.read_json(args.scenarios)
    method = batch.METHOD_CLI_NAMES[args.method]
    options = {"budget": args.budget, "resolution": args.resolution}
    solver = {}
    if args.max_outer is not None:
        solver["max_outer"] = args.max_outer
    if args.max_inner is not None:
        solver["max_inner"] = args.max_inner
    if solver:
        options["solver"] = solver
    records, solutions = batch.run_batch(payload, method, options,
                                         keep_solutions=bool(args.save_solutions))
    scenario_io.write_records_csv(records, args.output)
    if args.save_solutions:
        import os

        os.makedirs(args.save_solutions, exist_ok=True)
        sols = []
        for rec, sol in zip(records, solutions):
            if sol is None:
                continue
            placement, beam = sol
            sols.append(scenario_io.solution_from_placement_beam(
                rec.scenario_id, placement, beam))
        scenario_io.write_solutions(
            sols, os.path.join(args.save_solutions, f"{method}_solutions.json"))
    finite = [r for r in records if not r.error]
    if finite:
        mean = np.mean([r.sum_rate for r in finite])
        print(f"{method}: {len(finite)}/{len(records)} scenarios, "
              f"mean sum rate {mean:.4f} bits/s/Hz")
    if args.strict and any(not r.converged for r in records):
        print("solver failed to converge on at least one scenario",
              file=sys.stderr)
        return 3
    return 0


def _cmd_eval(args) -> int:
    payload = scenario_io.read_json(args.scenarios)
    by_id = {rec["id"]: rec for rec in payload["scenarios"]}
    solutions = scenario_io.read_solutions(args.solutions)
    records = []
    for sol in solutions:
        sid = sol.get("scenario_id")
        if sid not in by_id:
            raise ValueError(f"solution references unknown scenario {sid!r}")
        rec = by_id[sid]
        scenario = scenario_io.record_to_scenario(rec)
        placement, beam = scenario_io.solution_to_placement_beam(sol, scenario)
        violations = check_feasibility(scenario, placement, beam)
        if violations:
            worst = max(violations, key=lambda v: v.margin)
            records.append(scenario_io.RunRecord(
                sid, rec["seed"], "transformer", float("nan"), [], 0.0, False,
                float("nan"), 0,
                error=f"infeasible: {worst.constraint} margin {worst.margin:g}"))
            continue
        report = sinr_and_rate(effective_channel(scenario, placement), beam,
                               scenario)
        records.append(scenario_io.RunRecord(
            sid, rec["seed"], "transformer", report.sum_rate,
            list(report.rates), 0.0, True, 0.0, 0))
    scenario_io.write_records_csv(records, args.output)
    ok = [r for r in records if not r.error]
    if ok:
        print(f"scored {len(ok)}/{len(records)} solutions, mean sum rate "
              f"{np.mean([r.sum_rate for r in ok]):.4f} bits/s/Hz")
    return 0


def _cmd_dataset(args) -> int:
    payload = scenario_io.read_json(args.scenarios)
    scenario_io.write_dataset_csv(payload, args.output)
    print(f"wrote {len(payload['scenarios'])} records to {args.output}")
    return 0


def _cmd_report(args) -> int:
    series = []
    for i, entry in enumerate(args.series):
        if ":" in entry and not entry.split(":", 1)[0].startswith(("/", ".")):
            x_str, path = entry.split(":", 1)
            x = float(x_str)
        else:
            x, path = float(i), entry
        series.append((x, scenario_io.read_records_csv(path)))
    rows = batch.aggregate_report(series)
    batch.write_report_csv(rows, args.output)
    print(f"wrote {len(rows)} series points to {args.output}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="passopt",
        description="joint transmit and pinching beamforming toolbox")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_gen(sub)
    _add_solve(sub)
    _add_eval(sub)
    _add_dataset(sub)
    _add_report(sub)
    args = parser.parse_args(argv)
    handlers = {"gen": _cmd_gen, "solve": _cmd_solve, "eval": _cmd_eval,
                "dataset": _cmd_dataset, "report": _cmd_report}
    try:
        return handlers[args.command](args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
