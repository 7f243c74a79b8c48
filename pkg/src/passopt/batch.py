"""Seeded Monte-Carlo batch execution and report aggregation.

Parallelism is across scenarios (PASSOPT_WORKERS processes, default 1);
every worker pins its BLAS pools to one thread so results are bit-identical
regardless of the worker count.  Output rows are assembled in scenario
order.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np
from threadpoolctl import threadpool_limits

from . import baselines, kktdual, mmpdd
from .channel import effective_channel, sinr_and_rate
from .scenario_io import RunRecord, record_to_scenario

METHOD_CLI_NAMES = {"mmpdd": "mmpdd", "kdl-search": "kdl_search",
                    "fd-mimo": "fd_mimo", "uniform": "uniform",
                    "oracle": "oracle"}


def worker_count() -> int:
    return max(1, int(os.environ.get("PASSOPT_WORKERS", "1")))


def _solve_one(task):
    rec, method, options = task
    scenario = record_to_scenario(rec)
    start = time.perf_counter()
    try:
        with threadpool_limits(limits=1):
            if method == "mmpdd":
                cfg = mmpdd.SolverConfig(**options.get("solver", {}))
                res = mmpdd.solve(scenario, cfg, seed=rec["seed"])
                row = RunRecord(rec["id"], rec["seed"], "mmpdd", res.sum_rate,
                                list(res.per_user_rates), 0.0, res.converged,
                                res.residual_inf, res.iterations)
                solution = (res.placement, res.beam)
            elif method == "kdl_search":
                res = kktdual.dual_search(scenario,
                                          budget=options.get("budget", 2000),
                                          seed=rec["seed"])
                report = sinr_and_rate(effective_channel(scenario, res.placement),
                                       res.beam, scenario)
                row = RunRecord(rec["id"], rec["seed"], "kdl_search",
                                res.sum_rate, list(report.rates), 0.0, True,
                                0.0, res.evaluations)
                solution = (res.placement, res.beam)
            elif method == "fd_mimo":
                res = baselines.fd_wmmse(scenario)
                row = RunRecord(rec["id"], rec["seed"], "fd_mimo", res.sum_rate,
                                list(res.per_user_rates), 0.0, True, 0.0,
                                res.iterations)
                solution = None
            elif method == "uniform":
                res = baselines.uniform_pass(scenario)
                row = RunRecord(rec["id"], rec["seed"], "uniform", res.sum_rate,
                                list(res.per_user_rates), 0.0, True, 0.0,
                                res.iterations)
                solution = (res.placement, res.beam)
            elif method == "oracle":
                res = baselines.grid_oracle(
                    scenario, resolution=options.get("resolution", 1e-3))
                row = RunRecord(rec["id"], rec["seed"], "oracle", res.sum_rate,
                                list(res.per_user_rates), 0.0, True, 0.0,
                                res.iterations)
                solution = (res.placement, res.beam)
            else:
                raise ValueError(f"unknown method {method!r}")
    except Exception as exc:  # failures are per-row data, the batch continues
        row = RunRecord(rec["id"], rec["seed"], method, float("nan"), [], 0.0,
                        False, float("nan"), 0, error=f"{type(exc).__name__}: {exc}")
        solution = None
    row.wall_time_s = time.perf_counter() - start
    return row, solution


def run_batch(payload: dict, method: str, options: dict | None = None,
              keep_solutions: bool = False):
    """Run one method over every scenario of a set; returns (records,
    solutions) with solutions aligned to records (None entries unless
    keep_solutions)."""
    options = options or {}
    tasks = [(rec, method, options) for rec in payload["scenarios"]]
    workers = worker_count()
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_solve_one, tasks))
    else:
        results = [_solve_one(t) for t in tasks]
    records = [r for r, _ in results]
    solutions = [s if keep_solutions else None for _, s in results]
    return records, solutions


def aggregate_report(series):
    """[(x, records), ...] -> rows (x, method, mean, std, n) sorted by x then
    method; NaN rows (failed solves) are excluded from the statistics."""
    rows = []
    for x, records in series:
        by_method = {}
        for rec in records:
            if rec.error or not np.isfinite(rec.sum_rate):
                continue
            by_method.setdefault(rec.method, []).append(rec.sum_rate)
        for method in sorted(by_method):
            vals = np.array(by_method[method])
            rows.append((x, method, float(vals.mean()),
                         float(vals.std(ddof=0)), int(vals.size)))
    rows.sort(key=lambda r: (r[0], r[1]))
    return rows


def write_report_csv(rows, path) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "method", "mean_sum_rate", "std_sum_rate", "n"])
        for x, method, mean, std, n in rows:
            writer.writerow([repr(float(x)), method, repr(mean), repr(std), n])
