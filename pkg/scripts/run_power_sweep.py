#!/usr/bin/env python3
"""Mean sum rate vs transmit power for several methods.

Generates one scenario set per power point (same master seed, so the user
draws are identical across points) and aggregates per-method mean/std into
a single plot-data CSV.
"""

import argparse

from passopt.batch import aggregate_report, run_batch, write_report_csv
from passopt.scenario_io import gen_scenarios


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--count", type=int, default=64)
    ap.add_argument("--users", type=int, default=2)
    ap.add_argument("--pas", type=int, default=8)
    ap.add_argument("--powers", type=float, nargs="+",
                    default=[10, 12, 14, 16, 18, 20, 22, 24])
    ap.add_argument("--methods", nargs="+",
                    default=["mmpdd", "uniform", "fd_mimo", "kdl_search"])
    ap.add_argument("--master-seed", type=int, default=0)
    ap.add_argument("-o", "--output", default="power_sweep.csv")
    args = ap.parse_args()

    series = []
    for p_dbm in args.powers:
        payload = gen_scenarios(args.count,
                                {"n_users": args.users,
                                 "pas_per_waveguide": args.pas,
                                 "max_power_dbm": p_dbm},
                                master_seed=args.master_seed)
        rows = []
        for method in args.methods:
            recs, _ = run_batch(payload, method)
            rows.extend(recs)
            ok = [r.sum_rate for r in recs if not r.error]
            mean = sum(ok) / max(len(ok), 1)
            print(f"P={p_dbm:5.1f} dBm  {method:10s} mean={mean:.4f}")
        series.append((p_dbm, rows))
    write_report_csv(aggregate_report(series), args.output)
    print(f"plot data written to {args.output}")


if __name__ == "__main__":
    main()
