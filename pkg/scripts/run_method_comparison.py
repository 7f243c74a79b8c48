#!/usr/bin/env python3
"""Side-by-side method comparison on one scenario set."""

import argparse
import time

import numpy as np

from passopt.batch import run_batch
from passopt.scenario_io import gen_scenarios


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--count", type=int, default=16)
    ap.add_argument("--users", type=int, default=2)
    ap.add_argument("--pas", type=int, default=8)
    ap.add_argument("--power-dbm", type=float, default=10.0)
    ap.add_argument("--budget", type=int, default=2000)
    ap.add_argument("--master-seed", type=int, default=0)
    args = ap.parse_args()

    payload = gen_scenarios(args.count, {"n_users": args.users,
                                         "pas_per_waveguide": args.pas,
                                         "max_power_dbm": args.power_dbm},
                            master_seed=args.master_seed)
    print(f"{args.count} scenarios, K={args.users}, L={args.pas}, "
          f"P={args.power_dbm} dBm")
    print(f"{'method':12s} {'mean':>8s} {'std':>8s} {'time/scen':>10s}")
    for method in ("mmpdd", "kdl_search", "uniform", "fd_mimo"):
        t0 = time.perf_counter()
        recs, _ = run_batch(payload, method, {"budget": args.budget})
        dt = (time.perf_counter() - t0) / args.count
        rates = np.array([r.sum_rate for r in recs if not r.error])
        print(f"{method:12s} {rates.mean():8.4f} {rates.std():8.4f} {dt:9.3f}s")


if __name__ == "__main__":
    main()
