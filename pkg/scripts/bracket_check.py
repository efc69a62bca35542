"""Compare simulated violation frequencies with the analytic bounds.

    python3 scripts/bracket_check.py --trials 10000000 --k 2 4 6
    python3 scripts/bracket_check.py --b0 100 --k 6
"""

import argparse
import time

from seclat import DelaySpec, ModelParams, compute_bounds
from seclat.sim import SimConfig, simulate


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=1_000_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--alpha", type=float, default=0.9)
    ap.add_argument("--b0", type=int, default=0)
    ap.add_argument("--lambda-h", type=float, default=0.2)
    ap.add_argument("--race-cutoff", type=int, default=64)
    ap.add_argument("--k", type=int, nargs="+", default=[2, 4, 6])
    args = ap.parse_args(argv)

    base = ModelParams(mu_m=1 / 600, alpha=args.alpha, k=1, b0=args.b0,
                       lambda_h=args.lambda_h if args.b0 else None, delay=DelaySpec.erlang(2, 1.0))
    print(f"{'k':>3} {'lower':>11} {'frequency':>11} {'upper':>11} {'3 sigma':>9} {'inside':>6} {'secs':>6}")
    for k in args.k:
        p = base.replace(k=k)
        rep = compute_bounds(p)
        t = time.perf_counter()
        out = simulate(SimConfig(p, trials=args.trials, seed=args.seed, race_cutoff=args.race_cutoff))
        dt = time.perf_counter() - t
        s3 = 3 * out.sigma
        inside = rep.lower - s3 <= out.frequency <= rep.upper + s3 + out.cutoff_truncation_bound
        print(f"{k:>3} {rep.lower:11.5g} {out.frequency:11.5g} {rep.upper:11.5g} {s3:9.2g} {str(inside):>6} {dt:6.1f}")


if __name__ == "__main__":
    main()
