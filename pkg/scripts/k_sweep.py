"""Bound curves over k = 1..25 for alpha = 0.9, Erlang-2 delay, with and without b0 = 100.

Writes one CSV with columns k, b0, upper, upper_error, lower, lower_error.

    python3 scripts/k_sweep.py --out k_sweep.csv
"""

import argparse
import csv
import sys
import time

from seclat import DelaySpec, ModelParams, compute_bounds


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="-")
    ap.add_argument("--kmax", type=int, default=25)
    args = ap.parse_args(argv)

    base = ModelParams(mu_m=1 / 600, alpha=0.9, k=1, lambda_h=0.2, delay=DelaySpec.erlang(2, 1.0))
    fh = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["k", "b0", "upper", "upper_error", "lower", "lower_error"])
    t0 = time.perf_counter()
    for b0 in (0, 100):
        for k in range(1, args.kmax + 1):
            rep = compute_bounds(base.replace(k=k, b0=b0))
            w.writerow([k, b0, repr(rep.upper), repr(rep.upper_error), repr(rep.lower), repr(rep.lower_error)])
    if fh is not sys.stdout:
        fh.close()
    print(f"done in {time.perf_counter() - t0:.1f}s", file=sys.stderr)


if __name__ == "__main__":
    main()
