"""Analytic operation counts next to counted multiply-accumulates.

    python scripts/run_cost.py --N 64 --D 8 --out results/cost.csv
"""

import argparse

from proattn.costmodel import COST_HEADER, MECHANISMS, cost_rows, measured_ratio
from proattn.io import csv_text, write_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=int, default=64)
    ap.add_argument("--D", type=int, default=8)
    ap.add_argument("--max-steps", type=int, default=8)
    ap.add_argument("--out")
    args = ap.parse_args()

    rows = []
    for K in range(args.max_steps + 1):
        for mech in MECHANISMS:
            rows.extend(cost_rows(mech, args.N, args.D, K))
    if args.out:
        write_csv(args.out, COST_HEADER, rows)
    else:
        print(csv_text(COST_HEADER, rows), end="")
    for K in range(args.max_steps + 1):
        print(f"K={K}: counted pro/vanilla = {measured_ratio(args.N, args.D, K):.3f}, analytic = {(1 + 2 * K) / 2:.3f}")


if __name__ == "__main__":
    main()
