"""Robust mean estimation on a two-Gaussian mixture, swept over outlier ratios.

    python scripts/run_outliers.py --out results/outliers
"""

import argparse
from pathlib import Path

from proattn import Penalty
from proattn.simlab import outlier_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ratios", default="0,0.15,0.3,0.45")
    ap.add_argument("--seeds", type=int, default=50)
    ap.add_argument("--steps", type=int, default=10)
    ap.add_argument("--out", default="results/outliers")
    args = ap.parse_args()

    penalties = [Penalty("l2"), Penalty("l1"), Penalty("huber"), Penalty("mcp", gamma=4.0), Penalty("huber_mcp")]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for ratio in (float(r) for r in args.ratios.split(",")):
        rep = outlier_sweep(ratio, penalties, range(args.seeds), K=args.steps)
        rep.save(out, f"ratio_{ratio:g}")
        summary = "  ".join(f"{k}={v:.4f}" for k, v in rep.errors.items())
        print(f"ratio {ratio:g}: {summary}")


if __name__ == "__main__":
    main()
