"""Newton-IRLS iterates for the three-token toy example, plus the l1 median.

    python scripts/run_trajectory.py --steps 3
"""

import argparse
from pathlib import Path

import numpy as np

from proattn import Penalty, WeightedPoints, geometric_median_oracle
from proattn.simlab import TRAJECTORY_V, trajectory_report


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=3)
    ap.add_argument("--penalty", default="l1")
    ap.add_argument("--out", default="results/trajectory")
    args = ap.parse_args()

    rep = trajectory_report(Penalty(args.penalty), K=args.steps)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rep.save(out)
    median = geometric_median_oracle(WeightedPoints.uniform(np.array(TRAJECTORY_V, dtype=float)))
    print(f"geometric median of V: {median}")
    for i, t in enumerate(rep.traces[args.penalty]):
        print(f"row {i}: " + " -> ".join(f"({x:.3f}, {y:.3f})" for x, y in t.iterates))
    first = rep.traces[args.penalty][0].iterates
    ratio = np.linalg.norm(first[-1] - median) / np.linalg.norm(first[0] - median)
    print(f"row 0 distance to median after {args.steps} steps: {ratio:.2%} of initial")


if __name__ == "__main__":
    main()
