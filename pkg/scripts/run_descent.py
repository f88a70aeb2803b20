"""Mean loss per Newton-IRLS step on random attention heads, with a GD baseline.

    python scripts/run_descent.py --out results/descent
"""

import argparse
from pathlib import Path

from proattn import Penalty
from proattn.simlab import descent_curves


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=8)
    ap.add_argument("--eta", type=float, default=0.05)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="results/descent")
    args = ap.parse_args()

    penalties = [Penalty("l1"), Penalty("mcp", gamma=4.0), Penalty("huber", delta=0.8)]
    rep = descent_curves(8, 4, 64, 8, penalties, K=args.steps, seed=args.seed, include_gd=True, eta=args.eta)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rep.save(out)
    for label, curve in rep.curves.items():
        drop = curve[0] - curve[-1]
        share = (curve[0] - curve[min(3, len(curve) - 1)]) / drop if drop > 0 else 1.0
        print(f"{label:>10}: {curve[0]:.4f} -> {curve[-1]:.4f}  (drop share by step 3: {share:.1%})")


if __name__ == "__main__":
    main()
