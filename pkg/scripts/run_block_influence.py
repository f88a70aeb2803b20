"""Cross-token influence of a single-token perturbation in one encoder block.

    python scripts/run_block_influence.py --seeds 20
"""

import argparse

import numpy as np

from proattn import AttentionConfig, Penalty
from proattn.block import influence_study


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--tokens", type=int, default=8)
    ap.add_argument("--magnitude", type=float, default=10.0)
    args = ap.parse_args()

    kw = dict(seeds=range(args.seeds), n_tokens=args.tokens, magnitude=args.magnitude)
    base = influence_study(None, **kw)
    print(f"{'vanilla':>10}: median {np.median(base):.4f}")
    for p in (Penalty("l1"), Penalty("huber"), Penalty("mcp", gamma=4.0), Penalty("huber_mcp")):
        vals = influence_study(AttentionConfig(p), **kw)
        print(f"{p.kind:>10}: median {np.median(vals):.4f}, below vanilla in {np.mean(vals < base):.0%} of seeds")


if __name__ == "__main__":
    main()
