"""Command-line entry point: ``proattn {attend,estimate,simulate,block,cost}``.

Exit status is 0 on success, 2 on bad input (unreadable or malformed files,
shape mismatches, invalid flags) and 3 if an internal invariant is violated.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from . import costmodel, io, simlab
from .attention import AttentionConfig, aggregate, pro_attention, pro_attention_from_matrix, vanilla_attention
from .block import encoder_block, load_params
from .estimator import WeightedPoints, newton_irls
from .penalty import DEFAULT_DELTA, DEFAULT_GAMMA, KINDS, Penalty

EXIT_INPUT = 2
EXIT_INVARIANT = 3


class InvariantViolation(RuntimeError):
    pass


def _threads() -> int:
    raw = os.environ.get("PROTATTN_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"PROTATTN_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise ValueError("PROTATTN_THREADS must be >= 0")
    return n or (os.cpu_count() or 1)


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--eps", type=float, default=None, help="residual floor for IRLS weights")
    g.add_argument("--steps", type=int, default=None, help="Newton-IRLS steps K")
    g.add_argument("--penalty", choices=KINDS, default=None)
    g.add_argument("--gamma", type=float, default=None)
    g.add_argument("--delta", type=float, default=None)
    g.add_argument("--out", default=None, help="output file or directory")
    return p


def _penalty_from_flags(args, base: Penalty | None = None) -> Penalty:
    base = base or Penalty("l2")
    kind = args.penalty or base.kind
    delta = args.delta if args.delta is not None else (base.delta if kind == base.kind else DEFAULT_DELTA)
    gamma = args.gamma if args.gamma is not None else (base.gamma if kind == base.kind else DEFAULT_GAMMA)
    return Penalty(kind, delta=delta, gamma=gamma)


def _config(args) -> AttentionConfig:
    cfg = io.load_config(args.config) if getattr(args, "config", None) else AttentionConfig()
    changes = {"penalty": _penalty_from_flags(args, cfg.penalty)}
    if args.steps is not None:
        changes["steps"] = args.steps
    if args.eps is not None:
        changes["eps"] = args.eps
    return dataclasses.replace(cfg, **changes)


def _require_out(args) -> str:
    if not args.out:
        raise ValueError("--out is required")
    return args.out


def _read(path, what):
    if path is None:
        raise ValueError(f"missing {what} matrix path")
    return io.read_matrix(path)


def cmd_attend(args) -> int:
    out = _require_out(args)
    cfg = _config(args)
    V = _read(args.v, "--v")
    if args.attention_matrix:
        A = io.read_matrix(args.attention_matrix)
        if A.shape[1] != V.shape[0]:
            raise ValueError(f"{args.attention_matrix}: {A.shape[1]} columns but {args.v} has {V.shape[0]} rows")
        result = aggregate(A, V) if args.vanilla else pro_attention_from_matrix(A, V, cfg)
        N = A.shape[0]
    else:
        Q, Km = _read(args.q, "--q"), _read(args.k, "--k")
        if Q.shape[1] != Km.shape[1]:
            raise ValueError(f"{args.q} has {Q.shape[1]} columns but {args.k} has {Km.shape[1]}")
        if Km.shape[0] != V.shape[0]:
            raise ValueError(f"{args.k} has {Km.shape[0]} rows but {args.v} has {V.shape[0]}")
        if args.vanilla:
            result = vanilla_attention(Q, Km, V, cfg.scaled)
        else:
            result = pro_attention(Q, Km, V, cfg)
        N = Q.shape[0]
    K = 0 if args.vanilla else cfg.steps
    ops = costmodel.op_count(costmodel.CostQuery("vanilla" if args.vanilla else "pro", max(N, V.shape[0]), V.shape[1], K))
    io.write_matrix(out, result)
    print(f"N={N} D={V.shape[1]} K={K} analytic_ops={ops}", file=sys.stderr)
    return 0


def cmd_estimate(args) -> int:
    out = _require_out(args)
    values = io.read_matrix(args.points)
    if args.weights:
        w = io.read_matrix(args.weights)
        if 1 not in w.shape:
            raise ValueError(f"{args.weights}: weights must be a single row or column, got {w.shape}")
        pts = WeightedPoints(values, w.reshape(-1))
    else:
        pts = WeightedPoints.uniform(values)
    p = _penalty_from_flags(args)
    steps = 3 if args.steps is None else args.steps
    eps = 1e-6 if args.eps is None else args.eps
    trace = newton_irls(p, pts, steps, eps)
    if not trace.is_nonincreasing():
        raise InvariantViolation(f"loss increased along the trace: {trace.losses.tolist()}")
    header = ["step", "loss"] + [f"coord_{d}" for d in range(pts.dim)]
    rows = [[k, float(l), *map(float, z)] for k, (l, z) in enumerate(zip(trace.losses, trace.iterates))]
    meta = {"penalty": json.dumps(p.to_dict(), separators=(",", ":")), "steps": steps, "eps": eps}
    io.write_csv(out, header, rows, meta)
    return 0


def _penalty_list(text: str, args) -> list:
    out = []
    for kind in text.split(","):
        kind = kind.strip()
        if kind not in KINDS:
            raise ValueError(f"unknown penalty kind {kind!r}")
        delta = args.delta if args.delta is not None else DEFAULT_DELTA
        gamma = args.gamma if args.gamma is not None else DEFAULT_GAMMA
        if kind == "huber" and args.delta is None and args.kind == "descent":
            delta = 0.8
        out.append(Penalty(kind, delta=delta, gamma=gamma))
    return out


def cmd_simulate(args) -> int:
    out_dir = _require_out(args)
    eps = 1e-6 if args.eps is None else args.eps
    seed = 0 if args.seed is None else args.seed
    if args.kind == "outliers":
        penalties = _penalty_list(args.penalties or "l2,l1,mcp", args)
        steps = 10 if args.steps is None else args.steps
        report = simlab.outlier_sweep(
            args.ratio, penalties, range(seed, seed + args.seeds), steps, eps, args.n_clean, workers=_threads()
        )
        for t in (t for ts in report.traces.values() for t in ts):
            if not t.is_nonincreasing():
                raise InvariantViolation("loss increased in an outlier run")
    elif args.kind == "trajectory":
        penalty = _penalty_from_flags(args, Penalty("l1"))
        report = simlab.trajectory_report(penalty, 3 if args.steps is None else args.steps, eps)
        for t in report.traces[penalty.kind]:
            if not t.is_nonincreasing():
                raise InvariantViolation("loss increased along a trajectory")
    else:
        penalties = _penalty_list(args.penalties or "l1,mcp,huber", args)
        steps = 8 if args.steps is None else args.steps
        report = simlab.descent_curves(
            args.B, args.H, args.N, args.D, penalties, steps, seed, include_gd=args.gd, eta=args.eta, eps=eps
        )
        for key, curve in report.curves.items():
            if "/gd" not in key and np.any(np.diff(curve) > 1e-9 * np.maximum(1.0, curve[:-1])):
                raise InvariantViolation(f"mean loss curve for {key} increased")
    report.save(out_dir)
    for label, err in report.errors.items():
        print(f"{label}: median error {err:.6g}", file=sys.stderr)
    return 0


def cmd_block(args) -> int:
    out = _require_out(args)
    X = io.read_matrix(args.x)
    params = load_params(args.params)
    cfg = None if args.vanilla else _config(args)
    io.write_matrix(out, encoder_block(X, params, cfg))
    return 0


def cmd_cost(args) -> int:
    K = args.K if args.K is not None else (args.steps if args.steps is not None else 0)
    q = costmodel.CostQuery(args.mechanism, args.N, args.D, K)
    if args.csv:
        text = io.csv_text(costmodel.COST_HEADER, costmodel.cost_rows(q.mechanism, q.N, q.D, q.K, args.seed or 0))
        if args.out:
            io.atomic_write_text(args.out, text)
        else:
            sys.stdout.write(text)
    else:
        print(costmodel.op_count(q))
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="proattn", description="Robust attention by Newton-IRLS.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("attend", parents=[common], help="run (Pro)Attention on matrix files")
    p.add_argument("--q")
    p.add_argument("--k")
    p.add_argument("--v", required=True)
    p.add_argument("--attention-matrix", help="precomputed attention matrix instead of --q/--k")
    p.add_argument("--config", help="attention config JSON")
    p.add_argument("--vanilla", action="store_true", help="plain weighted-mean attention")
    p.set_defaults(func=cmd_attend)

    p = sub.add_parser("estimate", parents=[common], help="Newton-IRLS trace for one weighted point set")
    p.add_argument("points")
    p.add_argument("--weights")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("simulate", parents=[common], help="run a simulation, writing CSV and JSON into --out")
    p.add_argument("kind", choices=("outliers", "trajectory", "descent"))
    p.add_argument("--penalties", help="comma-separated penalty kinds")
    p.add_argument("--ratio", type=float, default=0.45, help="outlier share of all points")
    p.add_argument("--n-clean", type=int, default=100)
    p.add_argument("--seeds", type=int, default=50, help="number of consecutive seeds from --seed")
    p.add_argument("--B", type=int, default=8)
    p.add_argument("--H", type=int, default=4)
    p.add_argument("--N", type=int, default=64)
    p.add_argument("--D", type=int, default=8)
    p.add_argument("--gd", action="store_true", help="also record gradient-descent curves")
    p.add_argument("--eta", type=float, default=0.05)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("block", parents=[common], help="encoder block forward pass")
    p.add_argument("x")
    p.add_argument("--params", required=True, help="parameter directory")
    p.add_argument("--config")
    p.add_argument("--vanilla", action="store_true")
    p.set_defaults(func=cmd_block)

    p = sub.add_parser("cost", parents=[common], help="analytic operation count")
    p.add_argument("mechanism", choices=costmodel.MECHANISMS)
    p.add_argument("N", type=int)
    p.add_argument("D", type=int)
    p.add_argument("K", type=int, nargs="?")
    p.add_argument("--csv", action="store_true", help="emit a CSV row with measured MACs")
    p.set_defaults(func=cmd_cost)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InvariantViolation as e:
        print(f"proattn: internal invariant violated: {e}", file=sys.stderr)
        return EXIT_INVARIANT
    except (OSError, ValueError) as e:
        print(f"proattn: {e}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as e:  # anything else is a bug, not bad input
        print(f"proattn: internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
