"""Acceptance criteria, each run at its stated tolerance and time budget.

Every test records one PASS/FAIL line, printed in the terminal summary.
"""

import time

import numpy as np
import pytest

from proattn.attention import AttentionConfig, attention_matrix, pro_attention, vanilla_attention
from proattn.block import influence_study
from proattn.cli import main
from proattn.costmodel import CostQuery, measured_macs, measured_ratio, op_count
from proattn.estimator import (
    WeightedPoints,
    geometric_median_oracle,
    newton_irls,
    robust_loss,
    upper_bound_loss,
)
from proattn.io import matrix_to_text, parse_matrix, read_matrix, write_matrix
from proattn.penalty import Penalty, irls_weight, rho, rho_prime
from proattn.simlab import descent_curves, outlier_sweep, trajectory_experiment

from .conftest import ACCEPTANCE_LINES, ALL_PENALTIES, TRAJ_V, central_difference, random_instance

MCP = Penalty("mcp", gamma=4.0)


def record(number, title, checks, elapsed, budget):
    """``checks`` maps a description to ``(ok, detail)``."""
    checks = dict(checks)
    checks[f"runtime < {budget} s"] = (elapsed < budget, f"{elapsed:.2f} s")
    failed = [k for k, (ok, _) in checks.items() if not ok]
    status = "FAIL" if failed else "PASS"
    details = "; ".join(f"{k}: {d}" for k, (_, d) in checks.items())
    line = f"[{status}] criterion {number:>2} {title} :: {details}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert not failed, f"criterion {number} failed: {failed}"


def test_criterion_01_descent_suite():
    t0 = time.perf_counter()
    violations = 0
    for seed in range(1000):
        pts, _ = random_instance(seed)
        for p in ALL_PENALTIES:
            if not newton_irls(p, pts, steps=8).is_nonincreasing(slack=1e-9):
                violations += 1
    record(1, "Newton-IRLS descent", {"violations == 0": (violations == 0, str(violations))}, time.perf_counter() - t0, 30)


def test_criterion_02_majorization_suite():
    t0 = time.perf_counter()
    worst_gap, worst_touch = np.inf, 0.0
    for seed in range(100):
        pts, rng = random_instance(seed)
        p = ALL_PENALTIES[seed % len(ALL_PENALTIES)]
        anchor = rng.standard_normal(pts.dim)
        touch = abs(upper_bound_loss(p, pts, anchor, anchor) - robust_loss(p, pts, anchor))
        worst_touch = max(worst_touch, touch)
        for _ in range(100):
            z = anchor + rng.standard_normal(pts.dim) * rng.choice([0.01, 1.0, 5.0])
            worst_gap = min(worst_gap, upper_bound_loss(p, pts, z, anchor) - robust_loss(p, pts, z))
    record(
        2,
        "majorizer bound",
        {
            "bound - loss >= -1e-9": (worst_gap >= -1e-9, f"min {worst_gap:.3e}"),
            "|bound - loss| at anchor <= 1e-10": (worst_touch <= 1e-10, f"max {worst_touch:.3e}"),
        },
        time.perf_counter() - t0,
        10,
    )


def test_criterion_03_vanilla_recovery():
    t0 = time.perf_counter()
    rng = np.random.default_rng(303)
    worst = 0.0
    for _ in range(50):
        N, Nk, D = rng.integers(1, 33), rng.integers(1, 33), rng.integers(1, 17)
        Q, K, V = rng.standard_normal((N, D)), rng.standard_normal((Nk, D)), rng.standard_normal((Nk, D))
        steps = int(rng.integers(0, 9))
        diff = pro_attention(Q, K, V, AttentionConfig(Penalty("l2"), steps=steps)) - vanilla_attention(Q, K, V)
        worst = max(worst, float(np.abs(diff).max()))
    record(3, "L2 recovers vanilla", {"max |diff| <= 1e-10": (worst <= 1e-10, f"{worst:.3e}")}, time.perf_counter() - t0, 5)


def test_criterion_04_matrix_token_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(404)
    worst = 0.0
    for _ in range(50):
        N, D = int(rng.integers(2, 17)), int(rng.integers(1, 9))
        Q, K, V = (rng.standard_normal((N, D)) for _ in range(3))
        A = attention_matrix(Q, K)
        for p in ALL_PENALTIES:
            cfg = AttentionConfig(p, steps=3)
            out = pro_attention(Q, K, V, cfg)
            for i in range(N):
                t = newton_irls(p, WeightedPoints(V, A[i]), cfg.steps, cfg.eps)
                worst = max(worst, float(np.abs(out[i] - t.final).max()))
    record(4, "matrix form equals token-wise", {"max |diff| <= 1e-12": (worst <= 1e-12, f"{worst:.3e}")}, time.perf_counter() - t0, 10)


def test_criterion_05_trajectory():
    t0 = time.perf_counter()
    traces = trajectory_experiment(Penalty("l1"), K=3)
    median = geometric_median_oracle(WeightedPoints.uniform(TRAJ_V), tol=1e-10)
    d0 = np.linalg.norm(traces[0].iterates[0] - median)
    d3 = np.linalg.norm(traces[0].iterates[3] - median)
    single = bool(np.all(traces[1].iterates == [1.0, 2.0]) and np.all(traces[2].iterates == [25.0, 37.0]))
    record(
        5,
        "trajectory reproduction",
        {
            "single-support rows exact": (single, "(1,2) and (25,37)" if single else "mismatch"),
            "uniform row l1 within 10% after 3 steps": (d3 <= 0.1 * d0, f"{d3 / d0:.4f} of initial distance"),
        },
        time.perf_counter() - t0,
        1,
    )


def test_criterion_06_outlier_ordering():
    t0 = time.perf_counter()
    penalties = [Penalty("l2"), Penalty("l1"), MCP]
    hi = outlier_sweep(0.45, penalties, range(50), K=10)
    lo = outlier_sweep(0.15, penalties, range(50), K=10)
    m = hi.errors
    ordered = m["mcp"] < m["l1"] < m["l2"]
    share = float(np.mean((lo.curves["mcp"] < lo.curves["l1"]) & (lo.curves["l1"] < lo.curves["l2"])))
    record(
        6,
        "outlier ordering",
        {
            "45%: median mcp < l1 < l2": (ordered, f"{m['mcp']:.4f} < {m['l1']:.4f} < {m['l2']:.4f}"),
            "15%: ordering in >= 80% of seeds": (share >= 0.8, f"{share:.0%}"),
        },
        time.perf_counter() - t0,
        30,
    )


def test_criterion_07_convergence_speed():
    t0 = time.perf_counter()
    rep = descent_curves(8, 4, 64, 8, penalties=[MCP, Penalty("l1")], K=8, seed=0, include_gd=True, eta=0.05)
    c = rep.curves["mcp"]
    frac = (c[0] - c[3]) / (c[0] - c[8])
    newton, gd = rep.curves["l1"][3], rep.curves["l1/gd"][3]
    record(
        7,
        "convergence speed",
        {
            "mcp drop by step 3 >= 95% of drop by step 8": (frac >= 0.95, f"{frac:.1%}"),
            "l1 Newton step 3 <= GD step 3": (newton <= gd, f"{newton:.5f} vs {gd:.5f}"),
        },
        time.perf_counter() - t0,
        30,
    )


def test_criterion_08_cost_model():
    t0 = time.perf_counter()
    identities = all(
        op_count(CostQuery("pro", N, D, K)) - op_count(CostQuery("vanilla", N, D)) == (2 * K - 1) * N * N * D
        for N in (1, 7, 64, 129)
        for D in (1, 8, 33)
        for K in range(9)
    )
    ratio = measured_ratio(64, 8, 3)
    deltas = {measured_macs("pro", 64, 8, K + 1).macs - measured_macs("pro", 64, 8, K).macs for K in range(6)}
    record(
        8,
        "cost model",
        {
            "pro - vanilla == (2K-1)N^2D": (identities, "exact" if identities else "mismatch"),
            "measured ratio within 10% of 3.5": (abs(ratio - 3.5) <= 0.35, f"{ratio:.4f}"),
            "per-K counter delta == 2N^2D": (deltas == {2 * 64 * 64 * 8}, str(sorted(deltas))),
        },
        time.perf_counter() - t0,
        10,
    )


def _off_kink(p, r):
    kinks = {"l2": [], "l1": [], "huber": [p.delta], "mcp": [p.gamma], "huber_mcp": [p.delta, p.gamma]}[p.kind]
    return all(abs(r - k) > 1e-3 for k in kinks)


def test_criterion_09_penalty_correctness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(909)
    fd_err = 0.0
    for p in ALL_PENALTIES:
        for r in rng.uniform(1e-3, 8.0, 400):
            if _off_kink(p, r):
                fd = central_difference(lambda x: float(rho(p, x)), float(r))
                fd_err = max(fd_err, abs(fd - float(rho_prime(p, r))))
    far = np.concatenate([[MCP.gamma], rng.uniform(MCP.gamma, 1e6, 1000)])
    mcp_zero = bool(np.all(irls_weight(MCP, far) == 0.0))
    huber = Penalty("huber", delta=1.0)
    near = np.concatenate([[0.0, 1e-300, 1e-6, huber.delta], rng.uniform(0, huber.delta, 1000)])
    huber_half = bool(np.all(irls_weight(huber, near) == 0.5))
    record(
        9,
        "penalty correctness",
        {
            "finite-difference rho' <= 1e-6": (fd_err <= 1e-6, f"max {fd_err:.2e}"),
            "mcp weight == 0 for r >= gamma": (mcp_zero, "exact" if mcp_zero else "nonzero"),
            "huber weight == 1/2 for r <= delta": (huber_half, "exact" if huber_half else "differs"),
        },
        time.perf_counter() - t0,
        5,
    )


def test_criterion_10_block_damping():
    t0 = time.perf_counter()
    mcp = influence_study(AttentionConfig(MCP), seeds=range(20))
    l2 = influence_study(AttentionConfig(Penalty("l2")), seeds=range(20))
    m, v = float(np.median(mcp)), float(np.median(l2))
    record(
        10,
        "block-level damping",
        {"median influence mcp < l2": (m < v, f"{m:.4f} vs {v:.4f}, mcp lower in {np.mean(mcp < l2):.0%} of seeds")},
        time.perf_counter() - t0,
        30,
    )


def test_criterion_11_cli_golden(tmp_path, capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(1111)
    M = rng.standard_normal((7, 5)) * 10.0 ** rng.integers(-300, 300, (7, 5))
    write_matrix(tmp_path / "m.mat", M)
    round_trip = read_matrix(tmp_path / "m.mat").tobytes() == M.tobytes() and parse_matrix(matrix_to_text(M)).tobytes() == M.tobytes()

    capsys.readouterr()
    main(["cost", "pro", "64", "8", "3"])
    printed = capsys.readouterr().out.strip()

    for name in "qkv":
        write_matrix(tmp_path / f"{name}.mat", rng.standard_normal((9, 4)))
    files = ["--q", str(tmp_path / "q.mat"), "--k", str(tmp_path / "k.mat"), "--v", str(tmp_path / "v.mat")]
    codes = (
        main(["attend", *files, "--vanilla", "--out", str(tmp_path / "golden.mat")]),
        main(["attend", *files, "--penalty", "l2", "--steps", "3", "--out", str(tmp_path / "l2.mat")]),
    )
    identical = codes == (0, 0) and (tmp_path / "golden.mat").read_bytes() == (tmp_path / "l2.mat").read_bytes()
    record(
        11,
        "CLI golden",
        {
            "matrix round-trip bitwise": (round_trip, "bitwise" if round_trip else "differs"),
            "cost pro 64 8 3 prints 229376": (printed == "229376", printed),
            "L2 attend file == vanilla golden": (identical, "identical" if identical else f"exit codes {codes}"),
        },
        time.perf_counter() - t0,
        5,
    )
