"""Desk-scale simulations: robust mean estimation on a Gaussian mixture, the
fixed 2-D trajectory example, loss-descent curves and residual diagnostics."""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .attention import AttentionConfig, attention_matrix, pairwise_distances, pro_attention_from_matrix, row_losses
from .estimator import IrlsTrace, WeightedPoints, newton_irls, wls_estimate
from .io import atomic_write_text, csv_text
from .penalty import DEFAULT_EPS, Penalty, irls_weight
from .rng import SplitMix64

STD_FLOOR = 1e-12

TRAJECTORY_A = np.array([[1.0, 1.0, 1.0], [2.0, 0.0, 0.0], [0.0, 0.0, 2.0]])
TRAJECTORY_V = np.array([[1.0, 2.0], [7.0, 25.0], [25.0, 37.0]])


@dataclass(frozen=True)
class MixtureSpec:
    n_clean: int = 100
    n_outlier: int = 0
    clean_mean: tuple = (0.0, 0.0)
    outlier_mean: tuple = (8.0, 8.0)
    clean_std: float = 1.0
    outlier_std: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.n_clean < 1 or self.n_outlier < 0:
            raise ValueError("need n_clean >= 1 and n_outlier >= 0")
        if not (self.clean_std > 0 and self.outlier_std > 0):
            raise ValueError("standard deviations must be positive")
        if len(self.clean_mean) != 2 or len(self.outlier_mean) != 2:
            raise ValueError("means must be 2-D points")

    @classmethod
    def with_ratio(cls, ratio: float, n_clean: int = 100, **kwargs) -> "MixtureSpec":
        """Outlier share ``ratio`` of the total: ``n_outlier = round(ratio/(1-ratio) * n_clean)``."""
        if not 0 <= ratio < 1:
            raise ValueError("ratio must be in [0, 1)")
        return cls(n_clean=n_clean, n_outlier=int(round(ratio / (1.0 - ratio) * n_clean)), **kwargs)


@dataclass
class ExperimentReport:
    name: str
    metadata: dict = field(default_factory=dict)
    errors: Dict[str, float] = field(default_factory=dict)
    curves: Dict[str, np.ndarray] = field(default_factory=dict)
    traces: Dict[str, List[IrlsTrace]] = field(default_factory=dict)
    header: List[str] = field(default_factory=list)
    rows: List[list] = field(default_factory=list)
    per_token: Dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    def to_csv(self) -> str:
        return csv_text(self.header, self.rows, self.metadata)

    def to_json(self) -> str:
        doc = {
            "name": self.name,
            "metadata": self.metadata,
            "errors": self.errors,
            "curves": {k: np.asarray(v).tolist() for k, v in self.curves.items()},
            "traces": {
                k: [{"iterates": t.iterates.tolist(), "losses": t.losses.tolist()} for t in ts]
                for k, ts in self.traces.items()
            },
        }
        return json.dumps(doc, indent=1)

    def save(self, out_dir, stem: Optional[str] = None) -> None:
        os.makedirs(out_dir, exist_ok=True)
        stem = stem or self.name
        atomic_write_text(os.path.join(out_dir, f"{stem}.csv"), self.to_csv())
        atomic_write_text(os.path.join(out_dir, f"{stem}.json"), self.to_json())


def _block(stream: SplitMix64, n: int, mean, std: float) -> np.ndarray:
    z = stream.normals(2 * n).reshape(n, 2)
    if std <= STD_FLOOR:
        return np.tile(np.asarray(mean, dtype=np.float64), (n, 1))
    return np.asarray(mean, dtype=np.float64) + std * z


def sample_mixture(spec: MixtureSpec) -> WeightedPoints:
    """Clean points first, then outliers, each drawn as one Box-Muller pair
    (x, y) from a single SplitMix64 stream seeded with ``spec.seed``."""
    stream = SplitMix64(spec.seed)
    clean = _block(stream, spec.n_clean, spec.clean_mean, spec.clean_std)
    outl = _block(stream, spec.n_outlier, spec.outlier_mean, spec.outlier_std)
    return WeightedPoints.uniform(np.vstack([clean, outl]))


def _label(p: Penalty) -> str:
    return p.kind


def _check_labels(penalties: Sequence[Penalty]) -> None:
    if not penalties:
        raise ValueError("need at least one penalty")
    labels = [_label(p) for p in penalties]
    if len(set(labels)) != len(labels):
        raise ValueError(f"penalty kinds must be distinct, got {labels}")


def outlier_experiment(spec: MixtureSpec, penalties: Sequence[Penalty], K: int = 10, eps: float = DEFAULT_EPS) -> ExperimentReport:
    _check_labels(penalties)
    pts = sample_mixture(spec)
    clean = WeightedPoints.uniform(pts.values[: spec.n_clean])
    truth = wls_estimate(clean)
    report = ExperimentReport(
        name="outliers",
        metadata={"seed": spec.seed, "n_clean": spec.n_clean, "n_outlier": spec.n_outlier, "K": K, "eps": eps},
        header=["penalty", "seed", "error"],
    )
    for p in penalties:
        trace = newton_irls(p, pts, K, eps)
        err = float(np.linalg.norm(trace.final - truth))
        report.errors[_label(p)] = err
        report.traces[_label(p)] = [trace]
        report.rows.append([_label(p), spec.seed, err])
    return report


def outlier_sweep(
    ratio: float,
    penalties: Sequence[Penalty],
    seeds: Sequence[int],
    K: int = 10,
    eps: float = DEFAULT_EPS,
    n_clean: int = 100,
    workers: int = 1,
) -> ExperimentReport:
    """One :func:`outlier_experiment` per seed; ``errors`` holds per-penalty
    medians and ``rows`` one line per (penalty, seed)."""
    _check_labels(penalties)
    specs = [MixtureSpec.with_ratio(ratio, n_clean=n_clean, seed=s) for s in seeds]

    def run(spec):
        return outlier_experiment(spec, penalties, K, eps)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            reports = list(pool.map(run, specs))
    else:
        reports = [run(s) for s in specs]
    sweep = ExperimentReport(
        name="outliers",
        metadata={"ratio": ratio, "n_clean": n_clean, "n_outlier": specs[0].n_outlier if specs else 0,
                  "seeds": len(specs), "K": K, "eps": eps},
        header=["penalty", "seed", "error"],
    )
    for p in penalties:
        label = _label(p)
        per_seed = np.array([r.errors[label] for r in reports])
        sweep.errors[label] = float(np.median(per_seed))
        sweep.curves[label] = per_seed
        sweep.rows.extend([label, r.metadata["seed"], r.errors[label]] for r in reports)
    return sweep


def trajectory_experiment(penalty: Penalty = Penalty("l1"), K: int = 3, eps: float = DEFAULT_EPS) -> List[IrlsTrace]:
    """Newton-IRLS from the weighted mean for each row of the fixed 3x3 toy
    attention matrix over three 2-D values."""
    if K < 1:
        raise ValueError("K must be >= 1")
    return [newton_irls(penalty, WeightedPoints(TRAJECTORY_V, row), K, eps) for row in TRAJECTORY_A]


def trajectory_report(penalty: Penalty = Penalty("l1"), K: int = 3, eps: float = DEFAULT_EPS) -> ExperimentReport:
    traces = trajectory_experiment(penalty, K, eps)
    report = ExperimentReport(
        name="trajectory",
        metadata={"penalty": _label(penalty), "K": K, "eps": eps},
        traces={_label(penalty): traces},
        header=["row", "step", "loss", "x", "y"],
    )
    for i, t in enumerate(traces):
        for k, (z, loss) in enumerate(zip(t.iterates, t.losses)):
            report.rows.append([i, k, float(loss), float(z[0]), float(z[1])])
    return report


def _gd_losses(p: Penalty, A, V, Z0, K: int, eta: float, eps: float) -> np.ndarray:
    Z = Z0
    losses = [row_losses(p, A, V, Z)]
    for _ in range(K):
        C = A * irls_weight(p, pairwise_distances(Z, V), eps)
        Z = Z - eta * 2.0 * (C.sum(axis=1, keepdims=True) * Z - C @ V)
        losses.append(row_losses(p, A, V, Z))
    return np.array(losses)


def descent_curves(
    B: int = 8,
    H: int = 4,
    N: int = 64,
    D: int = 8,
    penalties: Sequence[Penalty] = (Penalty("l1"), Penalty("mcp", gamma=4.0), Penalty("huber", delta=0.8)),
    K: int = 8,
    seed: int = 0,
    include_gd: bool = False,
    eta: float = 0.05,
    eps: float = DEFAULT_EPS,
) -> ExperimentReport:
    """Per-step loss of every token's estimate over ``B*H`` random heads.

    Each head draws ``Q``, ``K`` and ``V`` (in that order, ``N x D`` each) of
    standard normals from one SplitMix64 stream. ``curves[label]`` is the
    mean loss per step (``label`` suffixed ``/gd`` for gradient descent) and
    ``per_token[label]`` the full ``(K+1, B*H*N)`` loss array.
    """
    if min(B, H, N, D) < 1 or K < 0:
        raise ValueError("dimensions must be positive and K >= 0")
    _check_labels(penalties)
    stream = SplitMix64(seed)
    heads = []
    for _ in range(B * H):
        q = stream.normals(N * D).reshape(N, D)
        k = stream.normals(N * D).reshape(N, D)
        v = stream.normals(N * D).reshape(N, D)
        heads.append((attention_matrix(q, k, scaled=True), v))

    report = ExperimentReport(
        name="descent",
        metadata={"B": B, "H": H, "N": N, "D": D, "K": K, "seed": seed, "eps": eps,
                  **({"eta": eta} if include_gd else {})},
        header=["penalty", "method", "step", "mean_loss"],
    )
    for p in penalties:
        label = _label(p)
        cfg = AttentionConfig(penalty=p, steps=K, eps=eps)
        newton = []
        gd = []
        for A, V in heads:
            Zs = pro_attention_from_matrix(A, V, cfg, return_iterates=True)
            newton.append(np.array([row_losses(p, A, V, Z) for Z in Zs]))
            if include_gd:
                gd.append(_gd_losses(p, A, V, Zs[0], K, eta, eps))
        runs = {"newton": np.concatenate(newton, axis=1)}
        if include_gd:
            runs["gd"] = np.concatenate(gd, axis=1)
        for method, losses in runs.items():
            key = label if method == "newton" else f"{label}/gd"
            mean = losses.mean(axis=1)
            report.curves[key] = mean
            report.per_token[key] = losses
            report.rows.extend([label, method, k, float(m)] for k, m in enumerate(mean))
    return report


def residual_diagnostics(V, weights) -> float:
    """Mean squared distance of the value vectors to their weighted mean."""
    pts = WeightedPoints(V, weights)
    z = wls_estimate(pts)
    return float(np.mean(np.sum((pts.values - z) ** 2, axis=1)))
