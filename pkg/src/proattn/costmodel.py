"""Operation counts for vanilla, ProAttention, KDE and RKDE attention.

``op_count`` is the analytic model in units of ``N*N*D``-style basic
operations. ``measured_macs`` runs the implemented kernels with a
:class:`~proattn.attention.MacCounter` attached. The kernels charge the
score matmul, the aggregation ``A @ V``, and per step one distance pass and
one reweighted matmul, so ProAttention measures ``(2 + 2K) N^2 D`` against
the analytic ``(1 + 2K) N^2 D``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attention import AttentionConfig, MacCounter, pro_attention, vanilla_attention
from .penalty import Penalty

MECHANISMS = ("vanilla", "pro", "kde", "rkde")


@dataclass(frozen=True)
class CostQuery:
    mechanism: str
    N: int
    D: int
    K: int = 0

    def __post_init__(self):
        if self.mechanism not in MECHANISMS:
            raise ValueError(f"unknown mechanism {self.mechanism!r}; expected one of {MECHANISMS}")
        if self.N < 1 or self.D < 1:
            raise ValueError("N and D must be positive")
        if self.K < 0:
            raise ValueError("K must be nonnegative")


def op_count(q: CostQuery) -> int:
    n2d = q.N * q.N * q.D
    if q.mechanism in ("vanilla", "kde"):
        return 2 * n2d
    if q.mechanism == "pro":
        return (1 + 2 * q.K) * n2d
    return (2 + 3 * q.K) * n2d + 2 * q.K * q.N**3


def _random_qkv(N: int, D: int, seed: int):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((N, D)), rng.standard_normal((N, D)), rng.standard_normal((N, D))


def measured_macs(mechanism: str, N: int, D: int, K: int = 0, seed: int = 0) -> MacCounter:
    """Run one kernel on random inputs and return its counter."""
    Q, Km, V = _random_qkv(N, D, seed)
    counter = MacCounter()
    if mechanism == "vanilla":
        vanilla_attention(Q, Km, V, True, counter)
    elif mechanism == "pro":
        pro_attention(Q, Km, V, AttentionConfig(Penalty("mcp"), steps=K), counter)
    else:
        raise ValueError(f"no instrumented kernel for {mechanism!r}")
    return counter


def measured_ratio(N: int, D: int, K: int, seed: int = 0) -> float:
    """Counted MACs of ProAttention over counted MACs of vanilla attention."""
    return measured_macs("pro", N, D, K, seed).macs / measured_macs("vanilla", N, D, 0, seed).macs


def cost_rows(mechanism: str, N: int, D: int, K: int, seed: int = 0):
    """CSV rows ``mechanism,N,D,K,analytic_ops,measured_macs``; the measured
    column is empty for mechanisms without a kernel."""
    analytic = op_count(CostQuery(mechanism, N, D, K))
    measured = measured_macs(mechanism, N, D, K, seed).macs if mechanism in ("vanilla", "pro") else ""
    return [[mechanism, N, D, K, analytic, measured]]


COST_HEADER = ["mechanism", "N", "D", "K", "analytic_ops", "measured_macs"]
