"""Matrix-form attention: vanilla softmax attention and ProAttention.

Matrices are plain 2-D float64 numpy arrays. ProAttention keeps the attention
matrix ``A`` fixed and refines every output token with ``steps`` Newton-IRLS
iterations, all tokens at once.

Every kernel takes an optional :class:`MacCounter`; when given, it is charged
one multiply-accumulate per scalar product in matmuls and per coordinate in
pairwise distances. Softmax, elementwise weights and row normalisation are not
charged.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .estimator import InvalidInputError
from .penalty import DEFAULT_EPS, Penalty, irls_weight, rho


@dataclass
class MacCounter:
    macs: int = 0
    by_op: dict = field(default_factory=dict)

    def add(self, op: str, n: int):
        self.macs += n
        self.by_op[op] = self.by_op.get(op, 0) + n


@dataclass(frozen=True)
class AttentionConfig:
    penalty: Penalty = field(default_factory=Penalty)
    steps: int = 3
    eps: float = DEFAULT_EPS
    scaled: bool = True

    def __post_init__(self):
        if not isinstance(self.penalty, Penalty):
            raise ValueError("penalty must be a Penalty")
        if isinstance(self.steps, bool) or int(self.steps) != self.steps or self.steps < 0:
            raise ValueError(f"steps must be a nonnegative integer, got {self.steps!r}")
        if not (float(self.eps) > 0 and np.isfinite(self.eps)):
            raise ValueError(f"eps must be positive, got {self.eps!r}")
        if not isinstance(self.scaled, (bool, np.bool_)):
            raise ValueError("scaled must be a boolean")
        object.__setattr__(self, "steps", int(self.steps))
        object.__setattr__(self, "eps", float(self.eps))

    @classmethod
    def from_dict(cls, d: dict) -> "AttentionConfig":
        unknown = set(d) - {"penalty", "steps", "eps", "scaled"}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        if "penalty" in d:
            if not isinstance(d["penalty"], dict):
                raise ValueError("'penalty' must be an object")
            kwargs["penalty"] = Penalty.from_dict(d["penalty"])
        for key in ("steps", "eps", "scaled"):
            if key in d:
                kwargs[key] = d[key]
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return {"penalty": self.penalty.to_dict(), "steps": self.steps, "eps": self.eps, "scaled": self.scaled}


def _matrix(x, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
        raise InvalidInputError(f"{name} must be a non-empty 2-D matrix, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return x


def softmax_rows(scores) -> np.ndarray:
    s = _matrix(scores, "scores")
    e = np.exp(s - s.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def attention_matrix(Q, Kmat, scaled: bool = True, counter: Optional[MacCounter] = None) -> np.ndarray:
    Q, Kmat = _matrix(Q, "Q"), _matrix(Kmat, "K")
    if Q.shape[1] != Kmat.shape[1]:
        raise InvalidInputError(f"Q has {Q.shape[1]} columns but K has {Kmat.shape[1]}")
    scores = Q @ Kmat.T
    if counter is not None:
        counter.add("scores", Q.shape[0] * Kmat.shape[0] * Q.shape[1])
    if scaled:
        scores = scores / np.sqrt(Q.shape[1])
    return softmax_rows(scores)


def _aggregate(C: np.ndarray, V: np.ndarray, counter: Optional[MacCounter], op: str) -> np.ndarray:
    """Row-normalised ``C @ V``; rows of ``C`` must have positive sums."""
    if counter is not None:
        counter.add(op, C.shape[0] * C.shape[1] * V.shape[1])
    return (C @ V) / C.sum(axis=1, keepdims=True)


def aggregate(A, V, counter: Optional[MacCounter] = None) -> np.ndarray:
    """Weighted least-squares output for a given (not necessarily normalised)
    attention matrix: row ``i`` is ``sum_j A_ij v_j / sum_j A_ij``."""
    A, V = _matrix(A, "A"), _matrix(V, "V")
    if A.shape[1] != V.shape[0]:
        raise InvalidInputError(f"A has {A.shape[1]} columns but V has {V.shape[0]} rows")
    if np.any(A < 0) or not np.all(A.sum(axis=1) > 0):
        raise InvalidInputError("attention rows must be nonnegative with a positive sum")
    return _aggregate(A, V, counter, "aggregate")


def vanilla_attention(Q, Kmat, V, scaled: bool = True, counter: Optional[MacCounter] = None) -> np.ndarray:
    V = _matrix(V, "V")
    Kmat = _matrix(Kmat, "K")
    if Kmat.shape[0] != V.shape[0]:
        raise InvalidInputError(f"K has {Kmat.shape[0]} rows but V has {V.shape[0]}")
    A = attention_matrix(Q, Kmat, scaled, counter)
    return _aggregate(A, V, counter, "aggregate")


def pairwise_distances(Z, V, counter: Optional[MacCounter] = None) -> np.ndarray:
    Z, V = _matrix(Z, "Z"), _matrix(V, "V")
    if Z.shape[1] != V.shape[1]:
        raise InvalidInputError(f"Z has {Z.shape[1]} columns but V has {V.shape[1]}")
    if counter is not None:
        counter.add("distances", Z.shape[0] * V.shape[0] * Z.shape[1])
    diff = Z[:, None, :] - V[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=2))


def _reweight_step(A, V, Z, cfg: AttentionConfig, counter) -> np.ndarray:
    Dk = pairwise_distances(Z, V, counter)
    M = irls_weight(cfg.penalty, Dk, cfg.eps) * A
    s = M.sum(axis=1, keepdims=True)
    if counter is not None:
        counter.add("reweighted", M.shape[0] * M.shape[1] * V.shape[1])
    dead = ~(s[:, 0] > 0)
    if not dead.any():
        return (M @ V) / s
    # rows whose reweighted coefficients all vanish keep their estimate
    Znew = Z.copy()
    live = ~dead
    Znew[live] = (M[live] @ V) / s[live]
    return Znew


def pro_attention_from_matrix(A, V, cfg: AttentionConfig, counter: Optional[MacCounter] = None, return_iterates: bool = False):
    """ProAttention on a precomputed attention matrix ``A``.

    Returns ``Z^(K)``, or the list ``[Z^(0), ..., Z^(K)]`` when
    ``return_iterates`` is set.
    """
    A, V = _matrix(A, "A"), _matrix(V, "V")
    Z = aggregate(A, V, counter)
    iterates = [Z]
    for _ in range(cfg.steps):
        Z = _reweight_step(A, V, Z, cfg, counter)
        iterates.append(Z)
    return iterates if return_iterates else Z


def pro_attention(Q, Kmat, V, cfg: AttentionConfig, counter: Optional[MacCounter] = None) -> np.ndarray:
    V = _matrix(V, "V")
    Kmat = _matrix(Kmat, "K")
    if Kmat.shape[0] != V.shape[0]:
        raise InvalidInputError(f"K has {Kmat.shape[0]} rows but V has {V.shape[0]}")
    A = attention_matrix(Q, Kmat, cfg.scaled, counter)
    return pro_attention_from_matrix(A, V, cfg, counter)


def row_losses(p: Penalty, A, V, Z) -> np.ndarray:
    """Robust loss of every row estimate: ``sum_j A_ij rho(||v_j - z_i||)``."""
    return np.sum(A * rho(p, pairwise_distances(Z, V)), axis=1)


def multi_head_pro_attention(
    X,
    wq: Sequence,
    wk: Sequence,
    wv: Sequence,
    wo,
    heads: int,
    cfg: Optional[AttentionConfig],
    counter: Optional[MacCounter] = None,
) -> np.ndarray:
    """Per-head ProAttention on projections of ``X``, concatenated and
    projected by ``wo``. ``cfg=None`` selects vanilla attention."""
    X = _matrix(X, "X")
    d_model = X.shape[1]
    if heads < 1 or d_model % heads:
        raise InvalidInputError(f"{heads} heads do not divide model dimension {d_model}")
    if not (len(wq) == len(wk) == len(wv) == heads):
        raise InvalidInputError(f"expected {heads} projections per role")
    d_head = d_model // heads
    for name, ws in (("wq", wq), ("wk", wk), ("wv", wv)):
        for h, w in enumerate(ws):
            if np.shape(w) != (d_model, d_head):
                raise InvalidInputError(f"{name}[{h}] has shape {np.shape(w)}, expected {(d_model, d_head)}")
    wo = _matrix(wo, "wo")
    if wo.shape[0] != d_model:
        raise InvalidInputError(f"wo has {wo.shape[0]} rows, expected {d_model}")

    outs = []
    for h in range(heads):
        q, k, v = X @ wq[h], X @ wk[h], X @ wv[h]
        if cfg is None:
            outs.append(vanilla_attention(q, k, v, True, counter))
        else:
            outs.append(pro_attention(q, k, v, cfg, counter))
    return np.concatenate(outs, axis=1) @ wo
