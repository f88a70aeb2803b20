"""Token-wise robust estimation by Newton-IRLS.

A token estimate ``z`` aggregates value vectors ``v_j`` with attention weights
``a_j``. Vanilla attention is the weighted least-squares solution; the robust
variant minimises ``sum_j a_j * rho(||v_j - z||)`` by repeatedly minimising a
quadratic majorizer, which reduces to a reweighted mean.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .penalty import DEFAULT_EPS, Penalty, irls_weight, rho


class InvalidInputError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    """Raised when an iterative oracle runs out of iterations.

    The last iterate is kept on ``self.last``.
    """

    def __init__(self, message: str, last: np.ndarray):
        super().__init__(message)
        self.last = last


@dataclass(frozen=True)
class WeightedPoints:
    """``N`` value vectors of dimension ``D`` with nonnegative weights."""

    values: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, ndmin=2)
        weights = np.array(self.weights, dtype=np.float64).reshape(-1)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise InvalidInputError(f"values must be an N x D array with N, D >= 1, got shape {values.shape}")
        if weights.shape[0] != values.shape[0]:
            raise InvalidInputError(f"{weights.shape[0]} weights for {values.shape[0]} values")
        if not np.all(np.isfinite(values)):
            raise InvalidInputError("values must be finite")
        if not np.all(np.isfinite(weights)) or np.any(weights < 0):
            raise InvalidInputError("weights must be finite and nonnegative")
        if not np.any(weights > 0):
            raise InvalidInputError("at least one weight must be positive")
        values.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def uniform(cls, values) -> "WeightedPoints":
        values = np.array(values, dtype=np.float64, ndmin=2)
        return cls(values, np.ones(values.shape[0]))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]


@dataclass
class IrlsTrace:
    iterates: np.ndarray  # (K+1, D)
    losses: np.ndarray  # (K+1,)
    weights: Optional[np.ndarray] = field(default=None, repr=False)  # (K, N)

    @property
    def final(self) -> np.ndarray:
        return self.iterates[-1]

    @property
    def steps(self) -> int:
        return len(self.losses) - 1

    def is_nonincreasing(self, slack: float = 1e-9) -> bool:
        l = self.losses
        return bool(np.all(l[1:] <= l[:-1] + slack * np.maximum(1.0, np.abs(l[:-1]))))


def _check_vector(pts: WeightedPoints, z) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (pts.dim,):
        raise InvalidInputError(f"vector of shape {z.shape} does not match dimension {pts.dim}")
    if not np.all(np.isfinite(z)):
        raise InvalidInputError("vector must be finite")
    return z


def _weighted_mean(c: np.ndarray, values: np.ndarray) -> np.ndarray:
    return (c @ values) / c.sum()


def residuals(pts: WeightedPoints, z) -> np.ndarray:
    """Distances ``||v_j - z||`` for every value vector."""
    z = _check_vector(pts, z)
    return np.sqrt(np.sum((pts.values - z) ** 2, axis=1))


def wls_estimate(pts: WeightedPoints) -> np.ndarray:
    """Weighted mean ``sum a_j v_j / sum a_j`` (the vanilla attention output)."""
    return _weighted_mean(pts.weights, pts.values)


def robust_loss(p: Penalty, pts: WeightedPoints, z) -> float:
    return float(pts.weights @ rho(p, residuals(pts, z)))


def upper_bound_loss(p: Penalty, pts: WeightedPoints, z, anchor, eps: float = DEFAULT_EPS) -> float:
    """Quadratic majorizer of :func:`robust_loss` built at ``anchor``.

    The additive constant is chosen so that the bound touches the loss at
    ``anchor`` exactly.
    """
    anchor = _check_vector(pts, anchor)
    r_anchor = residuals(pts, anchor)
    cw = pts.weights * irls_weight(p, r_anchor, eps)
    const = robust_loss(p, pts, anchor) - float(cw @ (r_anchor * r_anchor))
    r = residuals(pts, z)
    return float(cw @ (r * r)) + const


def _step_weights(p: Penalty, pts: WeightedPoints, z, eps: float) -> np.ndarray:
    return pts.weights * irls_weight(p, residuals(pts, z), eps)


def newton_irls_step(p: Penalty, pts: WeightedPoints, z, eps: float = DEFAULT_EPS) -> np.ndarray:
    """One Newton step on the majorizer at ``z``: a reweighted mean.

    When every reweighted coefficient vanishes (MCP-type penalties with all
    residuals past ``gamma``) the majorizer is flat and ``z`` is returned.
    """
    z = _check_vector(pts, z)
    c = _step_weights(p, pts, z, eps)
    if not c.sum() > 0:
        return z.copy()
    return _weighted_mean(c, pts.values)


def newton_irls(
    p: Penalty,
    pts: WeightedPoints,
    steps: int = 3,
    eps: float = DEFAULT_EPS,
    init=None,
    keep_weights: bool = False,
) -> IrlsTrace:
    if steps < 0:
        raise InvalidInputError(f"steps must be >= 0, got {steps}")
    z = wls_estimate(pts) if init is None else _check_vector(pts, init).copy()
    iterates = [z]
    losses = [robust_loss(p, pts, z)]
    weights = []
    for _ in range(steps):
        if keep_weights:
            weights.append(irls_weight(p, residuals(pts, z), eps))
        z = newton_irls_step(p, pts, z, eps)
        iterates.append(z)
        losses.append(robust_loss(p, pts, z))
    return IrlsTrace(
        iterates=np.array(iterates),
        losses=np.array(losses),
        weights=np.array(weights).reshape(steps, pts.n) if keep_weights else None,
    )


def gd_step(p: Penalty, pts: WeightedPoints, z, eta: float, eps: float = DEFAULT_EPS) -> np.ndarray:
    """First-order step on the majorizer, used as a convergence baseline."""
    if eta < 0:
        raise InvalidInputError(f"eta must be nonnegative, got {eta}")
    z = _check_vector(pts, z)
    c = _step_weights(p, pts, z, eps)
    grad = 2.0 * (c.sum() * z - c @ pts.values)
    return z - eta * grad


def gradient_descent(p: Penalty, pts: WeightedPoints, steps: int, eta: float, eps: float = DEFAULT_EPS, init=None) -> IrlsTrace:
    z = wls_estimate(pts) if init is None else _check_vector(pts, init).copy()
    iterates = [z]
    losses = [robust_loss(p, pts, z)]
    for _ in range(steps):
        z = gd_step(p, pts, z, eta, eps)
        iterates.append(z)
        losses.append(robust_loss(p, pts, z))
    return IrlsTrace(np.array(iterates), np.array(losses))


def geometric_median_oracle(pts: WeightedPoints, tol: float = 1e-10, max_iter: int = 100_000) -> np.ndarray:
    """Weighted geometric median by Weiszfeld iteration.

    Data points are first tested for optimality directly (a vertex is the
    median when the pull of the other points does not exceed its own
    weight), since plain Weiszfeld only approaches a vertex sublinearly.
    """
    if not tol > 0:
        raise InvalidInputError("tol must be positive")
    V, a = pts.values, pts.weights
    keep = a > 0
    V, a = V[keep], a[keep]
    if np.all(V == V[0]):
        return V[0].copy()

    for k in range(len(V)):
        diff = V - V[k]
        dist = np.sqrt(np.sum(diff**2, axis=1))
        other = dist > 0
        same_weight = a[~other].sum()
        pull = (a[other] / dist[other]) @ diff[other]
        if np.linalg.norm(pull) <= same_weight:
            return V[k].copy()

    z = _weighted_mean(a, V)
    for _ in range(max_iter):
        dist = np.sqrt(np.sum((V - z) ** 2, axis=1))
        if np.any(dist == 0):
            # landed on a non-optimal vertex; nudge off it along the pull
            dist = np.maximum(dist, tol)
        z_new = _weighted_mean(a / dist, V)
        if np.linalg.norm(z_new - z) < tol:
            return z_new
        z = z_new
    raise ConvergenceError(f"Weiszfeld did not converge in {max_iter} iterations", z)
