"""Penalty functions on residual norms and the IRLS weights they induce.

Every function accepts a scalar or a numpy array of residuals. Scalars come
back as Python floats, arrays as float64 arrays of the same shape.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

KINDS = ("l2", "l1", "huber", "mcp", "huber_mcp")

DEFAULT_DELTA = 1.0
DEFAULT_GAMMA = 4.0
DEFAULT_EPS = 1e-6


@dataclass(frozen=True)
class Penalty:
    """Tagged penalty: ``kind`` plus the Huber threshold ``delta`` and the
    MCP threshold ``gamma``. Thresholds irrelevant to a kind are carried
    but ignored."""

    kind: str = "l2"
    delta: float = DEFAULT_DELTA
    gamma: float = DEFAULT_GAMMA

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown penalty kind {self.kind!r}; expected one of {KINDS}")
        object.__setattr__(self, "delta", float(self.delta))
        object.__setattr__(self, "gamma", float(self.gamma))
        if self.kind in ("huber", "huber_mcp") and not (self.delta > 0 and np.isfinite(self.delta)):
            raise ValueError(f"delta must be positive and finite, got {self.delta}")
        if self.kind in ("mcp", "huber_mcp") and not (self.gamma > 0 and np.isfinite(self.gamma)):
            raise ValueError(f"gamma must be positive and finite, got {self.gamma}")
        if self.kind == "huber_mcp" and not self.delta < self.gamma:
            raise ValueError(f"huber_mcp needs delta < gamma, got delta={self.delta}, gamma={self.gamma}")

    @classmethod
    def from_dict(cls, d: dict) -> "Penalty":
        unknown = set(d) - {"kind", "delta", "gamma"}
        if unknown:
            raise ValueError(f"unknown penalty keys: {sorted(unknown)}")
        if "kind" not in d:
            raise ValueError("penalty needs a 'kind'")
        return cls(
            kind=d["kind"],
            delta=d.get("delta", DEFAULT_DELTA),
            gamma=d.get("gamma", DEFAULT_GAMMA),
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        if self.kind in ("l2", "l1"):
            del d["delta"], d["gamma"]
        elif self.kind == "huber":
            del d["gamma"]
        elif self.kind == "mcp":
            del d["delta"]
        return d


L2 = Penalty("l2")
L1 = Penalty("l1")


def _as_residual(z):
    arr = np.asarray(z, dtype=np.float64)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise ValueError("residual must be nonnegative")
    return arr


def _out(arr, z):
    return float(arr) if np.ndim(z) == 0 else arr


def rho(p: Penalty, z):
    """Penalty value at residual norm ``z`` (continuous, piecewise)."""
    z_arr = _as_residual(z)
    kind = p.kind
    if kind == "l2":
        out = 0.5 * z_arr * z_arr
    elif kind == "l1":
        out = z_arr.copy()
    elif kind == "huber":
        d = p.delta
        out = np.where(z_arr < d, 0.5 * z_arr * z_arr, d * (z_arr - 0.5 * d))
    elif kind == "mcp":
        g = p.gamma
        out = np.where(z_arr < g, z_arr - z_arr * z_arr / (2.0 * g), 0.5 * g)
    else:
        d, g = p.delta, p.gamma
        mid = d * (z_arr - 0.5 * d - (z_arr - d) ** 2 / (2.0 * (g - d)))
        out = np.where(z_arr < d, 0.5 * z_arr * z_arr, np.where(z_arr < g, mid, 0.5 * d * g))
    return _out(out, z)


def rho_prime(p: Penalty, z):
    """Right derivative of :func:`rho` at ``z``."""
    z_arr = _as_residual(z)
    kind = p.kind
    if kind == "l2":
        out = z_arr.copy()
    elif kind == "l1":
        out = np.ones_like(z_arr)
    elif kind == "huber":
        out = np.minimum(z_arr, p.delta)
    elif kind == "mcp":
        out = np.maximum(1.0 - z_arr / p.gamma, 0.0)
    else:
        d, g = p.delta, p.gamma
        # (g - z)/(g - d) is exactly 1 at z == d, so the slope there is exactly d
        mid = d * ((g - z_arr) / (g - d))
        out = np.where(z_arr < d, z_arr, np.where(z_arr < g, mid, 0.0))
    return _out(out, z)


def irls_weight(p: Penalty, r, eps: float = DEFAULT_EPS):
    """Reweighting factor ``rho'(r) / (2 r)`` with ``r`` floored at ``eps``.

    The floor keeps the l1/MCP weights bounded when a token coincides with
    the current estimate.
    """
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    r_arr = _as_residual(r)
    r_safe = np.maximum(r_arr, eps)
    if p.kind == "l2":
        out = np.full_like(r_safe, 0.5)
    else:
        out = rho_prime(p, r_safe) / (2.0 * r_safe)
    return _out(out, r)
