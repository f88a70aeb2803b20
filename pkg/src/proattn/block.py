"""A post-norm transformer encoder block whose attention can be swapped for
ProAttention without touching any parameter."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Iterable, List, Optional

import numpy as np

from .attention import AttentionConfig, multi_head_pro_attention
from .estimator import InvalidInputError
from .rng import normal_matrix

LN_EPS = 1e-5


@dataclass
class BlockParams:
    wq: List[np.ndarray]
    wk: List[np.ndarray]
    wv: List[np.ndarray]
    wo: np.ndarray
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    ln1_g: np.ndarray
    ln1_b: np.ndarray
    ln2_g: np.ndarray
    ln2_b: np.ndarray
    heads: int
    d_model: int
    d_ff: int
    ln_eps: float = LN_EPS

    def __post_init__(self):
        H, dm, dff = self.heads, self.d_model, self.d_ff
        if H < 1 or dm % H:
            raise InvalidInputError(f"{H} heads do not divide d_model={dm}")
        dh = dm // H
        expected = {
            "wo": (dm, dm),
            "w1": (dm, dff),
            "b1": (dff,),
            "w2": (dff, dm),
            "b2": (dm,),
            "ln1_g": (dm,),
            "ln1_b": (dm,),
            "ln2_g": (dm,),
            "ln2_b": (dm,),
        }
        for name, shape in expected.items():
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.size == np.prod(shape) and arr.ndim <= 2:
                arr = arr.reshape(shape)
            if arr.shape != shape:
                raise InvalidInputError(f"{name} has shape {arr.shape}, expected {shape}")
            setattr(self, name, arr)
        for name in ("wq", "wk", "wv"):
            ws = [np.asarray(w, dtype=np.float64) for w in getattr(self, name)]
            if len(ws) != H or any(w.shape != (dm, dh) for w in ws):
                raise InvalidInputError(f"{name} needs {H} matrices of shape {(dm, dh)}")
            setattr(self, name, ws)
        if not self.ln_eps > 0:
            raise InvalidInputError("ln_eps must be positive")


def random_params(d_model: int = 16, d_ff: int = 32, heads: int = 4, seed: int = 0) -> BlockParams:
    """Gaussian parameters with ``1/sqrt(fan_in)`` scale and identity norms."""
    rng = np.random.default_rng(seed)
    dh = d_model // heads

    def g(*shape):
        return rng.standard_normal(shape) / np.sqrt(shape[0])

    return BlockParams(
        wq=[g(d_model, dh) for _ in range(heads)],
        wk=[g(d_model, dh) for _ in range(heads)],
        wv=[g(d_model, dh) for _ in range(heads)],
        wo=g(d_model, d_model),
        w1=g(d_model, d_ff),
        b1=np.zeros(d_ff),
        w2=g(d_ff, d_model),
        b2=np.zeros(d_model),
        ln1_g=np.ones(d_model),
        ln1_b=np.zeros(d_model),
        ln2_g=np.ones(d_model),
        ln2_b=np.zeros(d_model),
        heads=heads,
        d_model=d_model,
        d_ff=d_ff,
    )


def layer_norm(x, gain, bias, ln_eps: float = LN_EPS) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    gain, bias = np.asarray(gain, dtype=np.float64), np.asarray(bias, dtype=np.float64)
    if x.ndim != 2 or gain.shape != (x.shape[1],) or bias.shape != (x.shape[1],):
        raise InvalidInputError(f"layer_norm: gain/bias of shape {gain.shape}/{bias.shape} for input {x.shape}")
    mu = x.mean(axis=1, keepdims=True)
    xc = x - mu
    var = np.mean(xc * xc, axis=1, keepdims=True)
    return xc / np.sqrt(var + ln_eps) * gain + bias


def feed_forward(x, params: BlockParams) -> np.ndarray:
    return np.maximum(x @ params.w1 + params.b1, 0.0) @ params.w2 + params.b2


def encoder_block(X, params: BlockParams, cfg: Optional[AttentionConfig]) -> np.ndarray:
    """``LN(h + FFN(h))`` with ``h = LN(X + MHA(X))``; ``cfg=None`` runs the
    vanilla-attention block."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != params.d_model:
        raise InvalidInputError(f"input has shape {X.shape}, expected (N, {params.d_model})")
    attn = multi_head_pro_attention(X, params.wq, params.wk, params.wv, params.wo, params.heads, cfg)
    h = layer_norm(X + attn, params.ln1_g, params.ln1_b, params.ln_eps)
    return layer_norm(h + feed_forward(h, params), params.ln2_g, params.ln2_b, params.ln_eps)


def token_influence(X, params: BlockParams, cfg: Optional[AttentionConfig], token: int, delta) -> float:
    """Frobenius change of the block output on all tokens except ``token``
    when ``delta`` is added to that token's input row."""
    X = np.asarray(X, dtype=np.float64)
    Xp = X.copy()
    Xp[token] += delta
    diff = encoder_block(Xp, params, cfg) - encoder_block(X, params, cfg)
    return float(np.linalg.norm(np.delete(diff, token, axis=0)))


def influence_study(
    cfg: Optional[AttentionConfig],
    seeds: Iterable[int] = range(20),
    n_tokens: int = 8,
    d_model: int = 16,
    d_ff: int = 32,
    heads: int = 4,
    magnitude: float = 10.0,
    token: int = 0,
) -> np.ndarray:
    """Cross-token influence of a fixed-norm perturbation, one value per seed.

    Seed ``s`` draws block parameters from ``17 + s``, the input from
    ``1000 + s`` and the perturbation direction from ``2000 + s``, so two
    configurations see identical blocks, inputs and perturbations.
    """
    out = []
    for s in seeds:
        params = random_params(d_model, d_ff, heads, seed=17 + s)
        X = normal_matrix(1000 + s, n_tokens, d_model)
        direction = normal_matrix(2000 + s, 1, d_model)[0]
        delta = magnitude * direction / np.linalg.norm(direction)
        out.append(token_influence(X, params, cfg, token, delta))
    return np.array(out)


_SINGLE_FILES = ("wo", "w1", "b1", "w2", "b2", "ln1_g", "ln1_b", "ln2_g", "ln2_b")


def save_params(params: BlockParams, directory) -> None:
    from .io import write_matrix

    os.makedirs(directory, exist_ok=True)
    for h in range(params.heads):
        for name in ("wq", "wk", "wv"):
            write_matrix(os.path.join(directory, f"{name}_h{h}.mat"), getattr(params, name)[h])
    for name in _SINGLE_FILES:
        arr = getattr(params, name)
        write_matrix(os.path.join(directory, f"{name}.mat"), arr.reshape(1, -1) if arr.ndim == 1 else arr)
    meta = {"h": params.heads, "d_model": params.d_model, "d_ff": params.d_ff, "ln_eps": params.ln_eps}
    with open(os.path.join(directory, "block.json"), "w", encoding="utf-8") as f:
        json.dump(meta, f)


def load_params(directory) -> BlockParams:
    """Load a parameter bundle; a missing file raises ``FileNotFoundError``
    naming it."""
    from .io import read_matrix

    def path(name):
        p = os.path.join(directory, name)
        if not os.path.isfile(p):
            raise FileNotFoundError(f"missing parameter file: {p}")
        return p

    with open(path("block.json"), encoding="utf-8") as f:
        meta = json.load(f)
    unknown = set(meta) - {"h", "d_model", "d_ff", "ln_eps"}
    if unknown:
        raise InvalidInputError(f"unknown keys in block.json: {sorted(unknown)}")
    H = int(meta["h"])
    arrays = {name: [read_matrix(path(f"{name}_h{h}.mat")) for h in range(H)] for name in ("wq", "wk", "wv")}
    for name in _SINGLE_FILES:
        arrays[name] = read_matrix(path(f"{name}.mat"))
    return BlockParams(
        **arrays,
        heads=H,
        d_model=int(meta["d_model"]),
        d_ff=int(meta["d_ff"]),
        ln_eps=float(meta.get("ln_eps", LN_EPS)),
    )
