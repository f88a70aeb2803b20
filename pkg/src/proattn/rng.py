"""SplitMix64 stream with Box-Muller normals.

The procedure is fixed so any language can reproduce the samples bit for bit:

* ``next_u64``: ``state += 0x9E3779B97F4A7C15`` (mod 2**64), then the
  standard SplitMix64 finaliser on the new state.
* ``next_unit``: ``((x >> 11) + 1) * 2**-53``, a double in ``(0, 1]``.
* ``normal_pair``: draws ``u1`` then ``u2`` and returns
  ``(r cos t, r sin t)`` with ``r = sqrt(-2 ln u1)``, ``t = 2 pi u2``.
* ``normals(n)`` consumes pairs and keeps the cosine value first; an odd
  trailing sine value is discarded.
"""

from __future__ import annotations

import math

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + _GOLDEN) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def next_unit(self) -> float:
        return ((self.next_u64() >> 11) + 1) * 2.0**-53

    def normal_pair(self) -> tuple[float, float]:
        u1 = self.next_unit()
        u2 = self.next_unit()
        r = math.sqrt(-2.0 * math.log(u1))
        t = 2.0 * math.pi * u2
        return r * math.cos(t), r * math.sin(t)

    def normals(self, n: int) -> np.ndarray:
        out = np.empty(n)
        for i in range(0, n, 2):
            c, s = self.normal_pair()
            out[i] = c
            if i + 1 < n:
                out[i + 1] = s
        return out


def normal_matrix(seed: int, rows: int, cols: int) -> np.ndarray:
    """Standard normals in row-major order from a fresh stream."""
    return SplitMix64(seed).normals(rows * cols).reshape(rows, cols)
