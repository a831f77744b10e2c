"""Counter-based random streams: one independent substream per path.

Every draw is a pure function of ``(seed, path, counter)``, so a batch can
be split across workers, or have its finished paths dropped, without
changing any other path's numbers.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1
_S30, _S27, _S31, _S11 = (np.uint64(k) for k in (30, 27, 31, 11))


def mix64(z):
    """splitmix64 finaliser on uint64 arrays (wrapping arithmetic)."""
    # array arithmetic on uint64 wraps silently; keep z an array throughout
    z = np.atleast_1d(np.asarray(z, dtype=np.uint64)) + _GOLDEN
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


class PathStreams:
    """Keys for ``n`` paths derived from a 64-bit seed."""

    def __init__(self, seed: int, n: int):
        self.seed = int(seed) & _MASK64
        base = mix64(np.uint64(self.seed))[0]
        self.keys = mix64(base ^ mix64(np.arange(n, dtype=np.uint64)))

    def bits(self, idx: np.ndarray, counter: int) -> np.ndarray:
        off = np.uint64((counter * 0x9E3779B97F4A7C15) & _MASK64)
        return mix64(self.keys[idx] + off)

    def uniform(self, idx: np.ndarray, counter: int) -> np.ndarray:
        """Uniforms on the open interval (0, 1)."""
        b = self.bits(idx, counter) >> _S11
        return (b.astype(np.float64) + 0.5) * 2.0 ** -53

    def normal_pair(self, idx: np.ndarray, m: int) -> tuple:
        """Two independent standard normals from counters ``4m`` and ``4m + 1``."""
        rad = np.sqrt(-2.0 * np.log(self.uniform(idx, 4 * m)))
        ang = 2.0 * np.pi * self.uniform(idx, 4 * m + 1)
        return rad * np.cos(ang), rad * np.sin(ang)

    def increment(self, idx: np.ndarray, step: int) -> np.ndarray:
        """The normal used by the simulator at ``step``."""
        z0, z1 = self.normal_pair(idx, step // 2)
        return z0 if step % 2 == 0 else z1
