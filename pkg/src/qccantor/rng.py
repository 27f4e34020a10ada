"""SplitMix64 counter-based generator.

Output k of a stream seeded with ``seed`` is ``mix(seed + (k + 1) * GAMMA)``
with the standard SplitMix64 finalizer, so any implementation that follows
the same three lines reproduces the sample sequence bit for bit.
"""

from __future__ import annotations

import numpy as np

GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK = (1 << 64) - 1


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


class SplitMix64:
    def __init__(self, seed: int = 0):
        self.state = int(seed) & _MASK
        self.counter = 0

    def next_u64(self, n: int) -> np.ndarray:
        k = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        with np.errstate(over="ignore"):
            z = np.uint64(self.state) + k * GAMMA
            return _mix(z)

    def uniform(self, n: int, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        """Doubles in [low, high) built from the top 53 bits."""
        u = (self.next_u64(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        return low + (high - low) * u

    def integers(self, n: int, high: int) -> np.ndarray:
        return np.floor(self.uniform(n) * high).astype(np.int64)

    def disk(self, n: int, radius: float = 1.0) -> np.ndarray:
        """Uniform points in the disk of the given radius, as complex numbers."""
        r = radius * np.sqrt(self.uniform(n))
        theta = self.uniform(n, 0.0, 2.0 * np.pi)
        return r * np.exp(1j * theta)

    def spawn(self, key: int) -> "SplitMix64":
        """Independent child stream, keyed deterministically."""
        child_seed = int(_mix(np.array([self.state ^ (int(key) * 0x632BE59BD9B4E019 & _MASK)],
                                       dtype=np.uint64))[0])
        return SplitMix64(child_seed)
