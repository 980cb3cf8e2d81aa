"""Counter-based random number stream.

All randomness in the package flows through :class:`RngStream`, a SplitMix64
generator addressed by (seed, counter).  Draws depend only on those two
integers, so sequences are bit-identical across platforms and runs, streams
can be split without coordination, and any draw can be replayed by restoring
the counter.  Gaussians come from Box-Muller on top of the uniform stream.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_TWO53 = float(1 << 53)


def _splitmix64(z: np.ndarray) -> np.ndarray:
    """Finalizer of the SplitMix64 generator, vectorized over uint64 arrays."""
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


class RngStream:
    """Deterministic stream of uniforms/Gaussians keyed by (seed, counter).

    Parameters
    ----------
    seed : int
        64-bit stream key.
    counter : int
        Index of the next raw draw; advances with every uniform consumed.
    """

    def __init__(self, seed: int, counter: int = 0):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.counter = int(counter)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, counter={self.counter})"

    def _raw(self, n: int) -> np.ndarray:
        with np.errstate(over="ignore"):
            idx = np.arange(self.counter, self.counter + n, dtype=np.uint64)
            out = _splitmix64((idx + np.uint64(1)) * _GOLDEN + np.uint64(self.seed))
        self.counter += n
        return out

    def uniform(self, shape=()) -> np.ndarray:
        """Uniform draws in [0, 1) as float64 of the given shape."""
        n = int(np.prod(shape, dtype=np.int64)) if shape else 1
        u = (self._raw(n) >> np.uint64(11)).astype(np.float64) / _TWO53
        return u.reshape(shape) if shape else u[0]

    def normal(self, shape=(), mean: float = 0.0, std: float = 1.0) -> np.ndarray:
        """Gaussian draws via Box-Muller; exact `mean` when std == 0."""
        n = int(np.prod(shape, dtype=np.int64)) if shape else 1
        pairs = (n + 1) // 2
        # u1 shifted into (0, 1] so log() is safe.
        u1 = ((self._raw(pairs) >> np.uint64(11)).astype(np.float64) + 1.0) / _TWO53
        u2 = (self._raw(pairs) >> np.uint64(11)).astype(np.float64) / _TWO53
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        z = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:n]
        out = mean + std * z
        return out.reshape(shape) if shape else out[0]

    def integers(self, low: int, high: int, shape=()) -> np.ndarray:
        """Integer draws in [low, high) (rejection-free modulo; fine for small ranges)."""
        n = int(np.prod(shape, dtype=np.int64)) if shape else 1
        span = np.uint64(high - low)
        vals = (self._raw(n) % span).astype(np.int64) + low
        return vals.reshape(shape) if shape else int(vals[0])

    def permutation(self, n: int) -> np.ndarray:
        """Deterministic permutation of range(n): stable argsort of raw keys."""
        return np.argsort(self._raw(n), kind="stable")

    def substream(self, index: int) -> "RngStream":
        """Index-addressed child stream, independent of this stream's counter."""
        with np.errstate(over="ignore"):
            key = _splitmix64(
                np.array(
                    [np.uint64(self.seed) + _GOLDEN * (np.uint64(index) + np.uint64(0x1234567))],
                    dtype=np.uint64,
                )
            )[0]
        return RngStream(int(key))
