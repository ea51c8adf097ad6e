"""Deterministic random streams.

Every random draw in the project flows through a `Rng` seeded explicitly;
there is no ambient entropy. Independent sub-streams are derived with
`spawn`, so results never depend on draw interleaving between components.
"""

from __future__ import annotations

import numpy as np


class Rng:
    """Seeded random stream with uniform and normal variates.

    Normals are produced by the Box-Muller transform from uniform draws,
    so the stream is fully determined by the PCG64 uniform sequence.
    """

    def __init__(self, seed, _key: tuple = ()):
        self.seed = int(seed)
        self._key = tuple(int(k) for k in _key)
        self._gen = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence([self.seed, *self._key]))
        )
        self._normal_spare: float | None = None

    def spawn(self, *key: int) -> "Rng":
        """Independent stream derived from this seed and an integer key path."""
        return Rng(self.seed, self._key + tuple(int(k) for k in key))

    def uniform(self, shape=None, low: float = 0.0, high: float = 1.0):
        u = self._gen.random(size=shape)
        return low + (high - low) * u

    def normal(self, shape=None):
        """Standard normal draws via Box-Muller."""
        n = 1 if shape is None else int(np.prod(shape))
        m = (n + 1) // 2
        u1 = 1.0 - self._gen.random(size=m)  # in (0, 1], log-safe
        u2 = self._gen.random(size=m)
        r = np.sqrt(-2.0 * np.log(u1))
        z = np.concatenate([r * np.cos(2.0 * np.pi * u2), r * np.sin(2.0 * np.pi * u2)])[:n]
        if shape is None:
            return float(z[0])
        return z.reshape(shape)

    def normal_f32(self, shape) -> np.ndarray:
        return self.normal(shape).astype(np.float32)

    def integers(self, low, high=None, shape=None):
        return self._gen.integers(low, high, size=shape)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def choice(self, n: int, size: int, p=None, replace: bool = True) -> np.ndarray:
        return self._gen.choice(n, size=size, p=p, replace=replace)
