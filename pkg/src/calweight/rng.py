"""Counter-based standard normals addressed by ``(seed, replicate)``.

The generator is numpy's Philox-4x64 keyed by the seed. Replicate ``r``
owns a fixed block of raw 64-bit outputs starting at counter
``r * steps``, so any range of replicates can be regenerated on its own and
the values do not depend on how replicates are split across workers.

Conversion: the top 53 bits of each raw word become ``u = (k + 0.5) / 2**53``
(strictly inside (0, 1)), and the normal is the inverse normal CDF of ``u``.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

_WORDS_PER_STEP = 4  # Philox-4x64 emits four 64-bit words per counter increment


class CounterNormalStream:
    """Blocks of ``width`` standard normals per replicate for a given seed."""

    def __init__(self, seed: int, width: int) -> None:
        if seed < 0:
            raise ValueError("seed must be an unsigned integer")
        if width < 1:
            raise ValueError("width must be positive")
        self.seed = int(seed)
        self.width = int(width)
        self.steps = -(-self.width // _WORDS_PER_STEP)

    def block(self, start: int, stop: int) -> np.ndarray:
        """Normals for replicates ``start .. stop-1`` as a ``(stop-start, width)`` array."""
        count = stop - start
        if count <= 0:
            return np.empty((0, self.width))
        bg = np.random.Philox(key=self.seed)
        if start:
            bg.advance(start * self.steps)
        raw = bg.random_raw(count * self.steps * _WORDS_PER_STEP)
        raw = raw.reshape(count, self.steps * _WORDS_PER_STEP)[:, : self.width]
        u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
        return ndtri(u)

    def replicate(self, r: int) -> np.ndarray:
        return self.block(r, r + 1)[0]
