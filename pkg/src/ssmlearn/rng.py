"""Seeded, splittable random streams.

Every sampler in the package draws exclusively from an :class:`RngStream`,
which is backed by the counter-based Philox generator keyed on
``(seed, stream)``.  Identical ``(seed, stream)`` pairs reproduce identical
draw sequences bit for bit; distinct stream ids give statistically
independent streams, so parallel chains can share a seed and differ only in
their stream id.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def _splitmix(z):
    # splitmix64 finalizer; scrambles substream ids away from small integers
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


class RngStream:
    """A named random stream: ``(seed, stream)`` fully determines all draws."""

    def __init__(self, seed, stream=0):
        self.seed = int(seed) & _MASK64
        self.stream = int(stream) & _MASK64
        # Philox takes a 128-bit key; pack seed into the low and stream into
        # the high 64 bits.
        self.gen = np.random.Generator(
            np.random.Philox(key=self.seed | (self.stream << 64))
        )

    def substream(self, i):
        """Derive stream ``i``; deterministic in ``(seed, stream, i)``."""
        return RngStream(self.seed, _splitmix(self.stream ^ _splitmix(int(i) + 1)))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream={self.stream})"
