#!/usr/bin/env python3
"""
Random Streams
==============
Seeded, splittable random number streams.

Usage:
    from random_streams import RngStream

    master = RngStream(seed=0)
    cell = master.child(3)          # independent sub-stream
    z = cell.normal(size=(10, 2))

A stream is identified by (seed, path of stream ids). Two streams built from
the same identity produce identical draws in any process and at any thread
count. Streams are single-owner: never share one between workers, hand each
worker its own child instead.
"""

from typing import Optional

import numpy as np

_SEED_MASK = (1 << 64) - 1


class RngStream:
    """numpy Generator bound to a (seed, stream path) identity."""

    def __init__(self, seed: int = 0, stream: int = 0, path: Optional[tuple] = None):
        self.seed = int(seed) & _SEED_MASK
        self.path = tuple(int(p) for p in path) if path is not None else (int(stream),)
        sequence = np.random.SeedSequence(entropy=self.seed, spawn_key=self.path)
        self.generator = np.random.Generator(np.random.PCG64(sequence))

    @property
    def stream(self) -> int:
        """Stream id of this stream within its parent."""
        return self.path[-1]

    def child(self, stream: int) -> "RngStream":
        """Independent sub-stream keyed by an integer id."""
        return RngStream(self.seed, path=self.path + (int(stream) & _SEED_MASK,))

    def child_for_value(self, value: float) -> "RngStream":
        """
        Sub-stream keyed by the bit pattern of a float.

        Used for per-bandwidth feature draws: the same sigma on the same master
        seed always yields the same frequencies, whatever grid it came from.
        """
        bits = int(np.array(value, dtype=np.float64).view(np.uint64))
        return self.child(bits)

    # ============================================
    # Draws
    # ============================================

    def normal(self, loc=0.0, scale=1.0, size=None) -> np.ndarray:
        return self.generator.normal(loc, scale, size)

    def uniform(self, low=0.0, high=1.0, size=None) -> np.ndarray:
        return self.generator.uniform(low, high, size)

    def integers(self, low, high=None, size=None) -> np.ndarray:
        return self.generator.integers(low, high, size)

    def multinomial(self, n: int, pvals) -> np.ndarray:
        return self.generator.multinomial(n, pvals)

    def dirichlet(self, alpha) -> np.ndarray:
        return self.generator.dirichlet(alpha)

    def permutation(self, x) -> np.ndarray:
        return self.generator.permutation(x)

    def choice(self, a, size=None, replace=True) -> np.ndarray:
        return self.generator.choice(a, size=size, replace=replace)

    def sklearn_seed(self) -> int:
        """Integer seed for scikit-learn estimators."""
        return int(self.generator.integers(0, 2**31 - 1))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, path={self.path})"
