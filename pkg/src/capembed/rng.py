"""Reproducible random streams.

Every random choice in the package is drawn from a Philox counter-based
generator keyed by a ``(seed, stream)`` pair.  Child streams are derived by
hashing the parent stream id together with a label and an index, so that the
randomness consumed by one component (a boosting copy, a coordinate block, a
forest component) never depends on how much randomness another component
consumed.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngSeed:
    """A 64-bit master seed plus a 64-bit stream id."""

    seed: int
    stream: int = 0

    def __post_init__(self):
        if not (0 <= self.seed <= _MASK64):
            raise ValueError(f"seed must fit in 64 bits, got {self.seed}")
        if not (0 <= self.stream <= _MASK64):
            raise ValueError(f"stream must fit in 64 bits, got {self.stream}")

    def child(self, label: str, index: int = 0) -> "RngSeed":
        """Derive an independent stream named by ``label`` and ``index``."""
        h = hashlib.blake2b(digest_size=8)
        h.update(self.stream.to_bytes(8, "little"))
        h.update(label.encode())
        h.update(int(index).to_bytes(8, "little", signed=True))
        return RngSeed(self.seed, int.from_bytes(h.digest(), "little"))

    def generator(self) -> np.random.Generator:
        key = np.array([self.seed, self.stream], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))


def as_seed(rng: RngSeed | int) -> RngSeed:
    if isinstance(rng, RngSeed):
        return rng
    return RngSeed(int(rng) & _MASK64)
