"""Recursive diamond Bayesian network.

Level 0 holds two D nodes, the 1-bit vectors 0 and 1.  To go up one level,
every vector is stretched by repeating each bit twice, and every edge joining
two vectors at normalized Hamming distance ``2^-level`` is split: its two
midpoints become new D nodes and a fresh fair coin (an X node) decides which
midpoint copies which endpoint.

Disagreement probabilities match normalized Hamming distance along the
diamond edges and between sibling midpoints.  They do not match for every
pair: the two midpoints of one split are exchangeable as seen from any node
outside that split, while their Hamming distances to it can differ.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import RngSeed, as_seed

MAX_LEVEL = 6


@dataclass(frozen=True, eq=False)
class DiamondNet:
    """D-node bit vectors and the X-node switches, in creation order.

    ``switches[k] = (x, y, u, v, level)``: coin ``k`` routes D node ``u`` to
    ``x`` and ``v`` to ``y`` when it lands 0, and crosses them when it lands 1
    (``x < y`` and ``u < v`` lexicographically).
    """

    level: int
    vectors: np.ndarray
    switches: np.ndarray
    edges: np.ndarray

    @property
    def d_count(self) -> int:
        return len(self.vectors)

    @property
    def x_count(self) -> int:
        return len(self.switches)

    @property
    def splittable_edges(self) -> int:
        return len(self.edges)

    def hamming(self) -> np.ndarray:
        """Normalized Hamming distances (mean absolute bit difference)."""
        v = self.vectors.astype(float)
        return np.abs(v[:, None, :] - v[None, :, :]).mean(axis=2)

    def sample(self, rng: RngSeed | int, size: int = 1) -> np.ndarray:
        coins = as_seed(rng).generator().integers(0, 2, size=(size, self.x_count), dtype=np.uint8)
        return self.resolve(coins)

    def resolve(self, coins: np.ndarray) -> np.ndarray:
        """D-node values for given X-node outcomes, shape ``(size, d_count)``."""
        coins = np.atleast_2d(coins).astype(bool)
        out = np.zeros((coins.shape[0], self.d_count), dtype=np.uint8)
        out[:, 1] = 1
        for k, (x, y, u, v, _) in enumerate(self.switches):
            flip = coins[:, k]
            out[:, x] = np.where(flip, out[:, v], out[:, u])
            out[:, y] = np.where(flip, out[:, u], out[:, v])
        return out


def _lex_key(vec: np.ndarray) -> tuple:
    return tuple(int(b) for b in vec)


def gen_diamond(level: int) -> DiamondNet:
    """Build ``G^(level)``; the network itself involves no randomness."""
    if not 0 <= level <= MAX_LEVEL:
        raise ValueError(f"level must lie in [0, {MAX_LEVEL}]")
    vectors = [np.array([0], dtype=np.uint8), np.array([1], dtype=np.uint8)]
    edges = [(0, 1)]
    switches = []
    for lvl in range(1, level + 1):
        vectors = [np.repeat(v, 2) for v in vectors]
        new_edges = []
        ordered = sorted(
            (tuple(sorted((u, v), key=lambda i: _lex_key(vectors[i]))) for u, v in edges),
            key=lambda e: (_lex_key(vectors[e[0]]), _lex_key(vectors[e[1]])),
        )
        for u, v in ordered:
            diff = np.nonzero(vectors[u] != vectors[v])[0]
            mids = []
            for p in diff:
                m = vectors[u].copy()
                m[p] = vectors[v][p]
                mids.append(m)
            mids.sort(key=_lex_key)
            x = len(vectors)
            y = x + 1
            vectors.extend(mids)
            switches.append((x, y, u, v, lvl))
            new_edges.extend([(u, x), (x, v), (u, y), (y, v)])
        edges = new_edges
    return DiamondNet(
        level,
        np.array(vectors, dtype=np.uint8),
        np.array(switches, dtype=np.int64).reshape(-1, 5),
        np.array(edges, dtype=np.int64),
    )


def diamond_counts(level: int) -> tuple[int, int, int]:
    """Closed forms for (splittable edges, D nodes, X nodes)."""
    p = 4**level
    return p, (2 * p + 4) // 3, (p - 1) // 3
