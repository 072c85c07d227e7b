"""Heavy-light (caterpillar) decomposition and the fixed-cap tree embedder.

Walking from a vertex to the root and recording how much of each caterpillar
was traversed gives an isometric but high-dimensional l1 embedding.  Cutting
long caterpillars into snippets of length ``M / log n`` keeps every
coordinate small, and hashing snippets into ``6 log n`` buckets followed by a
fixed-cap lazy snake per bucket gives the low-dimensional capped embedding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .lazy_snake import snake_columns
from .metric_core import Embedding, WeightedTree, log_scale
from .rng import RngSeed, as_seed

# leftovers shorter than this fraction of a snippet are rounding noise
_LEFTOVER_EPS = 1e-12


@dataclass(frozen=True, eq=False)
class CaterpillarDecomposition:
    """Vertical paths partitioning the tree's edges.

    ``chains[c]`` lists the vertices of caterpillar ``c`` from top to bottom;
    its edges join consecutive vertices.  ``chain_of[v]`` is the caterpillar
    holding the edge from ``v`` to its parent (-1 for the root) and
    ``offset[v]`` is the distance from that caterpillar's top vertex to ``v``.
    """

    chains: list
    chain_of: np.ndarray
    offset: np.ndarray
    chain_length: np.ndarray
    heavy_child: np.ndarray

    def chains_on_root_path(self, tree: WeightedTree, v: int) -> int:
        count = 0
        while v != tree.root:
            count += 1
            v = self.chains[self.chain_of[v]][0]
        return count

    def max_chains_on_root_path(self, tree: WeightedTree) -> int:
        return max(self.chains_on_root_path(tree, v) for v in range(tree.n))


def decompose(tree: WeightedTree) -> CaterpillarDecomposition:
    """Heavy child = largest subtree, ties to the lowest vertex id."""
    size = tree.subtree_size
    heavy = np.full(tree.n, -1, dtype=np.int64)
    for v in range(tree.n):
        kids = tree.children[v]
        if kids:
            heavy[v] = min(kids, key=lambda c: (-size[c], c))

    chains: list[list[int]] = []
    chain_of = np.full(tree.n, -1, dtype=np.int64)
    offset = np.zeros(tree.n)
    lengths = []

    def grow(top: int, first: int):
        cid = len(chains)
        path = [top]
        x, dist = first, 0.0
        while x >= 0:
            dist += tree.parent_length[x]
            path.append(x)
            chain_of[x] = cid
            offset[x] = dist
            x = heavy[x]
        chains.append(path)
        lengths.append(dist)

    if tree.n > 1:
        grow(tree.root, heavy[tree.root])
    for v in tree.preorder:
        for c in tree.children[v]:
            if c != heavy[v]:
                grow(int(v), c)
    return CaterpillarDecomposition(chains, chain_of, offset, np.array(lengths), heavy)


@dataclass(frozen=True, eq=False)
class SnippedEmbedding:
    """Sparse isometric embedding with one coordinate per snippet.

    ``bounds[q]`` is the ``(start, end)`` interval, measured from the top of
    caterpillar ``snippet_chain[q]``, that snippet ``q`` covers.
    """

    vectors: sp.csr_matrix
    snippet_size: float
    snippet_chain: np.ndarray
    bounds: np.ndarray

    @property
    def snippet_count(self) -> int:
        return self.vectors.shape[1]


def _snippet_bounds(total: float, size: float) -> np.ndarray:
    # caterpillars no longer than one snippet stay whole; otherwise full
    # snippets are cut from the bottom up and the leftover sits on top
    if total <= size:
        return np.array([0.0, total])
    k = int(np.floor(total / size))
    leftover = total - k * size
    if leftover < 0:
        k -= 1
        leftover = total - k * size
    if leftover <= _LEFTOVER_EPS * size:
        cuts = total - size * np.arange(k, -1, -1, dtype=float)
        cuts[0] = 0.0
    else:
        cuts = np.concatenate([[0.0], total - size * np.arange(k, -1, -1, dtype=float)])
    cuts[-1] = total
    return cuts


def snip_embed(tree: WeightedTree, decomp: CaterpillarDecomposition, M: float) -> SnippedEmbedding:
    if not M > 0:
        raise ValueError("cap M must be positive")
    size = M / log_scale(tree.n)
    first = []
    cuts_per_chain = []
    total = 0
    for length in decomp.chain_length:
        cuts = _snippet_bounds(float(length), size)
        cuts_per_chain.append(cuts)
        first.append(total)
        total += len(cuts) - 1

    rows: list[dict] = [dict() for _ in range(tree.n)]
    for v in tree.preorder:
        c = decomp.chain_of[v]
        if c < 0:
            continue
        top = decomp.chains[c][0]
        row = dict(rows[top])
        cuts = cuts_per_chain[c]
        p = decomp.offset[v]
        q = 0
        while q < len(cuts) - 1 and cuts[q] < p:
            row[first[c] + q] = min(p, cuts[q + 1]) - cuts[q]
            q += 1
        rows[v] = row

    indptr = np.zeros(tree.n + 1, dtype=np.int64)
    cols, vals = [], []
    for v, row in enumerate(rows):
        keys = sorted(row)
        cols.extend(keys)
        vals.extend(row[k] for k in keys)
        indptr[v + 1] = len(cols)
    mat = sp.csr_matrix(
        (np.array(vals, dtype=float), np.array(cols, dtype=np.int64), indptr), shape=(tree.n, total)
    )
    chain_ids = np.concatenate(
        [np.full(len(c) - 1, k, dtype=np.int64) for k, c in enumerate(cuts_per_chain)]
        or [np.zeros(0, dtype=np.int64)]
    )
    bounds = np.concatenate(
        [np.column_stack([c[:-1], c[1:]]) for c in cuts_per_chain] or [np.zeros((0, 2))]
    )
    return SnippedEmbedding(mat, size, chain_ids, bounds)


class FixedCapTreeEmbedder:
    """Single-copy fixed-cap tree embedder with the snipping precomputed.

    Calling it with a seed draws a fresh snippet hash and fresh snake coins
    and returns an ``n x 6 log n`` array.
    """

    def __init__(self, tree: WeightedTree, M: float):
        if not M > 0:
            raise ValueError("cap M must be positive")
        self.tree = tree
        self.M = float(M)
        self.log_n = log_scale(tree.n)
        self.buckets = 6 * self.log_n
        self.decomp = decompose(tree)
        self.snipped = snip_embed(tree, self.decomp, self.M)

    def bucket_locations(self, rng: RngSeed) -> np.ndarray:
        s = self.snipped.snippet_count
        h = rng.child("hash").generator().integers(0, self.buckets, size=s)
        onehot = sp.csr_matrix((np.ones(s), (np.arange(s), h)), shape=(s, self.buckets))
        return np.asarray((self.snipped.vectors @ onehot).todense())

    def __call__(self, rng: RngSeed | int) -> np.ndarray:
        rng = as_seed(rng)
        locs = self.bucket_locations(rng)
        return snake_columns(locs, self.M / self.log_n, rng.child("snake").generator())


def fixed_cap_tree_embed(tree: WeightedTree, M: float, rng: RngSeed | int) -> Embedding:
    """One copy: ``6 log n`` coordinates, each pair within ``6 min(d, M)``."""
    return Embedding(FixedCapTreeEmbedder(tree, M)(rng))
