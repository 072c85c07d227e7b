"""Random instances: trees, Lipschitz caps, lines, point sets, Ising models."""

from __future__ import annotations

import numpy as np

from .metric_core import CapAssignment, LineMetric, PointSet, WeightedTree, log_scale
from .rng import RngSeed, as_seed
from .tree_ising import GeneralTIM, SymmetricTIM


def _parents(n: int, gen: np.random.Generator) -> np.ndarray:
    parent = np.full(n, -1, dtype=np.int64)
    for v in range(1, n):
        parent[v] = gen.integers(0, v)
    return parent


def gen_random_tree(n: int, max_weight: float, rng: RngSeed | int) -> WeightedTree:
    """Each vertex attaches to a uniformly random earlier vertex."""
    if n < 2:
        raise ValueError("need at least two vertices")
    gen = as_seed(rng).generator()
    parent = _parents(n, gen)
    lengths = gen.uniform(0.0, max_weight, size=n)
    return WeightedTree.from_parents(parent.tolist(), lengths.tolist(), 0)


def gen_lipschitz_caps(tree: WeightedTree, rng: RngSeed | int, root_cap_max: float | None = None) -> CapAssignment:
    """Random walk down the tree: each cap moves by at most its edge length.

    Negative values are clamped to 0, which keeps the walk Lipschitz.
    """
    gen = as_seed(rng).generator()
    if root_cap_max is None:
        root_cap_max = max(float(tree.parent_length.max()), 1e-12) * log_scale(tree.n)
    caps = np.zeros(tree.n)
    steps = gen.uniform(-1.0, 1.0, size=tree.n)
    caps[tree.root] = gen.uniform(0.0, root_cap_max)
    for v in tree.preorder[1:]:
        caps[v] = max(0.0, caps[tree.parent[v]] + steps[v] * tree.parent_length[v])
    return CapAssignment.for_tree(tree, caps)


def gen_line(n: int, max_gap: float, rng: RngSeed | int) -> LineMetric:
    gen = as_seed(rng).generator()
    return LineMetric.from_gaps(gen.uniform(0.0, max_gap, size=n - 1))


def gen_line_caps(line: LineMetric, rng: RngSeed | int, low: float, high: float) -> CapAssignment:
    """Strictly positive Lipschitz caps along a line, kept inside ``[low, high]``."""
    if not 0 < low <= high:
        raise ValueError("need 0 < low <= high")
    gen = as_seed(rng).generator()
    caps = np.empty(line.n)
    caps[0] = gen.uniform(low, high)
    steps = gen.uniform(-1.0, 1.0, size=line.n)
    gaps = np.diff(line.locs)
    for k in range(1, line.n):
        caps[k] = min(high, max(low, caps[k - 1] + steps[k] * gaps[k - 1]))
    return CapAssignment.for_line(line, caps)


def gen_points(n: int, d: int, rng: RngSeed | int) -> PointSet:
    gen = as_seed(rng).generator()
    return PointSet(gen.random((n, d)))


def gen_random_tim(n: int, kind: str, rng: RngSeed | int) -> SymmetricTIM | GeneralTIM:
    """Uniform-attachment tree; uniform flips, or uniform root marginal and
    channel rows drawn uniformly from the simplex."""
    if n < 2:
        raise ValueError("need at least two vertices")
    gen = as_seed(rng).generator()
    parent = _parents(n, gen)
    tree = WeightedTree.from_parents(parent.tolist(), [1.0] * n, 0)
    if kind == "symmetric":
        return SymmetricTIM(tree, gen.random(n))
    if kind == "general":
        p0 = float(gen.random())
        rows = gen.dirichlet([1.0, 1.0], size=(n, 2))
        return GeneralTIM(tree, p0, rows)
    raise ValueError(f"kind must be 'symmetric' or 'general', got {kind!r}")
