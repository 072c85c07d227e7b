"""Tree Ising models and the reductions of their disagreement metric.

A symmetric model flips the bit across each edge independently with
probability ``theta``; a general model is a rooted Bayesian network with a
root marginal and a 2x2 channel ``P[X_child | X_parent]`` per edge.  The
metric of interest is ``Pr[X_i != X_j]``.

Joint tables are 2x2 arrays ``J[a, b] = Pr[X_i = a, X_j = b]``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numba
import numpy as np
from scipy.special import expit

from .build_clean import GeneralBuildCleanEmbedder
from .caterpillar import FixedCapTreeEmbedder
from .lazy_snake import boosted_distances
from .metric_core import (
    TOL,
    CapAssignment,
    Embedding,
    PointSet,
    WeightedTree,
    l1_distance_matrix,
    lipschitz_capped_matrix,
    tree_distance_matrix,
)
from .rng import RngSeed, as_seed

SYMMETRIC_CAP = 0.5


def theta_from_beta(beta):
    """Edge flip probability of an interaction strength, kept inside (0, 1)."""
    theta = expit(-2.0 * np.asarray(beta, dtype=float))
    theta = np.clip(theta, np.finfo(float).tiny, np.nextafter(1.0, 0.0))
    return float(theta) if theta.ndim == 0 else theta


def _flip_channel(theta: float) -> np.ndarray:
    return np.array([[1.0 - theta, theta], [theta, 1.0 - theta]])


@dataclass(frozen=True, eq=False)
class SymmetricTIM:
    """Tree with a flip probability on every edge.

    ``theta[v]`` belongs to the edge between ``v`` and its parent; the root
    entry is unused and kept at 0.
    """

    tree: WeightedTree
    theta: np.ndarray

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float).copy()
        if theta.shape != (self.tree.n,):
            raise ValueError("need one flip probability per vertex (root entry unused)")
        theta[self.tree.root] = 0.0
        if np.any(~np.isfinite(theta)) or np.any(theta < 0) or np.any(theta > 1):
            raise ValueError("flip probabilities must lie in [0, 1]")
        theta.flags.writeable = False
        object.__setattr__(self, "theta", theta)

    @classmethod
    def from_edges(cls, n: int, edges, root: int = 0) -> "SymmetricTIM":
        tree = WeightedTree(n, tuple((u, v, 1.0) for u, v, _ in edges), root)
        theta = np.zeros(n)
        for u, v, t in edges:
            child = v if tree.parent[v] == u else u
            theta[child] = t
        return cls(tree, theta)

    @property
    def n(self) -> int:
        return self.tree.n

    def edges(self):
        return [(int(self.tree.parent[v]), int(v), float(self.theta[v])) for v in range(self.n) if v != self.tree.root]

    def to_general(self) -> "GeneralTIM":
        ch = np.stack([_flip_channel(t) for t in self.theta])
        ch[self.tree.root] = np.eye(2)
        return GeneralTIM(self.tree, 0.5, ch)

    def to_json(self) -> str:
        return json.dumps({"n": self.n, "edges": [{"u": u, "v": v, "theta": t} for u, v, t in self.edges()]})


@dataclass(frozen=True, eq=False)
class GeneralTIM:
    """Root marginal ``Pr[X_root = 0]`` plus one channel per non-root vertex.

    ``channels[v][a, b] = Pr[X_v = b | X_parent(v) = a]``.
    """

    tree: WeightedTree
    root_p0: float
    channels: np.ndarray

    def __post_init__(self):
        ch = np.array(self.channels, dtype=float)
        if ch.shape != (self.tree.n, 2, 2):
            raise ValueError("channels must have shape (n, 2, 2)")
        ch[self.tree.root] = np.eye(2)
        if np.any(ch < 0) or np.any(ch > 1) or np.any(np.abs(ch.sum(axis=2) - 1) > 1e-12):
            raise ValueError("every channel row must be a probability vector")
        if not 0 <= self.root_p0 <= 1:
            raise ValueError("root marginal must be a probability")
        ch.flags.writeable = False
        object.__setattr__(self, "channels", ch)
        object.__setattr__(self, "root_p0", float(self.root_p0))

    @property
    def n(self) -> int:
        return self.tree.n

    @cached_property
    def marginals(self) -> np.ndarray:
        """``marginals[v] = (Pr[X_v = 0], Pr[X_v = 1])``."""
        m = np.zeros((self.n, 2))
        m[self.tree.root] = (self.root_p0, 1.0 - self.root_p0)
        for v in self.tree.preorder[1:]:
            m[v] = m[self.tree.parent[v]] @ self.channels[v]
        return m

    def to_json(self) -> str:
        edges = [
            {"parent": int(self.tree.parent[v]), "child": v, "channel": self.channels[v].tolist()}
            for v in range(self.n)
            if v != self.tree.root
        ]
        return json.dumps(
            {"n": self.n, "root": self.tree.root, "root_marginal_p0": self.root_p0, "edges": edges}
        )


def model_from_json(text: str) -> SymmetricTIM | GeneralTIM:
    data = json.loads(text)
    n = int(data["n"])
    if "root_marginal_p0" in data:
        root = int(data.get("root", 0))
        edges = [(e["parent"], e["child"], 1.0) for e in data["edges"]]
        tree = WeightedTree(n, tuple(edges), root)
        ch = np.tile(np.eye(2), (n, 1, 1))
        for e in data["edges"]:
            if tree.parent[e["child"]] != e["parent"]:
                raise ValueError(f"edge {e['parent']}->{e['child']} does not point away from the root")
            ch[e["child"]] = np.array(e["channel"], dtype=float)
        return GeneralTIM(tree, float(data["root_marginal_p0"]), ch)
    return SymmetricTIM.from_edges(n, [(e["u"], e["v"], float(e["theta"])) for e in data["edges"]])


def _as_general(model) -> GeneralTIM:
    return model.to_general() if isinstance(model, SymmetricTIM) else model


# ---------------------------------------------------------------- exact inference


def pair_joint(model: SymmetricTIM | GeneralTIM, i: int, j: int) -> np.ndarray:
    """Exact 2x2 joint of ``(X_i, X_j)`` via the lowest common ancestor."""
    model = _as_general(model)
    tree = model.tree
    top = tree.lca(i, j)
    legs = []
    for x in (i, j):
        A = np.eye(2)
        while x != top:
            A = model.channels[x] @ A
            x = tree.parent[x]
        legs.append(A)
    return legs[0].T @ np.diag(model.marginals[top]) @ legs[1]


@numba.njit(cache=True)
def _mul2(P, Q):
    R = np.empty((2, 2))
    for a in range(2):
        for b in range(2):
            R[a, b] = P[a, 0] * Q[0, b] + P[a, 1] * Q[1, b]
    return R


@numba.njit(cache=True)
def _all_joints(parent, depth, channels, marg):
    n = len(parent)
    out = np.zeros((n, n, 2, 2))
    for i in range(n):
        out[i, i, 0, 0] = marg[i, 0]
        out[i, i, 1, 1] = marg[i, 1]
        for j in range(i + 1, n):
            A = np.eye(2)
            B = np.eye(2)
            x, y = i, j
            while depth[x] > depth[y]:
                A = _mul2(channels[x], A)
                x = parent[x]
            while depth[y] > depth[x]:
                B = _mul2(channels[y], B)
                y = parent[y]
            while x != y:
                A = _mul2(channels[x], A)
                B = _mul2(channels[y], B)
                x = parent[x]
                y = parent[y]
            for a in range(2):
                for b in range(2):
                    s = 0.0
                    for z in range(2):
                        s += marg[x, z] * A[z, a] * B[z, b]
                    out[i, j, a, b] = s
                    out[j, i, b, a] = s
    return out


def all_pair_joints(model: SymmetricTIM | GeneralTIM) -> np.ndarray:
    """``out[i, j]`` is :func:`pair_joint` of ``(i, j)`` for every pair."""
    model = _as_general(model)
    return _all_joints(
        model.tree.parent, model.tree.depth, np.ascontiguousarray(model.channels), model.marginals
    )


def disagreement(model: SymmetricTIM | GeneralTIM, i: int, j: int) -> float:
    if i == j:
        return 0.0
    if isinstance(model, SymmetricTIM):
        keep = np.prod([1.0 - 2.0 * model.theta[v] for v in model.tree.path_edges(i, j)])
        return float((1.0 - keep) / 2.0)
    J = pair_joint(model, i, j)
    return float(J[0, 1] + J[1, 0])


def disagreement_matrix(model: SymmetricTIM | GeneralTIM) -> np.ndarray:
    if isinstance(model, SymmetricTIM):
        n = model.n
        out = np.zeros((n, n))
        for i in range(n):
            out[i] = _symmetric_row(model, i)
        upper = np.triu(out, 1)
        return upper + upper.T
    J = all_pair_joints(model)
    out = J[:, :, 0, 1] + J[:, :, 1, 0]
    np.fill_diagonal(out, 0.0)
    return out


def _symmetric_row(model: SymmetricTIM, src: int) -> np.ndarray:
    tree = model.tree
    keep = np.ones(model.n)
    seen = np.zeros(model.n, dtype=bool)
    seen[src] = True
    stack = [src]
    while stack:
        u = stack.pop()
        nbrs = list(tree.children[u])
        if tree.parent[u] >= 0:
            nbrs.append(int(tree.parent[u]))
        for v in nbrs:
            if seen[v]:
                continue
            seen[v] = True
            edge = v if tree.parent[v] == u else u
            keep[v] = keep[u] * (1.0 - 2.0 * model.theta[edge])
            stack.append(v)
    return (1.0 - keep) / 2.0


def sample(model: SymmetricTIM | GeneralTIM, rng: RngSeed | int, size: int = 1) -> np.ndarray:
    """``size`` independent assignments, shape ``(size, n)``, drawn top down."""
    gen = as_seed(rng).generator()
    tree = model.tree
    n = tree.n
    u = gen.random((size, n))
    x = np.zeros((size, n), dtype=np.uint8)
    if isinstance(model, SymmetricTIM):
        x[:, tree.root] = u[:, tree.root] < 0.5
        for v in tree.preorder[1:]:
            x[:, v] = x[:, tree.parent[v]] ^ (u[:, v] < model.theta[v])
    else:
        x[:, tree.root] = u[:, tree.root] >= model.root_p0
        for v in tree.preorder[1:]:
            p_one = model.channels[v][x[:, tree.parent[v]], 1]
            x[:, v] = u[:, v] < p_one
    return x


# ---------------------------------------------------------------- symmetric reduction


def reduce_bad_edges(model: SymmetricTIM) -> tuple[SymmetricTIM, np.ndarray]:
    """Fold every ``theta > 1/2`` to ``1 - theta``; return the folded model and,
    per vertex, the parity of folded edges on its root path."""
    tree = model.tree
    bad = model.theta > 0.5
    parity = np.zeros(model.n, dtype=np.uint8)
    for v in tree.preorder[1:]:
        parity[v] = parity[tree.parent[v]] ^ bad[v]
    return SymmetricTIM(tree, np.minimum(model.theta, 1.0 - model.theta)), parity


def symmetric_capped_metric(model: SymmetricTIM) -> np.ndarray:
    """Tree metric with edge lengths ``min(theta, 1 - theta)``, capped at 1/2."""
    reduced, _ = reduce_bad_edges(model)
    dist = tree_distance_matrix(reduced.tree.with_lengths(reduced.theta))
    return np.minimum(dist, SYMMETRIC_CAP)


class SymmetricTimEmbedder:
    """Fixed-cap tree embedding of the folded model plus a parity coordinate."""

    def __init__(self, model: SymmetricTIM):
        reduced, parity = reduce_bad_edges(model)
        self.model = model
        self.parity = parity.astype(float)
        self.tree_embedder = FixedCapTreeEmbedder(reduced.tree.with_lengths(reduced.theta), SYMMETRIC_CAP)

    def boosted(self, copies: int, rng: RngSeed | int) -> Embedding:
        rng = as_seed(rng)
        blocks = [self.tree_embedder(rng.child("copy", c)) / copies for c in range(copies)]
        return Embedding(np.hstack(blocks + [self.parity[:, None]]))

    def boosted_distances(self, copies: int, rng: RngSeed | int, check=None) -> np.ndarray:
        tree_part = boosted_distances(self.tree_embedder, copies, rng, check)
        return tree_part + np.abs(self.parity[:, None] - self.parity[None, :])


def symmetric_tim_embed(model: SymmetricTIM, rng: RngSeed | int, copies: int = 1) -> Embedding:
    return SymmetricTimEmbedder(model).boosted(copies, rng)


# ---------------------------------------------------------------- Bernoulli randomness


def bernoulli_randomness(p0):
    p0 = np.asarray(p0, dtype=float)
    out = 2.0 * np.minimum(p0, 1.0 - p0)
    return float(out) if out.ndim == 0 else out


def cond_bernoulli_randomness(joint, direction: str = "x|y") -> float:
    """``Br(X|Y)`` (or ``Br(Y|X)``) for ``joint[a, b] = Pr[X = a, Y = b]``."""
    J = np.asarray(joint, dtype=float)
    if direction == "x|y":
        return float(2.0 * np.minimum(J[0, :], J[1, :]).sum())
    if direction == "y|x":
        return float(2.0 * np.minimum(J[:, 0], J[:, 1]).sum())
    raise ValueError(f"direction must be 'x|y' or 'y|x', got {direction!r}")


def bias(p0):
    p0 = np.asarray(p0, dtype=float)
    out = np.minimum(p0, 1.0 - p0)
    return float(out) if out.ndim == 0 else out


def is_cross(joint) -> bool:
    J = np.asarray(joint, dtype=float)
    return bool(J[0, 1] + J[1, 0] > 0.5)


def forced_randomness(joint) -> float:
    return max(cond_bernoulli_randomness(joint, "x|y"), cond_bernoulli_randomness(joint, "y|x"))


@dataclass(frozen=True)
class EdgeSummary:
    """Per-vertex view of a general model's edges (root entries are 0)."""

    forced: np.ndarray
    cross: np.ndarray
    cross_parity: np.ndarray
    bias: np.ndarray
    p0: np.ndarray


def edge_summary(model: SymmetricTIM | GeneralTIM) -> EdgeSummary:
    model = _as_general(model)
    tree = model.tree
    m = model.marginals
    forced = np.zeros(model.n)
    cross = np.zeros(model.n, dtype=bool)
    parity = np.zeros(model.n, dtype=np.uint8)
    for v in tree.preorder[1:]:
        p = tree.parent[v]
        J = np.diag(m[p]) @ model.channels[v]
        forced[v] = forced_randomness(J)
        cross[v] = is_cross(J)
        parity[v] = parity[p] ^ cross[v]
    return EdgeSummary(forced, cross, parity, bias(m[:, 0]), m[:, 0].copy())


def forced_tree(model: SymmetricTIM | GeneralTIM) -> tuple[WeightedTree, np.ndarray]:
    """Tree weighted by forced randomness, with biases as vertex caps."""
    s = edge_summary(model)
    return model.tree.with_lengths(s.forced), s.bias


def three_part_metrics(model: SymmetricTIM | GeneralTIM, i: int, j: int) -> tuple[float, float, float]:
    """``(d_marg, d_F, d_negcor)`` for one pair."""
    if i == j:
        return 0.0, 0.0, 0.0
    s = edge_summary(model)
    path = model.tree.path_edges(i, j)
    hi = max(s.bias[i], s.bias[j])
    d_marg = abs(s.p0[i] - s.p0[j])
    d_forced = min(float(np.sum(s.forced[path])), hi)
    odd = s.cross_parity[i] != s.cross_parity[j]
    d_negcor = hi if odd else abs(s.bias[i] - s.bias[j])
    return float(d_marg), float(d_forced), float(d_negcor)


def three_part_matrices(model: SymmetricTIM | GeneralTIM) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    s = edge_summary(model)
    d_marg = np.abs(s.p0[:, None] - s.p0[None, :])
    path_sum = tree_distance_matrix(model.tree.with_lengths(s.forced))
    d_forced = lipschitz_capped_matrix(path_sum, s.bias)
    hi = np.maximum(s.bias[:, None], s.bias[None, :])
    odd = s.cross_parity[:, None] != s.cross_parity[None, :]
    d_negcor = np.where(odd, hi, np.abs(s.bias[:, None] - s.bias[None, :]))
    for d in (d_marg, d_forced, d_negcor):
        np.fill_diagonal(d, 0.0)
    return d_marg, d_forced, d_negcor


class GeneralTimEmbedder:
    """Marginal coordinate, signed-bias coordinate, and boosted build-clean
    on the forced-randomness tree with bias caps."""

    def __init__(self, model: SymmetricTIM | GeneralTIM):
        model = _as_general(model)
        s = edge_summary(model)
        self.model = model
        sign = np.where(s.cross_parity == 1, -1.0, 1.0)
        self.fixed = np.column_stack([s.p0, sign * s.bias])
        tree = model.tree.with_lengths(s.forced)
        # the bias is Lipschitz w.r.t. forced randomness; failure here is a bug
        caps = CapAssignment.for_tree(tree, s.bias)
        self.lipschitz = GeneralBuildCleanEmbedder(tree, caps)

    def boosted(self, copies: int, rng: RngSeed | int) -> Embedding:
        rng = as_seed(rng)
        blocks = [self.lipschitz(rng.child("copy", c)) / copies for c in range(copies)]
        return Embedding(np.hstack([self.fixed] + blocks))

    def boosted_distances(self, copies: int, rng: RngSeed | int, check=None) -> np.ndarray:
        return l1_distance_matrix(self.fixed) + boosted_distances(self.lipschitz, copies, rng, check)


def general_tim_embed(model: SymmetricTIM | GeneralTIM, rng: RngSeed | int, copies: int = 1) -> Embedding:
    return GeneralTimEmbedder(model).boosted(copies, rng)


def l1_to_distribution_sampler(points: PointSet | np.ndarray, rng: RngSeed | int, size: int = 1) -> np.ndarray:
    """Binary assignments whose disagreement rate is the mean coordinate gap.

    Pick a coordinate ``k`` and a threshold ``p`` uniformly; ``X_i`` is 1
    when ``x_i[k] <= p``.
    """
    pts = points.points if isinstance(points, PointSet) else np.atleast_2d(np.asarray(points, dtype=float))
    if np.any(pts < -TOL) or np.any(pts > 1 + TOL):
        raise ValueError("coordinates must lie in [0, 1]")
    gen = as_seed(rng).generator()
    k = gen.integers(0, pts.shape[1], size=size)
    p = gen.random(size)
    return (pts[:, k].T <= p[:, None]).astype(np.uint8)
