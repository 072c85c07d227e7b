"""Trees, lines, caps, point sets and exact distances.

Caps come in two flavours.  A fixed cap truncates every distance at the same
value ``M``.  A Lipschitz cap assigns each point its own cap ``M(x)`` with
``|M(x) - M(y)| <= d(x, y)`` and truncates at the larger of the two caps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numba
import numpy as np
from scipy.spatial.distance import pdist, squareform

TOL = 1e-9


def log_scale(n: int) -> int:
    """The integer logarithm used for every dimension and stage length."""
    if n < 1:
        raise ValueError("n must be positive")
    return max(1, math.ceil(math.log2(n)))


@dataclass(frozen=True, eq=False)
class WeightedTree:
    """Rooted tree with nonnegative edge lengths.

    ``edges`` are undirected ``(u, v, length)`` triples; orientation away from
    ``root`` is derived on construction.
    """

    n: int
    edges: tuple
    root: int = 0

    def __post_init__(self):
        edges = tuple((int(u), int(v), float(w)) for u, v, w in self.edges)
        object.__setattr__(self, "edges", edges)
        if self.n < 1:
            raise ValueError("tree needs at least one vertex")
        if len(edges) != self.n - 1:
            raise ValueError(f"expected {self.n - 1} edges, got {len(edges)}")
        if not 0 <= self.root < self.n:
            raise ValueError(f"root {self.root} out of range")
        for u, v, w in edges:
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValueError(f"edge ({u}, {v}) has an out-of-range endpoint")
            if u == v:
                raise ValueError(f"self loop at {u}")
            if not (w >= 0 and math.isfinite(w)):
                raise ValueError(f"edge ({u}, {v}) has invalid length {w}")
        # orientation doubles as the connectivity check
        _ = self.parent

    @classmethod
    def from_parents(cls, parent: Sequence[int], lengths: Sequence[float], root: int = 0):
        edges = [(p, v, lengths[v]) for v, p in enumerate(parent) if v != root]
        return cls(len(parent), tuple(edges), root)

    @cached_property
    def _adjacency(self):
        nbrs = [[] for _ in range(self.n)]
        for u, v, w in self.edges:
            nbrs[u].append((v, w))
            nbrs[v].append((u, w))
        for lst in nbrs:
            lst.sort()
        return nbrs

    @cached_property
    def _oriented(self):
        parent = np.full(self.n, -1, dtype=np.int64)
        plen = np.zeros(self.n)
        order = []
        seen = np.zeros(self.n, dtype=bool)
        stack = [self.root]
        seen[self.root] = True
        while stack:
            u = stack.pop()
            order.append(u)
            # push in reverse so that children are visited in ascending id order
            for v, w in reversed(self._adjacency[u]):
                if seen[v]:
                    continue
                seen[v] = True
                parent[v] = u
                plen[v] = w
                stack.append(v)
        if len(order) != self.n:
            raise ValueError("edges do not form a connected tree")
        for a in (parent, plen):
            a.flags.writeable = False
        order = np.array(order, dtype=np.int64)
        order.flags.writeable = False
        return parent, plen, order

    @property
    def parent(self) -> np.ndarray:
        return self._oriented[0]

    @property
    def parent_length(self) -> np.ndarray:
        return self._oriented[1]

    @property
    def preorder(self) -> np.ndarray:
        """Depth-first order from the root, children in ascending id."""
        return self._oriented[2]

    @cached_property
    def children(self) -> list[list[int]]:
        kids = [[] for _ in range(self.n)]
        for v in range(self.n):
            p = self.parent[v]
            if p >= 0:
                kids[p].append(v)
        return kids

    @cached_property
    def depth(self) -> np.ndarray:
        d = np.zeros(self.n, dtype=np.int64)
        for v in self.preorder[1:]:
            d[v] = d[self.parent[v]] + 1
        return d

    @cached_property
    def root_distance(self) -> np.ndarray:
        d = np.zeros(self.n)
        for v in self.preorder[1:]:
            d[v] = d[self.parent[v]] + self.parent_length[v]
        return d

    @cached_property
    def subtree_size(self) -> np.ndarray:
        size = np.ones(self.n, dtype=np.int64)
        for v in self.preorder[::-1]:
            p = self.parent[v]
            if p >= 0:
                size[p] += size[v]
        return size

    def lca(self, i: int, j: int) -> int:
        self._check_vertex(i)
        self._check_vertex(j)
        depth, parent = self.depth, self.parent
        while depth[i] > depth[j]:
            i = parent[i]
        while depth[j] > depth[i]:
            j = parent[j]
        while i != j:
            i, j = parent[i], parent[j]
        return int(i)

    def path_edges(self, i: int, j: int) -> list[int]:
        """Vertices whose parent edge lies on the i-j path."""
        a = self.lca(i, j)
        out = []
        for x in (i, j):
            while x != a:
                out.append(int(x))
                x = self.parent[x]
        return out

    def _check_vertex(self, i):
        if not 0 <= i < self.n:
            raise IndexError(f"vertex {i} out of range for a tree on {self.n} vertices")

    def with_lengths(self, lengths: Sequence[float]) -> "WeightedTree":
        """Same shape and root, parent edge of vertex v gets ``lengths[v]``."""
        return WeightedTree.from_parents(self.parent.tolist(), lengths, self.root)


@dataclass(frozen=True, eq=False)
class LineMetric:
    locs: np.ndarray

    def __post_init__(self):
        locs = np.asarray(self.locs, dtype=float)
        if locs.ndim != 1 or len(locs) == 0:
            raise ValueError("a line needs a nonempty 1-d array of locations")
        if locs[0] != 0:
            raise ValueError("first location must be 0")
        if np.any(np.diff(locs) < 0):
            raise ValueError("locations must be nondecreasing")
        object.__setattr__(self, "locs", locs)

    @classmethod
    def from_gaps(cls, gaps: Sequence[float]) -> "LineMetric":
        return cls(np.concatenate([[0.0], np.cumsum(gaps)]))

    @property
    def n(self) -> int:
        return len(self.locs)

    def distances(self) -> np.ndarray:
        return np.abs(self.locs[:, None] - self.locs[None, :])


@dataclass(frozen=True, eq=False)
class CapAssignment:
    caps: np.ndarray
    lipschitz_checked: bool = False

    def __post_init__(self):
        caps = np.asarray(self.caps, dtype=float)
        if caps.ndim != 1:
            raise ValueError("caps must be a 1-d array")
        if np.any(~np.isfinite(caps)) or np.any(caps < 0):
            raise ValueError("caps must be finite and nonnegative")
        object.__setattr__(self, "caps", caps)

    @classmethod
    def for_tree(cls, tree: WeightedTree, caps: Sequence[float]) -> "CapAssignment":
        caps = np.asarray(caps, dtype=float)
        if len(caps) != tree.n:
            raise ValueError(f"expected {tree.n} caps, got {len(caps)}")
        # Lipschitz along every edge implies Lipschitz along every path.
        v = np.array([x for x in range(tree.n) if x != tree.root], dtype=np.int64)
        if len(v):
            jump = np.abs(caps[v] - caps[tree.parent[v]])
            bad = jump > tree.parent_length[v] + TOL
            if np.any(bad):
                x = int(v[np.argmax(bad)])
                raise ValueError(
                    f"caps are not Lipschitz on edge ({tree.parent[x]}, {x}): "
                    f"|{caps[tree.parent[x]]} - {caps[x]}| > {tree.parent_length[x]}"
                )
        return cls(caps, True)

    @classmethod
    def for_line(cls, line: LineMetric, caps: Sequence[float]) -> "CapAssignment":
        caps = np.asarray(caps, dtype=float)
        if len(caps) != line.n:
            raise ValueError(f"expected {line.n} caps, got {len(caps)}")
        if np.any(np.abs(np.diff(caps)) > np.diff(line.locs) + TOL):
            raise ValueError("caps are not Lipschitz along the line")
        return cls(caps, True)


@dataclass(frozen=True, eq=False)
class PointSet:
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[1] < 1:
            raise ValueError("points must be an n-by-d array with d >= 1")
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def distances(self) -> np.ndarray:
        return squareform(pdist(self.points, "cityblock"))


@dataclass(frozen=True, eq=False)
class Embedding:
    rows: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=float)
        if rows.ndim != 2:
            raise ValueError("embedding rows must form a 2-d array")
        if not np.all(np.isfinite(rows)):
            raise ValueError("embedding has non-finite entries")
        object.__setattr__(self, "rows", rows)

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    def distances(self) -> np.ndarray:
        return l1_distance_matrix(self.rows)


def l1_distance_matrix(rows: np.ndarray) -> np.ndarray:
    rows = np.asarray(rows, dtype=float)
    if rows.shape[1] == 0:
        return np.zeros((rows.shape[0], rows.shape[0]))
    return squareform(pdist(rows, "cityblock"))


def tree_distance(tree: WeightedTree, i: int, j: int) -> float:
    """Sum of edge lengths on the unique i-j path."""
    a = tree.lca(i, j)
    total = 0.0
    for x in (i, j):
        while x != a:
            total += tree.parent_length[x]
            x = tree.parent[x]
    return total


@numba.njit(cache=True)
def _all_pairs_from_sources(n, indptr, nbr, wts):
    dist = np.zeros((n, n))
    stack = np.empty(n, dtype=np.int64)
    from_ = np.empty(n, dtype=np.int64)
    for s in range(n):
        top = 0
        stack[0] = s
        from_[s] = -1
        while top >= 0:
            u = stack[top]
            top -= 1
            for k in range(indptr[u], indptr[u + 1]):
                v = nbr[k]
                if v == from_[u]:
                    continue
                from_[v] = u
                dist[s, v] = dist[s, u] + wts[k]
                top += 1
                stack[top] = v
    return dist


def tree_distance_matrix(tree: WeightedTree) -> np.ndarray:
    """All-pairs path sums; symmetric to the last bit."""
    indptr = np.zeros(tree.n + 1, dtype=np.int64)
    nbr, wts = [], []
    for u, lst in enumerate(tree._adjacency):
        indptr[u + 1] = indptr[u] + len(lst)
        for v, w in lst:
            nbr.append(v)
            wts.append(w)
    dist = _all_pairs_from_sources(
        tree.n, indptr, np.array(nbr, dtype=np.int64), np.array(wts, dtype=float)
    )
    upper = np.triu(dist, 1)
    return upper + upper.T


def capped_distance(d, cap_i, cap_j=None, mode: str = "fixed"):
    """Truncated distance; works elementwise on arrays."""
    if cap_j is None:
        cap_j = cap_i
    d, cap_i, cap_j = (np.asarray(x, dtype=float) for x in (d, cap_i, cap_j))
    if np.any(d < 0) or np.any(cap_i < 0) or np.any(cap_j < 0):
        raise ValueError("distances and caps must be nonnegative")
    if mode == "fixed":
        if np.any(cap_i != cap_j):
            raise ValueError("fixed mode needs equal caps")
        out = np.minimum(d, cap_i)
    elif mode == "lipschitz":
        out = np.minimum(d, np.maximum(cap_i, cap_j))
    else:
        raise ValueError(f"unknown cap mode {mode!r}")
    return float(out) if out.ndim == 0 else out


def lipschitz_capped_matrix(dist: np.ndarray, caps: np.ndarray) -> np.ndarray:
    caps = np.asarray(caps, dtype=float)
    return np.minimum(dist, np.maximum(caps[:, None], caps[None, :]))


@dataclass
class DistortionReport:
    contraction: float
    expansion: float
    distortion: float
    violations: int
    degenerate: bool = False
    i: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64), repr=False)
    j: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64), repr=False)
    truth: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)
    embedded: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)

    @property
    def ratio(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.truth > 0, self.embedded / np.where(self.truth > 0, self.truth, 1), np.nan)

    def summary(self) -> dict:
        return {
            "contraction": self.contraction,
            "expansion": self.expansion,
            "distortion": self.distortion,
            "violations": self.violations,
        }


def _as_matrix(truth, n: int) -> np.ndarray:
    if callable(truth):
        out = np.zeros((n, n))
        for a in range(n):
            for b in range(a + 1, n):
                out[a, b] = out[b, a] = truth(a, b)
        return out
    truth = np.asarray(truth, dtype=float)
    if truth.shape != (n, n):
        raise ValueError(f"truth has shape {truth.shape}, expected {(n, n)}")
    return truth


def eval_distortion(
    truth: np.ndarray | Callable[[int, int], float],
    emb: Embedding | np.ndarray,
    *,
    embedded: np.ndarray | None = None,
) -> DistortionReport:
    """Compare embedded l1 distances against ``truth`` over all pairs.

    ``truth`` is a square matrix or a function of two indices.  When the
    pairwise embedded distances are already known (for example accumulated
    over boosting copies) pass them as ``embedded`` and ``emb`` may be None.
    """
    if embedded is None:
        rows = emb.rows if isinstance(emb, Embedding) else np.asarray(emb, dtype=float)
        embedded = l1_distance_matrix(rows)
    n = embedded.shape[0]
    if n < 2:
        raise ValueError("need at least two points")
    truth = _as_matrix(truth, n)
    iu, ju = np.triu_indices(n, 1)
    t = truth[iu, ju]
    e = embedded[iu, ju]
    pos = t > 0
    violations = int(np.sum(~pos & (e > TOL)))
    if not np.any(pos):
        return DistortionReport(1.0, 1.0, 1.0, violations, True, iu, ju, t, e)
    r = e[pos] / t[pos]
    lo, hi = float(r.min()), float(r.max())
    dist = hi / lo if lo > 0 else math.inf
    return DistortionReport(lo, hi, dist, violations, False, iu, ju, t, e)


# ---------------------------------------------------------------- file formats


def _fmt(x: float) -> str:
    return repr(float(x))


def format_tree(tree: WeightedTree) -> str:
    lines = [f"{tree.n}\t{tree.root}"] + [f"{u}\t{v}\t{_fmt(w)}" for u, v, w in tree.edges]
    return "\n".join(lines) + "\n"


def write_tree(tree: WeightedTree, path) -> None:
    with open(path, "w") as fh:
        fh.write(format_tree(tree))


def read_tree(path) -> WeightedTree:
    with open(path) as fh:
        lines = [ln.split("\t") for ln in fh.read().splitlines() if ln.strip()]
    if not lines or len(lines[0]) != 2:
        raise ValueError(f"{path}: first line must be 'n<TAB>root'")
    n, root = int(lines[0][0]), int(lines[0][1])
    edges = []
    for k, parts in enumerate(lines[1:], start=2):
        if len(parts) != 3:
            raise ValueError(f"{path}:{k}: expected 'u<TAB>v<TAB>length'")
        edges.append((int(parts[0]), int(parts[1]), float(parts[2])))
    return WeightedTree(n, tuple(edges), root)


def format_caps(caps: Sequence[float]) -> str:
    return "".join(f"{_fmt(c)}\n" for c in caps)


def write_caps(caps: Sequence[float], path) -> None:
    with open(path, "w") as fh:
        fh.write(format_caps(caps))


def read_caps(path) -> np.ndarray:
    with open(path) as fh:
        return np.array([float(x) for x in fh.read().split()], dtype=float)


def format_points(points: np.ndarray) -> str:
    return "".join(",".join(_fmt(x) for x in row) + "\n" for row in np.atleast_2d(points))


def write_points(points: np.ndarray, path) -> None:
    with open(path, "w") as fh:
        fh.write(format_points(points))


def read_points(path) -> np.ndarray:
    with open(path) as fh:
        rows = [[float(x) for x in ln.split(",")] for ln in fh.read().splitlines() if ln.strip()]
    return np.array(rows, dtype=float)


def format_embedding(emb: Embedding) -> str:
    return f"dim={emb.dim}\n" + "".join(",".join(_fmt(x) for x in row) + "\n" for row in emb.rows)


def write_embedding(emb: Embedding, path) -> None:
    with open(path, "w") as fh:
        fh.write(format_embedding(emb))


def read_embedding(path) -> Embedding:
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("dim="):
            raise ValueError(f"{path}: missing 'dim=D' header")
        dim = int(header[4:])
        rows = [[float(x) for x in ln.split(",")] if dim else [] for ln in fh.read().splitlines()]
    arr = np.array(rows, dtype=float).reshape(len(rows), dim)
    return Embedding(arr)
