"""Build-clean embeddings for Lipschitz-cap trees and for capped lines.

The tree is cut into vertical caterpillars, each caterpillar is chopped into
pieces no longer than ``M(start) / (100 L)``, and pieces are processed top
down while a state vector of width ``H = 8 L`` is carried along.  Every piece
has a stage counter one larger (mod ``13 L``) than its parent piece.  During a
build stage a piece hashes to a coordinate and, if that coordinate is zero,
raises it along the piece.  During a clean stage a piece lowers the first
positive coordinate back towards zero.  A clean stage is long enough to erase
everything the preceding build stage wrote, which keeps the state small
relative to the local cap.

Pieces are half-open ``(start, end]`` along their caterpillar, so a vertex
sitting exactly on a cut belongs to the upper piece.  A light caterpillar
hanging off vertex ``v`` starts from ``v``'s state, and its first piece
follows the piece that contains ``v``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .caterpillar import decompose
from .lazy_snake import _cap_at
from .metric_core import CapAssignment, Embedding, WeightedTree, log_scale
from .rng import RngSeed, as_seed

CHOP_BUDGET = 10**7


@numba.njit(cache=True)
def _chop(knot_x, knot_m, total, scale, budget):
    starts = np.empty(64)
    lens = np.empty(64)
    count = 0
    s = 0.0
    while s < total:
        m = _cap_at(s, knot_x, knot_m)
        if not m > 0:
            raise ValueError("caps must be strictly positive along every edge")
        step = m / (100.0 * scale)
        if count == len(starts):
            starts = np.concatenate((starts, np.empty(count)))
            lens = np.concatenate((lens, np.empty(count)))
        starts[count] = s
        if total - s <= step:
            lens[count] = total - s
            s = total
        else:
            lens[count] = step
            s = s + step
        count += 1
        if count > budget:
            raise ValueError("chop budget exceeded")
    return starts[:count], lens[:count]


@dataclass(frozen=True, eq=False)
class ChoppedDecomposition:
    """Pieces in processing order plus the bookkeeping to read off vertices.

    Piece arrays are indexed by piece id; pieces of one caterpillar are
    contiguous and caterpillars appear parent first.  ``vert_piece[k] = -1``
    means vertex ``vert_id[k]`` sits on its caterpillar's top vertex.
    """

    scale: int
    build_len: int
    clean_len: int
    width: int
    piece_start: np.ndarray
    piece_len: np.ndarray
    piece_depth: np.ndarray
    piece_parent: np.ndarray
    piece_chain: np.ndarray
    piece_cap_start: np.ndarray
    piece_cap_end: np.ndarray
    chain_pieces: np.ndarray
    chain_top: np.ndarray
    chain_verts: np.ndarray
    vert_id: np.ndarray
    vert_piece: np.ndarray
    vert_offset: np.ndarray
    n: int

    @property
    def period(self) -> int:
        return self.build_len + self.clean_len

    @property
    def piece_count(self) -> int:
        return len(self.piece_len)

    def stage_counters(self, first: int) -> np.ndarray:
        return (first + self.piece_depth) % self.period


def _plan(chains, n, scale, width, build_len, clean_len, budget=CHOP_BUDGET) -> ChoppedDecomposition:
    """Chop caterpillars given as ``(top, knot_x, knot_m, verts, offsets, edges)``.

    ``top`` is -1 for the caterpillar hanging from the artificial start point
    (its first piece is the root of the piece tree).
    """
    p_start, p_len, p_chain, p_cap0, p_cap1 = [], [], [], [], []
    chain_pieces = [0]
    chain_top = []
    chain_verts = [0]
    v_id, v_piece, v_off = [], [], []
    where = {}  # vertex -> piece containing it, or the piece its top maps to
    p_parent, p_depth = [], []
    total_pieces = 0
    for cid, (top, kx, km, verts, offs, edges) in enumerate(chains):
        total = float(kx[-1]) if len(kx) else 0.0
        starts, lens = _chop(kx, km, total, float(scale), budget * max(edges, 1))
        base = total_pieces
        k = len(lens)
        ends = starts + lens
        if k:
            ends[-1] = total
        parent = -1 if top < 0 else where[top]
        for q in range(k):
            pp = parent if q == 0 else base + q - 1
            p_parent.append(pp)
            p_depth.append(0 if pp < 0 else p_depth[pp] + 1)
        p_start.append(starts)
        p_len.append(lens)
        p_chain.append(np.full(k, cid, dtype=np.int64))
        p_cap0.append(np.interp(starts, kx, km) if k else np.zeros(0))
        p_cap1.append(np.interp(ends, kx, km) if k else np.zeros(0))
        total_pieces += k
        chain_pieces.append(total_pieces)
        chain_top.append(top)
        for v, off in zip(verts, offs):
            if off <= 0:
                q = -1
                where[v] = parent
                u = 0.0
            else:
                q = int(np.searchsorted(ends, off, side="left"))
                q = min(q, k - 1)
                u = off - starts[q]
                where[v] = base + q
                q += base
            v_id.append(v)
            v_piece.append(q)
            v_off.append(u)
        chain_verts.append(len(v_id))

    def cat(parts, dtype=float):
        return np.concatenate(parts).astype(dtype) if parts else np.zeros(0, dtype=dtype)

    return ChoppedDecomposition(
        scale=scale,
        build_len=build_len,
        clean_len=clean_len,
        width=width,
        piece_start=cat(p_start),
        piece_len=cat(p_len),
        piece_depth=np.array(p_depth, dtype=np.int64),
        piece_parent=np.array(p_parent, dtype=np.int64),
        piece_chain=cat(p_chain, np.int64),
        piece_cap_start=cat(p_cap0),
        piece_cap_end=cat(p_cap1),
        chain_pieces=np.array(chain_pieces, dtype=np.int64),
        chain_top=np.array(chain_top, dtype=np.int64),
        chain_verts=np.array(chain_verts, dtype=np.int64),
        vert_id=np.array(v_id, dtype=np.int64),
        vert_piece=np.array(v_piece, dtype=np.int64),
        vert_offset=np.array(v_off, dtype=float),
        n=n,
    )


def _stage_lengths(scale: int):
    return 4 * scale, 9 * scale, 8 * scale


def chop_decompose(tree: WeightedTree, caps, scale: int | None = None) -> ChoppedDecomposition:
    """Chop the caterpillars of ``tree`` for strictly positive Lipschitz caps.

    The root caterpillar is extended upward by an artificial segment of
    length ``2 M(root)`` and constant cap, whose top is the zero start point.
    """
    if not isinstance(caps, CapAssignment) or not caps.lipschitz_checked:
        caps = CapAssignment.for_tree(tree, getattr(caps, "caps", caps))
    m = caps.caps
    if np.any(m <= 0):
        raise ValueError("chopping needs strictly positive caps")
    scale = log_scale(tree.n) if scale is None else int(scale)
    build_len, clean_len, width = _stage_lengths(scale)
    decomp = decompose(tree)
    lead = 2.0 * m[tree.root]
    chains = []
    root_chain = decomp.chains[0] if decomp.chains else [tree.root]
    for cid, path in enumerate(decomp.chains or [root_chain]):
        offs = np.array([0.0] + [decomp.offset[v] for v in path[1:]])
        if cid == 0:
            kx = np.concatenate([[0.0], lead + offs])
            km = np.concatenate([[m[tree.root]], m[path]])
            chains.append((-1, kx, km, list(path), list(lead + offs), len(path)))
        else:
            chains.append((path[0], offs, m[path], list(path[1:]), list(offs[1:]), len(path) - 1))
    return _plan(chains, tree.n, scale, width, build_len, clean_len)


def line_decompose(x, M: float, scale: int) -> ChoppedDecomposition:
    """Pieces of length exactly ``M / (100 scale)`` starting ``2M`` left of the line."""
    x = np.asarray(x, dtype=float)
    if not M > 0:
        raise ValueError("cap M must be positive")
    build_len, clean_len, width = _stage_lengths(scale)
    step = M / (100.0 * scale)
    origin = float(x.min()) - 2.0 * M
    rel = x - origin
    idx = np.ceil(rel / step).astype(np.int64) - 1
    idx = np.maximum(idx, 0)
    off = rel - idx * step
    # nudge points that rounding pushed across a cut
    over = off > step
    idx[over] += 1
    off[over] = rel[over] - idx[over] * step
    under = (off <= 0) & (idx > 0)
    idx[under] -= 1
    off[under] = rel[under] - idx[under] * step
    k = int(idx.max()) + 1
    order = np.argsort(rel, kind="mergesort")
    pieces = np.arange(k, dtype=np.int64)
    return ChoppedDecomposition(
        scale=scale,
        build_len=build_len,
        clean_len=clean_len,
        width=width,
        piece_start=pieces * step,
        piece_len=np.full(k, step),
        piece_depth=pieces,
        piece_parent=pieces - 1,
        piece_chain=np.zeros(k, dtype=np.int64),
        piece_cap_start=np.full(k, float(M)),
        piece_cap_end=np.full(k, float(M)),
        chain_pieces=np.array([0, k], dtype=np.int64),
        chain_top=np.array([-1], dtype=np.int64),
        chain_verts=np.array([0, len(x)], dtype=np.int64),
        vert_id=order.astype(np.int64),
        vert_piece=idx[order],
        vert_offset=off[order],
        n=len(x),
    )


@numba.njit(cache=True)
def _process(
    n, width, build_len, period, first, hashes,
    piece_len, piece_depth, piece_cap_end,
    chain_pieces, chain_top, chain_verts, vert_id, vert_piece, vert_offset,
):
    emb = np.zeros((n, width))
    state = np.zeros(width)
    worst_residual = 0.0
    worst_norm_ratio = 0.0
    clean_boundaries = 0
    for c in range(len(chain_top)):
        top = chain_top[c]
        norm = 0.0
        positive = 0
        for k in range(width):
            state[k] = 0.0 if top < 0 else emb[top, k]
            norm += state[k]
            if state[k] > 0:
                positive += 1
        vi = chain_verts[c]
        vend = chain_verts[c + 1]
        while vi < vend and vert_piece[vi] < 0:
            emb[vert_id[vi], :] = state
            vi += 1
        for q in range(chain_pieces[c], chain_pieces[c + 1]):
            a = (first + piece_depth[q]) % period
            length = piece_len[q]
            active = -1
            amount = 0.0
            sign = 1.0
            if a < build_len:
                h = hashes[q]
                if state[h] == 0.0:
                    active = h
                    amount = length
            elif positive > 0:
                for k in range(width):
                    if state[k] > 0.0:
                        active = k
                        break
                amount = min(state[active], length)
                sign = -1.0
            while vi < vend and vert_piece[vi] == q:
                v = vert_id[vi]
                emb[v, :] = state
                if active >= 0:
                    emb[v, active] = state[active] + sign * min(vert_offset[vi], amount)
                vi += 1
            if active >= 0:
                if sign > 0:
                    state[active] = amount
                    positive += 1
                    norm += amount
                elif amount == state[active]:
                    state[active] = 0.0
                    positive -= 1
                    norm -= amount
                else:
                    state[active] -= amount
                    norm -= amount
            if norm > 0:
                worst_norm_ratio = max(worst_norm_ratio, norm / piece_cap_end[q])
            if a == period - 1 and piece_depth[q] >= period - build_len - 1:
                clean_boundaries += 1
                for k in range(width):
                    worst_residual = max(worst_residual, abs(state[k]))
    return emb, worst_residual, worst_norm_ratio, clean_boundaries


@dataclass(frozen=True)
class BuildCleanRun:
    """One run's vertex embeddings plus what instrumentation saw.

    ``clean_residual`` is the largest coordinate left at the end of any
    complete clean stage; ``norm_ratio`` is the largest ``||state||_1 / M``
    seen at piece ends.
    """

    rows: np.ndarray
    first_counter: int
    clean_residual: float
    norm_ratio: float
    clean_boundaries: int


def run_build_clean(plan: ChoppedDecomposition, rng: RngSeed | int) -> BuildCleanRun:
    rng = as_seed(rng)
    gen = rng.child("stage").generator()
    first = int(gen.integers(0, plan.period))
    hashes = rng.child("hash").generator().integers(0, plan.width, size=plan.piece_count)
    emb, residual, ratio, boundaries = _process(
        plan.n, plan.width, plan.build_len, plan.period, first, hashes,
        plan.piece_len, plan.piece_depth, plan.piece_cap_end,
        plan.chain_pieces, plan.chain_top, plan.chain_verts,
        plan.vert_id, plan.vert_piece, plan.vert_offset,
    )
    return BuildCleanRun(emb, first, residual, ratio, boundaries)


class PositiveBuildCleanEmbedder:
    """Build-clean on a tree whose caps are all strictly positive."""

    def __init__(self, tree: WeightedTree, caps, scale: int | None = None):
        self.tree = tree
        self.plan = chop_decompose(tree, caps, scale)

    @property
    def dim(self) -> int:
        return self.plan.width

    def __call__(self, rng: RngSeed | int) -> np.ndarray:
        return run_build_clean(self.plan, rng).rows


def build_clean_embed_positive(tree: WeightedTree, caps, scale: int | None = None, rng=0) -> Embedding:
    return Embedding(PositiveBuildCleanEmbedder(tree, caps, scale)(rng))


def positive_components(tree: WeightedTree, caps: np.ndarray):
    """Split off zero-cap vertices; yield ``(top, vertices, subtree)`` per component.

    ``vertices`` lists original ids in the subtree's own numbering order;
    ``top`` (the component vertex closest to the root) names the component.
    """
    caps = np.asarray(caps, dtype=float)
    pos = caps > 0
    for v in tree.preorder:
        if not pos[v]:
            continue
        p = tree.parent[v]
        if p >= 0 and pos[p]:
            continue
        members = []
        stack = [int(v)]
        while stack:
            x = stack.pop()
            members.append(x)
            stack.extend(c for c in reversed(tree.children[x]) if pos[c])
        local = {x: k for k, x in enumerate(members)}
        edges = [(local[tree.parent[x]], local[x], tree.parent_length[x]) for x in members[1:]]
        yield int(v), members, WeightedTree(len(members), tuple(edges), 0)


class GeneralBuildCleanEmbedder:
    """Build-clean for nonnegative Lipschitz caps.

    Zero-cap vertices map to the origin.  Every connected group of positive
    caps is embedded on its own with halved coordinates, plus one extra
    coordinate holding ``sign * M(i) / 4`` for a random sign per group.
    """

    def __init__(self, tree: WeightedTree, caps, scale: int | None = None):
        if not isinstance(caps, CapAssignment) or not caps.lipschitz_checked:
            caps = CapAssignment.for_tree(tree, getattr(caps, "caps", caps))
        self.tree = tree
        self.caps = caps.caps
        self.scale = log_scale(tree.n) if scale is None else int(scale)
        self.width = 8 * self.scale
        self.parts = []
        for top, members, sub in positive_components(tree, self.caps):
            sub_caps = CapAssignment(self.caps[members], True)
            self.parts.append((top, np.array(members), chop_decompose(sub, sub_caps, self.scale)))

    @property
    def dim(self) -> int:
        return self.width + 1

    def runs(self, rng: RngSeed | int):
        rng = as_seed(rng)
        for top, members, plan in self.parts:
            yield top, members, run_build_clean(plan, rng.child("component", top))

    def __call__(self, rng: RngSeed | int) -> np.ndarray:
        rng = as_seed(rng)
        out = np.zeros((self.tree.n, self.width + 1))
        for top, members, run in self.runs(rng):
            sign = 1.0 if rng.child("sign", top).generator().integers(0, 2) else -1.0
            out[members, : self.width] = run.rows / 2.0
            out[members, self.width] = sign * self.caps[members] / 4.0
        return out


def build_clean_embed_general(tree: WeightedTree, caps, scale: int | None = None, rng=0) -> Embedding:
    return Embedding(GeneralBuildCleanEmbedder(tree, caps, scale)(rng))


class LineBuildClean:
    """Build-clean along one line with fixed cap ``M``."""

    def __init__(self, x, M: float, scale: int):
        self.plan = line_decompose(x, M, scale)
        self.step = float(M) / (100.0 * scale)

    def __call__(self, rng: RngSeed | int) -> np.ndarray:
        return run_build_clean(self.plan, rng).rows


def line_build_clean(x, M: float, scale: int, rng: RngSeed | int) -> np.ndarray:
    """Vectors in ``R^(8 scale)`` whose pairwise l1 never exceeds ``min(|dx|, M)``."""
    return LineBuildClean(x, M, scale)(rng)


def chop_claims(plan: ChoppedDecomposition, tree: WeightedTree | None = None, caps=None) -> dict:
    """Worst slack of the piece-length, edge-similar and path-similar claims.

    Every returned value must be ``<= 0`` (up to rounding) for the claims to
    hold.
    """
    L = plan.scale
    length_slack = float(np.max(plan.piece_len - plan.piece_cap_start / (100 * L), initial=-np.inf))
    ratio = np.maximum(plan.piece_cap_start / plan.piece_cap_end, plan.piece_cap_end / plan.piece_cap_start)
    edge_slack = float(np.max(ratio - (1 + 1 / (50 * L)), initial=-np.inf))
    # vertices sitting inside a piece are interpolation knots; check them too
    if tree is not None and caps is not None:
        caps = np.asarray(caps, dtype=float)
        inside = plan.vert_piece >= 0
        q = plan.vert_piece[inside]
        mv = caps[plan.vert_id[inside]]
        r = np.maximum(plan.piece_cap_start[q] / mv, mv / plan.piece_cap_start[q])
        edge_slack = max(edge_slack, float(np.max(r - (1 + 1 / (50 * L)), initial=-np.inf)))
    path_slack = -np.inf
    logs = np.log(plan.piece_cap_start)
    src = np.arange(plan.piece_count)
    anc = plan.piece_parent.copy()
    # src and anc bound a chain of k adjacent pieces
    for k in range(2, 2 * plan.period + 1):
        keep = anc >= 0
        src, anc = src[keep], anc[keep]
        if len(src) == 0:
            break
        gap = np.abs(logs[src] - logs[anc])
        path_slack = max(path_slack, float(np.max(gap - k / (50 * L))))
        anc = plan.piece_parent[anc]
    return {"length": length_slack, "edge_similar": edge_slack, "path_similar": path_slack}
