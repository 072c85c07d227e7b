"""Brute-force reference computations, deliberately naive and independent of
the library's fast paths."""

from __future__ import annotations

import itertools

import numpy as np


def floyd_warshall(n: int, edges) -> np.ndarray:
    d = np.full((n, n), np.inf)
    np.fill_diagonal(d, 0.0)
    for u, v, w in edges:
        d[u, v] = d[v, u] = min(d[u, v], w)
    for k in range(n):
        for i in range(n):
            for j in range(n):
                if d[i, k] + d[k, j] < d[i, j]:
                    d[i, j] = d[i, k] + d[k, j]
    return d


def _channel_parts(model):
    """(parent array, root, root marginal P(X=0), channels) for either model kind."""
    tree = model.tree
    if hasattr(model, "theta"):
        ch = np.zeros((model.n, 2, 2))
        for v in range(model.n):
            t = model.theta[v]
            ch[v] = [[1 - t, t], [t, 1 - t]]
        return tree.parent, tree.root, 0.5, ch
    return tree.parent, tree.root, model.root_p0, model.channels


def joint_table(model) -> tuple[np.ndarray, np.ndarray]:
    """All ``2^n`` assignments with their probabilities."""
    parent, root, p0, ch = _channel_parts(model)
    n = len(parent)
    states = np.array(list(itertools.product((0, 1), repeat=n)), dtype=np.int64)
    prob = np.where(states[:, root] == 0, p0, 1.0 - p0)
    for v in range(n):
        if v == root:
            continue
        prob = prob * ch[v][states[:, parent[v]], states[:, v]]
    return states, prob


def pair_joint_table(states, prob, i, j) -> np.ndarray:
    out = np.zeros((2, 2))
    for a in (0, 1):
        for b in (0, 1):
            out[a, b] = prob[(states[:, i] == a) & (states[:, j] == b)].sum()
    return out


def disagreement_table(states, prob) -> np.ndarray:
    n = states.shape[1]
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            out[i, j] = prob[states[:, i] != states[:, j]].sum()
    return out


def flip_pattern_disagreement(thetas) -> float:
    """Disagreement across a path of independent flips: odd flip count."""
    total = 0.0
    for pattern in itertools.product((0, 1), repeat=len(thetas)):
        p = 1.0
        for flip, t in zip(pattern, thetas):
            p *= t if flip else 1 - t
        if sum(pattern) % 2:
            total += p
    return total


def diamond_disagreement(net) -> np.ndarray:
    """Exact Pr[D_x != D_y] over every coin outcome."""
    k = net.x_count
    coins = np.array(list(itertools.product((0, 1), repeat=k)), dtype=np.uint8).reshape(2**k, k)
    d = net.resolve(coins).astype(float)
    return (d[:, :, None] != d[:, None, :]).mean(axis=0)


def chains_per_leaf(tree, heavy_child) -> int:
    """Distinct caterpillars met on the worst root-to-leaf path.

    A light edge always opens a new caterpillar; a heavy edge hanging off the
    root belongs to the root caterpillar.
    """
    worst = 0
    kids = tree.children
    for leaf in range(tree.n):
        if kids[leaf]:
            continue
        count, v = 0, leaf
        while v != tree.root:
            p = tree.parent[v]
            if heavy_child[p] != v or p == tree.root:
                count += 1
            v = p
        worst = max(worst, count)
    return worst


def reference_snake(locs, rest_frac, width_frac, cap_fn, start, gen) -> list[float]:
    """Plain-loop walker: same coin protocol, no sorting tricks, no numba."""
    values = {}
    pending = sorted(range(len(locs)), key=lambda k: locs[k])
    t = start
    while pending:
        m = cap_fn(t)
        if gen.random() < 0.5:
            end = t + rest_frac * m
            shape = lambda u: 0.0
        else:
            w = width_frac * m
            end = t + 2 * w
            shape = lambda u, w=w: min(u, 2 * w - u)
        while pending and locs[pending[0]] < end:
            k = pending.pop(0)
            values[k] = shape(locs[k] - t)
        t = end
    return [values[k] for k in range(len(locs))]
