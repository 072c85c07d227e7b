"""Lazy snaking: one random coordinate for a line metric.

A walker moves along the line starting at some time ``t``.  At each decision
point a fair coin either makes it rest at value 0 for a while, or trace a
tent that climbs to a width ``w`` and comes back down to 0 over a duration
``2w``.  Because the value is 1-Lipschitz in ``t`` and never exceeds the
current width, reading it at each point of the line gives a coordinate whose
pairwise differences never exceed the capped distance.

Both published parameterizations run through the same engine:

==========  ==========  ============  ============  ==============
variant     rest        tent width    cap           start
==========  ==========  ============  ============  ==============
fixed       M/4         M             constant      0
lipschitz   M(t)/300    M(t)/100      interpolated  -2 M(loc[0])
==========  ==========  ============  ============  ==============
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numba
import numpy as np

from .metric_core import CapAssignment, Embedding, LineMetric, l1_distance_matrix
from .rng import RngSeed, as_seed

MAX_SEGMENTS = 10**9

FIXED_PARAMS = (1.0 / 4.0, 1.0)
LIPSCHITZ_PARAMS = (1.0 / 300.0, 1.0 / 100.0)

REST = 0
SNAKE = 1


@numba.njit(cache=True)
def _cap_at(t, knot_x, knot_m):
    # piecewise linear, constant outside the knots
    i = np.searchsorted(knot_x, t, side="right") - 1
    if i < 0:
        return knot_m[0]
    if i + 1 < len(knot_x):
        x0 = knot_x[i]
        return knot_m[i] + (knot_m[i + 1] - knot_m[i]) * ((t - x0) / (knot_x[i + 1] - x0))
    return knot_m[i]


@numba.njit(cache=True)
def _snake_core(pos_sorted, knot_x, knot_m, rest_frac, width_frac, start_t, rng, out, record, max_segments):
    """Run the walker past the last query; write values in sorted order.

    Returns the segment count and, when ``record`` is set, the segment
    starts, kinds and widths.
    """
    n = len(pos_sorted)
    cap_buf = 16 if record else 0
    starts = np.empty(cap_buf)
    kinds = np.empty(cap_buf, dtype=np.int8)
    widths = np.empty(cap_buf)
    if n == 0:
        return 0, starts, kinds, widths
    if pos_sorted[0] < start_t:
        raise ValueError("query position lies before the walker's start")
    qmax = pos_sorted[n - 1]
    t = start_t
    k = 0
    nseg = 0
    while t <= qmax:
        m = _cap_at(t, knot_x, knot_m)
        if not m > 0:
            raise ValueError("cap must be strictly positive along the line")
        if rng.random() < 0.5:
            kind = REST
            w = rest_frac * m
            end = t + w
            while k < n and pos_sorted[k] < end:
                out[k] = 0.0
                k += 1
        else:
            kind = SNAKE
            w = width_frac * m
            end = t + 2.0 * w
            while k < n and pos_sorted[k] < end:
                u = pos_sorted[k] - t
                out[k] = min(u, 2.0 * w - u)
                k += 1
        if record:
            if nseg == len(starts):
                starts = np.concatenate((starts, np.empty(len(starts))))
                kinds = np.concatenate((kinds, np.empty(len(kinds), dtype=np.int8)))
                widths = np.concatenate((widths, np.empty(len(widths))))
            starts[nseg] = t
            kinds[nseg] = kind
            widths[nseg] = w
        nseg += 1
        if nseg > max_segments:
            raise ValueError("snake segment budget exceeded; caps too small for the line length")
        t = end
    if record:
        return nseg, starts[:nseg], kinds[:nseg], widths[:nseg]
    return nseg, starts, kinds, widths


@numba.njit(cache=True)
def _snake_columns(pos, caps, rest_frac, width_frac, rng, out, max_segments):
    # one constant-cap walker per column, all drawing from the same stream
    n, k = pos.shape
    knot_x = np.zeros(1)
    knot_m = np.zeros(1)
    buf = np.empty(n)
    for c in range(k):
        col = pos[:, c]
        order = np.argsort(col, kind="mergesort")
        srt = col[order]
        knot_m[0] = caps[c]
        _snake_core(srt, knot_x, knot_m, rest_frac, width_frac, 0.0, rng, buf, False, max_segments)
        for a in range(n):
            out[order[a], c] = buf[a]


@dataclass(frozen=True)
class SnakeTrace:
    """Segments of one walker: start, kind (REST or SNAKE) and width.

    A rest segment lasts ``width``; a tent lasts ``2 * width``.
    """

    starts: np.ndarray
    kinds: np.ndarray
    widths: np.ndarray

    @property
    def ends(self) -> np.ndarray:
        return self.starts + np.where(self.kinds == SNAKE, 2.0, 1.0) * self.widths

    def value_at(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        seg = np.searchsorted(self.starts, t, side="right") - 1
        if np.any(seg < 0) or np.any(t >= self.ends[-1]):
            raise ValueError("time outside the traced range")
        u = t - self.starts[seg]
        w = self.widths[seg]
        return np.where(self.kinds[seg] == SNAKE, np.minimum(u, 2.0 * w - u), 0.0)


def snake_engine(
    positions,
    rest_fraction: float,
    width_fraction: float,
    cap_knots: tuple,
    start_t: float,
    rng: RngSeed | np.random.Generator,
    *,
    record: bool = False,
    max_segments: int = MAX_SEGMENTS,
):
    """Walker values at ``positions`` (any order, all >= ``start_t``).

    ``cap_knots`` is ``(xs, ms)``: the cap is linearly interpolated between
    the knots and held constant outside them.  Returns the values, plus a
    :class:`SnakeTrace` when ``record`` is set.
    """
    pos = np.asarray(positions, dtype=float)
    knot_x = np.atleast_1d(np.asarray(cap_knots[0], dtype=float))
    knot_m = np.atleast_1d(np.asarray(cap_knots[1], dtype=float))
    if len(knot_x) != len(knot_m) or len(knot_x) == 0:
        raise ValueError("cap knots need matching, nonempty x and M arrays")
    gen = rng if isinstance(rng, np.random.Generator) else as_seed(rng).generator()
    order = np.argsort(pos, kind="mergesort")
    buf = np.empty(len(pos))
    _, starts, kinds, widths = _snake_core(
        pos[order], knot_x, knot_m, float(rest_fraction), float(width_fraction),
        float(start_t), gen, buf, record, max_segments,
    )
    out = np.empty(len(pos))
    out[order] = buf
    if record:
        return out, SnakeTrace(starts, kinds, widths)
    return out


def lazy_snake_fixed(line: LineMetric, M: float, rng: RngSeed | np.random.Generator, **kw):
    """Fixed-cap walker read at every vertex; values lie in [0, M]."""
    if not M > 0:
        raise ValueError("cap M must be positive")
    locs = line.locs if isinstance(line, LineMetric) else np.asarray(line, dtype=float)
    rest, width = FIXED_PARAMS
    return snake_engine(locs, rest, width, ([0.0], [float(M)]), 0.0, rng, **kw)


def lazy_snake_lipschitz(
    line: LineMetric, caps: CapAssignment | np.ndarray, rng: RngSeed | np.random.Generator, **kw
):
    """Lipschitz-cap walker, started ``2 M(loc[0])`` before the first vertex."""
    if not isinstance(caps, CapAssignment) or not caps.lipschitz_checked:
        caps = CapAssignment.for_line(line, getattr(caps, "caps", caps))
    m = caps.caps
    if np.any(m <= 0):
        raise ValueError("Lipschitz snaking needs strictly positive caps")
    rest, width = LIPSCHITZ_PARAMS
    start = line.locs[0] - 2.0 * m[0]
    return snake_engine(line.locs, rest, width, (line.locs, m), start, rng, **kw)


def snake_columns(pos: np.ndarray, caps, rng: np.random.Generator, params=FIXED_PARAMS) -> np.ndarray:
    """Independent constant-cap walkers, one per column of ``pos``."""
    pos = np.ascontiguousarray(pos, dtype=float)
    caps = np.broadcast_to(np.asarray(caps, dtype=float), (pos.shape[1],)).copy()
    if np.any(caps <= 0):
        raise ValueError("caps must be positive")
    if np.any(pos < 0):
        raise ValueError("positions must be nonnegative")
    out = np.empty_like(pos)
    _snake_columns(pos, caps, params[0], params[1], rng, out, MAX_SEGMENTS)
    return out


Embedder = Callable[[RngSeed], np.ndarray]


def boost_average(embedder: Embedder, copies: int, rng: RngSeed | int) -> Embedding:
    """Concatenate ``copies`` independent runs, each scaled by ``1/copies``."""
    if copies < 1:
        raise ValueError("need at least one copy")
    rng = as_seed(rng)
    blocks = [np.asarray(embedder(rng.child("copy", c)), dtype=float) / copies for c in range(copies)]
    return Embedding(np.hstack(blocks))


def boosted_distances(embedder: Embedder, copies: int, rng: RngSeed | int, check=None) -> np.ndarray:
    """Pairwise l1 distances of :func:`boost_average` without materializing it.

    ``check``, if given, is called with each copy's distance matrix, which
    lets callers assert per-run bounds while boosting.
    """
    if copies < 1:
        raise ValueError("need at least one copy")
    rng = as_seed(rng)
    total = None
    for c in range(copies):
        d = l1_distance_matrix(np.asarray(embedder(rng.child("copy", c)), dtype=float))
        if check is not None:
            check(d)
        total = d if total is None else total + d
    return total / copies
