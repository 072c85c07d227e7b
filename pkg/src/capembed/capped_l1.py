"""Fixed-cap embedding of general l1 point sets.

Each input coordinate is run through the line build-clean with scale ``d``;
concatenating the ``d`` blocks gives ``z_i`` of length ``8 d^2`` whose entries
are all ``0`` or ``M / (100 d)`` except at most ``d`` of them.  The ``8 d^2``
entries are hashed into ``C d`` buckets and every bucket is lazily snaked with
cap ``M / d``.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .build_clean import LineBuildClean
from .lazy_snake import boosted_distances, snake_columns
from .metric_core import Embedding, PointSet
from .rng import RngSeed, as_seed

DEFAULT_BUCKET_FACTOR = 128


def _as_points(points) -> np.ndarray:
    return points.points if isinstance(points, PointSet) else PointSet(points).points


class ZBuilder:
    """Coordinate-wise build-clean with the per-coordinate plans precomputed."""

    def __init__(self, points, M: float):
        if not M > 0:
            raise ValueError("cap M must be positive")
        pts = _as_points(points)
        self.M = float(M)
        self.d = pts.shape[1]
        self.step = self.M / (100.0 * self.d)
        self.lines = [LineBuildClean(pts[:, q], self.M, self.d) for q in range(self.d)]

    def __call__(self, rng: RngSeed | int) -> np.ndarray:
        rng = as_seed(rng)
        return np.hstack([line(rng.child("coordinate", q)) for q, line in enumerate(self.lines)])


def build_z(points, M: float, rng: RngSeed | int) -> np.ndarray:
    """The ``n x 8 d^2`` matrix of concatenated coordinate-wise embeddings."""
    return ZBuilder(points, M)(rng)


def z_fractional_counts(z: np.ndarray, step: float, tol: float = 1e-9) -> tuple[np.ndarray, float]:
    """Per row, the number of entries strictly between ``0`` and ``step``;
    also the largest distance of any entry outside ``[0, step]``."""
    frac = (z > tol) & (np.abs(z - step) > tol)
    outside = float(np.max(np.maximum(-z, z - step), initial=0.0))
    return frac.sum(axis=1), max(outside, 0.0)


class CappedL1Embedder:
    """Single-copy embedder into ``C d`` coordinates.

    Buckets nobody hashes into hold 0 for every point; ``compact=True``
    returns only the occupied ones, which leaves all l1 distances unchanged.
    """

    def __init__(self, points, M: float, bucket_factor: int = DEFAULT_BUCKET_FACTOR):
        if bucket_factor < 1:
            raise ValueError("bucket factor must be positive")
        self.z_builder = ZBuilder(points, M)
        self.M = self.z_builder.M
        self.d = self.z_builder.d
        self.buckets = bucket_factor * self.d

    @property
    def dim(self) -> int:
        return self.buckets

    def __call__(self, rng: RngSeed | int, compact: bool = False) -> np.ndarray:
        rng = as_seed(rng)
        z = self.z_builder(rng)
        width = z.shape[1]
        h = rng.child("hash").generator().integers(0, self.buckets, size=width)
        used = np.unique(h)
        col = np.searchsorted(used, h)
        onehot = sp.csr_matrix((np.ones(width), (np.arange(width), col)), shape=(width, len(used)))
        locs = np.asarray((sp.csr_matrix(z) @ onehot).todense())
        vals = snake_columns(locs, self.M / self.d, rng.child("snake").generator())
        if compact:
            return vals
        out = np.zeros((z.shape[0], self.buckets))
        out[:, used] = vals
        return out

    def boosted_distances(self, copies: int, rng: RngSeed | int, check=None) -> np.ndarray:
        return boosted_distances(lambda s: self(s, compact=True), copies, rng, check)


def capped_l1_embed(points, M: float, rng: RngSeed | int, bucket_factor: int = DEFAULT_BUCKET_FACTOR) -> Embedding:
    return Embedding(CappedL1Embedder(points, M, bucket_factor)(rng))


def capped_l1_bound(dist: np.ndarray, M: float, bucket_factor: int = DEFAULT_BUCKET_FACTOR) -> np.ndarray:
    """Per-run ceiling: the distance itself up to ``M``, ``C M`` beyond."""
    return np.where(dist <= M, dist, bucket_factor * M)
