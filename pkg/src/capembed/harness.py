"""Distortion evaluation driver.

``run_eval`` ties an instance to its exact oracle, its embedder and the
per-run ceiling that every single copy must respect.  Ceilings are checked on
each copy before averaging, so a report's ``violations`` count covers both
exact per-run bounds and zero-distance pairs that embedded apart.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .build_clean import GeneralBuildCleanEmbedder
from .capped_l1 import DEFAULT_BUCKET_FACTOR, CappedL1Embedder, capped_l1_bound
from .caterpillar import FixedCapTreeEmbedder, decompose, snip_embed
from .lazy_snake import boosted_distances, lazy_snake_fixed, lazy_snake_lipschitz
from .metric_core import (
    TOL,
    CapAssignment,
    DistortionReport,
    LineMetric,
    PointSet,
    WeightedTree,
    eval_distortion,
    lipschitz_capped_matrix,
    tree_distance_matrix,
)
from .rng import RngSeed, as_seed
from .tree_ising import (
    GeneralTIM,
    GeneralTimEmbedder,
    SymmetricTIM,
    SymmetricTimEmbedder,
    disagreement_matrix,
    symmetric_capped_metric,
)


@dataclass
class EvalSetup:
    """Everything needed to evaluate one embedder on one instance.

    ``distances(copies, rng, check)`` returns boosted pairwise distances and
    calls ``check`` on every copy's matrix; ``ceiling`` is that per-copy bound.
    """

    truth: np.ndarray
    ceiling: np.ndarray
    distances: Callable


def _plain(embedder):
    def run(copies, rng, check=None):
        return boosted_distances(embedder, copies, rng, check)

    return run


def setup_line_fixed(line: LineMetric, M: float) -> EvalSetup:
    truth = np.minimum(line.distances(), M)
    return EvalSetup(truth, truth, _plain(lambda s: lazy_snake_fixed(line, M, s)[:, None]))


def setup_line_lipschitz(line: LineMetric, caps: CapAssignment) -> EvalSetup:
    truth = lipschitz_capped_matrix(line.distances(), caps.caps)
    return EvalSetup(truth, truth, _plain(lambda s: lazy_snake_lipschitz(line, caps, s)[:, None]))


def setup_tree_fixed(tree: WeightedTree, M: float) -> EvalSetup:
    truth = np.minimum(tree_distance_matrix(tree), M)
    return EvalSetup(truth, 6.0 * truth, _plain(FixedCapTreeEmbedder(tree, M)))


def setup_tree_lipschitz(tree: WeightedTree, caps: CapAssignment) -> EvalSetup:
    truth = lipschitz_capped_matrix(tree_distance_matrix(tree), caps.caps)
    return EvalSetup(truth, truth, _plain(GeneralBuildCleanEmbedder(tree, caps)))


def setup_tree_isometric(tree: WeightedTree) -> EvalSetup:
    """Snipped caterpillar baseline; exact, so copies only repeat it."""
    truth = tree_distance_matrix(tree)
    vectors = snip_embed(tree, decompose(tree), 1.0).vectors.toarray()
    return EvalSetup(truth, truth, _plain(lambda s: vectors))


def setup_tim(model: SymmetricTIM | GeneralTIM) -> EvalSetup:
    """Symmetric models use the folded fixed-cap route, general ones the
    three-part route.  The ceiling applies to the randomized block only."""
    truth = disagreement_matrix(model)
    if isinstance(model, SymmetricTIM):
        embedder = SymmetricTimEmbedder(model)
        ceiling = 6.0 * symmetric_capped_metric(model)
        return EvalSetup(truth, ceiling, embedder.boosted_distances)
    embedder = GeneralTimEmbedder(model)
    inner = embedder.lipschitz
    ceiling = lipschitz_capped_matrix(tree_distance_matrix(inner.tree), inner.caps)
    return EvalSetup(truth, ceiling, embedder.boosted_distances)


def setup_l1(points: PointSet, M: float, bucket_factor: int = DEFAULT_BUCKET_FACTOR) -> EvalSetup:
    dist = points.distances()
    truth = np.minimum(dist, M)
    embedder = CappedL1Embedder(points, M, bucket_factor)
    return EvalSetup(truth, capped_l1_bound(dist, M, bucket_factor), embedder.boosted_distances)


@dataclass
class EvalResult:
    report: DistortionReport
    bound_violations: int
    copies: int

    def summary(self) -> dict:
        out = self.report.summary()
        out["violations"] = self.report.violations + self.bound_violations
        return out


def run_eval(setup: EvalSetup, copies: int, rng: RngSeed | int) -> EvalResult:
    """Boost, count per-copy ceiling breaches, and score against the truth."""
    breaches = [0]
    iu = np.triu_indices(setup.truth.shape[0], 1)
    ceiling = setup.ceiling[iu]

    def check(d):
        breaches[0] += int(np.sum(d[iu] > ceiling + TOL))

    embedded = setup.distances(copies, as_seed(rng), check)
    report = eval_distortion(setup.truth, None, embedded=embedded)
    return EvalResult(report, breaches[0], copies)


# ---------------------------------------------------------------- report files

REPORT_COLUMNS = ("i", "j", "truth", "embedded", "ratio")


def format_report(report: DistortionReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for a, b, t, e, r in zip(report.i, report.j, report.truth, report.embedded, report.ratio):
        w.writerow([int(a), int(b), repr(float(t)), repr(float(e)), "" if np.isnan(r) else repr(float(r))])
    return buf.getvalue()


def write_report(report: DistortionReport, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(format_report(report))


def read_report(path) -> DistortionReport:
    """Parse a report CSV back and recompute the summary from its rows."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    i = np.array([int(r["i"]) for r in rows], dtype=np.int64)
    j = np.array([int(r["j"]) for r in rows], dtype=np.int64)
    t = np.array([float(r["truth"]) for r in rows])
    e = np.array([float(r["embedded"]) for r in rows])
    n = int(max(i.max(initial=0), j.max(initial=0))) + 1
    truth = np.zeros((n, n))
    emb = np.zeros((n, n))
    truth[i, j] = truth[j, i] = t
    emb[i, j] = emb[j, i] = e
    return eval_distortion(truth, None, embedded=emb)


def format_summary(result: EvalResult | DistortionReport) -> str:
    return json.dumps(result.summary(), indent=2, sort_keys=True) + "\n"


def write_summary(result: EvalResult | DistortionReport, path) -> None:
    with open(path, "w") as fh:
        fh.write(format_summary(result))
