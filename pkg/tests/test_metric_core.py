import itertools
import math

import numpy as np
import pytest
from conftest import seeds
from hypothesis import given
from hypothesis import strategies as st
from oracles import floyd_warshall

from capembed.caterpillar import decompose, snip_embed
from capembed.generators import gen_lipschitz_caps, gen_random_tree
from capembed.metric_core import (
    TOL,
    CapAssignment,
    Embedding,
    LineMetric,
    PointSet,
    WeightedTree,
    capped_distance,
    eval_distortion,
    l1_distance_matrix,
    lipschitz_capped_matrix,
    log_scale,
    read_caps,
    read_embedding,
    read_points,
    read_tree,
    tree_distance,
    tree_distance_matrix,
    write_caps,
    write_embedding,
    write_points,
    write_tree,
)
from capembed.rng import RngSeed


def path_tree():
    return WeightedTree(3, ((0, 1, 3.0), (1, 2, 4.0)), 0)


def test_log_scale():
    assert [log_scale(n) for n in (1, 2, 3, 4, 5, 64, 65)] == [1, 1, 2, 2, 3, 6, 7]


def test_path_distance():
    t = path_tree()
    assert tree_distance(t, 0, 2) == 7.0
    assert tree_distance(t, 2, 0) == 7.0
    for i in range(3):
        assert tree_distance(t, i, i) == 0.0


@pytest.mark.parametrize(
    "n,edges,root",
    [
        (3, ((0, 1, 1.0),), 0),
        (3, ((0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)), 0),
        (3, ((0, 1, 1.0), (0, 1, 1.0)), 0),
        (2, ((0, 1, -1.0),), 0),
        (2, ((0, 5, 1.0),), 0),
        (2, ((0, 1, 1.0),), 4),
    ],
)
def test_tree_rejects_malformed(n, edges, root):
    with pytest.raises(ValueError):
        WeightedTree(n, edges, root)


def test_zero_length_edges_allowed():
    t = WeightedTree(3, ((0, 1, 0.0), (1, 2, 2.0)), 1)
    assert tree_distance(t, 0, 1) == 0.0
    assert tree_distance(t, 0, 2) == 2.0


@given(seed=seeds, n=st.integers(2, 32))
def test_distance_matrix_matches_floyd_warshall(seed, n):
    tree = gen_random_tree(n, 3.0, RngSeed(seed))
    fw = floyd_warshall(n, tree.edges)
    fast = tree_distance_matrix(tree)
    assert np.allclose(fast, fw, atol=TOL, rtol=0)
    i, j = n // 3, n - 1
    assert abs(tree_distance(tree, i, j) - fw[i, j]) <= TOL


def test_triangle_inequality_exhaustive():
    for k in range(5):
        tree = gen_random_tree(32, 2.0, RngSeed(11, k))
        d = tree_distance_matrix(tree)
        assert np.all(d[:, None, :] <= d[:, :, None] + d[None, :, :] + TOL)


@given(seed=seeds, n=st.integers(2, 32))
def test_lipschitz_capped_triangle(seed, n):
    tree = gen_random_tree(n, 1.0, RngSeed(seed, 1))
    caps = gen_lipschitz_caps(tree, RngSeed(seed, 2))
    d = lipschitz_capped_matrix(tree_distance_matrix(tree), caps.caps)
    assert np.all(d[:, None, :] <= d[:, :, None] + d[None, :, :] + TOL)


def test_capped_distance_examples():
    assert capped_distance(10.0, 4.0, mode="fixed") == 4.0
    assert capped_distance(3.0, 5.0, 1.0, mode="lipschitz") == 3.0
    assert capped_distance(0.0, 5.0, 1.0, mode="lipschitz") == 0.0
    assert capped_distance(0.0, 2.0, mode="fixed") == 0.0
    with pytest.raises(ValueError):
        capped_distance(1.0, 1.0, mode="other")


def test_cap_assignment_checks():
    t = path_tree()
    CapAssignment.for_tree(t, [1.0, 4.0, 0.0])
    with pytest.raises(ValueError):
        CapAssignment.for_tree(t, [1.0, 4.5, 0.0])
    with pytest.raises(ValueError):
        CapAssignment([-1.0, 0.0])
    line = LineMetric([0.0, 1.0, 1.5])
    CapAssignment.for_line(line, [2.0, 1.0, 1.5])
    with pytest.raises(ValueError):
        CapAssignment.for_line(line, [2.0, 0.5, 0.5])


def test_line_and_points_validation():
    with pytest.raises(ValueError):
        LineMetric([0.5, 1.0])
    with pytest.raises(ValueError):
        LineMetric([0.0, 2.0, 1.0])
    line = LineMetric.from_gaps([1.0, 2.0])
    assert np.array_equal(line.locs, [0.0, 1.0, 3.0])
    assert line.distances()[0, 2] == 3.0
    with pytest.raises(ValueError):
        PointSet(np.zeros((3, 0)))
    with pytest.raises(ValueError):
        Embedding(np.array([[0.0, np.inf]]))


def test_eval_distortion_isometry_and_scaling():
    locs = np.array([0.0, 1.0, 2.5, 4.0])
    truth = np.abs(locs[:, None] - locs[None, :])
    rep = eval_distortion(truth, Embedding(locs[:, None]))
    assert (rep.contraction, rep.expansion, rep.distortion) == pytest.approx((1, 1, 1))
    rep2 = eval_distortion(truth, Embedding(2 * locs[:, None]))
    assert (rep2.contraction, rep2.expansion, rep2.distortion) == pytest.approx((2, 2, 1))
    assert rep.violations == 0


@given(seed=seeds, scale=st.floats(0.01, 100.0))
def test_eval_distortion_scale_invariant(seed, scale):
    gen = RngSeed(seed).generator()
    pts = gen.random((8, 3))
    truth = l1_distance_matrix(gen.random((8, 2)))
    a = eval_distortion(truth, Embedding(pts))
    b = eval_distortion(truth, Embedding(scale * pts))
    assert math.isclose(a.distortion, b.distortion, rel_tol=1e-9)


def test_eval_distortion_counts_zero_truth_violations():
    truth = np.zeros((2, 2))
    rep = eval_distortion(truth, Embedding(np.array([[0.0], [1.0]])))
    assert rep.violations == 1
    assert rep.degenerate
    callable_rep = eval_distortion(lambda i, j: abs(i - j), Embedding(np.arange(4.0)[:, None]))
    assert callable_rep.distortion == pytest.approx(1.0)


def test_caterpillar_isometry_gives_unit_distortion():
    tree = gen_random_tree(40, 1.0, RngSeed(5))
    rows = snip_embed(tree, decompose(tree), 1.0).vectors.toarray()
    rep = eval_distortion(tree_distance_matrix(tree), Embedding(rows))
    assert abs(rep.distortion - 1.0) <= TOL


def test_file_round_trips(tmp_path):
    tree = gen_random_tree(9, 1.0, RngSeed(3))
    write_tree(tree, tmp_path / "t.tsv")
    back = read_tree(tmp_path / "t.tsv")
    assert back.edges == tree.edges and back.root == tree.root

    caps = np.array([0.1, 1 / 3, 2.0])
    write_caps(caps, tmp_path / "c.txt")
    assert np.array_equal(read_caps(tmp_path / "c.txt"), caps)

    pts = RngSeed(4).generator().random((5, 3))
    write_points(pts, tmp_path / "p.csv")
    assert np.array_equal(read_points(tmp_path / "p.csv"), pts)

    emb = Embedding(pts)
    write_embedding(emb, tmp_path / "e.csv")
    assert (tmp_path / "e.csv").read_text().startswith("dim=3\n")
    assert np.array_equal(read_embedding(tmp_path / "e.csv").rows, pts)


def test_tree_file_rejects_bad_header(tmp_path):
    (tmp_path / "bad.tsv").write_text("0\t1\t2.0\n")
    with pytest.raises(ValueError):
        read_tree(tmp_path / "bad.tsv")


def test_lca_and_path_edges():
    tree = WeightedTree.from_parents([-1, 0, 0, 1, 1, 2], [0, 1, 1, 1, 1, 1], 0)
    assert tree.lca(3, 4) == 1
    assert tree.lca(3, 5) == 0
    assert sorted(tree.path_edges(3, 5)) == [1, 2, 3, 5]
    for i, j in itertools.combinations(range(6), 2):
        assert tree_distance(tree, i, j) == len(tree.path_edges(i, j))
