import numpy as np
import pytest

from bisekit import ArgumentError
from bisekit.embedding import (
    GraphSpatialTree,
    covariance_oracle,
    restrict_embedding,
    sample_gaussian_embedding,
    straight_embedding,
)
from bisekit.realtree import MetricTree, TreePoint, reduced_subtree


def y_tree():
    return MetricTree([-1, 0, 1, 1], [0.0, 1.0, 2.0, 3.0], marks=[2, 3])


def test_straight_embedding_interpolates():
    g = straight_embedding(y_tree(), [[0, 0], [1, 0], [1, 2], [4, 0]])
    assert g.evaluate(TreePoint(2, 1.0)).tolist() == [1.0, 1.0]
    assert g.evaluate(TreePoint(0, 0.0)).tolist() == [0.0, 0.0]
    assert g.node_positions().shape == (4, 2)
    with pytest.raises(ArgumentError):
        g.evaluate(TreePoint(1, 2.0))


def test_text_round_trip(rng):
    g = sample_gaussian_embedding(y_tree(), 3, rng)
    assert GraphSpatialTree.from_text(g.to_text()) == g


def test_gaussian_embedding_is_continuous_at_vertices(rng):
    g = sample_gaussian_embedding(y_tree(), 2, rng)
    for v in (2, 3):
        start = g.polylines[v][1][0]
        assert np.array_equal(start, g.node_position(1))
    assert g.polylines[1][0][-1] == 1.0


def test_dim_must_be_positive(rng):
    with pytest.raises(ArgumentError):
        sample_gaussian_embedding(y_tree(), 0, rng)


def test_covariance_oracle_is_meet_depth():
    t = y_tree()
    a, b = t.vertex_point(2), t.vertex_point(3)
    assert covariance_oracle(t, a, b) == 1.0
    assert covariance_oracle(t, a, a) == 3.0
    assert covariance_oracle(t, TreePoint(2, 0.5), a) == 1.5


def test_restriction_agrees_with_parent_embedding(rng):
    big = MetricTree([-1, 0, 1, 1, 2, 2], [0, 1.0, 1.0, 2.0, 0.5, 0.7])
    g = sample_gaussian_embedding(big, 2, rng)
    red = reduced_subtree(big, [big.vertex_point(4), big.vertex_point(3)])
    r = restrict_embedding(g, red)
    for v in range(1, red.n_nodes):
        src = red.source[v]
        assert np.allclose(r.node_position(v), g.evaluate(src))
        # a midpoint of a reduced edge sits on the big tree's path
        mid = TreePoint(v, red.lengths[v] / 2)
        depth = red.point_depth(mid)
        big_mid = big.point_at_depth(src.edge, depth)
        assert np.allclose(r.evaluate(mid), g.evaluate(big_mid))


def test_empirical_covariance_small(rng):
    t = y_tree()
    draws = [sample_gaussian_embedding(t, 1, rng) for _ in range(4000)]
    leaves = np.array([[g.node_position(2)[0], g.node_position(3)[0]] for g in draws])
    cov = np.cov(leaves.T)
    assert cov[0, 1] == pytest.approx(1.0, abs=0.15)
    assert cov[0, 0] == pytest.approx(3.0, abs=0.3)
    assert cov[1, 1] == pytest.approx(4.0, abs=0.4)
