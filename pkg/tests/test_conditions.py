from fractions import Fraction
import json
import math

import numpy as np
import pytest
from hypothesis import given, note, settings, strategies as st

from bisekit import ArgumentError
from bisekit.conditions import (
    ConditionReport,
    build_empirical_measure,
    check_condition_G,
    check_condition_R,
    check_condition_S,
    check_condition_V,
    check_edge_uniform,
    check_lemma_step0,
    continuum_bundle,
    delta_dense,
    descendant_discrepancy,
    edge_uniform_deviation,
    empirical_measure_from_shape,
    empirical_measure_key,
    empirical_tv,
    step0_bound,
    step0_event,
    summarize,
)
from bisekit.embedding import sample_gaussian_embedding
from bisekit.excursion import sample_normalized
from bisekit.lattice import lattice_graph_from_sites, sample_surrogate
from bisekit.realtree import MetricTree, TreePoint, crt_skeleton_linebreaking
from bisekit.skeleton import build_bundle

from .oracles import grid_discrepancy
from .test_realtree import tree_points, trees


def star(leaves):
    sites = [(0, 0)] + [s for s in [(1, 0), (0, 1), (-1, 0), (0, -1), (1, 1), (-1, -1)][:leaves]]
    return lattice_graph_from_sites(sites, [((0, 0), s) for s in sites[1:]], 1)


def small_tree(seed, n=6):
    return sample_surrogate(n, 1.0, 2, 1, np.random.default_rng(seed), max_vertices=400)


def test_report_serialization():
    r = ConditionReport("x", Fraction(1, 4), 0.5, 3, details={"a": np.float64(2.0), "b": math.inf})
    d = r.to_dict()
    assert d["pass"] is True and d["statistic"] == 0.25
    assert d["details"] == {"a": 2.0, "b": "inf"}
    assert json.loads(r.to_json())["name"] == "x"
    assert not ConditionReport("x", 0.6, 0.5, 1).passed


def test_edge_uniform_on_star_by_hand(rng):
    g = star(5)
    assert edge_uniform_deviation(g, {0, 1}) == Fraction(2, 15)
    assert edge_uniform_deviation(g, set(range(6))) == 0
    assert edge_uniform_deviation(g, {3}) == Fraction(1, 6)


def test_edge_uniform_identity_on_trees(rng):
    for seed in range(3):
        g = small_tree(seed)
        r = check_edge_uniform(g, 40, rng)
        assert r.details["identity_matches"] == 40
        assert r.passed and r.threshold == Fraction(1, g.n_vertices)


def test_edge_uniform_on_a_cycle_can_fail(rng):
    sites = [(0, 0), (1, 0), (1, 1), (0, 1)]
    g = lattice_graph_from_sites(sites, list(zip(sites, sites[1:] + sites[:1])), 1)
    r = check_edge_uniform(g, 50, rng)
    assert r.details["identity_matches"] < 50
    assert r.statistic == Fraction(1, 4)


def test_empirical_measure_matches_shape_route(rng):
    for seed in range(5):
        g = small_tree(seed, 8)
        pts = np.random.default_rng(seed).integers(0, g.n_vertices, 2 + 6 + 30)
        m = build_empirical_measure(g, 2, 6, 30, rng, points=pts)
        full = build_bundle(g, pts).tree
        assert empirical_measure_key(m) == empirical_measure_from_shape(full, 2, 6, 30)
        assert sum(m.weights) <= 1
        assert 0 <= empirical_tv(m) <= 1


def test_empirical_measure_arguments(rng):
    with pytest.raises(ArgumentError):
        build_empirical_measure(small_tree(0), 0, 5, 5, rng)
    with pytest.raises(ArgumentError):
        empirical_measure_from_shape(crt_skeleton_linebreaking(3, rng), 1, 1, 2)


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_discrepancy_is_exact_sup(data):
    tree = data.draw(trees(max_nodes=8))
    pts = [data.draw(tree_points(tree)) for _ in range(data.draw(st.integers(0, 5)))]
    masses = [data.draw(st.floats(0.0, 1.0)) for _ in pts]
    total = sum(masses) or 1.0
    atoms = [(p, m / total) for p, m in zip(pts, masses)]
    note(tree.to_text())
    res = 1e-3
    exact = descendant_discrepancy(tree, atoms)
    grid = grid_discrepancy(tree, atoms, res)
    assert exact >= grid - 1e-9
    assert exact <= grid + 2 * res / tree.total_length + 1e-9


def test_discrepancy_small_for_length_proportional_atoms():
    tree = MetricTree([-1, 0, 1, 1], [0.0, 1.0, 2.0, 3.0])
    atoms = []
    for v in (1, 2, 3):
        k = 200 * v
        atoms += [(TreePoint(v, (i + 0.5) / k * tree.lengths[v]), 1 / 1200) for i in range(k)]
    assert descendant_discrepancy(tree, atoms) < 2 / 1200
    assert descendant_discrepancy(tree, [(TreePoint(0, 0.0), 1.0)]) == pytest.approx(1.0)


def test_discrepancy_with_atom_at_a_branch_vertex():
    # offset 0 on edge 3 is vertex 1; its descendants carry length 3 of 5
    tree = MetricTree([-1, 0, 0, 1, 1], [0.0, 1.0, 1.0, 1.0, 2.0])
    assert descendant_discrepancy(tree, [(TreePoint(3, 0.0), 1.0)]) == pytest.approx(0.4)
    assert descendant_discrepancy(tree, [(TreePoint(1, 1.0), 1.0)]) == pytest.approx(0.4)


def test_condition_V_on_lattice_and_continuum(rng):
    g = small_tree(1, 10)
    b = build_bundle(g, rng.integers(1, g.n_vertices, 4))
    r = check_condition_V(b, threshold=1.0)
    assert 0 <= r.statistic <= 1 and r.passed
    cb = continuum_bundle(sample_normalized(2049, rng), 5, rng)
    assert sum(m for _, m in cb.atoms) == pytest.approx(1.0)
    for p, _ in cb.atoms:
        cb.tree.check_point(p)
    assert 0 <= check_condition_V(cb).statistic <= 1


def test_condition_R_tree_and_cycle(rng):
    g = small_tree(2)
    r = check_condition_R(g, rng.integers(1, g.n_vertices, 5))
    assert r.statistic == pytest.approx(0.0) and r.passed
    sites = [(0, 0), (1, 0), (1, 1), (0, 1)]
    cyc = lattice_graph_from_sites(sites, list(zip(sites, sites[1:] + sites[:1])), 1)
    r = check_condition_R(cyc, [2])
    assert r.details["ratios"] == [pytest.approx(0.5)]
    assert r.statistic == pytest.approx(0.5) and not r.passed
    assert check_condition_R(cyc, [1]).details["ratios"] == [pytest.approx(0.75)]
    with pytest.raises(ArgumentError):
        check_condition_R(cyc, [0])


def test_condition_S():
    zero = {2: [(0.0, 0)] * 10, 4: [(0.0, 0)] * 10}
    assert check_condition_S(zero, 100, 0.1, 0.05).statistic == 0.0
    rising = {2: [(0.0, 0)] * 50, 4: [(5.0, 50)] * 50}
    r = check_condition_S(rising, 100, 0.1, 0.05)
    assert r.statistic == 1.0 and not r.details["monotone"]
    with pytest.raises(ArgumentError):
        check_condition_S({}, 100, 0.1, 0.05)


def summaries(rng, count, K, scale=1.0):
    out = []
    for _ in range(count):
        t = crt_skeleton_linebreaking(K, rng)
        g = sample_gaussian_embedding(t, 2, rng, resolution=0.05)
        disp = np.array([g.node_position(m) for m in t.marks])
        scaled = MetricTree(t.parent, [x * scale for x in t.lengths], t.marks)
        out.append(summarize(scaled, disp * math.sqrt(scale), keep_tree=True))
    return out


def test_condition_G_self_and_scaled(rng):
    base = summaries(rng, 200, 2)
    r = check_condition_G(base, base, 2, threshold=0.01)
    assert r.statistic == 0.0 and r.details["sigma_d"] == 1.0
    rng2 = np.random.default_rng(5)
    # a power of two keeps the rescaling exact in floating point
    scaled = summaries(rng2, 200, 2, scale=4.0)
    again = summaries(np.random.default_rng(5), 200, 2)
    r = check_condition_G(scaled, again, 2, threshold=0.01)
    assert r.details["sigma_d"] == 4.0
    assert r.details["sigma_phi"] == pytest.approx(1.0)
    assert r.statistic == pytest.approx(0.0, abs=1e-12)


def test_condition_G_detects_different_laws(rng):
    a = summaries(rng, 300, 2)
    b = [s for s in summaries(rng, 600, 2) if s.lengths.sum() > 1.0][:300]
    assert check_condition_G(a, b, 2, threshold=0.05).statistic > 0.05
    with pytest.raises(ArgumentError):
        check_condition_G([], a, 2)


def test_delta_dense_by_hand():
    t = MetricTree([-1, 0, 1, 1], [0.0, 0.5, 0.5, 0.2], marks=[2, 3])
    assert delta_dense(t, 1, 0.8)
    assert not delta_dense(t, 1, 0.6)
    # nothing projects onto the root edge below the branch point
    bare = MetricTree([-1, 0, 1, 1], [0.0, 1.0, 1.0, 1.0], marks=[2, 3])
    assert not delta_dense(bare, 2, 5.0)
    covered = MetricTree([-1, 0, 1, 1, 1], [0.0, 1.0, 1.0, 1.0, 0.1], marks=[2, 3, 4])
    assert delta_dense(covered, 2, 5.0)
    assert not delta_dense(covered, 2, 1.0)


def test_step0_bound_and_event(rng):
    assert step0_bound(100) == pytest.approx(0.810543, abs=1e-6)
    # fresh point 3 hangs off the K1 branch, so it projects off the K-skeleton
    t = MetricTree([-1, 0, 1, 1, 3], [0.0, 1.0, 1.0, 1.0, 1.0], marks=[2, 3, 4])
    assert step0_event(t, 1, 1)
    # fresh point hanging off the root edge projects onto the K-skeleton
    u = MetricTree([-1, 0, 1, 1, 0], [0.0, 1.0, 1.0, 1.0, 1.0], marks=[2, 3, 4])
    assert not step0_event(u, 1, 1)
    r = check_lemma_step0(1, 5, 4, 200, rng)
    assert 0 <= r.details["probability"] <= 1
    assert r.statistic == pytest.approx(r.details["bound"] - r.details["probability"])
    with pytest.raises(ArgumentError):
        check_lemma_step0(1, 5, 0, 10, rng)
