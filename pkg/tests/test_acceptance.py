"""Acceptance criteria at their stated sizes and tolerances, one test each.

Each test records a single PASS/FAIL line, collected in the terminal summary.
Run on their own with ``pytest -m acceptance``.
"""

from fractions import Fraction
import math
import time

import numpy as np
import pytest

from bisekit.cli import main
from bisekit.conditions import check_condition_R, check_edge_uniform
from bisekit.config import build_config
from bisekit.embedding import sample_gaussian_embedding
from bisekit.experiments import run
from bisekit.lattice import sample_surrogate
from bisekit.realtree import MetricTree, TreePoint, lebesgue_measure_of_descendants
from bisekit.skeleton import build_bundle, build_gk, find_cutpoints, star_triangle

from .test_lattice import traced_graph

pytestmark = pytest.mark.acceptance


class Clock:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.start


def experiment(kind, seed, **values):
    return run(build_config({"kind": kind, "seed": seed, **values})).report


def fraction_distance(parent, lengths, u, v):
    up = {}
    d, w = Fraction(0), u
    while w >= 0:
        up[w] = d
        d += lengths[w]
        w = parent[w]
    d, w = Fraction(0), v
    while w not in up:
        d += lengths[w]
        w = parent[w]
    return d + up[w]


def test_star_triangle_exactness(verdict):
    rng = np.random.default_rng(1)
    graphs = triangles = failures = 0
    with Clock() as clock:
        seed = 0
        while graphs < 1000:
            seed += 1
            g = traced_graph(seed, int(rng.integers(10, 80)))
            cuts = find_cutpoints(g)
            if not len(cuts):
                continue
            pts = rng.choice(cuts, size=int(rng.integers(1, 5))).tolist()
            gk = build_gk(g, pts)
            if not gk.tree_like:
                continue
            graphs += 1
            parent, lengths, hosts = star_triangle(g, gk)
            assert all(isinstance(x, Fraction) for x in lengths)
            node = {h: i for i, h in enumerate(hosts) if h >= 0}
            for clique in gk.cliques:
                if len(clique) != 3:
                    continue
                triangles += 1
                x, y, z = clique
                dx, dy = g.bfs(x), g.bfs(y)
                for (a, b), want in (((x, y), dx[y]), ((x, z), dx[z]), ((y, z), dy[z])):
                    if fraction_distance(parent, lengths, node[a], node[b]) != want:
                        failures += 1
    ok = failures == 0 and triangles > 0 and clock.seconds < 10
    assert verdict(1, ok, f"star-triangle: {graphs} tree-like graphs, {triangles} triangles, {failures} broken identities, {clock.seconds:.1f}s (< 10s)")


def test_resistance_on_trees(verdict):
    rng = np.random.default_rng(2)
    ratios = []
    with Clock() as clock:
        for i in range(1000):
            n = 10 + i % 91
            g = sample_surrogate(n, 1.0, 2, 1, rng, max_vertices=40 * n * n)
            ratios += check_condition_R(g, rng.integers(1, g.n_vertices, 5)).details["ratios"]
    exact = sum(r == 1.0 for r in ratios)
    ok = exact == len(ratios) and clock.seconds < 30
    assert verdict(2, ok, f"R/d on trees: {exact}/{len(ratios)} ratios exactly 1 over 1000 hosts with n in [10, 100], {clock.seconds:.1f}s (< 30s)")


def test_edge_uniform_bound(verdict):
    rng = np.random.default_rng(3)
    worst, matches, checks = Fraction(0), 0, 0
    with Clock() as clock:
        for _ in range(1000):
            g = sample_surrogate(5, 1.0, 2, 1, rng, max_vertices=1000)
            rep = check_edge_uniform(g, 100, rng)
            worst = max(worst, rep.statistic * g.n_vertices)
            matches += rep.details["identity_matches"]
            checks += 100
    ok = worst <= 1 and matches == checks and clock.seconds < 30
    assert verdict(3, ok, f"edge-uniform: max |G|*deviation {float(worst):.4f} <= 1, identity held {matches}/{checks}, {clock.seconds:.1f}s (< 30s)")


def test_measure_partition(verdict):
    rng = np.random.default_rng(4)
    bundles = bad = skipped = 0
    with Clock() as clock:
        for i in range(300):
            if i % 2:
                g = sample_surrogate(8, 1.0, 2, 1, rng, max_vertices=3000)
                pts = rng.integers(1, g.n_vertices, int(rng.integers(1, 8))).tolist()
            else:
                g = traced_graph(i, 60)
                cuts = find_cutpoints(g)
                cuts = cuts[cuts != 0]
                if not len(cuts):
                    continue
                pts = rng.choice(cuts, size=int(rng.integers(1, 5))).tolist()
                if not build_gk(g, pts).tree_like:
                    skipped += 1
                    continue
            b = build_bundle(g, pts)
            bundles += 1
            total = sum(b.mu().values())
            root = TreePoint(0, 0.0)
            if total != 1 or not isinstance(total, Fraction) or lebesgue_measure_of_descendants(b.tree, root) != 1 or b.lam(root) != 1:
                bad += 1
    ok = bad == 0
    assert verdict(4, ok, f"measure partition: {bundles - bad}/{bundles} bundles with mu summing to exactly 1 and lambda(root) = 1 ({skipped} non-tree-like hosts skipped), {clock.seconds:.1f}s")


@pytest.mark.slow
def test_crt_sampler_cross_validation(verdict):
    with Clock() as clock:
        rep = experiment("crt-sample", 5, Ks=(1, 2, 3), replicas=100_000)
    per_k = rep["details"]["per_K"]
    shape = max(v["shape_deviation"] for v in per_k.values())
    edge = max(v["max_edge_ks"] for v in per_k.values())
    ok = shape < 0.02 and edge < 0.02 and clock.seconds < 300
    assert verdict(5, ok, f"CRT samplers, K in 1..3, 1e5 replicas: max edge KS {edge:.4f} < 0.02, shape deviation {shape:.4f} < 0.02, {clock.seconds:.0f}s (< 300s)")


def cross_covariance_z(samples, a, b, truth):
    """Largest |empirical - true| cross-covariance entry in standard errors."""
    xa, xb = samples[:, a, :], samples[:, b, :]
    xa = xa - xa.mean(axis=0)
    xb = xb - xb.mean(axis=0)
    n, d = xa.shape
    worst = 0.0
    for i in range(d):
        for j in range(d):
            est = float(np.mean(xa[:, i] * xb[:, j]))
            want = truth if i == j else 0.0
            se = float(np.std(xa[:, i] * xb[:, j]) / math.sqrt(n))
            worst = max(worst, abs(est - want) / se)
    return worst


@pytest.mark.slow
def test_gaussian_embedding_covariance(verdict):
    rng = np.random.default_rng(6)
    skeletons = [
        MetricTree([-1, 0, 1, 1, 0], [0.0, 1.0, 2.0, 0.5, 1.5], marks=[2, 3, 4]),
        MetricTree([-1, 0, 1, 2, 2, 1], [0.0, 0.3, 0.7, 1.0, 0.2, 0.9], marks=[3, 4, 5]),
    ]
    worst = 0.0
    with Clock() as clock:
        for tree in skeletons:
            leaves = list(tree.marks)
            samples = np.empty((100_000, len(leaves), 2))
            for s in range(len(samples)):
                g = sample_gaussian_embedding(tree, 2, rng, resolution=1.0)
                samples[s] = [g.node_position(v) for v in leaves]
            for i, u in enumerate(leaves):
                for j, v in enumerate(leaves[: i + 1]):
                    meet = tree.depth[tree.lca(u, v)]
                    worst = max(worst, cross_covariance_z(samples, i, j, meet))
    ok = worst < 3 and clock.seconds < 120
    assert verdict(6, ok, f"embedding covariance, two 3-leaf skeletons, 1e5 samples: worst entry {worst:.3f} SE (< 3), {clock.seconds:.0f}s (< 120s)")


@pytest.mark.slow
def test_lemma_step0_bound(verdict):
    with Clock() as clock:
        rep = experiment("lemma-step0", 7, K=1, K1=200, M=100, replicas=10_000, K1s=(25, 50, 100, 200))
    d = rep["details"]
    ok = rep["pass"] and clock.seconds < 300
    sweep = ", ".join(f"{k}:{p:.3f}" for k, p in zip(d["sweep_K1"], d["sweep_probability"]))
    assert verdict(
        7,
        ok,
        f"step-0 lemma, K=1 K1=200 M=100, 1e4 replicas: probability {d['probability']:.4f} +- {d['se']:.4f} against {d['bound'] - 0.02:.5f}; sweep over K1 {sweep}; {clock.seconds:.0f}s (< 300s)",
    )


@pytest.mark.slow
def test_empirical_measure_trend(verdict):
    with Clock() as clock:
        rep = experiment("empirical-measure", 8, n=100, K=3, replicas=200)
    d = rep["details"]
    meds = ", ".join(f"{m:.4f}+-{s:.4f}" for m, s in zip(d["median_tv"], d["se"]))
    ok = rep["pass"] and clock.seconds < 600
    assert verdict(8, ok, f"empirical measure TV medians along (K1,K2) {meds}; largest rise {rep['statistic']:.2f} SE (<= 1), {clock.seconds:.0f}s (< 600s)")


@pytest.mark.slow
def test_condition_V_trend(verdict):
    with Clock() as clock:
        rep = experiment("check-v", 9, replicas=200, Ks=(2, 4, 8, 16))
    meds = rep["details"]["median"]
    ok = all(b < a for a, b in zip(meds, meds[1:])) and clock.seconds < 600
    assert verdict(9, ok, "condition V medians for K=2,4,8,16: " + ", ".join(f"{m:.4f}" for m in meds) + f", {clock.seconds:.0f}s (< 600s)")


@pytest.mark.slow
def test_headline_walk_trend(verdict):
    with Clock() as clock:
        rep = experiment("walk-compare", 10, ns=(25, 50, 100), replicas=600, continuum_replicas=2000, K=24)
    ks = rep["details"]["median_ks"]
    ok = all(b < a for a, b in zip(ks, ks[1:])) and clock.seconds < 1800
    fits = ", ".join(f"n={n}: {v['median_ks']:.4f} (c={v['time_constant']:.3g})" for n, v in rep["details"]["per_n"].items())
    assert verdict(10, ok, f"walk marginals, fitted median KS {fits}; strictly decreasing, {clock.seconds:.0f}s (< 1800s)")


DETERMINISM_RUNS = [
    ["crt-sample", "--seed", "3", "--replicas", "200", "--Ks", "1,2"],
    ["check-g", "--seed", "3", "--replicas", "20", "--n", "8", "--continuum-replicas", "40"],
    ["walk-compare", "--seed", "3", "--replicas", "20", "--continuum-replicas", "20", "--ns", "5,10", "--K", "4", "--step", "0.05"],
    ["empirical-measure", "--seed", "3", "--replicas", "6", "--n", "6", "--hosts", "2", "--K2", "30"],
    ["lemma-step0", "--seed", "3", "--replicas", "100", "--K1s", "5,10"],
]


def test_determinism(verdict, tmp_path):
    same, files = [], 0
    for k, args in enumerate(DETERMINISM_RUNS):
        outs = []
        for workers in ("1", "1", "2"):
            out = tmp_path / f"{k}-{len(outs)}"
            assert main([*args, "--workers", workers, "--out", str(out)]) == 0
            outs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
        files += len(outs[0])
        same.append(outs[0] == outs[1] == outs[2])
    kinds = ", ".join(a[0] for a in DETERMINISM_RUNS)
    ok = all(same)
    assert verdict(11, ok, f"determinism: {sum(same)}/{len(same)} experiments ({kinds}) byte-identical over {files} files across reruns and worker counts")
