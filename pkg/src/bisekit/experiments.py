"""Experiment runners behind the command line.

Each runner takes an ``ExperimentConfig`` and a worker count and returns a
``Result``. Replica i of stream s draws from ``SeedSequence([seed, s, i])``,
so results do not depend on how replicas are spread over workers.
"""

from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache, partial
import math

import numpy as np

from . import conditions as cond
from .embedding import sample_gaussian_embedding
from .excursion import sample_height_conditioned, sample_normalized
from .lattice import box_offsets, offspring_sigma, sample_surrogate, srw
from .metrics import ks_distance, shape_code
from .realtree import (
    MetricTree,
    crt_skeleton_from_excursion,
    crt_skeleton_linebreaking,
    crt_skeletons_from_bridges,
    reduced_subtree,
)
from .skeleton import build_bundle, sausage_diameters
from .svgplot import line_chart, segments_chart
from .treewalk import walk_on_tree

HOSTS, REPLICAS, CONTINUUM = 1, 2, 3


@dataclass
class Result:
    report: dict
    tables: dict = field(default_factory=dict)  # name -> (header, rows)
    plots: dict = field(default_factory=dict)  # name -> callable(stamp) -> svg text


def replica_rng(seed, stream, index):
    return np.random.default_rng(np.random.SeedSequence([seed, stream, index]))


def _run(job):
    fn, seed, stream, index, args, with_index = job
    extra = (index,) if with_index else ()
    return fn(replica_rng(seed, stream, index), *args, *extra)


def map_replicas(fn, seed, stream, count, workers=1, args=(), with_index=False):
    """``fn(rng, *args)`` for each replica, in replica order; ``with_index`` appends the replica index."""
    jobs = [(fn, seed, stream, i, args, with_index) for i in range(count)]
    if workers <= 1 or count < 2:
        return [_run(j) for j in jobs]
    with ProcessPoolExecutor(workers) as pool:
        return list(pool.map(_run, jobs, chunksize=max(1, count // (8 * workers))))


def median_se(values):
    """Median and its large-sample standard error."""
    v = np.asarray(values, dtype=float)
    if len(v) < 2:
        return float(np.median(v)), math.nan
    return float(np.median(v)), float(1.2533 * v.std(ddof=1) / math.sqrt(len(v)))


def largest_rise(medians, ses=None):
    """Largest increase between consecutive entries, optionally in units of the SE of the difference."""
    rises = []
    for j in range(len(medians) - 1):
        diff = medians[j + 1] - medians[j]
        if ses is not None:
            diff /= math.hypot(ses[j], ses[j + 1])
        rises.append(diff)
    return max(rises) if rises else -math.inf


def _host(cfg, rng, n=None):
    n = n or cfg.n
    return sample_surrogate(n, cfg.h, cfg.d, cfg.L, rng, offspring=cfg.offspring, max_vertices=int(cfg.cap * n * n))


def displacement_sigma(d, L):
    """Per-coordinate standard deviation of a uniform step in [-L, L]^d minus the origin."""
    steps = np.array(box_offsets(d, L))
    return float(math.sqrt((steps[:, 0] ** 2).mean()))


def distance_sigma(offspring):
    return 2.0 / offspring_sigma(offspring)


def _report(rep, cfg, extra=None):
    out = rep.to_dict()
    out["seed"] = cfg.seed
    out["params"] = cfg.to_dict()
    if extra:
        out.update(extra)
    return out


def _trend_plot(xs, ys, title, xlabel, ylabel, logx=False):
    return partial(line_chart, {ylabel: (list(xs), list(ys))}, title=title, xlabel=xlabel, ylabel=ylabel, logx=logx)


# -- sample-tree ----------------------------------------------------------------------


def _sample_tree(rng, cfg):
    g = _host(cfg, rng)
    base = (2 * cfg.L) ** cfg.d - 1
    return {
        "vertices": g.n_vertices,
        "edges": g.n_edges,
        "height": g.height,
        "collisions": g.collisions,
        "attempts": g.attempts,
        "log10_weight": g.n_edges * math.log10(cfg.z / base),
    }


def _tree_segments(g):
    pos = g.positions.astype(float)
    if g.d == 1:
        _, depth = g.rooted()
        pos = np.column_stack([depth, pos[:, 0]])
    return [(tuple(pos[a, :2]), tuple(pos[b, :2])) for a, b in g.edges]


def run_sample_tree(cfg, workers=1):
    rows = map_replicas(_sample_tree, cfg.seed, REPLICAS, cfg.replicas, workers, (cfg,))
    keys = list(rows[0])
    first = _host(cfg, replica_rng(cfg.seed, REPLICAS, 0))
    report = {
        "name": "sample-tree",
        "replicas": cfg.replicas,
        "median_vertices": float(np.median([r["vertices"] for r in rows])),
        "median_size_over_n2": float(np.median([r["vertices"] for r in rows])) / cfg.n**2,
        "collision_fraction": float(np.mean([r["collisions"] > 0 for r in rows])),
        "trees": rows,
        "seed": cfg.seed,
        "params": cfg.to_dict(),
    }
    plots = {"tree": partial(segments_chart, _tree_segments(first), title=f"surrogate tree, n={cfg.n}")}
    return Result(report, {"trees": (["replica"] + keys, [[i] + [r[k] for k in keys] for i, r in enumerate(rows)])}, plots)


# -- skeleton -----------------------------------------------------------------------


def _skeleton(rng, cfg):
    g = _host(cfg, rng)
    points = rng.integers(0, g.n_vertices, cfg.K)
    b = build_bundle(g, points)
    red = b.reduced()
    mu = b.mu()
    euclid, intrinsic = sausage_diameters(b)
    return {
        "vertices": g.n_vertices,
        "shape": shape_code(red),
        "lengths": [float(x) for x in red.lengths[1:]],
        "mu_total": str(sum(mu.values())),
        "lambda_root": b.tree.descendant_length(b.tree.vertex_point(0)) / b.tree.total_length if b.tree.n_nodes > 1 else 1.0,
        "euclid_diameter": euclid,
        "intrinsic_diameter": intrinsic,
    }


def run_skeleton(cfg, workers=1):
    rows = map_replicas(_skeleton, cfg.seed, REPLICAS, cfg.replicas, workers, (cfg,))
    report = {
        "name": "skeleton",
        "replicas": cfg.replicas,
        "mu_sums_exactly_one": all(r["mu_total"] == "1" for r in rows),
        "shape_frequencies": dict(sorted(Counter(r["shape"] for r in rows).items())),
        "skeletons": rows,
        "seed": cfg.seed,
        "params": cfg.to_dict(),
    }
    table = (
        ["replica", "vertices", "shape", "lengths", "mu_total", "euclid_diameter", "intrinsic_diameter"],
        [[i, r["vertices"], r["shape"], ";".join(repr(x) for x in r["lengths"]), r["mu_total"], r["euclid_diameter"], r["intrinsic_diameter"]] for i, r in enumerate(rows)],
    )
    rng = replica_rng(cfg.seed, REPLICAS, 0)
    g = _host(cfg, rng)
    b = build_bundle(g, rng.integers(0, g.n_vertices, cfg.K))
    marks = [tuple(b.positions[m][:2].astype(float)) for m in b.tree.marks] if g.d >= 2 else []
    plots = {"skeleton": partial(segments_chart, _tree_segments(g), title=f"host and {cfg.K} spanning points", marks=marks)}
    return Result(report, {"skeletons": table}, plots)


# -- check-g --------------------------------------------------------------------------


def _g_discrete(rng, cfg, n):
    g = _host(cfg, rng, n)
    b = build_bundle(g, rng.integers(0, g.n_vertices, cfg.K))
    s = cond.summarize_bundle(b, n)
    return s.shape, s.lengths, s.displacements, s.volume


def _g_continuum(rng, cfg):
    path = sample_height_conditioned(cfg.h / distance_sigma(cfg.offspring), cfg.dt, rng, max_duration=cfg.cap)
    big = crt_skeleton_from_excursion(path, cfg.K + cfg.delta_points, rng)
    small = reduced_subtree(big, [big.vertex_point(m) for m in big.marks[: cfg.K]])
    emb = sample_gaussian_embedding(small, cfg.d, rng)
    disp = np.array([emb.node_position(m) for m in small.marks])
    return cond.summarize(small, disp, path.duration, keep_tree=True)


def run_check_g(cfg, workers=1):
    cont = map_replicas(_g_continuum, cfg.seed, CONTINUUM, cfg.continuum_replicas, workers, (cfg,))
    per_n, stats, tables = {}, [], []
    for j, n in enumerate(cfg.ns):
        raw = map_replicas(_g_discrete, cfg.seed, REPLICAS * 100 + j, cfg.replicas, workers, (cfg, n))
        disc = [cond.SkeletonSummary(*r) for r in raw]
        rep = cond.check_condition_G(disc, cont, cfg.K, cfg.pass_threshold, cfg.min_count, cfg.delta)
        per_n[str(n)] = rep.to_dict()
        stats.append(rep.statistic)
        tables.append([n, rep.statistic, rep.details["sigma_d"], rep.details["sigma_phi"], rep.details["shape_deviation"]])
    final = cond.ConditionReport(
        "condition-G",
        stats[-1],
        cfg.pass_threshold,
        cfg.replicas,
        notes=cond.WEAK_NOTE,
        details={"per_n": per_n, "statistics": stats, "largest_rise": largest_rise(stats), "theory_sigma_d": distance_sigma(cfg.offspring), "theory_sigma_phi": displacement_sigma(cfg.d, cfg.L)},
    )
    return Result(
        _report(final, cfg),
        {"check_g": (["n", "statistic", "sigma_d", "sigma_phi", "shape_deviation"], tables)},
        {"check_g": _trend_plot(cfg.ns, stats, "condition (G) statistic", "n", "statistic", logx=True)},
    )


# -- check-v ---------------------------------------------------------------------------


def _v_continuum(rng, cfg):
    path = sample_normalized(cfg.grid_points, rng)
    return [cond.descendant_discrepancy(b.tree, b.atoms) for b in (cond.continuum_bundle(path, K, rng) for K in cfg.Ks)]


def _v_lattice(rng, cfg):
    g = _host(cfg, rng)
    points = rng.integers(0, g.n_vertices, max(cfg.Ks))
    return [cond.check_condition_V(build_bundle(g, points[:K])).statistic for K in cfg.Ks]


def run_check_v(cfg, workers=1):
    fn = _v_continuum if cfg.source == "continuum" else _v_lattice
    rows = np.array(map_replicas(fn, cfg.seed, REPLICAS, cfg.replicas, workers, (cfg,)))
    meds, ses = zip(*(median_se(rows[:, j]) for j in range(len(cfg.Ks))))
    rise = largest_rise(meds)
    rep = cond.ConditionReport(
        "condition-V",
        rise,
        cfg.pass_threshold,
        cfg.replicas,
        notes=f"{cfg.source} bundles; statistic is the largest rise of the median exact sup between consecutive K",
        details={"K": list(cfg.Ks), "median": list(meds), "se": list(ses)},
    )
    table = (["replica"] + [f"K{K}" for K in cfg.Ks], [[i] + list(r) for i, r in enumerate(rows.tolist())])
    return Result(_report(rep, cfg), {"check_v": table}, {"check_v": _trend_plot(cfg.Ks, meds, "median sup |lambda - mu|", "K", "median", logx=True)})


# -- check-r ----------------------------------------------------------------------------


def _check_r(rng, cfg):
    g = _host(cfg, rng)
    points = rng.integers(1, g.n_vertices, cfg.K) if g.n_vertices > 1 else []
    rep = cond.check_condition_R(g, points, 1.0, cfg.pass_threshold)
    return rep.statistic, rep.details["ratios"]


def run_check_r(cfg, workers=1):
    rows = map_replicas(_check_r, cfg.seed, REPLICAS, cfg.replicas, workers, (cfg,))
    ratios = [x for _, r in rows for x in r]
    rep = cond.ConditionReport(
        "condition-R",
        max(s for s, _ in rows),
        cfg.pass_threshold,
        cfg.replicas,
        notes="surrogate tree hosts, rho = 1",
        details={"all_ratios_one": all(x == 1.0 for x in ratios), "ratios": len(ratios), "min_ratio": min(ratios, default=1.0), "max_ratio": max(ratios, default=1.0)},
    )
    table = (["replica", "deviation", "ratios"], [[i, s, ";".join(repr(x) for x in r)] for i, (s, r) in enumerate(rows)])
    return Result(_report(rep, cfg), {"check_r": table})


# -- check-s ------------------------------------------------------------------------------


def _check_s(rng, cfg):
    g = _host(cfg, rng)
    points = rng.integers(0, g.n_vertices, max(cfg.Ks))
    return [sausage_diameters(build_bundle(g, points[:K])) for K in cfg.Ks]


def run_check_s(cfg, workers=1):
    rows = map_replicas(_check_s, cfg.seed, REPLICAS, cfg.replicas, workers, (cfg,))
    diam = {K: [r[j] for r in rows] for j, K in enumerate(cfg.Ks)}
    rep = cond.check_condition_S(diam, cfg.n, cfg.eps, cfg.pass_threshold)
    tails = rep.details["tails"]
    table = (["K", "euclid_tail", "intrinsic_tail", "se_euclid", "se_intrinsic"], [[K, t["euclid"], t["intrinsic"], t["se_euclid"], t["se_intrinsic"]] for K, t in tails.items()])
    plot = partial(
        line_chart,
        {"euclid": (list(cfg.Ks), [tails[K]["euclid"] for K in cfg.Ks]), "intrinsic": (list(cfg.Ks), [tails[K]["intrinsic"] for K in cfg.Ks])},
        title="sausage diameter tails",
        xlabel="K",
        ylabel="P(diameter > eps)",
        logx=True,
    )
    return Result(_report(rep, cfg), {"check_s": table}, {"check_s": plot})


# -- check-edge-uniform ------------------------------------------------------------------


def _edge_uniform(rng, cfg):
    g = _host(cfg, rng)
    rep = cond.check_edge_uniform(g, cfg.trials, rng)
    return float(rep.statistic * g.n_vertices), rep.details["identity_matches"], g.n_vertices


def run_check_edge_uniform(cfg, workers=1):
    rows = map_replicas(_edge_uniform, cfg.seed, REPLICAS, cfg.replicas, workers, (cfg,))
    rep = cond.ConditionReport(
        "edge-uniform",
        max(r[0] for r in rows),
        cfg.pass_threshold,
        cfg.replicas,
        notes="statistic is the worst deviation times |G|; tree hosts, so the bound is exact",
        details={"trials_per_host": cfg.trials, "identity_matches": sum(r[1] for r in rows), "identity_checks": cfg.trials * cfg.replicas},
    )
    return Result(_report(rep, cfg), {"edge_uniform": (["replica", "scaled_deviation", "identity_matches", "vertices"], [[i, *r] for i, r in enumerate(rows)])})


# -- empirical-measure ----------------------------------------------------------------------


@lru_cache(maxsize=64)
def fixed_host(cfg, j):
    return _host(cfg, replica_rng(cfg.seed, HOSTS, j))


def _empirical(rng, cfg, K1, K2, i):
    host = fixed_host(cfg, i % cfg.hosts)
    return float(cond.empirical_tv(cond.build_empirical_measure(host, cfg.K, K1, K2, rng)))


def run_empirical_measure(cfg, workers=1):
    meds, ses, table = [], [], []
    for j, (K1, K2) in enumerate(cfg.pairs):
        tv = map_replicas(_empirical, cfg.seed, REPLICAS * 100 + j, cfg.replicas, workers, (cfg, K1, K2), with_index=True)
        m, se = median_se(tv)
        meds.append(m)
        ses.append(se)
        table.append([K1, K2, m, se])
    rise = largest_rise(meds, ses)
    rep = cond.ConditionReport(
        "empirical-measure",
        rise,
        cfg.pass_threshold,
        cfg.replicas,
        notes="statistic is the largest rise of the median TV between consecutive (K1, K2), in standard errors of the difference",
        details={"pairs": [list(p) for p in cfg.pairs], "median_tv": meds, "se": ses, "hosts": cfg.hosts},
    )
    labels = list(range(len(cfg.pairs)))
    return Result(_report(rep, cfg), {"empirical_measure": (["K1", "K2", "median_tv", "se"], table)}, {"empirical_measure": _trend_plot(labels, meds, "median TV along (K1, K2)", "pair index", "median TV")})


# -- crt-sample -----------------------------------------------------------------------------


def _crt_pair(rng, cfg, K):
    a = crt_skeleton_linebreaking(K, rng)
    b = crt_skeletons_from_bridges(K, 1, cfg.grid_points, rng)[0]
    return (shape_code(a), a.lengths[1:]), (shape_code(b), b.lengths[1:])


def compare_skeleton_samples(a, b, min_count):
    """Shape-frequency deviation and per-edge KS for shapes common to two samples."""
    fa, fb = Counter(s for s, _ in a), Counter(s for s, _ in b)
    dev = max(abs(fa[c] / len(a) - fb[c] / len(b)) for c in set(fa) | set(fb))
    ks = {}
    for c in sorted(set(fa) & set(fb)):
        if fa[c] < min_count or fb[c] < min_count:
            continue
        la = np.array([l for s, l in a if s == c])
        lb = np.array([l for s, l in b if s == c])
        ks[c] = [ks_distance(la[:, e], lb[:, e]) for e in range(la.shape[1])]
    return dev, ks


def run_crt_sample(cfg, workers=1):
    per_k, table, worst = {}, [], 0.0
    for j, K in enumerate(cfg.Ks):
        rows = map_replicas(_crt_pair, cfg.seed, REPLICAS * 100 + j, cfg.replicas, workers, (cfg, K))
        dev, ks = compare_skeleton_samples([r[0] for r in rows], [r[1] for r in rows], cfg.min_count)
        top = max((x for v in ks.values() for x in v), default=math.inf)
        per_k[str(K)] = {"shape_deviation": dev, "edge_ks": ks, "max_edge_ks": top, "noise_scale": 1.36 * math.sqrt(2.0 / cfg.replicas)}
        worst = max(worst, dev, top)
        table.append([K, dev, top])
    rep = cond.ConditionReport(
        "crt-sample",
        worst,
        cfg.pass_threshold,
        cfg.replicas,
        notes="line-breaking against the tree coded by a rotated Brownian bridge",
        details={"per_K": per_k},
    )
    return Result(_report(rep, cfg), {"crt_sample": (["K", "shape_deviation", "max_edge_ks"], table)})


# -- walk-compare --------------------------------------------------------------------------


def fit_grid(cfg):
    return np.exp(np.linspace(math.log(cfg.fit_min), math.log(cfg.fit_max), cfg.fit_points))


def _walk_discrete(rng, cfg, n):
    g = _host(cfg, rng, n)
    steps = np.round(n * g.n_edges * np.asarray(cfg.times)).astype(np.int64)
    order = np.argsort(steps, kind="stable")
    w = srw(g, int(steps.max()), rng, record=steps[order])
    out = np.empty((len(steps), g.d))
    out[order] = w.positions / math.sqrt(n)
    return out, g.n_edges / n**2


def _walk_continuum(rng, cfg):
    sd = distance_sigma(cfg.offspring)
    path = sample_height_conditioned(cfg.h / sd, cfg.dt, rng, max_duration=cfg.cap)
    tree = crt_skeleton_from_excursion(path, cfg.K, rng)
    tree = MetricTree(tree.parent, [x * sd for x in tree.lengths], tree.marks)
    emb = sample_gaussian_embedding(tree, cfg.d, rng)
    sphi = displacement_sigma(cfg.d, cfg.L)
    emb.polylines = [(o, p * sphi) for o, p in emb.polylines]
    want = np.outer(fit_grid(cfg), cfg.times).ravel()
    walk = walk_on_tree(emb, cfg.step, float(want.max()), rng, times=np.sort(want), time_scale="normalized", strict=False)
    return walk.at(want).reshape(cfg.fit_points, len(cfg.times), cfg.d), path.duration


def walk_ks(disc, cont):
    """Median over (time, coordinate) of the KS distance, for every fitted time constant."""
    out = np.empty(cont.shape[1])
    for c in range(cont.shape[1]):
        ks = [ks_distance(disc[:, j, k], cont[:, c, j, k]) for j in range(disc.shape[1]) for k in range(disc.shape[2])]
        out[c] = np.median(ks)
    return out


def run_walk_compare(cfg, workers=1):
    rows = map_replicas(_walk_continuum, cfg.seed, CONTINUUM, cfg.continuum_replicas, workers, (cfg,))
    cont = np.array([r[0] for r in rows])
    grid = fit_grid(cfg)
    per_n, best, table, curves = {}, [], [], {}
    for j, n in enumerate(cfg.ns):
        drows = map_replicas(_walk_discrete, cfg.seed, REPLICAS * 100 + j, cfg.replicas, workers, (cfg, n))
        disc = np.array([r[0] for r in drows])
        ks = walk_ks(disc, cont)
        b = int(np.argmin(ks))
        best.append(float(ks[b]))
        per_n[str(n)] = {"time_constant": float(grid[b]), "median_ks": float(ks[b]), "median_volume": float(np.median([r[1] for r in drows]))}
        table.append([n, float(grid[b]), float(ks[b])])
        curves[f"n={n}"] = (grid.tolist(), ks.tolist())
    rep = cond.ConditionReport(
        "walk-compare",
        largest_rise(best),
        cfg.pass_threshold,
        cfg.replicas,
        notes="statistic is the largest rise of the fitted median KS between consecutive n; one time constant fitted per n",
        details={"per_n": per_n, "median_ks": best, "continuum_replicas": cfg.continuum_replicas, "continuum_median_volume": float(np.median([r[1] for r in rows])), "noise_scale": 1.36 * math.sqrt(1 / cfg.replicas + 1 / cfg.continuum_replicas)},
    )
    plots = {
        "walk_ks_vs_n": _trend_plot(cfg.ns, best, "fitted median KS", "n", "KS", logx=True),
        "walk_time_fit": partial(line_chart, curves, title="KS against time constant", xlabel="c", ylabel="median KS", logx=True),
    }
    return Result(_report(rep, cfg), {"walk_compare": (["n", "time_constant", "median_ks"], table)}, plots)


# -- lemma-step0 ------------------------------------------------------------------------------


def _step0(rng, K, K1, M):
    tree = crt_skeleton_linebreaking(K + K1 + math.isqrt(M), rng)
    return cond.step0_event(tree, K, K1)


def run_lemma_step0(cfg, workers=1):
    hits = sum(map_replicas(_step0, cfg.seed, REPLICAS, cfg.replicas, workers, (cfg.K, cfg.K1, cfg.M)))
    rep = cond.step0_report(hits, cfg.replicas, cfg.K, cfg.K1, cfg.M, cfg.pass_threshold)
    sweep = []
    for j, K1 in enumerate(cfg.K1s):
        h = sum(map_replicas(_step0, cfg.seed, REPLICAS * 100 + j, cfg.replicas, workers, (cfg.K, K1, cfg.M)))
        sweep.append(h / cfg.replicas)
    rep.details["sweep_K1"] = list(cfg.K1s)
    rep.details["sweep_probability"] = sweep
    rep.details["sweep_nondecreasing"] = all(b >= a for a, b in zip(sweep, sweep[1:]))
    return Result(
        _report(rep, cfg),
        {"lemma_step0": (["K1", "probability"], [[k, p] for k, p in zip(cfg.K1s, sweep)])},
        {"lemma_step0": _trend_plot(cfg.K1s, sweep, "all-project probability", "K1", "probability", logx=True)},
    )


RUNNERS = {
    "sample-tree": run_sample_tree,
    "skeleton": run_skeleton,
    "check-g": run_check_g,
    "check-v": run_check_v,
    "check-r": run_check_r,
    "check-s": run_check_s,
    "check-edge-uniform": run_check_edge_uniform,
    "empirical-measure": run_empirical_measure,
    "crt-sample": run_crt_sample,
    "walk-compare": run_walk_compare,
    "lemma-step0": run_lemma_step0,
}


def run(cfg, workers=1):
    return RUNNERS[cfg.kind](cfg, workers)
