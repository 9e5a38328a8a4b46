"""Numerical checks of the scaling conditions on skeleton ensembles.

Every checker returns a ``ConditionReport`` whose ``passed`` flag is exactly
``statistic <= threshold``. Thresholds are arguments, never constants.
"""

from collections import Counter, deque
from dataclasses import asdict, dataclass, field
from fractions import Fraction
import json
import math

import numpy as np

from .errors import ArgumentError
from .lattice import effective_resistance
from .metrics import ks_distance, shape_code, total_variation
from .realtree import TreePoint, crt_skeleton_from_excursion, crt_skeleton_linebreaking
from .skeleton import build_bundle

WEAK_NOTE = "marginal test only: shape frequencies and per-coordinate laws, weaker than weak convergence of the joint law"


@dataclass
class ConditionReport:
    name: str
    statistic: float
    threshold: float
    replicas: int
    notes: str = ""
    details: dict = field(default_factory=dict)
    seed: object = None
    params: dict = field(default_factory=dict)

    @property
    def passed(self):
        return bool(self.statistic <= self.threshold)

    def to_dict(self):
        out = asdict(self)
        out["pass"] = self.passed
        return to_plain(out)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def to_plain(x):
    if isinstance(x, dict):
        return {str(k): to_plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [to_plain(v) for v in x]
    if isinstance(x, Fraction):
        return float(x)
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return to_plain(x.tolist())
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    return x


# -- uniform edge volume -------------------------------------------------------------


def random_connected_subset(graph, rng, size=None):
    """Connected vertex set grown from a uniform vertex by random frontier picks."""
    n = graph.n_vertices
    size = size or int(rng.integers(1, n + 1))
    start = int(rng.integers(n))
    inside = {start}
    frontier = list(graph.neighbors(start))
    while len(inside) < size and frontier:
        i = int(rng.integers(len(frontier)))
        frontier[i], frontier[-1] = frontier[-1], frontier[i]
        v = int(frontier.pop())
        if v in inside:
            continue
        inside.add(v)
        frontier.extend(int(w) for w in graph.neighbors(v) if w not in inside)
    return inside


def edge_uniform_deviation(graph, subset):
    """|P(V in B) - |E(B)|/|E|| for a uniform vertex V, exactly."""
    inside = np.zeros(graph.n_vertices, dtype=bool)
    inside[list(subset)] = True
    inner = int(np.sum(inside[graph.edges[:, 0]] & inside[graph.edges[:, 1]]))
    return abs(Fraction(len(subset), graph.n_vertices) - Fraction(inner, graph.n_edges))


def check_edge_uniform(host, trials, rng):
    """Largest deviation from uniform edge volume over random connected subsets.

    On a tree the deviation of a connected B is (|G| - |B|) / (|G| (|G| - 1)),
    which never exceeds 1/|G|; the report counts how often that identity holds.
    """
    n = host.n_vertices
    worst = Fraction(0)
    identity = 0
    for _ in range(trials):
        b = random_connected_subset(host, rng)
        dev = edge_uniform_deviation(host, b)
        worst = max(worst, dev)
        if n > 1 and dev == Fraction(n - len(b), n * (n - 1)):
            identity += 1
    tree = host.is_tree()
    return ConditionReport(
        "edge-uniform",
        worst,
        Fraction(1, n),
        trials,
        notes="exact bound on trees" if tree else "Monte Carlo sup over sampled connected subsets",
        details={"identity_matches": identity, "tree": tree, "vertices": n},
    )


# -- empirical measure -----------------------------------------------------------------


@dataclass
class EmpiricalMeasure:
    """Atoms on the K-skeleton where new branches attach, weighted by projection counts."""

    atoms: list  # TreePoint on the bundle tree
    weights: list  # Fraction per atom
    K: int
    K1: int
    K2: int
    nodes: list = field(default_factory=list)  # bundle node of each atom
    bundle: object = None

    def as_dict(self):
        return dict(zip(self.nodes, self.weights))


def build_empirical_measure(host, K, K1, K2, rng, points=None):
    """Empirical approximation of the projected edge measure on the K-skeleton.

    Atoms are the points of the K-skeleton where the branches towards the next
    K1 spanning points attach. Weights count how many of a further K2 points
    project onto each atom.
    """
    if min(K, K1, K2) < 1:
        raise ArgumentError("K, K1, K2 must be positive")
    if points is None:
        points = rng.integers(0, host.n_vertices, K + K1 + K2)
    points = [int(p) for p in points]
    bundle = build_bundle(host, points[:K])
    if not bundle.tree_like:
        raise ArgumentError("skeleton is not tree-like")
    proj, host_of = bundle.vertex_proj, bundle.host_of
    atoms = []
    for v in points[K : K + K1]:
        y = int(proj[v])
        if host_of[y] != v and y not in atoms:
            atoms.append(y)
    index = {y: i for i, y in enumerate(atoms)}
    counts = [0] * len(atoms)
    for v in points[K + K1 :]:
        i = index.get(int(proj[v]))
        if i is not None:
            counts[i] += 1
    tree = bundle.tree
    return EmpiricalMeasure(
        [tree.vertex_point(y) if y else TreePoint(0, 0.0) for y in atoms],
        [Fraction(c, K2) for c in counts],
        K,
        K1,
        K2,
        nodes=atoms,
        bundle=bundle,
    )


def empirical_measure_from_shape(tree, K, K1, K2):
    """The same measure read off the reduced tree of all K + K1 + K2 points.

    Atoms are returned as ``(depth, leaves below)`` keys so the result can be
    compared with one computed on the host.
    """
    marks = tree.marks
    if len(marks) != K + K1 + K2:
        raise ArgumentError("tree must carry K + K1 + K2 marks")
    core = _ancestors(tree, marks[:K])
    atoms = []
    for m in marks[K : K + K1]:
        y = _climb_to(tree, m, core)
        if y != m and y not in atoms:
            atoms.append(y)
    counts = Counter(_climb_to(tree, m, core) for m in marks[K + K1 :])
    out = {}
    for y in atoms:
        below = frozenset(j for j in range(K) if tree.is_ancestor(y, marks[j]))
        out[(tree.depth[y], below)] = Fraction(counts.get(y, 0), K2)
    return out


def empirical_measure_key(measure):
    """Host-side measure keyed like ``empirical_measure_from_shape``."""
    tree = measure.bundle.tree
    marks = tree.marks
    out = {}
    for y, w in zip(measure.nodes, measure.weights):
        below = frozenset(j for j in range(measure.K) if tree.is_ancestor(y, marks[j]))
        out[(tree.depth[y], below)] = w
    return out


def _ancestors(tree, nodes):
    seen = {0}
    for v in nodes:
        while v not in seen:
            seen.add(v)
            v = tree.parent[v]
    return seen


def _climb_to(tree, v, nodes):
    while v not in nodes:
        v = tree.parent[v]
    return v


def empirical_tv(measure):
    """Total variation between the empirical measure and the projected edge measure."""
    return total_variation(measure.as_dict(), measure.bundle.mu())


# -- condition (V) --------------------------------------------------------------------


def descendant_discrepancy(tree, atoms):
    """sup over points x of |lambda(below x) - mu(below x)|, computed exactly.

    ``atoms`` is a list of ``(TreePoint, mass)``; lambda is the normalized
    length measure. Between atoms the difference is linear along an edge, so
    it suffices to look at edge ends, at each atom and just past it.
    """
    total = tree.total_length
    on_edge = {}
    root_mass = 0.0
    for p, m in atoms:
        p = tree.canonical(p)
        if p.edge == 0:
            root_mass += float(m)
        else:
            on_edge.setdefault(p.edge, []).append((p.offset, float(m)))
    edge_mass = [0.0] * tree.n_nodes
    for e, items in on_edge.items():
        edge_mass[e] = sum(m for _, m in items)
    sub = [0.0] * tree.n_nodes
    for v in reversed(tree.preorder):
        p = tree.parent[v]
        if p >= 0:
            sub[p] += sub[v] + edge_mass[v]
    best = abs(1.0 - (root_mass + sub[0]))
    for v in range(1, tree.n_nodes):
        length = tree.lengths[v]
        below = tree.length_below[v]
        merged = {}
        for a, m in on_edge.get(v, []):
            merged[a] = merged.get(a, 0.0) + m
        items = sorted(merged.items())
        offs = [a for a, _ in items]
        masses = np.array([m for _, m in items])
        tail = np.concatenate([np.cumsum(masses[::-1])[::-1], [0.0]]) if items else np.zeros(1)

        def gap(s, mu_edge):
            return abs((below + length - s) / total - (sub[v] + mu_edge))

        best = max(best, gap(0.0, tail[0]), gap(length, sum(m for a, m in items if a >= length)))
        for i, a in enumerate(offs):
            best = max(best, gap(a, tail[i]))
            # just past an atom at the vertex lies on the child edges, covered there
            if a < length:
                best = max(best, gap(a, tail[i + 1]))
    return best


def bundle_atoms(bundle):
    tree = bundle.tree
    return [(tree.vertex_point(v) if v else TreePoint(0, 0.0), m) for v, m in bundle.mu().items()]


@dataclass
class ContinuumBundle:
    """K-skeleton of an excursion tree with the projected mass of the whole tree."""

    tree: object
    atoms: list
    path: object


def continuum_bundle(path, K, rng=None, times=None):
    """Skeleton spanned by K times plus the projection of every grid cell onto it."""
    tree = crt_skeleton_from_excursion(path, K, rng, times=times)
    times = tree.times
    vals = path.values
    n = len(vals) - 1
    grid = np.arange(n) * path.dt
    order = np.argsort(times, kind="stable")
    st = times[order]
    heights = path.height(st)
    # meet with nearest sampled time on each side
    left = np.full(n, -1.0)
    right = np.full(n, -1.0)
    pos = np.searchsorted(st, grid, side="right")  # number of sampled times <= grid time
    for k in range(len(st)):
        i0 = int(math.floor(st[k] / path.dt)) + 1
        i1 = n if k + 1 == len(st) else int(math.floor(st[k + 1] / path.dt)) + 1
        if i1 > i0:
            left[i0:i1] = np.minimum.accumulate(np.minimum(vals[i0:i1], heights[k]))
        j1 = int(math.ceil(st[k] / path.dt))
        j0 = 0 if k == 0 else int(math.ceil(st[k - 1] / path.dt))
        if j1 > j0:
            right[j0:j1] = np.minimum.accumulate(np.minimum(vals[j0:j1], heights[k])[::-1])[::-1]
    exact = np.isin(grid, st)
    depth = np.maximum(left, right)
    use_left = left >= right
    owner = np.where(use_left, pos - 1, pos)
    owner = np.where(exact, pos - 1, owner)
    depth = np.where(exact, vals[:n], depth)
    owner = order[np.clip(owner, 0, len(st) - 1)]
    mass = {}
    w = 1.0 / n
    for j in np.unique(owner):
        sel = depth[owner == j]
        node = tree.marks[j]
        chain = []
        v = node
        while v:
            chain.append(v)
            v = tree.parent[v]
        chain.reverse()
        tops = np.array([tree.depth[tree.parent[c]] for c in chain])
        uniq, cnt = np.unique(sel, return_counts=True)
        for h, c in zip(uniq, cnt):
            if h <= 0:
                key = (0, 0.0)
            else:
                e = chain[int(np.searchsorted(tops, h, side="left")) - 1]
                key = (e, min(float(h) - tree.depth[tree.parent[e]], tree.lengths[e]))
            mass[key] = mass.get(key, 0.0) + c * w
    atoms = [(tree.canonical(TreePoint(e, o)) if e else TreePoint(0, 0.0), m) for (e, o), m in mass.items()]
    return ContinuumBundle(tree, atoms, path)


def check_condition_V(bundle, threshold=0.1):
    """Exact sup of |lambda - mu| over descendant sets of one bundle."""
    if isinstance(bundle, ContinuumBundle):
        tree, atoms, kind = bundle.tree, bundle.atoms, "continuum"
    else:
        tree, atoms, kind = bundle.tree, bundle_atoms(bundle), "lattice"
    stat = descendant_discrepancy(tree, atoms)
    return ConditionReport("condition-V", stat, threshold, 1, notes=f"{kind} bundle, exact supremum")


# -- condition (R) ----------------------------------------------------------------


def check_condition_R(host, points, rho=1.0, threshold=0.0):
    """Ratios of effective resistance to graph distance from the root."""
    points = [int(p) for p in points]
    if any(p == 0 for p in points):
        raise ArgumentError("points must differ from the root")
    dist = host.bfs(0)
    ratios = [effective_resistance(host, 0, p) / float(dist[p]) for p in points]
    stat = max(abs(r - rho) for r in ratios) if ratios else 0.0
    return ConditionReport(
        "condition-R", stat, threshold, len(points), notes="tree host" if host.is_tree() else "general host", details={"ratios": ratios, "rho": rho}
    )


# -- condition (S) -----------------------------------------------------------------


def check_condition_S(diameters, n, eps, threshold):
    """Tail probabilities of rescaled sausage diameters for each K.

    ``diameters`` maps K to a list of ``(euclidean, intrinsic)`` pairs. The
    statistic is the larger tail at the largest K; a rise of more than two
    standard errors between consecutive K makes it 1.
    """
    ks = sorted(diameters)
    if not ks:
        raise ArgumentError("empty ensemble")
    tails = {}
    for K in ks:
        arr = np.asarray(diameters[K], dtype=float)
        r = len(arr)
        pz = float(np.mean(arr[:, 0] / math.sqrt(n) > eps))
        pg = float(np.mean(arr[:, 1] / n > eps))
        tails[K] = {
            "euclid": pz,
            "intrinsic": pg,
            "se_euclid": math.sqrt(pz * (1 - pz) / r),
            "se_intrinsic": math.sqrt(pg * (1 - pg) / r),
            "replicas": r,
        }
    monotone = True
    for a, b in zip(ks, ks[1:]):
        for key in ("euclid", "intrinsic"):
            se = math.hypot(tails[a]["se_" + key], tails[b]["se_" + key])
            if tails[b][key] > tails[a][key] + 2 * se:
                monotone = False
    last = tails[ks[-1]]
    stat = max(last["euclid"], last["intrinsic"]) if monotone else 1.0
    return ConditionReport(
        "condition-S",
        stat,
        threshold,
        min(t["replicas"] for t in tails.values()),
        notes="tails of n^-1/2 Euclidean and n^-1 intrinsic sausage diameters" + ("" if monotone else "; trend not decreasing"),
        details={"tails": tails, "n": n, "eps": eps, "monotone": monotone},
    )


# -- condition (G) -----------------------------------------------------------------


@dataclass
class SkeletonSummary:
    shape: str
    lengths: np.ndarray
    displacements: np.ndarray
    volume: float = None
    tree: object = None


def summarize(tree, leaf_positions, volume=None, keep_tree=False):
    edges = np.array(tree.lengths[1:])
    return SkeletonSummary(shape_code(tree), edges, np.asarray(leaf_positions, dtype=float), volume, tree if keep_tree else None)


def summarize_bundle(bundle, n):
    """Rescaled summary of a lattice bundle: lengths / n, displacements / sqrt(n), |E| / n^2."""
    red = bundle.reduced()
    emb = bundle.reduced_embedding()
    disp = np.array([emb.node_position(m) for m in red.marks]) / math.sqrt(n)
    red_scaled = type(red)(red.parent, [x / n for x in red.lengths], red.marks)
    return summarize(red_scaled, disp, bundle.host.n_edges / n**2)


def delta_dense(tree, K, delta):
    """Whether the marks of ``tree`` beyond the first K are delta-dense in the K-skeleton.

    Every edge of the K-skeleton must carry a projected mark, and neighbouring
    projections must come from marks within ``delta`` of each other.
    """
    marks = tree.marks
    core = _ancestors(tree, marks[:K])
    proj = [_climb_to(tree, m, core) for m in marks]
    hit = set(proj)
    # edges of the K-skeleton run between its branch points and leaves
    keep = {v for v in core if v == 0 or v in marks[:K] or sum(c in core for c in tree.children[v]) != 1}
    for v in keep:
        if v == 0:
            continue
        u, covered = v, False
        while True:
            covered |= u in hit
            u = tree.parent[u]
            if u in keep:
                break
        if not covered:
            return False
    by_node = {}
    for i, y in enumerate(proj):
        by_node.setdefault(y, []).append(marks[i])
    adj = {v: [] for v in core}
    for v in core:
        if v:
            adj[v].append(tree.parent[v])
            adj[tree.parent[v]].append(v)
    for x in hit:
        seen = {x}
        queue = deque([x])
        while queue:
            u = queue.popleft()
            for w in adj[u]:
                if w in seen:
                    continue
                seen.add(w)
                if w in hit:
                    best = min(_node_distance(tree, a, b) for a in by_node[x] for b in by_node[w])
                    if best > delta:
                        return False
                else:
                    queue.append(w)
    return True


def _node_distance(tree, a, b):
    return tree.depth[a] + tree.depth[b] - 2 * tree.depth[tree.lca(a, b)]


def check_condition_G(discrete, continuum, K, threshold=0.1, min_count=20, delta=None):
    """Compare rescaled discrete skeleton summaries with continuum ones.

    sigma_d is fitted from median total length and sigma_phi from median leaf
    displacement norm. The statistic is the largest of the shape-frequency
    deviation and the per-edge and per-coordinate KS distances.
    """
    if not discrete or not continuum:
        raise ArgumentError("both ensembles must be nonempty")
    tot_d = np.median([s.lengths.sum() for s in discrete])
    tot_c = np.median([s.lengths.sum() for s in continuum])
    sigma_d = float(tot_d / tot_c)
    nd = np.median([np.linalg.norm(s.displacements, axis=1).mean() for s in discrete])
    nc = np.median([np.linalg.norm(s.displacements, axis=1).mean() for s in continuum])
    sigma_phi = float(nd / (math.sqrt(sigma_d) * nc)) if nc > 0 else math.nan
    fd = Counter(s.shape for s in discrete)
    fc = Counter(s.shape for s in continuum)
    shapes = set(fd) | set(fc)
    shape_dev = max(abs(fd[c] / len(discrete) - fc[c] / len(continuum)) for c in shapes)
    common = [c for c in shapes if fd[c] >= min_count and fc[c] >= min_count]
    edge_ks, coord_ks = {}, {}
    for c in sorted(common):
        ld = np.array([s.lengths for s in discrete if s.shape == c]) / sigma_d
        lc = np.array([s.lengths for s in continuum if s.shape == c])
        edge_ks[c] = [ks_distance(ld[:, i], lc[:, i]) for i in range(ld.shape[1])]
        dd = np.array([s.displacements for s in discrete if s.shape == c]) / (sigma_phi * math.sqrt(sigma_d))
        dc = np.array([s.displacements for s in continuum if s.shape == c])
        coord_ks[c] = [[ks_distance(dd[:, i, k], dc[:, i, k]) for k in range(dd.shape[2])] for i in range(dd.shape[1])]
    details = {
        "sigma_d": sigma_d,
        "sigma_phi": sigma_phi,
        "shape_deviation": shape_dev,
        "edge_ks": edge_ks,
        "coordinate_ks": coord_ks,
        "common_shapes": len(common),
        "K": K,
    }
    if not common:
        return ConditionReport("condition-G", math.inf, threshold, len(discrete), notes="no common shapes; " + WEAK_NOTE, details=details)
    stats = [shape_dev] + [x for v in edge_ks.values() for x in v] + [x for v in coord_ks.values() for row in v for x in row]
    if all(s.volume is not None for s in discrete + continuum):
        vd = np.array([s.volume for s in discrete])
        vc = np.array([s.volume for s in continuum])
        nu = float(np.median(vd) / np.median(vc))
        details["nu"] = nu
        details["volume_ks"] = ks_distance(vd / nu, vc)
        stats.append(details["volume_ks"])
    if delta is not None:
        trees = [s.tree for s in continuum if s.tree is not None]
        if trees:
            details["delta_dense_fraction"] = float(np.mean([delta_dense(t, K, delta) for t in trees]))
    return ConditionReport("condition-G", float(max(stats)), threshold, min(len(discrete), len(continuum)), notes=WEAK_NOTE, details=details)


# -- lemma step 0 ----------------------------------------------------------------------


def step0_bound(M):
    return (1 - 1 / M) * math.exp(-2 / math.sqrt(M))


def step0_event(tree, K, K1):
    """Whether every mark past K + K1 projects onto the part of the (K+K1)-skeleton off the K-skeleton.

    Points where a new branch attaches to the K-skeleton count as off it.
    """
    marks = tree.marks
    core = _ancestors(tree, marks[:K])
    big = _ancestors(tree, marks[: K + K1])
    attach = {_climb_to(tree, m, core) for m in marks[K : K + K1]} - set(marks[K : K + K1])
    for m in marks[K + K1 :]:
        y = _climb_to(tree, m, big)
        if y in core and y not in attach:
            return False
    return True


def check_lemma_step0(K, K1, M, replicas, rng, tolerance=0.02, sampler=crt_skeleton_linebreaking):
    """Probability that sqrt(M) fresh points all project off the K-skeleton.

    The statistic is the shortfall (bound - estimate), so the check passes
    when the estimate is within ``tolerance`` of the bound or above it.
    """
    if M < 1 or K < 1 or K1 < 1:
        raise ArgumentError("need M, K, K1 >= 1")
    fresh = math.isqrt(int(M))
    hits = sum(step0_event(sampler(K + K1 + fresh, rng), K, K1) for _ in range(replicas))
    return step0_report(hits, replicas, K, K1, M, tolerance)


def step0_report(hits, replicas, K, K1, M, tolerance):
    p = hits / replicas
    bound = step0_bound(M)
    se = math.sqrt(p * (1 - p) / replicas)
    return ConditionReport(
        "lemma-step0",
        bound - p,
        tolerance,
        replicas,
        notes=f"estimate {p:.5f} +- {se:.5f} against bound {bound:.5f}",
        details={"probability": p, "se": se, "bound": bound, "fresh_points": math.isqrt(int(M)), "K": K, "K1": K1, "M": M},
    )
