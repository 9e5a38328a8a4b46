"""Spread-out lattice graphs, lattice trees and branching-random-walk surrogates."""

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
import itertools
import math

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph
import scipy.sparse.linalg as spla

from .errors import ArgumentError, DisconnectedError, ResourceBudgetError
from .kernels import csr_walker, run_walk


class LatticeGraph:
    """Finite connected graph with a lattice site attached to every vertex.

    Vertex 0 is the root and sits at the origin. Distinct vertices may share a
    site (``collisions`` counts the extras), which lets the same class carry
    the abstract trees of branching random walks.
    """

    def __init__(self, positions, edges, L, parent=None, check=True):
        positions = np.asarray(positions, dtype=np.int64)
        if positions.ndim != 2 or len(positions) == 0:
            raise ArgumentError("positions must be a non-empty (n, d) array")
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        self.positions = positions
        self.edges = edges
        self.L = int(L)
        self.d = positions.shape[1]
        self.parent = None if parent is None else np.asarray(parent, dtype=np.int64)
        n = len(positions)
        a, b = edges[:, 0], edges[:, 1]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, a + 1, 1)
        np.add.at(indptr, b + 1, 1)
        np.cumsum(indptr, out=indptr)
        src = np.concatenate([a, b])
        dst = np.concatenate([b, a])
        eid = np.concatenate([np.arange(len(edges)), np.arange(len(edges))])
        order = np.argsort(src, kind="stable")
        self.indptr = indptr
        self.indices = dst[order]
        self.edge_ids = eid[order]
        if check:
            self._validate()

    def _validate(self):
        if np.any(self.positions[0] != 0):
            raise ArgumentError("vertex 0 must sit at the origin")
        if len(self.edges):
            if np.any(self.edges < 0) or np.any(self.edges >= self.n_vertices):
                raise ArgumentError("edge endpoint out of range")
            if np.any(self.edges[:, 0] == self.edges[:, 1]):
                raise ArgumentError("self-loop")
            disp = np.abs(self.positions[self.edges[:, 0]] - self.positions[self.edges[:, 1]]).max(axis=1)
            if np.any(disp > self.L) or np.any(disp == 0):
                raise ArgumentError("edge displacement outside [-L, L]^d minus the origin")
        if np.any(self.bfs(0) < 0):
            raise ArgumentError("graph is not connected")

    @property
    def n_vertices(self):
        return len(self.positions)

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def collisions(self):
        return self.n_vertices - len(np.unique(self.positions, axis=0))

    def is_tree(self):
        return self.n_edges == self.n_vertices - 1

    def neighbors(self, v):
        return self.indices[self.indptr[v] : self.indptr[v + 1]]

    def adjacency(self):
        """Symmetric sparse adjacency matrix, cached."""
        if getattr(self, "_adjacency", None) is None:
            n = self.n_vertices
            self._adjacency = sp.csr_matrix((np.ones(len(self.indices)), self.indices, self.indptr), shape=(n, n))
        return self._adjacency

    def bfs(self, src, banned_edge=-1, banned_vertex=-1):
        """Graph distances from ``src`` (-1 where unreachable)."""
        if banned_edge < 0 and banned_vertex < 0:
            dist = csgraph.shortest_path(self.adjacency(), unweighted=True, indices=src)
            return np.where(np.isinf(dist), -1, dist).astype(np.int64)
        dist = np.full(self.n_vertices, -1, dtype=np.int64)
        dist[src] = 0
        queue = deque([src])
        indptr, indices, eids = self.indptr, self.indices, self.edge_ids
        while queue:
            v = queue.popleft()
            for s in range(indptr[v], indptr[v + 1]):
                w = indices[s]
                if dist[w] >= 0 or eids[s] == banned_edge or w == banned_vertex:
                    continue
                dist[w] = dist[v] + 1
                queue.append(w)
        return dist

    def rooted(self):
        """BFS parent array and depths from the root (trees and general graphs)."""
        if self.parent is not None:
            depth = np.zeros(self.n_vertices, dtype=np.int64)
            for v in self.bfs_order():
                if v:
                    depth[v] = depth[self.parent[v]] + 1
            return self.parent, depth
        parent = np.full(self.n_vertices, -1, dtype=np.int64)
        depth = self.bfs(0)
        for v in range(1, self.n_vertices):
            for w in self.neighbors(v):
                if depth[w] == depth[v] - 1:
                    parent[v] = w
                    break
        return parent, depth

    def bfs_order(self):
        dist = self.bfs(0)
        return np.argsort(dist, kind="stable")

    def to_text(self):
        rows = [f"# lattice d={self.d} L={self.L} vertices={self.n_vertices} edges={self.n_edges}"]
        for v, p in enumerate(self.positions):
            rows.append(f"v {v} : " + " ".join(map(str, p)))
        for a, b in self.edges:
            pa = " ".join(map(str, self.positions[a]))
            pb = " ".join(map(str, self.positions[b]))
            rows.append(f"e {a} {b} : {pa} ; {pb}")
        return "\n".join(rows) + "\n"

    @classmethod
    def from_text(cls, text):
        lines = [ln for ln in text.splitlines() if ln.strip()]
        head = dict(kv.split("=") for kv in lines[0].lstrip("#").split()[1:])
        positions, edges = [], []
        for ln in lines[1:]:
            tag, rest = ln.split(" ", 1)
            ids, coords = rest.split(":")
            if tag == "v":
                positions.append([int(x) for x in coords.split()])
            elif tag == "e":
                a, b = (int(x) for x in ids.split())
                edges.append((a, b))
                pa, pb = coords.split(";")
                if [int(x) for x in pa.split()] != positions[a] or [int(x) for x in pb.split()] != positions[b]:
                    raise ArgumentError(f"edge {a}-{b} disagrees with vertex sites")
        positions = np.array(positions, dtype=np.int64).reshape(-1, int(head["d"]))
        return cls(positions, edges, int(head["L"]))

    def __eq__(self, other):
        return (
            isinstance(other, LatticeGraph)
            and self.L == other.L
            and np.array_equal(self.positions, other.positions)
            and np.array_equal(self.edges, other.edges)
        )


def lattice_graph_from_sites(sites, edges, L):
    """Build a graph from site tuples; the site of the first vertex must be the origin."""
    sites = [tuple(s) for s in sites]
    index = {s: i for i, s in enumerate(sites)}
    return LatticeGraph(np.array(sites), [(index[tuple(a)], index[tuple(b)]) for a, b in edges], L)


def weight(tree, z):
    """(z / ((2L)^d - 1))^|E| as an exact fraction when z is rational."""
    base = (2 * tree.L) ** tree.d - 1
    if base <= 0:
        raise ArgumentError("weight undefined for this (d, L)")
    return (Fraction(z) / base) ** tree.n_edges


def box_offsets(d, L):
    """Nonzero integer vectors with sup-norm at most L."""
    return [v for v in itertools.product(range(-L, L + 1), repeat=d) if any(v)]


def enumerate_small_trees(d, L, max_edges, z=1, budget=200_000):
    """All lattice trees containing the origin with at most ``max_edges`` edges.

    Returns a list of ``(tree, weight)``. Raises ``ResourceBudgetError`` once
    more than ``budget`` trees have been generated.
    """
    if d < 1 or L < 1 or max_edges < 0:
        raise ArgumentError("need d >= 1, L >= 1, max_edges >= 0")
    steps = box_offsets(d, L)
    origin = (0,) * d
    level = {frozenset(): None}
    found = [frozenset()]
    for _ in range(max_edges):
        nxt = set()
        for edges in level:
            sites = {origin} | {s for e in edges for s in e}
            for s in sites:
                for step in steps:
                    t = tuple(a + b for a, b in zip(s, step))
                    if t in sites:
                        continue
                    nxt.add(edges | {frozenset((s, t))})
                    if len(found) + len(nxt) > budget:
                        raise ResourceBudgetError(f"more than {budget} trees", attempts=len(found) + len(nxt))
        found.extend(sorted(nxt, key=_edge_key))
        level = nxt
    out = []
    for edges in found:
        sites = [origin] + sorted({s for e in edges for s in e} - {origin})
        pairs = [tuple(sorted(e)) for e in sorted(edges, key=lambda e: sorted(e))]
        tree = lattice_graph_from_sites(sites, pairs, L)
        out.append((tree, weight(tree, z)))
    return out


def _edge_key(edges):
    return sorted(tuple(sorted(e)) for e in edges)


# -- branching random walk surrogates ------------------------------------------

OFFSPRING = {
    # name: (sampler, variance, generating function)
    "geometric": (lambda rng, n: rng.geometric(0.5, size=n) - 1, 2.0, lambda s: 1.0 / (2.0 - s)),
    "binary": (lambda rng, n: 2 * rng.integers(0, 2, size=n), 1.0, lambda s: 0.5 * (1.0 + s * s)),
    "poisson": (lambda rng, n: rng.poisson(1.0, size=n), 1.0, lambda s: math.exp(s - 1.0)),
}


def offspring_sigma(name):
    return math.sqrt(OFFSPRING[name][1])


def height_tail(k, offspring="geometric"):
    """P(height >= k) for the unconditioned Galton-Watson tree."""
    f = OFFSPRING[offspring][2]
    q = 0.0
    for _ in range(k):
        q = f(q)
    return 1.0 - q


def _gw_tree(rng, offspring, min_height, max_vertices):
    draw = OFFSPRING[offspring][0]
    parents = [np.array([-1], dtype=np.int64)]
    gen = np.array([0], dtype=np.int64)
    size = 1
    height = 0
    bounds = [0, 1]
    while True:
        kids = draw(rng, len(gen))
        total = int(kids.sum())
        if total == 0:
            break
        size += total
        if max_vertices is not None and size > max_vertices:
            return None
        height += 1
        parents.append(np.repeat(gen, kids))
        gen = np.arange(size - total, size, dtype=np.int64)
        bounds.append(size)
    if height < min_height:
        return None
    return np.concatenate(parents), height, bounds


def _uniform_steps(rng, count, d, L):
    out = rng.integers(-L, L + 1, size=(count, d))
    bad = ~out.any(axis=1)
    while bad.any():
        out[bad] = rng.integers(-L, L + 1, size=(int(bad.sum()), d))
        bad = ~out.any(axis=1)
    return out


def sample_surrogate(n, h, d, L, rng, offspring="geometric", max_attempts=1_000_000, max_vertices=None):
    """Critical Galton-Watson tree with height >= ceil(h n), embedded by a branching random walk.

    Displacements are uniform on [-L, L]^d minus the origin. The tree is found by
    rejection; ``max_vertices`` (if given) also rejects trees that grow too
    large, which truncates the conditioned law. Distinct vertices may share a
    site; the returned graph's ``collisions`` counts them.
    """
    if n < 1 or h <= 0 or d < 1 or L < 1:
        raise ArgumentError("need n >= 1, h > 0, d >= 1, L >= 1")
    if offspring not in OFFSPRING:
        raise ArgumentError(f"unknown offspring law {offspring!r}")
    need = math.ceil(h * n)
    for attempt in range(1, max_attempts + 1):
        got = _gw_tree(rng, offspring, need, max_vertices)
        if got is not None:
            break
    else:
        raise ResourceBudgetError(f"no tree of height >= {need} in {max_attempts} attempts", attempts=max_attempts)
    parent, height, bounds = got
    steps = _uniform_steps(rng, len(parent) - 1, d, L)
    positions = np.zeros((len(parent), d), dtype=np.int64)
    for lo, hi in zip(bounds[1:-1], bounds[2:]):
        positions[lo:hi] = positions[parent[lo:hi]] + steps[lo - 1 : hi - 1]
    edges = np.column_stack([parent[1:], np.arange(1, len(parent))])
    tree = LatticeGraph(positions, edges, L, parent=parent, check=False)
    tree.height = height
    tree.attempts = attempt
    return tree


# -- walks and resistance ---------------------------------------------------------


@dataclass
class WalkPath:
    vertices: np.ndarray
    positions: np.ndarray
    steps: np.ndarray = field(default=None)

    def to_csv(self, path=None):
        d = self.positions.shape[1]
        steps = self.steps if self.steps is not None else np.arange(len(self.vertices))
        rows = ["step," + ",".join(f"x{i + 1}" for i in range(d))]
        rows += [f"{s}," + ",".join(map(str, p)) for s, p in zip(steps, self.positions)]
        text = "\n".join(rows) + "\n"
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def graph_walker(graph):
    return csr_walker(graph.indptr, graph.indices)


def srw(graph, steps, rng, start=0, record=None, walker=None):
    """Simple random walk from ``start``; records every step unless ``record`` lists step counts."""
    if steps < 0:
        raise ArgumentError("steps must be nonnegative")
    record = np.arange(steps + 1) if record is None else np.asarray(record)
    if len(record) and record.max() > steps:
        raise ArgumentError("record step past the end of the walk")
    walker = walker or graph_walker(graph)
    vertices, _ = run_walk(walker, start, record.astype(float), rng)
    return WalkPath(vertices, graph.positions[vertices], record)


def find_bridges(graph):
    """Edge ids of all bridges, by an iterative low-link search."""
    n = graph.n_vertices
    if graph.n_edges == n - 1 and csgraph.connected_components(graph.adjacency(), directed=False)[0] == 1:
        return list(range(graph.n_edges))  # every edge of a tree is a bridge
    indptr, indices, eids = graph.indptr, graph.indices, graph.edge_ids
    disc = np.full(n, -1, dtype=np.int64)
    low = np.zeros(n, dtype=np.int64)
    bridges = []
    clock = 0
    for root in range(n):
        if disc[root] >= 0:
            continue
        disc[root] = low[root] = clock
        clock += 1
        stack = [(root, -1, indptr[root])]
        while stack:
            v, via, s = stack[-1]
            if s < indptr[v + 1]:
                stack[-1] = (v, via, s + 1)
                w, e = indices[s], eids[s]
                if e == via:
                    continue
                if disc[w] < 0:
                    disc[w] = low[w] = clock
                    clock += 1
                    stack.append((w, e, indptr[w]))
                else:
                    low[v] = min(low[v], disc[w])
            else:
                stack.pop()
                if stack:
                    u = stack[-1][0]
                    low[u] = min(low[u], low[v])
                    if low[v] > disc[u]:
                        bridges.append(int(via))
    return sorted(bridges)


def bubbles(graph, bridge_ids=None):
    """Label of the two-edge-connected component ('bubble') of every vertex."""
    if bridge_ids is None:
        bridge_ids = find_bridges(graph)
    keep = np.ones(graph.n_edges, dtype=bool)
    keep[list(bridge_ids)] = False
    e = graph.edges[keep]
    adj = sp.coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(graph.n_vertices,) * 2)
    _, labels = sp.csgraph.connected_components(adj, directed=False)
    return labels


def bridge_structure(graph):
    """Bridges and bubble labels, cached on the graph."""
    cached = getattr(graph, "_bridge_cache", None)
    if cached is None:
        ids = find_bridges(graph)
        cached = graph._bridge_cache = (ids, bubbles(graph, ids))
    return cached


def _bubble_resistance(graph, members, u, v):
    if u == v:
        return 0.0
    idx = {w: i for i, w in enumerate(members)}
    rows, cols = [], []
    for w in members:
        for x in graph.neighbors(w):
            if x in idx:
                rows.append(idx[w])
                cols.append(idx[x])
    m = len(members)
    adj = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(m, m))
    lap = sp.diags(np.asarray(adj.sum(axis=1)).ravel()) - adj
    keep = [i for i in range(m) if i != idx[v]]
    rhs = np.zeros(m - 1)
    rhs[keep.index(idx[u])] = 1.0
    sol = spla.spsolve(lap[keep][:, keep].tocsc(), rhs)
    return float(np.atleast_1d(sol)[keep.index(idx[u])])


def _bubble_tree(graph):
    """Bubbles rooted per component: bridge above each, depth, component and members, cached."""
    cached = getattr(graph, "_bubble_tree_cache", None)
    if cached is not None:
        return cached
    bridge_ids, label = bridge_structure(graph)
    nb = int(label.max()) + 1
    ends = graph.edges[np.asarray(bridge_ids, dtype=np.int64)].reshape(-1, 2)
    la, lb = label[ends[:, 0]], label[ends[:, 1]]
    tree = sp.csr_matrix((np.ones(len(ends)), (la, lb)), shape=(nb, nb))
    _, comp = csgraph.connected_components(tree, directed=False)
    depth = np.zeros(nb, dtype=np.int64)
    pred = np.full(nb, -1, dtype=np.int64)
    for c in np.unique(comp):
        root = int(np.flatnonzero(comp == c)[0])
        dist, pr = csgraph.shortest_path(tree, directed=False, unweighted=True, indices=root, return_predecessors=True)
        inside = comp == c
        depth[inside] = dist[inside].astype(np.int64)
        pred[inside] = pr[inside]
    # the bridge above bubble k: (endpoint in k, endpoint in its parent bubble)
    own = np.full(nb, -1, dtype=np.int64)
    par = np.full(nb, -1, dtype=np.int64)
    down = pred[lb] == la
    own[lb[down]], par[lb[down]] = ends[down, 1], ends[down, 0]
    own[la[~down]], par[la[~down]] = ends[~down, 0], ends[~down, 1]
    order = np.argsort(label, kind="stable")
    starts = np.concatenate([[0], np.cumsum(np.bincount(label, minlength=nb))])
    cached = graph._bubble_tree_cache = (label, own, par, depth, comp, order, starts)
    return cached


def effective_resistance(graph, x, y):
    """Unit-conductance effective resistance between two vertices.

    Current only flows through the bridges and bubbles on the route from x to
    y, so the answer is the number of bridges crossed plus a small Laplacian
    solve inside each bubble. On trees this is exactly the graph distance.
    """
    if x == y:
        return 0.0
    label, own, par, depth, comp, order, starts = _bubble_tree(graph)
    cx, cy = label[x], label[y]
    if comp[cx] != comp[cy]:
        raise DisconnectedError(f"vertices {x} and {y} are not connected")
    hops_x, hops_y = [], []
    while cx != cy:
        if depth[cx] >= depth[cy]:
            hops_x.append((own[cx], par[cx]))
            cx = label[par[cx]]
        else:
            hops_y.append((own[cy], par[cy]))
            cy = label[par[cy]]

    def inner(u, v):
        if u == v:
            return 0.0
        b = label[u]
        return _bubble_resistance(graph, order[starts[b] : starts[b + 1]].tolist(), u, v)

    total, entry = 0.0, x
    for own, par in hops_x:
        total += inner(entry, own) + 1.0
        entry = par
    for own, par in reversed(hops_y):
        total += inner(entry, par) + 1.0
        entry = own
    return total + inner(entry, y)
