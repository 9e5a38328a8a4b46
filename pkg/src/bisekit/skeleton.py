"""Finite skeletons of a lattice graph spanned by the root and K points.

For a host graph and spanning points x_1..x_K, ``build_bundle`` returns the
ancestral tree (cut-points on root-to-x_i routes, bubbles resolved into stars),
its embedding, the projection of every host vertex and edge onto it, and the
counting measure ``mu`` those projections induce.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from collections import deque

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .embedding import restrict_embedding, straight_embedding
from .errors import ArgumentError
from .lattice import bridge_structure
from .realtree import MetricTree, reduced_subtree, relabel


def find_cutpoints(graph):
    """Vertices incident to a bridge, sorted."""
    ids, _ = bridge_structure(graph)
    if not ids:
        return np.empty(0, dtype=np.int64)
    return np.unique(graph.edges[ids].ravel())


def star_legs(dxy, dxz, dyz):
    """Leg lengths (x, y, z) of the star with the same pairwise distances."""
    dxy, dxz, dyz = Fraction(dxy), Fraction(dxz), Fraction(dyz)
    legs = ((dxy + dxz - dyz) / 2, (dxy + dyz - dxz) / 2, (dxz + dyz - dxy) / 2)
    if min(legs) < 0:
        raise ArgumentError("distances violate the triangle inequality")
    return legs


@dataclass
class GK:
    """Cut-point graph: vertices, edges, the per-bubble cliques and the root."""

    vertices: list
    edges: set
    cliques: list  # (members with the entry first)
    bridges: list  # (upper, lower) host pairs on the spanned routes
    root: int
    tree_like: bool


def _bridge_tree(graph):
    ids, label = bridge_structure(graph)
    links = {}
    for e in ids:
        a, b = (int(x) for x in graph.edges[e])
        links.setdefault(label[a], []).append((a, b))
        links.setdefault(label[b], []).append((b, a))
    top = label[0]
    up = {top: None}  # bubble -> (parent-side endpoint, own endpoint)
    queue = deque([top])
    while queue:
        c = queue.popleft()
        for a, b in links.get(c, ()):
            if label[b] not in up:
                up[label[b]] = (a, b)
                queue.append(label[b])
    return label, up


def build_gk(graph, points):
    """Cut-point graph spanned by the root and ``points``."""
    points = [int(p) for p in points]
    if not points:
        raise ArgumentError("need at least one spanning point")
    cuts = set(find_cutpoints(graph).tolist())
    for p in points:
        if p not in cuts:
            raise ArgumentError(f"spanning point {p} is not a cut-point")
    label, up = _bridge_tree(graph)
    routes = []
    for p in points:
        hops = []
        b = label[p]
        while up[b] is not None:
            a, c = up[b]
            hops.append((a, c))
            b = label[a]
        routes.append(hops[::-1])
    if 0 in cuts:
        root = 0
    elif routes[0]:
        root = routes[0][0][0]
    else:
        root = points[0]
    verts = {root}
    bridges = set()
    for p, hops in zip(points, routes):
        verts.add(p)
        for a, c in hops:
            verts.update((a, c))
            bridges.add((a, c))
    groups = {}
    for v in verts:
        groups.setdefault(label[v], []).append(v)
    cliques = []
    edges = {frozenset(b) for b in bridges}
    for lab, members in sorted(groups.items()):
        entry = root if lab == label[root] else up[lab][1]
        members = [entry] + sorted(m for m in members if m != entry)
        cliques.append(members)
        for i in range(len(members)):
            for j in range(i + 1, len(members)):
                edges.add(frozenset((members[i], members[j])))
    tree_like = all(len(m) <= 3 for m in cliques)
    return GK(sorted(verts), edges, cliques, sorted(bridges), root, tree_like)


def star_triangle(graph, gk):
    """Resolve every bubble of a tree-like cut-point graph into a tree.

    Returns ``(parent, lengths, hosts)`` over provisional node ids, root first;
    ``hosts[v]`` is the host vertex of node v or -1 for a star center. Lengths
    are exact fractions.
    """
    if not gk.tree_like:
        raise ArgumentError("cut-point graph has a clique of size >= 4")
    node = {gk.root: 0}
    parent, lengths, hosts = [-1], [Fraction(0)], [gk.root]

    def add(host, par, length):
        parent.append(par)
        lengths.append(Fraction(length))
        hosts.append(host)
        if host >= 0:
            node[host] = len(parent) - 1
        return len(parent) - 1

    below = {}
    for a, c in gk.bridges:
        below.setdefault(a, []).append(c)
    cliques = {m[0]: m for m in gk.cliques}
    # walk down from the root: bubble at an entry, then bridges out of its members
    queue = deque([gk.root])
    while queue:
        entry = queue.popleft()
        members = cliques.get(entry, [entry])
        others = members[1:]
        if len(others) == 1:
            (y,) = others
            add(y, node[entry], graph.bfs(entry)[y])
        elif len(others) == 2:
            y, z = others
            dx = graph.bfs(entry)
            dxy, dxz, dyz = dx[y], dx[z], graph.bfs(y)[z]
            lx, ly, lz = star_legs(dxy, dxz, dyz)
            if lx == 0:
                add(y, node[entry], ly)
                add(z, node[entry], lz)
            elif ly == 0:
                add(y, node[entry], lx)
                add(z, node[y], lz)
            elif lz == 0:
                add(z, node[entry], lx)
                add(y, node[z], ly)
            else:
                center = add(-1, node[entry], lx)
                add(y, center, ly)
                add(z, center, lz)
        for m in members:
            for c in below.get(m, ()):
                add(c, node[m], 1)
                queue.append(c)
    return parent, lengths, hosts


@dataclass
class SkeletonBundle:
    """Ancestral tree of a host graph and everything projected onto it.

    ``tree`` is rooted at the first cut-point and has a node for every
    cut-point on the spanned routes (plus star centers). ``host_of[v]`` is the
    host vertex of node v (-1 for a star center), ``vertex_proj[x]`` the node
    a host vertex projects to, ``edge_proj[e]`` likewise for edges.
    """

    host: object
    points: list
    tree: MetricTree
    host_of: np.ndarray
    positions: np.ndarray
    vertex_proj: np.ndarray
    edge_proj: np.ndarray
    tree_like: bool = True
    _reduced: object = field(default=None, repr=False)

    @property
    def node_of(self):
        return {int(h): v for v, h in enumerate(self.host_of) if h >= 0}

    def embedding(self):
        return straight_embedding(self.tree, self.positions)

    def reduced(self):
        """Reduced K-skeleton: branch points of the root and the spanning points only."""
        if self._reduced is None:
            self._reduced = reduced_subtree(self.tree, [self.tree.vertex_point(m) for m in self.tree.marks])
        return self._reduced

    def reduced_embedding(self):
        return restrict_embedding(self.embedding(), self.reduced())

    def mu(self):
        """Mass of each node: share of host edges projecting onto it (exact)."""
        counts = np.bincount(self.edge_proj, minlength=self.tree.n_nodes)
        total = self.host.n_edges
        return {v: Fraction(int(c), total) for v, c in enumerate(counts) if c}

    def lam(self, point):
        """Normalized length of the points at or below ``point``."""
        return self.tree.descendant_length(point) / self.tree.total_length

    def sausages(self):
        """Host vertices grouped by the node they project to."""
        order = np.argsort(self.vertex_proj, kind="stable")
        cuts = np.flatnonzero(np.diff(self.vertex_proj[order])) + 1
        return dict(zip(self.vertex_proj[order][np.r_[0, cuts]].tolist(), np.split(order, cuts)))


def _tree_info(graph):
    cached = getattr(graph, "_tree_cache", None)
    if cached is None:
        parent, depth = graph.rooted()
        order = np.argsort(depth, kind="stable")
        cached = graph._tree_cache = (parent, depth, order)
    return cached


def _bundle_on_tree(graph, points):
    parent, depth, order = _tree_info(graph)
    marked = np.zeros(graph.n_vertices, dtype=bool)
    marked[0] = True
    new_nodes = []
    for p in points:
        chain = []
        v = p
        while not marked[v]:
            chain.append(v)
            marked[v] = True
            v = parent[v]
        new_nodes.extend(reversed(chain))
    hosts = [0] + new_nodes
    node = {h: i for i, h in enumerate(hosts)}
    par = [-1] + [node[int(parent[h])] for h in new_nodes]
    tree = relabel(par, [0.0] + [1.0] * len(new_nodes), [node[p] for p in points])
    host_of = _relabelled_hosts(par, hosts, [node[p] for p in points])
    proj = np.empty(graph.n_vertices, dtype=np.int64)
    node_new = {int(h): v for v, h in enumerate(host_of)}
    nodes_arr = np.full(graph.n_vertices, -1, dtype=np.int64)
    for h, v in node_new.items():
        nodes_arr[h] = v
    proj[0] = 0
    for v in order[1:]:
        proj[v] = nodes_arr[v] if marked[v] else proj[parent[v]]
    # edge (parent, child): both ends project to different nodes only when the child is marked
    child = graph.edges[:, 1].copy()
    flip = parent[child] != graph.edges[:, 0]
    child[flip] = graph.edges[flip, 0]
    edge_proj = proj[child]
    return tree, host_of, proj, edge_proj


def _relabelled_hosts(parent, hosts, marks):
    order, seen = [0], {0}
    for m in marks:
        path = []
        v = m
        while v not in seen:
            path.append(v)
            v = parent[v]
        for u in reversed(path):
            seen.add(u)
            order.append(u)
    return np.array([hosts[u] for u in order], dtype=np.int64)


def _bundle_general(graph, points):
    gk = build_gk(graph, points)
    parent, lengths, hosts = star_triangle(graph, gk)
    node = {h: i for i, h in enumerate(hosts) if h >= 0}
    marks = [node[p] for p in points]
    tree = relabel(parent, [float(x) for x in lengths], marks)
    host_of = _relabelled_hosts(parent, hosts, marks)
    new = {int(h): v for v, h in enumerate(host_of) if h >= 0}
    label, up = _bridge_tree(graph)
    up_proj = {}

    def lift(b):
        if b in up_proj:
            return up_proj[b]
        chain = []
        while b not in up_proj:
            chain.append(b)
            if up[b] is None:
                up_proj[b] = 0
                break
            a, c = up[b]
            if c in new:
                up_proj[b] = new[c]
                break
            if a in new:
                up_proj[b] = new[a]
                break
            b = label[a]
        res = up_proj[b]
        for x in chain:
            up_proj[x] = res
        return res

    proj = np.array([new[x] if x in new else lift(label[x]) for x in range(graph.n_vertices)], dtype=np.int64)
    a, b = proj[graph.edges[:, 0]], proj[graph.edges[:, 1]]
    depth = np.asarray(tree.depth)
    edge_proj = np.where(depth[a] >= depth[b], a, b)
    return tree, host_of, proj, edge_proj, gk.tree_like


def build_bundle(graph, points):
    """Skeleton bundle of ``graph`` spanned by the root and ``points`` (host vertex ids)."""
    points = [int(p) for p in points]
    if not points:
        raise ArgumentError("need at least one spanning point")
    if graph.is_tree():
        tree, host_of, proj, edge_proj = _bundle_on_tree(graph, points)
        tree_like = True
    else:
        tree, host_of, proj, edge_proj, tree_like = _bundle_general(graph, points)
    positions = np.empty((tree.n_nodes, graph.d))
    for v, h in enumerate(host_of):
        if h >= 0:
            positions[v] = graph.positions[h]
    for v in np.flatnonzero(host_of < 0):
        nbrs = [tree.parent[v]] + tree.children[v]
        positions[v] = positions[nbrs].mean(axis=0)
    return SkeletonBundle(graph, points, tree, host_of, positions, proj, edge_proj, tree_like)


def vertex_projection(bundle, x):
    return int(bundle.vertex_proj[x])


def edge_projection(bundle, e):
    return int(bundle.edge_proj[e])


# -- sausages -------------------------------------------------------------------


def _euclid_diameter(pts):
    pts = np.unique(np.asarray(pts, dtype=float), axis=0)
    if len(pts) < 2:
        return 0.0
    if len(pts) > 1500 and pts.shape[1] >= 2:
        try:
            pts = pts[ConvexHull(pts).vertices]
        except QhullError:
            pass
    best = 0.0
    for i in range(0, len(pts), 2000):
        block = pts[i : i + 2000]
        d2 = ((block[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
        best = max(best, float(d2.max()))
    return best ** 0.5


def _tree_sausage_diameters(bundle):
    """Intrinsic diameter of every sausage of a tree host in one bottom-up pass."""
    graph = bundle.host
    parent, _, order = _tree_info(graph)
    proj = bundle.vertex_proj
    height = np.zeros(graph.n_vertices, dtype=np.int64)
    best = np.zeros(graph.n_vertices, dtype=np.int64)  # two deepest branches
    second = np.zeros(graph.n_vertices, dtype=np.int64)
    diam = np.zeros(bundle.tree.n_nodes, dtype=np.int64)
    for v in order[::-1]:
        v = int(v)
        node = proj[v]
        diam[node] = max(diam[node], best[v] + second[v])
        p = parent[v]
        if p >= 0 and proj[p] == node:
            h = height[v] + 1
            if h > best[p]:
                second[p], best[p] = best[p], h
            elif h > second[p]:
                second[p] = h
            height[p] = max(height[p], h)
    return diam


def sausage_diameters(bundle):
    """Largest sausage diameter, in R^d and in the host graph metric.

    A sausage is the set of host vertices projecting to one skeleton node.
    Returns ``(euclidean, intrinsic)``.
    """
    groups = bundle.sausages()
    euclid = max(_euclid_diameter(bundle.host.positions[m]) for m in groups.values())
    if bundle.host.is_tree():
        intrinsic = int(_tree_sausage_diameters(bundle).max())
    else:
        intrinsic = 0
        for members in groups.values():
            for x in members:
                dist = bundle.host.bfs(int(x))
                intrinsic = max(intrinsic, int(dist[members].max()))
    return euclid, intrinsic
