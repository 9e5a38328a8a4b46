"""Finite rooted metric trees, reduced subtrees and CRT skeletons.

Node 0 is the root. Every other node ``v`` owns the edge from its parent to
``v``, so edges are indexed by their lower endpoint. A point of the tree is a
``TreePoint(edge, offset)`` with ``offset`` measured down from the parent end;
the root is ``TreePoint(0, 0.0)``.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import ArgumentError


@dataclass(frozen=True)
class TreePoint:
    edge: int
    offset: float


class MetricTree:
    """Rooted tree with ordered children and positive edge lengths.

    ``marks[i]`` is the node carrying the i-th labelled point (leaves of a
    reduced subtree), and ``source`` optionally maps each node back to a point
    of the tree it was extracted from.
    """

    def __init__(self, parent, lengths, marks=(), children=None, source=None):
        parent = [int(p) for p in parent]
        lengths = [float(x) for x in lengths]
        if not parent or parent[0] != -1:
            raise ArgumentError("node 0 must be the root")
        if len(lengths) != len(parent):
            raise ArgumentError("one length per node")
        for v in range(1, len(parent)):
            if not 0 <= parent[v] < len(parent) or parent[v] == v:
                raise ArgumentError(f"bad parent for node {v}")
            if not lengths[v] > 0:
                raise ArgumentError(f"edge {v} has non-positive length {lengths[v]}")
        self.parent = parent
        self.lengths = lengths
        self.lengths[0] = 0.0
        if children is None:
            children = [[] for _ in parent]
            for v in range(1, len(parent)):
                children[parent[v]].append(v)
        self.children = [list(c) for c in children]
        self.marks = tuple(int(m) for m in marks)
        self.source = source
        self._index()

    def _index(self):
        n = len(self.parent)
        depth = [0.0] * n
        level = [0] * n
        tin, tout = [0] * n, [0] * n
        order = []
        stack = [(0, False)]
        clock = 0
        seen = 0
        while stack:
            v, done = stack.pop()
            if done:
                tout[v] = clock
                continue
            seen += 1
            tin[v] = clock
            clock += 1
            order.append(v)
            stack.append((v, True))
            for c in reversed(self.children[v]):
                depth[c] = depth[v] + self.lengths[c]
                level[c] = level[v] + 1
                stack.append((c, False))
        if seen != n:
            raise ArgumentError("parent array does not describe a tree rooted at 0")
        self.depth = depth
        self.level = level
        self._tin, self._tout = tin, tout
        self.preorder = order
        below = [0.0] * n
        for v in reversed(order):
            p = self.parent[v]
            if p >= 0:
                below[p] += below[v] + self.lengths[v]
        self.length_below = below
        self.total_length = below[0]

    # -- basic structure ---------------------------------------------------
    @property
    def n_nodes(self):
        return len(self.parent)

    @property
    def edges(self):
        return list(range(1, len(self.parent)))

    def leaves(self):
        return [v for v in range(1, self.n_nodes) if not self.children[v]]

    def degree(self, v):
        return len(self.children[v]) + (v != 0)

    def is_ancestor(self, u, v):
        """True when node u lies on the path from the root to node v."""
        return self._tin[u] <= self._tin[v] < self._tout[u]

    def lca(self, u, v):
        while not self.is_ancestor(u, v):
            u = self.parent[u]
        return u

    # -- points --------------------------------------------------------------
    def vertex_point(self, v):
        return TreePoint(v, self.lengths[v])

    def canonical(self, p):
        if p.edge != 0 and p.offset <= 0.0:
            return self.vertex_point(self.parent[p.edge])
        return p

    def check_point(self, p):
        if not 0 <= p.edge < self.n_nodes:
            raise ArgumentError(f"no edge {p.edge}")
        if p.offset < 0 or p.offset > self.lengths[p.edge]:
            raise ArgumentError(f"offset {p.offset} outside edge {p.edge}")

    def point_depth(self, p):
        if p.edge == 0:
            return 0.0
        return self.depth[self.parent[p.edge]] + p.offset

    def meet(self, a, b):
        """Deepest common ancestor of two points."""
        a, b = self.canonical(a), self.canonical(b)
        if a.edge == b.edge:
            return a if a.offset <= b.offset else b
        w = self.lca(a.edge, b.edge)
        if w == a.edge:
            return a
        if w == b.edge:
            return b
        return self.vertex_point(w)

    def distance(self, a, b):
        m = self.point_depth(self.meet(a, b))
        return self.point_depth(a) + self.point_depth(b) - 2 * m

    def branch_point(self, a, b, c):
        """Median of three points: the deepest of their pairwise meets."""
        meets = [self.meet(a, b), self.meet(a, c), self.meet(b, c)]
        return max(meets, key=self.point_depth)

    def point_at_depth(self, v, h):
        """Point at depth ``h`` on the path from the root to node ``v``."""
        if h <= 0:
            return TreePoint(0, 0.0)
        if h >= self.depth[v]:
            return self.vertex_point(v)
        while self.depth[self.parent[v]] > h:
            v = self.parent[v]
        return TreePoint(v, h - self.depth[self.parent[v]])

    def uniform_point(self, rng):
        """Point drawn from the normalized length measure."""
        lengths = np.asarray(self.lengths)
        cum = np.cumsum(lengths)
        x = rng.random() * cum[-1]
        e = int(np.searchsorted(cum, x, side="right"))
        e = min(max(e, 1), self.n_nodes - 1)
        return TreePoint(e, min(max(x - (cum[e] - lengths[e]), 0.0), lengths[e]))

    def descendant_length(self, p):
        """Length of the set of points at or below ``p``."""
        p = self.canonical(p)
        if p.edge == 0:
            return self.total_length
        return self.length_below[p.edge] + self.lengths[p.edge] - p.offset

    # -- text form -------------------------------------------------------------
    def to_text(self):
        rows = ["# node parent edge_length child_rank"]
        if self.marks:
            rows.append("# marks " + " ".join(map(str, self.marks)))
        rank = {}
        for kids in self.children:
            for i, c in enumerate(kids):
                rank[c] = i
        for v in range(self.n_nodes):
            rows.append(f"{v} {self.parent[v]} {self.lengths[v]!r} {rank.get(v, 0)}")
        return "\n".join(rows) + "\n"

    @classmethod
    def from_text(cls, text):
        parent, lengths, ranks, marks = [], [], [], ()
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].split()
                if body and body[0] == "marks":
                    marks = tuple(int(x) for x in body[1:])
                continue
            node, par, length, rank = line.split()
            if int(node) != len(parent):
                raise ArgumentError("nodes must be listed in order")
            parent.append(int(par))
            lengths.append(float(length))
            ranks.append(int(rank))
        children = [[] for _ in parent]
        for v in sorted(range(1, len(parent)), key=lambda v: ranks[v]):
            children[parent[v]].append(v)
        return cls(parent, lengths, marks, children=children)

    def __eq__(self, other):
        return (
            isinstance(other, MetricTree)
            and self.parent == other.parent
            and self.lengths == other.lengths
            and self.children == other.children
            and self.marks == other.marks
        )

    def __repr__(self):
        return f"MetricTree(nodes={self.n_nodes}, marks={len(self.marks)}, length={self.total_length:.4g})"


def shape_code(tree):
    """Canonical string of the ordered rooted shape, with point labels."""
    labels = {}
    for i, m in enumerate(tree.marks, 1):
        labels.setdefault(m, []).append(str(i))
    codes = {}
    for v in reversed(tree.preorder):
        kids = ",".join(codes.pop(c) for c in tree.children[v])
        codes[v] = "(" + ".".join(labels.get(v, ())) + ":" + kids + ")"
    return codes[0]


def relabel(parent, lengths, marks, source=None):
    """Renumber nodes in order of first visit along root-to-mark paths.

    Walking from the root to the first mark, then the second, and so on,
    each node gets the next id the first time it is met; children are ordered
    by id, so an edge takes the label of its lower endpoint.
    """
    order, new = [], {}
    if 0 not in new:
        new[0] = 0
        order.append(0)
    for m in marks:
        path = []
        v = m
        while v not in new:
            path.append(v)
            v = parent[v]
        for u in reversed(path):
            new[u] = len(order)
            order.append(u)
    if len(order) != len(parent):
        raise ArgumentError("every node must lie on a root-to-mark path")
    par = [-1] + [new[parent[u]] for u in order[1:]]
    lens = [0.0] + [lengths[u] for u in order[1:]]
    src = None if source is None else [source[u] for u in order]
    return MetricTree(par, lens, [new[m] for m in marks], source=src)


class _Builder:
    """Incremental tree over points given by depths and pairwise meet depths."""

    def __init__(self, tol=1e-12):
        self.parent = [-1]
        self.depth = [0.0]
        self.anchor = [(-1, 0.0)]  # (mark index whose path holds the node, depth)
        self.marks = []
        self.tol = tol

    def _same(self, x, y):
        return abs(x - y) <= self.tol * (1.0 + abs(x) + abs(y))

    def _node_at(self, v, a, owner):
        """Node at depth ``a`` on the path from the root to node ``v``, splitting an edge if needed."""
        child = None
        while self.depth[v] > a and not self._same(self.depth[v], a):
            child, v = v, self.parent[v]
        if self._same(self.depth[v], a):
            return v
        m = len(self.parent)
        self.parent.append(v)
        self.depth.append(a)
        self.anchor.append((owner, a))
        self.parent[child] = m
        return m

    def add(self, h, meets):
        """Insert a point at depth ``h``; ``meets[j]`` is its meet depth with mark j."""
        k = len(self.marks)
        a, j = 0.0, -1
        for i, x in enumerate(meets):
            if x > a:
                a, j = x, i
        a = min(a, h)
        base = 0 if j < 0 else self._node_at(self.marks[j], a, j)
        if self._same(h, self.depth[base]):
            self.marks.append(base)
            return
        self.parent.append(base)
        self.depth.append(h)
        self.anchor.append((k, h))
        self.marks.append(len(self.parent) - 1)

    def finish(self, source=None, lengths=None):
        if lengths is None:
            lengths = [0.0] + [self.depth[v] - self.depth[self.parent[v]] for v in range(1, len(self.parent))]
        return relabel(self.parent, lengths, self.marks, source)


def reduced_subtree(tree, points):
    """Smallest subtree spanned by the root and ``points``, with all branch points as vertices.

    The result carries ``marks`` (node of each input point, in order) and
    ``source`` (the original point for each node).
    """
    points = [tree.canonical(p) for p in points]
    for p in points:
        tree.check_point(p)
    b = _Builder()
    depths = [tree.point_depth(p) for p in points]
    for k, p in enumerate(points):
        b.add(depths[k], [tree.point_depth(tree.meet(p, q)) for q in points[:k]])
    source = []
    for v, (owner, h) in enumerate(b.anchor):
        if owner < 0:
            source.append(TreePoint(0, 0.0))
        else:
            source.append(_point_on_path_to(tree, points[owner], h))
    lengths = [0.0] + [_path_length(tree, source[b.parent[v]], source[v]) for v in range(1, len(source))]
    return b.finish(source, lengths)


def _path_length(tree, upper, lower):
    """Length between a point and one of its ancestors, summed edge by edge."""
    if upper.edge == lower.edge:
        return lower.offset - upper.offset
    total = tree.lengths[upper.edge] - upper.offset
    v = tree.parent[lower.edge]
    while v != upper.edge and v > 0:
        total += tree.lengths[v]
        v = tree.parent[v]
    if v != upper.edge:
        # upper sits a rounding error off the path, on a sibling edge
        return max(0.0, tree.point_depth(lower) - tree.point_depth(upper))
    return total + lower.offset


def _point_on_path_to(tree, p, h):
    if h >= tree.point_depth(p):
        return p
    if p.edge != 0 and h >= tree.depth[tree.parent[p.edge]]:
        return tree.canonical(TreePoint(p.edge, h - tree.depth[tree.parent[p.edge]]))
    return tree.canonical(tree.point_at_depth(tree.parent[p.edge], h))


def crt_skeleton_from_excursion(path, K, rng=None, times=None):
    """Reduced subtree of the excursion tree spanned by the root and K times.

    Times are uniform on the excursion's duration unless given. The result's
    ``source`` lists, for each node, a time coding it.
    """
    if times is None:
        if K < 1:
            raise ArgumentError("K must be positive")
        times = rng.random(K) * path.duration
    times = np.asarray(times, dtype=float)
    if np.any(times < 0):
        raise ArgumentError("negative time")
    heights = path.height(times)
    meet = pairwise_meet_heights(path, times)
    b = _Builder()
    for k in range(len(times)):
        b.add(float(heights[k]), meet[k, :k].tolist())
    source = [0.0 if owner < 0 else float(times[owner]) for owner, _ in b.anchor]
    tree = b.finish(source)
    tree.times = times
    return tree


def pairwise_meet_heights(path, times):
    """Matrix of min e over [s, t] for all pairs of the given times."""
    from .excursion import min_between

    times = np.asarray(times, dtype=float)
    n = len(times)
    order = np.argsort(times, kind="stable")
    st = times[order]
    gaps = np.array([min_between(path, st[i], st[i + 1]) for i in range(n - 1)])
    out = np.empty((n, n))
    for i in range(n):
        out[order[i], order[i]] = float(path.height(st[i]))
        run = math.inf
        for j in range(i + 1, n):
            run = min(run, gaps[j - 1])
            out[order[i], order[j]] = out[order[j], order[i]] = run
    return out


def cell_minima(values, dt, rng):
    """Exact minima of Brownian bridges of duration ``dt`` between consecutive values (last axis)."""
    a, b = values[..., :-1], values[..., 1:]
    e = rng.exponential(size=a.shape)
    return 0.5 * (a + b - np.sqrt((a - b) ** 2 + 2.0 * dt * e))


def crt_skeletons_from_bridges(K, count, grid_points, rng):
    """``count`` K-point skeletons of the tree coded by a normalized excursion.

    Each excursion is the Vervaat rotation of a Gaussian bridge at its true
    minimum, found from exact per-cell bridge minima. The K spanning times are
    uniform grid times; since the rotation offset is uniform and independent
    of the excursion, each one is a uniform time on the excursion, and meet
    depths use the exact cell minima, so the only discretization is the
    lattice constraint on the spanning times.
    """
    if K < 1 or count < 0:
        raise ArgumentError("K must be positive and count nonnegative")
    m = int(grid_points) - 1
    if m < 2:
        raise ArgumentError("grid_points must be at least 3")
    dt = 1.0 / m
    out = []
    batch = max(1, min(count, (1 << 22) // m))
    done = 0
    while done < count:
        rows = min(batch, count - done)
        steps = rng.standard_normal((rows, m)) * math.sqrt(dt)
        walk = np.concatenate([np.zeros((rows, 1)), np.cumsum(steps, axis=1)], axis=1)
        bridge = walk - np.linspace(0.0, 1.0, m + 1) * walk[:, -1:]
        cells = cell_minima(bridge, dt, rng)
        low = np.argmin(cells, axis=1)
        picks = rng.integers(0, m, size=(rows, K))
        for r in range(rows):
            j, c = int(low[r]), cells[r]
            floor = c[j]
            rotated = np.roll(c, -(j + 1))  # rotated cell k spans rotated grid k..k+1
            pos = (picks[r] - j - 1) % m
            heights = bridge[r, picks[r]] - floor
            meet = np.empty((K, K))
            for a in range(K):
                meet[a, a] = heights[a]
                for b in range(a):
                    lo, hi = sorted((pos[a], pos[b]))
                    meet[a, b] = meet[b, a] = heights[a] if lo == hi else rotated[lo:hi].min() - floor
            out.append(_tree_from_meets(heights, meet))
        done += rows
    return out


def _tree_from_meets(heights, meet):
    b = _Builder()
    for k in range(len(heights)):
        b.add(float(heights[k]), meet[k, :k].tolist())
    return b.finish()


LINE_BREAKING_SCALE = 0.5
"""Length factor turning Aldous line-breaking into the tree coded by e itself.

The rate-t line-breaking construction yields the tree coded by 2e; the
distance e(s) + e(t) - 2 min e used here is half of that.
"""


def crt_skeleton_linebreaking(K, rng):
    """K-leaf CRT skeleton by line-breaking, nested in K under a fixed stream."""
    if K < 1:
        raise ArgumentError("K must be positive")
    n = 2 * K
    parent = np.full(n, -1, dtype=np.int64)
    lengths = np.zeros(n)
    clock = rng.exponential()
    cut = math.sqrt(2.0 * clock) * LINE_BREAKING_SCALE
    parent[1], lengths[1] = 0, cut
    size = 2
    marks = [1]
    for i in range(1, K):
        clock += rng.exponential()
        prev, cut = cut, math.sqrt(2.0 * clock) * LINE_BREAKING_SCALE
        cum = np.cumsum(lengths[:size])
        x = rng.random() * cum[-1]
        e = min(max(int(np.searchsorted(cum, x, side="right")), 1), size - 1)
        off = x - (cum[e] - lengths[e])
        if not 0.0 < off < lengths[e]:
            # measure-zero event; keep the split strictly inside the edge
            off = 0.5 * lengths[e]
        m = size
        parent[m], lengths[m] = parent[e], off
        parent[e] = m
        lengths[e] -= off
        parent[m + 1], lengths[m + 1] = m, cut - prev
        marks.append(m + 1)
        size += 2
    return relabel(parent[:size].tolist(), lengths[:size].tolist(), marks)


def lebesgue_measure_of_descendants(tree, x):
    """Normalized length of the points at or below ``x``."""
    tree.check_point(x)
    return tree.descendant_length(x) / tree.total_length


def uniform_tree_point(tree, rng):
    return tree.uniform_point(rng)
