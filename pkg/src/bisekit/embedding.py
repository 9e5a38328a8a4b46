"""Continuous maps of a metric tree into R^d, stored as per-edge polylines."""

import io
import math

import numpy as np

from .errors import ArgumentError
from .realtree import MetricTree


class GraphSpatialTree:
    """A metric tree together with a piecewise-linear embedding.

    ``polylines[v]`` is a pair ``(offsets, points)`` for the edge above node v:
    increasing offsets from 0 to the edge length and the embedded location at
    each. Entry 0 holds the root location.
    """

    def __init__(self, tree, polylines):
        self.tree = tree
        self.polylines = [(np.asarray(o, dtype=float), np.atleast_2d(np.asarray(p, dtype=float))) for o, p in polylines]
        if len(self.polylines) != tree.n_nodes:
            raise ArgumentError("one polyline per node")
        self.dim = self.polylines[0][1].shape[1]

    def evaluate(self, p):
        self.tree.check_point(p)
        offsets, pts = self.polylines[p.edge]
        if p.edge == 0:
            return pts[0].copy()
        return np.array([np.interp(p.offset, offsets, pts[:, k]) for k in range(self.dim)])

    def node_position(self, v):
        return self.polylines[v][1][-1].copy()

    def node_positions(self):
        return np.array([self.node_position(v) for v in range(self.tree.n_nodes)])

    def to_text(self):
        out = io.StringIO()
        out.write(self.tree.to_text())
        out.write(f"# embedding dim {self.dim}\n")
        for v, (offsets, pts) in enumerate(self.polylines):
            out.write(f"edge {v} {len(offsets)}\n")
            for o, row in zip(offsets, pts):
                out.write(",".join(repr(float(x)) for x in (o, *row)) + "\n")
        return out.getvalue()

    @classmethod
    def from_text(cls, text):
        head, _, body = text.partition("# embedding dim")
        tree = MetricTree.from_text(head)
        lines = body.splitlines()[1:]
        polylines = []
        i = 0
        while i < len(lines):
            tag, v, count = lines[i].split()
            rows = np.array([[float(x) for x in ln.split(",")] for ln in lines[i + 1 : i + 1 + int(count)]])
            polylines.append((rows[:, 0], rows[:, 1:]))
            i += 1 + int(count)
        return cls(tree, polylines)

    def __eq__(self, other):
        return (
            isinstance(other, GraphSpatialTree)
            and self.tree == other.tree
            and all(np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1]) for a, b in zip(self.polylines, other.polylines))
        )


def sample_gaussian_embedding(tree, dim, rng, resolution=1e-3):
    """Brownian embedding: independent N(0, length * I) increments along every edge.

    Each edge is cut into pieces of length max(length / 32, resolution) and
    carries the Brownian path at those knots.
    """
    if dim < 1:
        raise ArgumentError("dim must be positive")
    polylines = [None] * tree.n_nodes
    polylines[0] = (np.zeros(1), np.zeros((1, dim)))
    for v in tree.preorder[1:]:
        length = tree.lengths[v]
        pieces = max(1, math.ceil(length / max(length / 32.0, resolution)))
        offsets = np.linspace(0.0, length, pieces + 1)
        steps = rng.standard_normal((pieces, dim)) * np.sqrt(np.diff(offsets))[:, None]
        start = polylines[tree.parent[v]][1][-1]
        pts = start + np.vstack([np.zeros((1, dim)), np.cumsum(steps, axis=0)])
        polylines[v] = (offsets, pts)
    return GraphSpatialTree(tree, polylines)


def straight_embedding(tree, positions):
    """Each edge drawn as the segment between its endpoint locations."""
    positions = np.asarray(positions, dtype=float)
    polylines = [(np.zeros(1), positions[:1])]
    for v in range(1, tree.n_nodes):
        polylines.append((np.array([0.0, tree.lengths[v]]), positions[[tree.parent[v], v]]))
    return GraphSpatialTree(tree, polylines)


def restrict_embedding(gst, reduced):
    """Embedding of a reduced subtree inherited from the tree it was cut from.

    ``reduced.source`` must map reduced nodes to points of ``gst.tree``.
    Every knot of the big embedding along a reduced edge is kept.
    """
    big = gst.tree
    src = reduced.source
    polylines = [(np.zeros(1), gst.evaluate(src[0])[None, :])]
    for v in range(1, reduced.n_nodes):
        upper, lower = src[reduced.parent[v]], src[v]
        top = big.point_depth(upper)
        offs, rows = [reduced.lengths[v]], [gst.evaluate(lower)]
        e, hi = lower.edge, lower.offset
        while e > 0:
            base = big.depth[big.parent[e]]
            lo = upper.offset if e == upper.edge else 0.0
            knot_offsets, knot_pts = gst.polylines[e]
            inside = (knot_offsets > lo) & (knot_offsets < hi)
            for o, row in zip(knot_offsets[inside][::-1], knot_pts[inside][::-1]):
                offs.append(base + o - top)
                rows.append(row)
            if e == upper.edge or base <= top:
                break
            offs.append(base - top)
            rows.append(gst.node_position(big.parent[e]))
            e, hi = big.parent[e], big.lengths[big.parent[e]]
        offs.append(0.0)
        rows.append(gst.evaluate(upper))
        offsets, pts = np.array(offs[::-1]), np.array(rows[::-1])
        keep = np.concatenate([[True], np.diff(offsets) > 0])
        keep[-1] = True
        polylines.append((offsets[keep], pts[keep]))
    return GraphSpatialTree(reduced, polylines)


def covariance_oracle(tree, a, b):
    """Covariance scale of the Brownian embedding at two points: depth of their meet."""
    return tree.point_depth(tree.meet(a, b))
