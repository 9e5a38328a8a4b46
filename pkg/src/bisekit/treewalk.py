"""Brownian motion on an embedded metric tree, approximated by a walk on a fine mesh."""

from dataclasses import dataclass
import math

import numpy as np

from .errors import ArgumentError
from .kernels import csr_walker, run_walk
from .metrics import ks_distance
from .realtree import TreePoint


@dataclass
class TreeMesh:
    points: list
    positions: np.ndarray
    walker: tuple
    hold: np.ndarray
    total_length: float

    @property
    def n_nodes(self):
        return len(self.points)


def discretize(gst, step, strict=True):
    """Cut each edge into ceil(length / step) equal pieces.

    Tree vertices keep their ids; interior mesh nodes follow. A walker at a
    node picks a neighbour with probability proportional to 1 / (piece
    length) and holds for sum(l) / sum(1 / l), the mean exit time of Brownian
    motion from the star of its pieces. With ``strict=False`` edges shorter
    than ``step`` are allowed and become a single piece.
    """
    tree = gst.tree
    if tree.n_nodes < 2:
        raise ArgumentError("tree has no edges")
    if not step > 0 or (strict and step >= min(tree.lengths[1:])):
        raise ArgumentError("step must be positive and below the shortest edge length")
    points = [tree.vertex_point(v) if v else TreePoint(0, 0.0) for v in range(tree.n_nodes)]
    positions = [gst.node_position(v) for v in range(tree.n_nodes)]
    links = []  # (a, b, piece length)
    for v in range(1, tree.n_nodes):
        length = tree.lengths[v]
        pieces = math.ceil(length / step)
        piece = length / pieces
        offs = np.arange(1, pieces) * piece
        offsets, pts = gst.polylines[v]
        inner = np.column_stack([np.interp(offs, offsets, pts[:, k]) for k in range(gst.dim)]) if pieces > 1 else None
        prev = tree.parent[v]
        for i in range(pieces - 1):
            node = len(points)
            points.append(TreePoint(v, float(offs[i])))
            positions.append(inner[i])
            links.append((prev, node, piece))
            prev = node
        links.append((prev, v, piece))
    n = len(points)
    a = np.array([l[0] for l in links] + [l[1] for l in links])
    b = np.array([l[1] for l in links] + [l[0] for l in links])
    w = np.array([l[2] for l in links] * 2)
    order = np.lexsort((b, a))
    a, b, w = a[order], b[order], w[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, a + 1, 1)
    indptr = np.cumsum(indptr)
    total_len = np.bincount(a, weights=w, minlength=n)
    total_inv = np.bincount(a, weights=1.0 / w, minlength=n)
    hold = total_len / total_inv
    walker = csr_walker(indptr, b, weights=1.0 / w, hold=hold)
    return TreeMesh(points, np.array(positions), walker, hold, tree.total_length)


@dataclass
class TreeWalkPath:
    times: np.ndarray
    nodes: np.ndarray
    positions: np.ndarray
    horizon: float
    mesh: TreeMesh = None

    @property
    def points(self):
        return [self.mesh.points[v] for v in self.nodes]

    def at(self, t):
        """Positions at time(s) t (last recorded state at or before t)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(t > self.horizon) or np.any(t < 0):
            raise ArgumentError("time outside [0, horizon]")
        idx = np.searchsorted(self.times, t, side="right") - 1
        return self.positions[np.maximum(idx, 0)]

    def to_csv(self, path=None):
        d = self.positions.shape[1]
        rows = ["time,edge,offset," + ",".join(f"x{i + 1}" for i in range(d))]
        for t, p, x in zip(self.times, self.points, self.positions):
            rows.append(f"{float(t)!r},{p.edge},{float(p.offset)!r}," + ",".join(repr(float(c)) for c in x))
        text = "\n".join(rows) + "\n"
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def walk_on_tree(gst, step, horizon, rng, times=None, time_scale="length", mesh=None, strict=True):
    """Walk from the root of an embedded tree up to time ``horizon``.

    With ``time_scale="length"`` an interior mesh step takes step^2 time units,
    approximating Brownian motion for the length measure. ``"normalized"``
    divides by the total length, which speeds the walk up to the process for
    the normalized length measure. ``times`` selects recording times; otherwise
    every jump is kept.
    """
    if horizon < 0:
        raise ArgumentError("horizon must be nonnegative")
    if time_scale not in ("length", "normalized"):
        raise ArgumentError(f"unknown time scale {time_scale!r}")
    mesh = mesh or discretize(gst, step, strict)
    scale = 1.0 if time_scale == "length" else 1.0 / mesh.total_length
    indptr, indices, cum, hold = mesh.walker
    if times is not None:
        times = np.sort(np.asarray(times, dtype=float))
        if len(times) and (times[0] < 0 or times[-1] > horizon):
            raise ArgumentError("recording times must lie in [0, horizon]")
        nodes, _ = run_walk((indptr, indices, cum, hold * scale), 0, times, rng)
        return TreeWalkPath(times, nodes, mesh.positions[nodes], horizon, mesh)
    steps = int(math.ceil(horizon / (hold.min() * scale))) + 1
    unit = (indptr, indices, cum, np.ones_like(hold))
    nodes, _ = run_walk(unit, 0, np.arange(steps + 1, dtype=float), rng)
    clock = np.concatenate([[0.0], np.cumsum(hold[nodes[:-1]] * scale)])
    keep = clock <= horizon
    return TreeWalkPath(clock[keep], nodes[keep], mesh.positions[nodes[keep]], horizon, mesh)


def ensemble_values(paths, t):
    return np.array([p.at(t)[0] for p in paths])


def compare_ensembles(a, b, times):
    """KS distance per (time, coordinate) between two ensembles of paths."""
    if not a or not b:
        raise ArgumentError("empty ensemble")
    times = np.atleast_1d(np.asarray(times, dtype=float))
    out = np.empty((len(times), a[0].positions.shape[1]))
    for i, t in enumerate(times):
        va, vb = ensemble_values(a, t), ensemble_values(b, t)
        for k in range(out.shape[1]):
            out[i, k] = ks_distance(va[:, k], vb[:, k])
    return out
