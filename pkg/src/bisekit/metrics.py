"""Distances between skeletons and between measures."""

import math

import numpy as np
from scipy.stats import ks_2samp

from .errors import ArgumentError, ShapeMismatchError
from .realtree import shape_code

__all__ = ["shape_code", "edge_correspondence", "dist_d1", "dist_d2", "dist_D", "total_variation", "ks_distance"]


def edge_correspondence(a, b):
    """Pairs of matching nodes of two trees with the same ordered shape."""
    if shape_code(a) != shape_code(b):
        raise ShapeMismatchError("ordered shapes differ")
    pairs = []
    stack = [(0, 0)]
    while stack:
        u, v = stack.pop()
        pairs.append((u, v))
        stack.extend(zip(a.children[u], b.children[v]))
    return pairs


def dist_d1(a, b):
    """Largest edge-length difference, or inf when the shapes differ."""
    if shape_code(a) != shape_code(b):
        return math.inf
    return max((abs(a.lengths[u] - b.lengths[v]) for u, v in edge_correspondence(a, b) if u), default=0.0)


def _at_fractions(offsets, pts, fracs, length):
    x = fracs * length
    return np.column_stack([np.interp(x, offsets, pts[:, k]) for k in range(pts.shape[1])])


def dist_d2(ga, gb):
    """Largest distance between the two embeddings, matching points by length fraction.

    Both embeddings are piecewise linear in the fraction, so checking the union
    of their knots gives the exact supremum.
    """
    best = float(np.linalg.norm(ga.polylines[0][1][0] - gb.polylines[0][1][0]))
    for u, v in edge_correspondence(ga.tree, gb.tree):
        if not u:
            continue
        la, lb = ga.tree.lengths[u], gb.tree.lengths[v]
        oa, pa = ga.polylines[u]
        ob, pb = gb.polylines[v]
        fracs = np.union1d(oa / la, ob / lb)
        diff = _at_fractions(oa, pa, fracs, la) - _at_fractions(ob, pb, fracs, lb)
        best = max(best, float(np.linalg.norm(diff, axis=1).max()))
    return best


def dist_D(ga, gb):
    """min(d1 + d2, 1) between two embedded skeletons; 1 when the shapes differ."""
    d1 = dist_d1(ga.tree, gb.tree)
    if math.isinf(d1):
        return 1.0
    return min(d1 + dist_d2(ga, gb), 1.0)


def _masses(p, q):
    if isinstance(p, dict) or isinstance(q, dict):
        keys = sorted(set(p) | set(q), key=repr)
        p = [p.get(k, 0) for k in keys]
        q = [q.get(k, 0) for k in keys]
    if len(p) != len(q):
        raise ArgumentError("measures on different supports")
    if any(x < 0 for x in p) or any(x < 0 for x in q):
        raise ArgumentError("negative mass")
    return list(p), list(q)


def total_variation(p, q):
    """sup over sets A of |p(A) - q(A)|.

    Accepts sequences on a common support or dicts keyed by atom. For two
    probability measures this is half the l1 distance; for sub-probability
    measures it is the larger of the positive and negative parts of p - q.
    Exact when the masses are fractions.
    """
    p, q = _masses(p, q)
    pos = sum((a - b for a, b in zip(p, q) if a > b), 0)
    neg = sum((b - a for a, b in zip(p, q) if b > a), 0)
    return max(pos, neg)


def ks_distance(a, b):
    """Two-sample Kolmogorov-Smirnov statistic."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise ArgumentError("empty sample")
    with np.errstate(divide="ignore", invalid="ignore"):  # only the statistic is used
        return float(ks_2samp(a, b, method="asymp").statistic)
