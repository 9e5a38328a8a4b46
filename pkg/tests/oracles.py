"""Slow, independent reference implementations used to freeze expected values."""

from collections import deque
import itertools
import math

import numpy as np


def dense_resistance(n, edges, x, y):
    """Effective resistance from the Moore-Penrose pseudo-inverse of the Laplacian."""
    lap = np.zeros((n, n))
    for a, b in edges:
        lap[a, a] += 1
        lap[b, b] += 1
        lap[a, b] -= 1
        lap[b, a] -= 1
    pinv = np.linalg.pinv(lap)
    return float(pinv[x, x] + pinv[y, y] - 2 * pinv[x, y])


def bfs_distances(n, edges, src, allowed=None):
    adj = [[] for _ in range(n)]
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    dist = [-1] * n
    dist[src] = 0
    queue = deque([src])
    while queue:
        v = queue.popleft()
        for w in adj[v]:
            if dist[w] < 0 and (allowed is None or w in allowed):
                dist[w] = dist[v] + 1
                queue.append(w)
    return dist


def path_to_root(parent, v):
    out = [v]
    while parent[v] >= 0:
        v = parent[v]
        out.append(v)
    return out


def tree_distance(parent, lengths, u, v):
    """Distance between two nodes by walking both root paths."""
    pu, pv = path_to_root(parent, u), path_to_root(parent, v)
    common = set(pu) & set(pv)
    return sum(lengths[w] for w in pu if w not in common) + sum(lengths[w] for w in pv if w not in common)


def point_in_subtree(tree, p, x):
    """Whether TreePoint p lies at or below TreePoint x, by walking p's ancestor edges."""
    p, x = tree.canonical(p), tree.canonical(x)
    if x.edge == 0:
        return True
    if p.edge == x.edge:
        return p.offset >= x.offset
    v = p.edge
    while v > 0:
        v = tree.parent[v]
        if v == x.edge:
            return True
    return False


def grid_discrepancy(tree, atoms, resolution):
    """max over a grid of tree points x of |lambda(below x) - mu(below x)|."""
    from bisekit.realtree import TreePoint

    best = 0.0
    probes = [TreePoint(0, 0.0)]
    for v in range(1, tree.n_nodes):
        length = tree.lengths[v]
        k = max(1, math.ceil(length / resolution))
        probes += [TreePoint(v, length * (i + 1) / k) for i in range(k)]
        probes += [TreePoint(v, length * (i + 0.5) / k) for i in range(k)]
    # every mass configuration is attained at some atom, however close atoms sit
    probes += [tree.canonical(p) for p, _ in atoms]
    for x in probes:
        lam = tree.descendant_length(x) / tree.total_length if x.edge else 1.0
        mu = sum(m for p, m in atoms if point_in_subtree(tree, p, x))
        best = max(best, abs(lam - mu))
    return best


def sausage_brute_force(host, groups):
    """Largest Euclidean and host-graph diameters over the groups, by all-pairs search."""
    euclid, intrinsic = 0.0, 0
    edges = host.edges.tolist()
    for members in groups.values():
        members = [int(m) for m in members]
        pts = host.positions[members].astype(float)
        for a, b in itertools.combinations(range(len(members)), 2):
            euclid = max(euclid, float(np.linalg.norm(pts[a] - pts[b])))
        for m in members:
            dist = bfs_distances(host.n_vertices, edges, m)
            intrinsic = max(intrinsic, max(dist[w] for w in members))
    return euclid, intrinsic


def srw_excursion_durations(h, count, cap, rng, levels=64):
    """Durations, capped at ``cap``, of simple random walk excursions reaching height h.

    The walk has spacing h / levels and time step (h / levels)^2. Excursions
    that never reach the top are discarded; the result converges to the
    height-conditioned Brownian excursion duration as ``levels`` grows.
    """
    dx = h / levels
    dt = dx * dx
    max_steps = int(cap / dt) + 1
    out = []
    while len(out) < count:
        pos, top, steps = 1, 1, 1
        while pos > 0 and steps <= max_steps:
            chunk = rng.integers(0, 2, size=4096) * 2 - 1
            walk = pos + np.cumsum(chunk)
            hit = np.flatnonzero(walk == 0)
            end = hit[0] + 1 if hit.size else len(walk)
            top = max(top, int(walk[:end].max()))
            steps += end
            pos = int(walk[end - 1])
        if top >= levels:
            out.append(min(steps * dt, cap))
    return np.array(out)


def gaussian_bridge_min_cdf(a, b, dt, m):
    """P(min of a Brownian bridge from a to b over time dt < m)."""
    if m >= min(a, b):
        return 1.0
    return math.exp(-2 * (a - m) * (b - m) / dt)
