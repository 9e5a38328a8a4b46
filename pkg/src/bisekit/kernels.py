"""Backend selection for the walk kernel.

The compiled module is used when it imports; set ``BISEKIT_PURE=1`` to force
the pure-Python fallback. Both consume the same uniforms and return identical
results.
"""

import os

import numpy as np

from . import _pykernels

if os.environ.get("BISEKIT_PURE"):
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
        BACKEND = "python"

CHUNK = 1 << 20


def csr_walker(indptr, indices, weights=None, hold=None):
    """Pack a graph for ``run_walk``. ``weights`` are per-slot, unnormalized."""
    indptr = np.ascontiguousarray(indptr, dtype=np.int64)
    indices = np.ascontiguousarray(indices, dtype=np.int64)
    n = len(indptr) - 1
    if weights is None:
        cum = np.empty(0, dtype=np.float64)
    else:
        w = np.asarray(weights, dtype=np.float64)
        cum = np.empty_like(w)
        for v in range(n):
            lo, hi = indptr[v], indptr[v + 1]
            if hi > lo:
                c = np.cumsum(w[lo:hi])
                cum[lo:hi] = c / c[-1]
    if hold is None:
        hold = np.ones(n, dtype=np.float64)
    return indptr, indices, cum, np.ascontiguousarray(hold, dtype=np.float64)


def run_walk(walker, start, record_times, rng, impl=None):
    """Nodes occupied at each of the sorted ``record_times``.

    A walker at node v holds for ``hold[v]`` time units and then jumps.
    Returns ``(nodes, steps)``.
    """
    impl = impl or _impl
    indptr, indices, cum, hold = walker
    times = np.ascontiguousarray(record_times, dtype=np.float64)
    out = np.empty(len(times), dtype=np.int64)
    node, clock, k, steps = int(start), 0.0, 0, 0
    while k < len(times):
        # rough remaining need, capped to keep memory flat
        need = int(min(CHUNK, max(64, (times[-1] - clock) / max(hold.min(), 1e-300) + 1)))
        u = rng.random(need)
        node, clock, k, used = impl.walk_chunk(indptr, indices, cum, hold, node, clock, u, times, out, k)
        steps += used
    return out, steps
