"""Time the compiled walk kernel against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--steps 200000] [--repeat 3]

Both backends see the same graphs and the same uniforms, so the printed
endpoint check doubles as an equivalence test.
"""

import argparse
import time

import numpy as np

from bisekit import _pykernels, kernels
from bisekit.embedding import sample_gaussian_embedding
from bisekit.lattice import graph_walker, sample_surrogate
from bisekit.realtree import crt_skeleton_linebreaking
from bisekit.treewalk import discretize


def cases(rng):
    g = sample_surrogate(60, 1.0, 2, 1, rng, max_vertices=20_000)
    yield f"surrogate tree ({g.n_vertices} vertices, uniform)", graph_walker(g)
    skeleton = crt_skeleton_linebreaking(8, rng)
    mesh = discretize(sample_gaussian_embedding(skeleton, 2, rng, resolution=0.05), 0.01, strict=False)
    yield f"tree mesh ({mesh.n_nodes} nodes, weighted)", mesh.walker


def best_of(repeat, fn):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    try:
        from bisekit import _ckernels
    except ImportError:
        raise SystemExit("compiled kernel not built; run `pip install -e . --no-build-isolation`")

    rng = np.random.default_rng(args.seed)
    print(f"{'case':<42} {'python s':>9} {'cython s':>9} {'speedup':>8}  same")
    for name, walker in cases(rng):
        hold = walker[3]
        horizon = args.steps * float(hold.mean())
        times = np.linspace(0.0, horizon, 50)
        results = {}
        for label, impl in (("python", _pykernels), ("cython", _ckernels)):
            results[label] = best_of(
                args.repeat,
                lambda: kernels.run_walk(walker, 0, times, np.random.default_rng(args.seed), impl=impl),
            )
        (tp, (np_, sp)), (tc, (nc, sc)) = results["python"], results["cython"]
        same = np.array_equal(np_, nc) and sp == sc
        print(f"{name:<42} {tp:9.3f} {tc:9.4f} {tp / tc:7.0f}x  {same}")


if __name__ == "__main__":
    main()
