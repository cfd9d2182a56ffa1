"""Time the numba kernels against their numpy counterparts.

    python benchmarks/bench_kernels.py [--repeat N]

Each pair is checked for agreement before timing. The first numba call
(compilation or cache load) is excluded.
"""

import argparse
import time

import numpy as np

from masscone import kernels
from masscone.warped import ConeGrid, DiracConeGraph, WarpingFunction


def best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def cases(rng):
    x = rng.uniform(size=(60, 2))
    y = rng.uniform(size=(60, 2))
    C = kernels.cost_matrix_numpy(x, y, 2.0)
    a = np.full(60, 1 / 60)
    b = rng.uniform(0.1, 1, 60)
    b /= b.sum()
    P = kernels.cost_matrix_numpy(rng.uniform(size=(7, 2)), rng.uniform(size=(7, 2)), 1.0)

    graph = DiracConeGraph(ConeGrid(0.5, 3.0, 41, (-10.0,), (10.0,), 161), WarpingFunction("one_plus_wp_to_origin"))
    indptr, indices, weights = graph.indptr, graph.indices, graph.weights
    seeds = np.array([0, 1, 2], dtype=np.int64)
    seed_dist = np.array([0.0, 0.1, 0.2])

    n_edges = 500_000
    sm, dm = rng.uniform(0.5, 3, n_edges), rng.uniform(0.5, 3, n_edges)
    ss, ds = rng.uniform(-10, 10, (n_edges, 1)), rng.uniform(-10, 10, (n_edges, 1))
    gs, gd = rng.uniform(1, 11, n_edges), rng.uniform(1, 11, n_edges)
    return {
        "cost_matrix 60x60": ("cost_matrix", (x, y, 2.0), 0),
        "transport_simplex 60x60": ("transport_simplex", (a, b, C, 200_000), 1),
        "min_permutation_cost k=7": ("min_permutation_cost", (P,), None),
        f"cone_edge_weights {n_edges} edges": ("cone_edge_weights", (sm, ss, dm, ds, gs, gd, kernels.SCHEME_LEFT), None),
        f"dijkstra_seeded {len(indptr) - 1} nodes": ("dijkstra_seeded", (indptr, indices, weights, seeds, seed_dist), None),
    }


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    if not kernels.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    rng = np.random.default_rng(0)
    print(f"{'kernel':40s} {'numba [ms]':>11s} {'numpy [ms]':>11s} {'speedup':>8s}")
    for label, (name, call_args, pick) in cases(rng).items():
        fast = getattr(kernels, name + "_numba")
        slow = getattr(kernels, name + "_numpy")
        r_fast = fast(*call_args)
        r_slow = slow(*call_args)
        if pick is not None:
            r_fast, r_slow = r_fast[pick], r_slow[pick]
        if not np.allclose(r_fast, r_slow, rtol=1e-9, atol=1e-12):
            raise SystemExit(f"{label}: backends disagree")
        t_fast = best_of(lambda: fast(*call_args), args.repeat)
        t_slow = best_of(lambda: slow(*call_args), max(1, min(args.repeat, 3)))
        print(f"{label:40s} {1e3 * t_fast:11.3f} {1e3 * t_slow:11.3f} {t_slow / t_fast:7.1f}x")


if __name__ == "__main__":
    main()
