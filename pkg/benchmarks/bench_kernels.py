"""Benchmark the compiled kernel core against the numpy fallback.

Runs each hot kernel on inputs shaped like the real pipeline (fine graph:
~2,350 nodes x 389 features; coarse graph: ~1,500 nodes x 423 features) and
prints a per-kernel timing table with the speedup of the compiled path.

Usage: python benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np

from crashgraph import kernels
from crashgraph.autodiff import normalize_adjacency


def build_inputs(rng):
    cases = {}

    # CSR spmm at coarse-graph scale (sparse ring adjacency + self loops)
    n, feat = 1500, 423
    src = np.arange(n - 1, dtype=np.int64)
    edges = np.stack([np.concatenate([src, src + 1]), np.concatenate([src + 1, src])])
    adj = normalize_adjacency(edges, n)
    dense = rng.normal(size=(n, feat))
    cases["spmm_csr (1500x1500, F=423)"] = (
        kernels.spmm_csr,
        (adj.indptr, adj.indices, adj.values, dense),
    )

    # row convolution at fine-graph scale
    x = rng.normal(size=(2350, 389))
    kern = rng.normal(size=3)
    cases["conv1d_rows (2350x389, k=3)"] = (kernels.conv1d_rows, (x, kern))
    grad = rng.normal(size=x.shape)
    cases["conv1d_kernel_grad (2350x389)"] = (kernels.conv1d_rows_kernel_grad, (x, grad, 3))

    # segment ops at GAT-edge scale
    e, segs, hidden = 60_000, 2350, 64
    ids = np.sort(rng.integers(0, segs, size=e)).astype(np.int64)
    vals = rng.normal(size=e)
    rows = rng.normal(size=(e, hidden))
    cases["segment_max (60k edges)"] = (kernels.segment_max, (vals, ids, segs))
    cases["scatter_add_rows (60k x 64)"] = (kernels.scatter_add_rows, (rows, ids, segs))

    # spatio-temporal edge enumeration at dataset scale
    n_rec = 2350
    lat = 30.0 + rng.normal(scale=0.8, size=n_rec)
    lon = -97.0 + rng.normal(scale=0.8, size=n_rec)
    t = np.sort(rng.integers(0, 366 * 86400, size=n_rec)).astype(np.int64)
    cases["st_edge_pairs (2350 records)"] = (kernels.st_edge_pairs, (lat, lon, t, 30.0, 24.0))
    return cases


def time_call(fn, args, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5, help="take the best of N runs")
    args = parser.parse_args()

    available = kernels.available_backends()
    if "compiled" not in available:
        print("compiled extension not built; only the python backend is available")
    cases = build_inputs(np.random.default_rng(0))

    header = f"{'kernel':36} {'python':>10} {'compiled':>10} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, (fn, fn_args) in cases.items():
        timings = {}
        for backend in available:
            kernels.set_backend(backend)
            timings[backend] = time_call(fn, fn_args, args.repeats)
        kernels.set_backend(None)
        py = timings.get("python", float("nan"))
        cy = timings.get("compiled", float("nan"))
        speedup = py / cy if "compiled" in timings else float("nan")
        print(f"{name:36} {py * 1e3:9.2f}ms {cy * 1e3:9.2f}ms {speedup:7.1f}x")


if __name__ == "__main__":
    main()
