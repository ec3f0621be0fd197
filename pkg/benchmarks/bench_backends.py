"""Benchmark the numba kernels against the pure-numpy fallback.

Both backend modules are imported directly, so one process times both.
The first numba call per kernel includes JIT compilation; a warmup pass
runs outside the timed region. Usage:

    python benchmarks/bench_backends.py [--repeat 5]
"""

import argparse
import time

import numpy as np

from kpsketch import _kernels_numpy as knp

try:
    from kpsketch import _kernels_numba as knb
except ImportError:
    knb = None

from kpsketch.mediancost import MedianSketchConfig, _StreamTable
from kpsketch.rng import SeedCtx

M = np.uint64(42)
S = np.uint64(7)


def bench(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def build_state_case(k):
    cfg = MedianSketchConfig(p=1.5, eps=0.25, delta=0.2)
    d, n = 10, 20
    dims = cfg.resolve(d)
    streams = _StreamTable(SeedCtx(3), dims.reps, dims.t_samples)
    pts = np.random.default_rng(0).normal(size=(n, d))
    lamp = np.full(n, (1.0 / n) ** (1.0 / cfg.p))
    cols = np.arange(n, dtype=np.int64)
    state = np.zeros(dims.state_size)

    def run():
        state[:] = 0.0
        k.build_state(state, M, cfg.p, pts, lamp, cols,
                      streams.z, streams.exp, streams.rec, streams.opt,
                      streams.cm1, streams.cm2,
                      dims.z_width, dims.t_samples, dims.s1, dims.t1, dims.b1,
                      dims.s2, dims.t2, dims.b2)
    return run


CASES = {
    "stable_matrix 400x1000 (p=1.5)":
        lambda k: (lambda: k.stable_matrix(M, S, 1.5, 0, 400, 0, 1000)),
    "exp_vector 1e6":
        lambda k: (lambda: k.exp_vector(M, S, 1_000_000)),
    "apply_weighted s=400 n=5000 (p=1.0)":
        lambda k: (lambda: k.apply_weighted(
            M, S, 1.0, 400, 0, np.arange(5000, dtype=np.int64),
            np.random.default_rng(1).normal(size=5000))),
    "median_abs 1e5":
        lambda k: (lambda: k.median_abs(np.random.default_rng(2).normal(size=100_000))),
    "pipeline build_state (n=20, d=10, default widths)": build_state_case,
}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    backends = [("numpy", knp)] + ([("numba", knb)] if knb else [])
    print(f"{'case':45s}" + "".join(f"{name:>12s}" for name, _ in backends) + f"{'speedup':>10s}")
    for case, make in CASES.items():
        times = {}
        for name, mod in backends:
            fn = make(mod)
            fn()  # warmup / compile
            times[name] = bench(fn, args.repeat)
        row = f"{case:45s}" + "".join(f"{times[name]*1e3:10.2f}ms" for name, _ in backends)
        if "numba" in times:
            row += f"{times['numpy'] / times['numba']:9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
