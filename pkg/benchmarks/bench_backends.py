#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallbacks.

Runs the four hot paths (exact solve, value iteration, policy enumeration,
path simulation) on a reference instance with both backends and prints a
timing table plus the observed result agreement (bit-identical by design).

Usage: python benchmarks/bench_backends.py [--repeat N]
"""

import argparse
import time

import numpy as np

import tandemflex as tf
from tandemflex import kernels_numpy
from tandemflex.model import build_action_tables, ensure_solver_params

try:
    from tandemflex import kernels_numba
except ImportError:
    kernels_numba = None

PARAMS = ensure_solver_params(tf.SystemParams(
    nu1=1.2, nu2=0.9, mu1=0.7, mu2=0.6, xi1=0.5, xi2=0.4, h1=3.0, h2=1.0))


def bench(fn, repeat):
    best = float("inf")
    result = None
    for _ in range(repeat):
        start = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - start)
    return best, result


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    class_start, r1, r2, _ = build_action_tables(PARAMS)
    h1, h2 = PARAMS.h1, PARAMS.h2
    rng = np.random.default_rng(0)
    nstates = (200 + 1) * (200 + 2) // 2
    exps = rng.exponential(size=(100_000, 15))
    unifs = rng.random((100_000, 15))
    table, policy = tf.solve(PARAMS, 10)
    rho1 = policy.rho1 * PARAMS.uniformization_scale
    rho2 = policy.rho2 * PARAMS.uniformization_scale

    jobs = {
        "solve n_max=200": lambda k: k.solve_kernel(200, h1, h2, class_start, r1, r2),
        "value iteration n_max=30": lambda k: k.value_iteration_kernel(
            30, h1, h2, class_start, r1, r2, 1e-10, 10**6),
        "enumerate policies n_max=3": lambda k: _enumerate(k),
        "simulate 100k paths from (5,5)": lambda k: k.simulate_paths_kernel(
            5, 5, h1, h2, rho1, rho2, exps, unifs),
    }

    def _enumerate(kernel_module):
        import tandemflex.oracle as oracle_mod
        saved = oracle_mod.kernels
        oracle_mod.kernels = kernel_module
        try:
            return tf.enumerate_policies(PARAMS, 3, table=table).values
        finally:
            oracle_mod.kernels = saved

    backends = [("numpy", kernels_numpy)]
    if kernels_numba is not None:
        # warm the JIT outside the timed region
        for job in jobs.values():
            job(kernels_numba)
        backends.insert(0, ("numba", kernels_numba))
    else:
        print("numba unavailable; benchmarking the fallback only")

    print(f"{'kernel':34s}" + "".join(f"{name:>12s}" for name, _ in backends)
          + ("     speedup" if len(backends) == 2 else ""))
    for label, job in jobs.items():
        times = []
        results = []
        for _, module in backends:
            t, res = bench(lambda m=module: job(m), args.repeat)
            times.append(t)
            results.append(res)
        line = f"{label:34s}" + "".join(f"{t * 1e3:10.1f}ms" for t in times)
        if len(backends) == 2:
            line += f"{times[1] / times[0]:11.1f}x"
            first = results[0][0] if isinstance(results[0], tuple) else results[0]
            second = results[1][0] if isinstance(results[1], tuple) else results[1]
            assert np.array_equal(np.asarray(first), np.asarray(second)), \
                f"backend mismatch in {label}"
        print(line)
    if len(backends) == 2:
        print("results bit-identical across backends")


if __name__ == "__main__":
    main()
