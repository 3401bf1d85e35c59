"""Benchmark the JIT-compiled hot loops against the pure-numpy fallbacks.

Runs each kernel on identical inputs with both backends, checks that the
results agree, and reports median wall-clock times.

Usage:
    python3 benchmarks/benchmark_kernels.py --T 5000 --p 20 --repeats 7
"""

import argparse
import math
import time

import numpy as np

from hawkesnet import kernels
from hawkesnet.solver import default_lambda_grid, lambda_max


def median_time(fn, args, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def make_inputs(T, p, seed):
    rng = np.random.default_rng(seed)
    decay = math.exp(-1.0)
    events = (rng.random((T, p)) < 0.2).astype(np.int8)
    mu = np.full(p, 0.2)
    theta = np.zeros((p, p))
    for i in range(1, p):
        theta[i, i - 1] = 0.3
    uniforms = rng.random((T, p))

    x = kernels.integrated_history_py(events, decay)
    design = np.column_stack([np.ones(T), x])
    y = events[:, min(1, p - 1)].astype(float)
    G = design.T @ design / T
    c = design.T @ y / T
    penalized = np.ones(p + 1, dtype=np.bool_)
    penalized[0] = False
    frozen = np.zeros(p + 1, dtype=np.bool_)
    lam_grid = default_lambda_grid(lambda_max(y, design, penalized))
    coef0 = np.zeros(p + 1)

    return {
        "integrated_history": (events, decay),
        "simulate_path": (mu, theta, decay, uniforms, 0.001, 0.999),
        "cd_gram_path": (G, c, lam_grid, penalized, frozen, coef0, 1e-7, 10000),
    }


def check_agreement(name, py_out, jit_out):
    py_parts = py_out if isinstance(py_out, tuple) else (py_out,)
    jit_parts = jit_out if isinstance(jit_out, tuple) else (jit_out,)
    worst = 0.0
    for a, b in zip(py_parts, jit_parts):
        worst = max(worst, float(np.max(np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)))))
    if worst > 1e-10:
        raise SystemExit(f"backend mismatch on {name}: max abs diff {worst:.3e}")
    return worst


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--T", type=int, default=5000, help="number of time steps")
    parser.add_argument("--p", type=int, default=20, help="number of units")
    parser.add_argument("--repeats", type=int, default=5, help="timed repetitions per backend")
    parser.add_argument("--seed", type=int, default=0, help="input-generation seed")
    args = parser.parse_args(argv)

    inputs = make_inputs(args.T, args.p, args.seed)
    pairs = {
        "integrated_history": (kernels.integrated_history_py, kernels.integrated_history_jit),
        "simulate_path": (kernels.simulate_path_py, kernels.simulate_path_jit),
        "cd_gram_path": (kernels.cd_gram_path_py, kernels.cd_gram_path_jit),
    }

    print(f"T={args.T} p={args.p} repeats={args.repeats} seed={args.seed}")
    if not kernels.NUMBA_AVAILABLE:
        print("numba not available: timing the numpy backend only")
    header = f"{'kernel':<20} {'numpy (ms)':>12} {'numba (ms)':>12} {'speedup':>9} {'max|diff|':>11}"
    print(header)
    print("-" * len(header))

    for name, (py_fn, jit_fn) in pairs.items():
        fn_args = inputs[name]
        py_out = py_fn(*fn_args)
        t_py = median_time(py_fn, fn_args, args.repeats)
        if jit_fn is None:
            print(f"{name:<20} {t_py * 1e3:>12.3f} {'-':>12} {'-':>9} {'-':>11}")
            continue
        jit_out = jit_fn(*fn_args)  # warmup (includes compilation)
        diff = check_agreement(name, py_out, jit_out)
        t_jit = median_time(jit_fn, fn_args, args.repeats)
        print(
            f"{name:<20} {t_py * 1e3:>12.3f} {t_jit * 1e3:>12.3f}"
            f" {t_py / t_jit:>8.1f}x {diff:>11.2e}"
        )


if __name__ == "__main__":
    main()
