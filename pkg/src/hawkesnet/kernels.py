"""Hot numeric loops, JIT-compiled with numba when available.

Three kernels live here because they dominate the Monte-Carlo harness:

* :func:`integrated_history` -- the exponential-kernel recursion that turns a
  spike matrix into the integrated-history design matrix,
* :func:`simulate_path` -- the discrete-time thinning loop that generates
  spike trains from a model,
* :func:`cd_gram_path` -- warm-started cyclic coordinate descent over a
  descending lambda grid, operating on precomputed Gram/cross moments.

Backend selection happens once at import time.  The numba backend is used
when numba imports cleanly, unless the environment variable
``HAWKESNET_NO_NUMBA`` is set to ``1``/``true``/``yes``/``on``, in which case
the pure-numpy fallbacks are used.  Both variants of every kernel are always
importable (``*_py`` and, when numba is present, ``*_jit``) so tests and
``benchmarks/benchmark_kernels.py`` can compare them directly.

The coordinate-descent fallback is plain Python by necessity -- coordinate
updates are sequential and cannot be vectorized without changing the
algorithm -- so expect the fallback to be markedly slower on solver-heavy
workloads.  Results agree between backends to floating-point roundoff.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = [
    "NUMBA_AVAILABLE",
    "USE_NUMBA",
    "integrated_history",
    "simulate_path",
    "cd_gram_path",
]


def _env_disables_numba() -> bool:
    return os.environ.get("HAWKESNET_NO_NUMBA", "").strip().lower() in {
        "1",
        "true",
        "yes",
        "on",
    }


try:
    import numba

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    NUMBA_AVAILABLE = False

USE_NUMBA = NUMBA_AVAILABLE and not _env_disables_numba()


# ---------------------------------------------------------------------------
# integrated history recursion
# ---------------------------------------------------------------------------

def integrated_history_py(events: np.ndarray, decay_factor: float) -> np.ndarray:
    """Integrated spike history x with x[0] = 0 and
    x[t] = decay_factor * (x[t-1] + events[t-1]).

    ``events`` is (T, p) float64; returns (T, p) float64.  Row t holds the
    exponentially discounted sum of all spikes strictly before t, which is
    exact for the exponential kernel on the unit grid.
    """
    n_steps, p = events.shape
    x = np.zeros((n_steps, p))
    acc = np.zeros(p)
    for t in range(1, n_steps):
        acc = decay_factor * (acc + events[t - 1])
        x[t] = acc
    return x


def _integrated_history_loops(events, decay_factor):
    n_steps, p = events.shape
    x = np.zeros((n_steps, p))
    for t in range(1, n_steps):
        for j in range(p):
            x[t, j] = decay_factor * (x[t - 1, j] + events[t - 1, j])
    return x


# ---------------------------------------------------------------------------
# simulation loop
# ---------------------------------------------------------------------------

def simulate_path_py(mu, theta, decay_factor, uniforms, lo, hi):
    """Discrete-time thinning: one Bernoulli draw per (t, unit).

    ``uniforms`` is an (n, p) matrix of pre-generated U[0,1) draws; using the
    whole matrix up front keeps the draw order identical across backends.
    Returns ``(events, x, lam)``: the 0/1 spike matrix, the integrated
    history actually used at each step, and the *raw* (unclipped) intensity.
    Spike probabilities are the raw intensities clipped into [lo, hi].
    """
    n_steps, p = uniforms.shape
    events = np.zeros((n_steps, p))
    x = np.zeros((n_steps, p))
    lam = np.empty((n_steps, p))
    acc = np.zeros(p)
    for t in range(n_steps):
        x[t] = acc
        lam_t = mu + theta @ acc
        lam[t] = lam_t
        prob = np.minimum(np.maximum(lam_t, lo), hi)
        events[t] = uniforms[t] < prob
        acc = decay_factor * (acc + events[t])
    return events, x, lam


def _simulate_path_loops(mu, theta, decay_factor, uniforms, lo, hi):
    n_steps, p = uniforms.shape
    events = np.zeros((n_steps, p))
    x = np.zeros((n_steps, p))
    lam = np.empty((n_steps, p))
    acc = np.zeros(p)
    for t in range(n_steps):
        for i in range(p):
            x[t, i] = acc[i]
        for i in range(p):
            s = mu[i]
            for j in range(p):
                s += theta[i, j] * acc[j]
            lam[t, i] = s
            prob = s
            if prob < lo:
                prob = lo
            elif prob > hi:
                prob = hi
            if uniforms[t, i] < prob:
                events[t, i] = 1.0
        for j in range(p):
            acc[j] = decay_factor * (acc[j] + events[t, j])
    return events, x, lam


# ---------------------------------------------------------------------------
# coordinate descent on Gram moments
# ---------------------------------------------------------------------------

def cd_gram_path_py(G, c, lam_grid, penalized, frozen, coef0, tol, max_iter):
    """Cyclic coordinate descent for
    (1/T)||y - X b||^2 + lam * sum_k penalized[k] * |b_k|
    parameterized by the moments G = X'X/T and c = X'y/T.

    The grid must be descending; the solution at each lambda warm-starts the
    next (one pass over the grid per call keeps call overhead off the hot
    path).  Coordinates with ``frozen[k]`` or a zero diagonal are never
    updated.  A sweep updates coordinates in index order; convergence is
    declared when the largest coefficient change in a sweep drops below
    ``tol``.

    Returns ``(coefs, iters, conv)`` with shapes (L, q), (L,), (L,).
    """
    q = G.shape[0]
    n_lams = lam_grid.shape[0]
    coefs = np.empty((n_lams, q))
    iters = np.zeros(n_lams, np.int64)
    conv = np.zeros(n_lams, np.bool_)
    b = coef0.copy()
    for li in range(n_lams):
        thr = 0.5 * lam_grid[li]
        for it in range(max_iter):
            delta = 0.0
            for k in range(q):
                if frozen[k] or G[k, k] <= 0.0:
                    continue
                s = 0.0
                for m in range(q):
                    s += G[k, m] * b[m]
                rho = c[k] - s + G[k, k] * b[k]
                if penalized[k]:
                    arho = abs(rho)
                    if arho <= thr:
                        bk = 0.0
                    elif rho > 0.0:
                        bk = (rho - thr) / G[k, k]
                    else:
                        bk = (rho + thr) / G[k, k]
                else:
                    bk = rho / G[k, k]
                d = abs(bk - b[k])
                if d > delta:
                    delta = d
                b[k] = bk
            iters[li] = it + 1
            if delta < tol:
                conv[li] = True
                break
        coefs[li] = b
    return coefs, iters, conv


# ---------------------------------------------------------------------------
# backend wiring
# ---------------------------------------------------------------------------

if NUMBA_AVAILABLE:
    _jit = numba.njit(cache=True, fastmath=False)
    integrated_history_jit = _jit(_integrated_history_loops)
    simulate_path_jit = _jit(_simulate_path_loops)
    cd_gram_path_jit = _jit(cd_gram_path_py)
else:  # pragma: no cover - exercised only without numba
    integrated_history_jit = None
    simulate_path_jit = None
    cd_gram_path_jit = None

if USE_NUMBA:
    integrated_history = integrated_history_jit
    simulate_path = simulate_path_jit
    cd_gram_path = cd_gram_path_jit
else:
    integrated_history = integrated_history_py
    simulate_path = simulate_path_py
    cd_gram_path = cd_gram_path_py
