"""Lasso solver with selective penalization and sequential cross-validation.

The objective throughout is

    (1/T) * ||y - X b||^2 + lambda * sum_{k penalized} |b_k|,

solved by cyclic coordinate descent on the Gram moments G = X'X/T and
c = X'y/T (covariance-form updates: each coordinate update costs O(q) once
the moments are in hand, independent of T).  Cross-validation respects time
order: every fold trains on a prefix and validates on the block immediately
after it, so no future observation ever informs a past prediction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels

__all__ = [
    "LassoProblem",
    "LassoFit",
    "SeqCVSpec",
    "fit_lasso",
    "sequential_cv",
    "scale_design",
    "soft_threshold",
    "kkt_violation",
    "cv_fold_bounds",
    "lambda_max",
    "DEFAULT_KKT_TOL",
]

DEFAULT_KKT_TOL = 1e-6
_GRID_SIZE = 50
_GRID_MIN_RATIO = 1e-3


@dataclass(frozen=True)
class LassoProblem:
    """One penalized least-squares instance.

    ``penalized`` marks which columns the l1 penalty applies to (an intercept
    column of ones is typically unpenalized).  Penalized columns with zero
    variance are frozen at coefficient 0: a constant column is exchangeable
    with the intercept, and the tie is broken toward the intercept.
    """

    response: np.ndarray
    design: np.ndarray
    penalized: np.ndarray
    lam: float = 0.0
    tol: float = 1e-7
    max_iter: int = 10000

    def __post_init__(self):
        y = np.asarray(self.response, dtype=np.float64)
        X = np.asarray(self.design, dtype=np.float64)
        pen = np.asarray(self.penalized, dtype=bool)
        if y.ndim != 1:
            raise ValueError(f"response must be 1-dimensional, got shape {y.shape}")
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise ValueError(
                f"design must be (T, q) with T = len(response); got {X.shape} vs T={y.shape[0]}"
            )
        if pen.shape != (X.shape[1],):
            raise ValueError(
                f"penalized mask must have shape ({X.shape[1]},), got {pen.shape}"
            )
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(X))):
            raise ValueError("response and design must be finite")
        if not (math.isfinite(self.lam) and self.lam >= 0):
            raise ValueError(f"lam must be finite and >= 0, got {self.lam!r}")
        if not (self.tol > 0 and self.max_iter >= 1):
            raise ValueError("tol must be > 0 and max_iter >= 1")
        object.__setattr__(self, "response", y)
        object.__setattr__(self, "design", X)
        object.__setattr__(self, "penalized", pen)


@dataclass(frozen=True)
class LassoFit:
    """Solver output; ``cv_table`` is (L, 2) [lambda, mean validation MSE]
    when the fit came from :func:`sequential_cv`, else None."""

    coefficients: np.ndarray
    objective: float
    iterations: int
    converged: bool
    lambda_used: float
    cv_table: np.ndarray | None = None


@dataclass(frozen=True)
class SeqCVSpec:
    """Sequential (rolling-origin) cross-validation settings.

    ``lambda_grid`` may be given explicitly (it is sorted descending); by
    default a 50-point log-spaced grid from lambda_max down to
    1e-3 * lambda_max is built per problem.
    """

    n_folds: int = 5
    lambda_grid: tuple[float, ...] | None = None
    min_train_frac: float = 0.5

    def __post_init__(self):
        if self.n_folds < 2:
            raise ValueError(f"n_folds must be >= 2, got {self.n_folds}")
        if not (0 < self.min_train_frac < 1):
            raise ValueError(
                f"min_train_frac must lie in (0, 1), got {self.min_train_frac!r}"
            )
        if self.lambda_grid is not None:
            grid = tuple(sorted((float(v) for v in self.lambda_grid), reverse=True))
            if not grid or any(not math.isfinite(v) or v < 0 for v in grid):
                raise ValueError("lambda_grid must be non-empty, finite, and >= 0")
            object.__setattr__(self, "lambda_grid", grid)


def soft_threshold(a: float, thr: float) -> float:
    """S(a, thr) = sign(a) * max(|a| - thr, 0)."""
    if a > thr:
        return a - thr
    if a < -thr:
        return a + thr
    return 0.0


def _frozen_mask(X: np.ndarray, penalized: np.ndarray) -> np.ndarray:
    # Zero-variance penalized columns are exchangeable with the intercept;
    # freeze them at 0 so the intercept wins the tie deterministically.
    return penalized & (np.ptp(X, axis=0) == 0.0)


def _moments(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    T = X.shape[0]
    G = X.T @ X / T
    c = X.T @ y / T
    return np.ascontiguousarray(G), np.ascontiguousarray(c)


def _run_path(X, y, grid, penalized, tol, max_iter):
    G, c = _moments(X, y)
    frozen = _frozen_mask(X, penalized)
    coef0 = np.zeros(X.shape[1])
    return kernels.cd_gram_path(
        G,
        c,
        np.asarray(grid, dtype=np.float64),
        penalized,
        frozen,
        coef0,
        tol,
        int(max_iter),
    )


def fit_lasso(problem: LassoProblem) -> LassoFit:
    """Solve one instance by cyclic coordinate descent with soft
    thresholding; unpenalized coordinates (the intercept) get the exact
    closed-form update each sweep."""
    coefs, iters, conv = _run_path(
        problem.design,
        problem.response,
        [problem.lam],
        problem.penalized,
        problem.tol,
        problem.max_iter,
    )
    b = coefs[0]
    return LassoFit(
        coefficients=b,
        objective=_objective(problem.response, problem.design, problem.penalized, problem.lam, b),
        iterations=int(iters[0]),
        converged=bool(conv[0]),
        lambda_used=problem.lam,
    )


def _objective(y, X, penalized, lam, b) -> float:
    r = y - X @ b
    return float(r @ r / y.shape[0] + lam * np.abs(b[penalized]).sum())


def kkt_violation(problem: LassoProblem, coefficients: np.ndarray) -> float:
    """Largest stationarity violation of ``coefficients`` for ``problem``.

    With g = (2/T) X'(Xb - y), optimality requires g_k = 0 for unpenalized
    coordinates, |g_k| <= lam for penalized zeros, and g_k = -lam * sign(b_k)
    for active penalized coordinates.  Frozen (constant penalized) and
    all-zero columns are exempt.  Returned value is comparable against
    ``DEFAULT_KKT_TOL``.
    """
    b = np.asarray(coefficients, dtype=np.float64)
    X, y = problem.design, problem.response
    g = 2.0 * (X.T @ (X @ b - y)) / X.shape[0]
    zero_col = np.abs(X).max(axis=0) == 0
    frozen = _frozen_mask(X, problem.penalized) | zero_col
    worst = 0.0
    for k in range(X.shape[1]):
        if frozen[k]:
            continue
        if not problem.penalized[k]:
            v = abs(g[k])
        elif b[k] == 0.0:
            v = max(0.0, abs(g[k]) - problem.lam)
        else:
            v = abs(g[k] + problem.lam * math.copysign(1.0, b[k]))
        worst = max(worst, v)
    return worst


def lambda_max(response, design, penalized) -> float:
    """Smallest lambda at which every penalized coefficient is exactly zero.

    max_k |(2/T) X_k'(y - y0)| over penalized k, where y0 is the projection
    of y onto the unpenalized columns (the response mean when the only
    unpenalized column is an intercept; zero when nothing is unpenalized).
    """
    y = np.asarray(response, dtype=np.float64)
    X = np.asarray(design, dtype=np.float64)
    pen = np.asarray(penalized, dtype=bool)
    if not pen.any():
        return 0.0
    if (~pen).any():
        Xu = X[:, ~pen]
        coef, *_ = np.linalg.lstsq(Xu, y, rcond=None)
        resid = y - Xu @ coef
    else:
        resid = y
    vals = np.abs(2.0 * (X[:, pen].T @ resid) / X.shape[0])
    return float(vals.max()) if vals.size else 0.0


def default_lambda_grid(lam_max: float) -> np.ndarray:
    """Descending log-spaced grid from lam_max to 1e-3 lam_max (50 points);
    collapses to a single zero when the problem is degenerate (lam_max = 0)."""
    if lam_max <= 0:
        return np.array([0.0])
    return np.geomspace(lam_max, _GRID_MIN_RATIO * lam_max, _GRID_SIZE)


def cv_fold_bounds(T: int, spec: SeqCVSpec) -> list[tuple[int, int]]:
    """Fold layout as (train_end, validation_end) pairs.

    The first training prefix holds ceil(min_train_frac * T) rows; each of
    the n_folds validation blocks spans (T - t1) // n_folds rows, advancing
    the training prefix by one block per fold.  A zero-length block is a
    fatal configuration error.
    """
    t1 = math.ceil(spec.min_train_frac * T)
    span = (T - t1) // spec.n_folds
    if span <= 0:
        raise ValueError(
            f"sequential CV infeasible: T={T}, min_train_frac={spec.min_train_frac}, "
            f"n_folds={spec.n_folds} leaves a validation span of {span} rows"
        )
    return [(t1 + k * span, t1 + (k + 1) * span) for k in range(spec.n_folds)]


def sequential_cv(response, design, penalized, spec: SeqCVSpec | None = None) -> LassoFit:
    """Pick lambda by rolling-origin validation, then refit on all rows.

    Each fold fits the full descending lambda path on its training prefix
    (warm starts along the grid) and scores one-step-block MSE on the rows
    just after the prefix.  The winner is the lambda with the smallest mean
    validation MSE; ties go to the larger lambda.  The returned fit carries
    the (lambda, mean MSE) table.
    """
    spec = spec or SeqCVSpec()
    y = np.asarray(response, dtype=np.float64)
    X = np.asarray(design, dtype=np.float64)
    pen = np.asarray(penalized, dtype=bool)
    T = y.shape[0]
    bounds = cv_fold_bounds(T, spec)
    if spec.lambda_grid is not None:
        grid = np.asarray(spec.lambda_grid, dtype=np.float64)
    else:
        grid = default_lambda_grid(lambda_max(y, X, pen))
    mse = np.zeros(grid.shape[0])
    for train_end, val_end in bounds:
        coefs, _, _ = _run_path(X[:train_end], y[:train_end], grid, pen, 1e-7, 10000)
        pred = X[train_end:val_end] @ coefs.T
        err = pred - y[train_end:val_end, None]
        mse += (err * err).mean(axis=0)
    mse /= len(bounds)
    best = 0
    for li in range(1, grid.shape[0]):
        if mse[li] < mse[best]:  # strict: ties keep the earlier (larger) lambda
            best = li
    problem = LassoProblem(response=y, design=X, penalized=pen, lam=float(grid[best]))
    fit = fit_lasso(problem)
    return LassoFit(
        coefficients=fit.coefficients,
        objective=fit.objective,
        iterations=fit.iterations,
        converged=fit.converged,
        lambda_used=fit.lambda_used,
        cv_table=np.column_stack([grid, mse]),
    )


def scale_design(design, sigma) -> np.ndarray:
    """Divide every row of ``design`` by its scale: row t becomes
    design[t] / sigma[t].  Any nonpositive or non-finite scale is fatal."""
    X = np.asarray(design, dtype=np.float64)
    s = np.asarray(sigma, dtype=np.float64)
    if s.ndim != 1 or s.shape[0] != X.shape[0]:
        raise ValueError(
            f"sigma must be 1-dimensional with length {X.shape[0]}, got shape {s.shape}"
        )
    if np.any(s <= 0) or not np.all(np.isfinite(s)):
        raise ValueError("sigma entries must be finite and > 0")
    return X / s[:, None]
