"""Edge inference for binary-spike Hawkes networks.

Testing whether unit j drives unit i (H0: theta_ij = 0 for j in a target set
J) proceeds in four stages:

1. lasso-regress unit i's spikes on the integrated histories to get the
   nuisance (mu_hat_i, beta_hat_i) and a floored variance profile
   sigma2_hat_i(t) from the fitted intensity;
2. for each target column j, lasso-regress the scaled column
   z_j = x_j / sigma_hat_i on the remaining scaled columns (intercept
   unpenalized, everything else penalized) to get projection weights w_j;
3. form the de-correlated direction z*_j = z_j - [1, z_{-j}] w_j and its
   Gram matrix Upsilon_hat = Z*' Z* / T;
4. score the residual that *omits* the target columns from the stage-1 fit
   (coefficients dropped, no refit) against the de-correlated directions:
   S_hat_j = mean(eps_hat / sigma_hat * z*_j), and compare
   U = T S_hat' Upsilon_hat^{-1} S_hat against the chi-square with |J|
   degrees of freedom, rejecting on U >= quantile.

The one-step estimator re-centers the stage-1 coefficient by the *full*
residual score and its own normalizer, giving asymptotically valid
confidence regions without refitting.

Stage-1 results depend only on the target row, so a single
:class:`NuisanceFit` built for several target columns can be split with
:meth:`NuisanceFit.restrict` into per-edge fits at no extra cost.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .dist import chi2_cdf, chi2_quantile, noncentral_chi2_cdf
from .model import DEFAULT_SIGMA_FLOOR, KernelSpec, SpikeData, integrated_process, residual_scale
from .solver import LassoProblem, SeqCVSpec, fit_lasso, scale_design, sequential_cv

__all__ = [
    "NuisanceFit",
    "TestDiagnostics",
    "ScoreTestResult",
    "ConfidenceRegion",
    "SingularUpsilon",
    "SingularUpsilonTilde",
    "DegenerateDesign",
    "fit_nuisance",
    "oracle_fit_nuisance",
    "score_test",
    "oracle_score_test",
    "one_step_ci",
    "chi2_cdf",
    "chi2_quantile",
    "noncentral_chi2_cdf",
]


class SingularUpsilon(RuntimeError):
    """The de-correlated Gram matrix is numerically singular (even after the
    ridge fallback), so no test statistic can be formed."""


class SingularUpsilonTilde(SingularUpsilon):
    """The one-step normalizer mean(z*_j z_j) is numerically zero, so no
    de-biased estimate exists; indicates a degenerate z*_j."""


class DegenerateDesign(ValueError):
    """The data admit no meaningful fit (e.g. a unit with no spikes at all)."""


@dataclass(frozen=True)
class NuisanceFit:
    """Stage-1/stage-2 nuisance estimates for one target row and target set.

    ``beta_hat`` is the full stage-1 coefficient vector over all p units.
    ``w0_hat[r]`` / ``w_hat[r]`` hold the stage-2 intercept and projection
    weights for ``target_cols[r]``, with ``w_hat`` aligned to unit indices
    (the entry at the target column itself is structurally zero).
    """

    target_row: int
    target_cols: tuple[int, ...]
    mu_hat: float
    beta_hat: np.ndarray
    lambda_hat: np.ndarray
    sigma2_hat: np.ndarray
    w0_hat: np.ndarray
    w_hat: np.ndarray
    method: str = "ds"
    step1_lambda: float = float("nan")
    step2_lambdas: tuple[float, ...] = ()

    @property
    def dof(self) -> int:
        return len(self.target_cols)

    def restrict(self, col: int) -> "NuisanceFit":
        """Single-column view of a multi-column fit (stage-1 parts shared)."""
        r = self.target_cols.index(col)
        return replace(
            self,
            target_cols=(col,),
            w0_hat=self.w0_hat[r : r + 1].copy(),
            w_hat=self.w_hat[r : r + 1].copy(),
            step2_lambdas=self.step2_lambdas[r : r + 1] if self.step2_lambdas else (),
        )


@dataclass(frozen=True)
class TestDiagnostics:
    """Numerical health of the Upsilon_hat inversion."""

    cond: float
    min_eig: float
    ridge_jitter: float


@dataclass(frozen=True)
class ScoreTestResult:
    S_hat: np.ndarray
    upsilon_hat: np.ndarray
    U_hat: float
    dof: int
    p_value: float
    reject: bool
    alpha: float
    diagnostics: TestDiagnostics


@dataclass(frozen=True)
class ConfidenceRegion:
    """Ellipsoidal confidence region
    {theta : T (b_hat - theta)' Upsilon_hat (b_hat - theta) <= quantile};
    for a single target column ``interval`` carries the equivalent closed
    form b_hat +- sqrt(quantile / (T * Upsilon_hat))."""

    b_hat: np.ndarray
    upsilon_hat: np.ndarray
    level: float
    n_steps: int
    region_radius: float
    interval: tuple[float, float] | None = None

    def contains(self, theta) -> bool:
        d = np.asarray(theta, dtype=np.float64) - self.b_hat
        return float(d @ self.upsilon_hat @ d) <= self.region_radius


def _events_and_design(spikes, kernel: KernelSpec) -> tuple[np.ndarray, np.ndarray]:
    ev = spikes.events if isinstance(spikes, SpikeData) else np.asarray(spikes)
    ev = np.asarray(ev, dtype=np.float64)
    if ev.ndim != 2:
        raise ValueError(f"spikes must be 2-dimensional, got shape {ev.shape}")
    return ev, integrated_process(ev, kernel)


def _check_targets(p: int, target_row: int, target_cols) -> tuple[int, ...]:
    if not 0 <= target_row < p:
        raise ValueError(f"target_row {target_row} out of range for p={p}")
    cols = tuple(int(c) for c in (target_cols if np.iterable(target_cols) else [target_cols]))
    if not cols:
        raise ValueError("target_cols must be non-empty")
    if len(set(cols)) != len(cols):
        raise ValueError(f"target_cols must be distinct, got {cols}")
    for c in cols:
        if not 0 <= c < p:
            raise ValueError(f"target column {c} out of range for p={p}")
    return cols


def _variance_profile(x, mu_hat, beta_hat, sigma_floor, sigma_without_intercept):
    lambda_hat = x @ beta_hat
    if not sigma_without_intercept:
        lambda_hat = lambda_hat + mu_hat
    return lambda_hat, residual_scale(lambda_hat, sigma_floor)


def fit_nuisance(
    spikes,
    kernel: KernelSpec,
    target_row: int,
    target_cols,
    *,
    cv: SeqCVSpec | None = None,
    sigma_floor: float = DEFAULT_SIGMA_FLOOR,
    sigma_without_intercept: bool = False,
) -> NuisanceFit:
    """Fit both nuisance stages with cross-validated lassos.

    Every lasso (the stage-1 regression and each stage-2 projection) gets a
    fresh sequential cross-validation on its own problem.  The variance
    profile is built from the stage-1 fitted intensity including the
    intercept; ``sigma_without_intercept`` drops the intercept from the
    fitted intensity (not from the regression) for sensitivity checks.
    """
    ev, x = _events_and_design(spikes, kernel)
    T, p = ev.shape
    cols = _check_targets(p, target_row, target_cols)
    cv = cv or SeqCVSpec()
    y = ev[:, target_row]

    ones = np.ones((T, 1))
    design1 = np.hstack([ones, x])
    pen1 = np.ones(p + 1, dtype=bool)
    pen1[0] = False
    fit1 = sequential_cv(y, design1, pen1, cv)
    mu_hat = float(fit1.coefficients[0])
    beta_hat = fit1.coefficients[1:].copy()
    lambda_hat, sigma2_hat = _variance_profile(
        x, mu_hat, beta_hat, sigma_floor, sigma_without_intercept
    )

    z = scale_design(x, np.sqrt(sigma2_hat))
    w0_hat = np.zeros(len(cols))
    w_hat = np.zeros((len(cols), p))
    step2_lambdas = []
    for r, j in enumerate(cols):
        others = [m for m in range(p) if m != j]
        design2 = np.hstack([ones, z[:, others]])
        pen2 = np.ones(len(others) + 1, dtype=bool)
        pen2[0] = False
        fit2 = sequential_cv(z[:, j], design2, pen2, cv)
        w0_hat[r] = fit2.coefficients[0]
        w_hat[r, others] = fit2.coefficients[1:]
        step2_lambdas.append(fit2.lambda_used)

    return NuisanceFit(
        target_row=target_row,
        target_cols=cols,
        mu_hat=mu_hat,
        beta_hat=beta_hat,
        lambda_hat=lambda_hat,
        sigma2_hat=sigma2_hat,
        w0_hat=w0_hat,
        w_hat=w_hat,
        method="ds",
        step1_lambda=fit1.lambda_used,
        step2_lambdas=tuple(step2_lambdas),
    )


def _ols(y: np.ndarray, design: np.ndarray) -> np.ndarray:
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    return coef


def oracle_fit_nuisance(
    spikes,
    kernel: KernelSpec,
    target_row: int,
    target_cols,
    support,
    *,
    sigma_floor: float = DEFAULT_SIGMA_FLOOR,
    sigma_without_intercept: bool = False,
) -> NuisanceFit:
    """Nuisance fit that is handed the true parent set of the target row.

    Stage 1 is unpenalized least squares of the target spikes on the true
    parents' histories; stage 2 projects each target column onto the true
    parents excluding that column, again by least squares.  No tuning is
    involved, which makes this the natural known-graph comparator.
    """
    ev, x = _events_and_design(spikes, kernel)
    T, p = ev.shape
    cols = _check_targets(p, target_row, target_cols)
    supp = sorted({int(s) for s in support})
    for s in supp:
        if not 0 <= s < p:
            raise ValueError(f"support column {s} out of range for p={p}")
    y = ev[:, target_row]

    ones = np.ones((T, 1))
    coef1 = _ols(y, np.hstack([ones, x[:, supp]]))
    mu_hat = float(coef1[0])
    beta_hat = np.zeros(p)
    beta_hat[supp] = coef1[1:]
    lambda_hat, sigma2_hat = _variance_profile(
        x, mu_hat, beta_hat, sigma_floor, sigma_without_intercept
    )

    z = scale_design(x, np.sqrt(sigma2_hat))
    w0_hat = np.zeros(len(cols))
    w_hat = np.zeros((len(cols), p))
    for r, j in enumerate(cols):
        others = [s for s in supp if s != j]
        coef2 = _ols(z[:, j], np.hstack([ones, z[:, others]]))
        w0_hat[r] = coef2[0]
        w_hat[r, others] = coef2[1:]

    return NuisanceFit(
        target_row=target_row,
        target_cols=cols,
        mu_hat=mu_hat,
        beta_hat=beta_hat,
        lambda_hat=lambda_hat,
        sigma2_hat=sigma2_hat,
        w0_hat=w0_hat,
        w_hat=w_hat,
        method="oracle",
    )


def _z_star(fit: NuisanceFit, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    sigma = np.sqrt(fit.sigma2_hat)
    z = scale_design(x, sigma)
    cols = list(fit.target_cols)
    z_star = z[:, cols] - fit.w0_hat[None, :] - z @ fit.w_hat.T
    return z, z_star


def _chol_with_jitter(ups: np.ndarray) -> tuple[np.ndarray, TestDiagnostics]:
    d = ups.shape[0]
    eigs = np.linalg.eigvalsh(ups)
    min_eig = float(eigs[0])
    max_eig = float(eigs[-1])
    cond = math.inf if min_eig <= 0 else max_eig / min_eig
    jitter = 0.0
    try:
        L = np.linalg.cholesky(ups)
    except np.linalg.LinAlgError:
        jitter = 1e-8 * float(np.trace(ups)) / d
        try:
            L = np.linalg.cholesky(ups + jitter * np.eye(d))
        except np.linalg.LinAlgError:
            raise SingularUpsilon(
                f"de-correlated Gram matrix is singular (min eigenvalue {min_eig:.3g}) "
                "even after ridge regularization"
            ) from None
    return L, TestDiagnostics(cond=cond, min_eig=min_eig, ridge_jitter=jitter)


def score_test(spikes, kernel: KernelSpec, fit: NuisanceFit, alpha: float = 0.05) -> ScoreTestResult:
    """De-correlated score test of H0: theta[target_row, j] = 0 for all j in
    the fit's target set.

    The stage-1 coefficients at the target columns are dropped (set to zero,
    no refit) when forming the residual, so under H0 the statistic needs no
    knowledge of the dropped entries.  Rejection is decided by
    U >= chi-square quantile (boundary rejects).
    """
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha!r}")
    ev, x = _events_and_design(spikes, kernel)
    y = ev[:, fit.target_row]
    T = y.shape[0]
    d = fit.dof

    beta_drop = fit.beta_hat.copy()
    beta_drop[list(fit.target_cols)] = 0.0
    eps = y - fit.mu_hat - x @ beta_drop
    scaled_resid = eps / np.sqrt(fit.sigma2_hat)

    _, z_star = _z_star(fit, x)
    S_hat = z_star.T @ scaled_resid / T
    upsilon_hat = z_star.T @ z_star / T

    L, diag = _chol_with_jitter(upsilon_hat)
    v = np.linalg.solve(L, S_hat)
    U_hat = float(T * v @ v)
    p_value = min(1.0, max(0.0, 1.0 - chi2_cdf(U_hat, d)))
    reject = U_hat >= chi2_quantile(1.0 - alpha, d)
    return ScoreTestResult(
        S_hat=S_hat,
        upsilon_hat=upsilon_hat,
        U_hat=U_hat,
        dof=d,
        p_value=p_value,
        reject=bool(reject),
        alpha=alpha,
        diagnostics=diag,
    )


def oracle_score_test(
    spikes,
    kernel: KernelSpec,
    target_row: int,
    target_cols,
    support,
    alpha: float = 0.05,
    *,
    sigma_floor: float = DEFAULT_SIGMA_FLOOR,
) -> ScoreTestResult:
    """Score test with both stages restricted to the true parent set
    (see :func:`oracle_fit_nuisance`)."""
    fit = oracle_fit_nuisance(
        spikes, kernel, target_row, target_cols, support, sigma_floor=sigma_floor
    )
    return score_test(spikes, kernel, fit, alpha)


def one_step_ci(spikes, kernel: KernelSpec, fit: NuisanceFit, alpha: float = 0.05) -> ConfidenceRegion:
    """One-step de-biased estimate and confidence region for the target
    entries of the interaction matrix.

    Each coordinate takes a single Newton step off the stage-1 value along
    the de-correlated score of the weighted squared loss:
    b_hat_j = beta_hat_j + S~_j / Upsilon~_j, where
    S~_j = mean(full stage-1 residual / sigma_hat * z*_j) (nothing dropped)
    and Upsilon~_j = mean(z*_j z_j).  Because the residual contains
    (beta_j - beta_hat_j) z_j, the correction cancels the shrinkage bias of
    the target coordinate to first order.  The region is the ellipsoid
    induced by Upsilon_hat = Z*'Z*/T at the chi-square radius; with one
    target column it collapses to the usual symmetric interval.
    """
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha!r}")
    ev, x = _events_and_design(spikes, kernel)
    y = ev[:, fit.target_row]
    T = y.shape[0]
    d = fit.dof

    eps_full = y - fit.mu_hat - x @ fit.beta_hat
    scaled_resid = eps_full / np.sqrt(fit.sigma2_hat)
    z, z_star = _z_star(fit, x)

    upsilon_hat = z_star.T @ z_star / T
    b_hat = np.empty(d)
    for r, j in enumerate(fit.target_cols):
        ups_tilde = float(z_star[:, r] @ z[:, j] / T)
        if abs(ups_tilde) <= 1e-12 * max(1.0, float(upsilon_hat[r, r])):
            raise SingularUpsilonTilde(
                f"one-step normalizer for column {j} is numerically zero ({ups_tilde:.3g})"
            )
        s_tilde = float(z_star[:, r] @ scaled_resid / T)
        b_hat[r] = fit.beta_hat[j] + s_tilde / ups_tilde

    quantile = chi2_quantile(1.0 - alpha, d)
    interval = None
    if d == 1:
        if upsilon_hat[0, 0] <= 0:
            raise SingularUpsilon("interval scale Upsilon_hat is not positive")
        half = math.sqrt(quantile / (T * upsilon_hat[0, 0]))
        interval = (float(b_hat[0] - half), float(b_hat[0] + half))
    return ConfidenceRegion(
        b_hat=b_hat,
        upsilon_hat=upsilon_hat,
        level=1.0 - alpha,
        n_steps=T,
        region_radius=quantile / T,
        interval=interval,
    )
