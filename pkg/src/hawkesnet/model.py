"""Core model types for discrete-time binary-spike Hawkes networks.

The process lives on the unit time grid.  Each unit i spikes at time t with
probability

    lambda_i(t) = mu_i + sum_j theta_ij * x_j(t),

where x_j(t) is the exponentially discounted history of unit j's spikes up to
(but excluding) t.  Because spikes are binary, the conditional variance of a
spike indicator is lambda * (1 - lambda), which :func:`residual_scale` turns
into a floored variance profile for use as regression weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels

__all__ = [
    "KernelSpec",
    "HawkesModel",
    "SpikeData",
    "DesignState",
    "AssumptionReport",
    "integrated_process",
    "intensity",
    "residual_scale",
    "check_assumptions",
    "DEFAULT_SIGMA_FLOOR",
]

DEFAULT_SIGMA_FLOOR = 1e-4

_KERNEL_FAMILIES = ("exponential",)


@dataclass(frozen=True)
class KernelSpec:
    """Transfer kernel description.

    Only the exponential family kappa(t) = exp(-decay_rate * t) is
    implemented; the enum-style ``family`` field exists so file formats and
    configs stay stable if other families are added.  ``truncation_tol`` is
    the history weight below which non-recursive evaluation paths may drop
    contributions; the recursion itself is exact and ignores it.
    """

    family: str = "exponential"
    decay_rate: float = 1.0
    truncation_tol: float = 1e-12

    def __post_init__(self):
        if self.family not in _KERNEL_FAMILIES:
            raise ValueError(
                f"unknown kernel family {self.family!r}; known: {_KERNEL_FAMILIES}"
            )
        if not (math.isfinite(self.decay_rate) and self.decay_rate > 0):
            raise ValueError(f"decay_rate must be finite and > 0, got {self.decay_rate!r}")
        if not (math.isfinite(self.truncation_tol) and self.truncation_tol > 0):
            raise ValueError(
                f"truncation_tol must be finite and > 0, got {self.truncation_tol!r}"
            )

    @property
    def decay_factor(self) -> float:
        """Per-step multiplier exp(-decay_rate) on the unit grid."""
        return math.exp(-self.decay_rate)

    def lag_weights(self, max_lag: int | None = None) -> np.ndarray:
        """Kernel weights exp(-decay_rate * k) for k = 1, 2, ... until they
        fall below ``truncation_tol`` (or ``max_lag`` caps them first)."""
        a = self.decay_factor
        n = int(math.ceil(math.log(self.truncation_tol) / math.log(a))) if a < 1 else 1
        n = max(n, 1)
        if max_lag is not None:
            n = min(n, int(max_lag))
        return a ** np.arange(1, n + 1)


def _as_matrix(arr, name: str) -> np.ndarray:
    out = np.asarray(arr, dtype=np.float64)
    if out.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {out.shape}")
    return out


@dataclass(frozen=True)
class HawkesModel:
    """Network model: baseline rates ``mu`` and interaction matrix ``theta``.

    ``theta[i, j]`` is the effect of unit j's integrated history on unit i's
    intensity; positive entries are excitatory, negative inhibitory.
    """

    p: int
    mu: np.ndarray
    theta: np.ndarray
    kernel: KernelSpec = field(default_factory=KernelSpec)

    def __post_init__(self):
        if self.p < 1:
            raise ValueError(f"p must be >= 1, got {self.p}")
        mu = np.asarray(self.mu, dtype=np.float64)
        if mu.shape != (self.p,):
            raise ValueError(f"mu must have shape ({self.p},), got {mu.shape}")
        if not np.all(np.isfinite(mu)) or np.any(mu <= 0) or np.any(mu >= 1):
            raise ValueError("all baseline rates mu must lie strictly in (0, 1)")
        theta = _as_matrix(self.theta, "theta")
        if theta.shape != (self.p, self.p):
            raise ValueError(
                f"theta must have shape ({self.p}, {self.p}), got {theta.shape}"
            )
        if not np.all(np.isfinite(theta)):
            raise ValueError("theta must be finite")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "theta", theta)


@dataclass(frozen=True)
class SpikeData:
    """Binary spike matrix, one row per time step, one column per unit."""

    events: np.ndarray
    origin_label: str = "unknown"

    def __post_init__(self):
        ev = np.asarray(self.events)
        if ev.ndim != 2:
            raise ValueError(f"events must be 2-dimensional, got shape {ev.shape}")
        if ev.shape[0] < 1 or ev.shape[1] < 1:
            raise ValueError(f"events must be non-empty, got shape {ev.shape}")
        if not np.isin(ev, (0, 1)).all():
            raise ValueError("events must contain only 0/1 values")
        object.__setattr__(self, "events", ev.astype(np.int8))

    @property
    def n_steps(self) -> int:
        return self.events.shape[0]

    @property
    def p(self) -> int:
        return self.events.shape[1]


@dataclass(frozen=True)
class DesignState:
    """Per-step design quantities recorded alongside a spike matrix.

    ``x`` is the integrated history, ``lam`` the raw (unclipped) intensity,
    ``sigma2`` the floored conditional variance, and ``clip_count`` the exact
    number of (t, i) entries of ``lam`` that fell outside the clip bounds
    used when the spikes were drawn.
    """

    x: np.ndarray
    lam: np.ndarray
    sigma2: np.ndarray
    clip_count: int = 0

    def __post_init__(self):
        x = _as_matrix(self.x, "x")
        lam = _as_matrix(self.lam, "lam")
        sigma2 = _as_matrix(self.sigma2, "sigma2")
        if not (x.shape == lam.shape == sigma2.shape):
            raise ValueError(
                f"x, lam, sigma2 must share a shape, got {x.shape}, {lam.shape}, {sigma2.shape}"
            )
        if np.any(sigma2 <= 0) or np.any(sigma2 > 0.25 + 1e-12):
            raise ValueError("sigma2 entries must lie in (0, 0.25]")
        if self.clip_count < 0:
            raise ValueError("clip_count must be >= 0")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "sigma2", sigma2)


@dataclass(frozen=True)
class AssumptionReport:
    """Diagnostics for the regularity conditions the theory rests on.

    * ``stationarity``: largest singular value of the absolute-interaction
      mass matrix omega is < 1.
    * ``row_sums``: every row sum of omega is < 1 (column sums only need to
      be finite, which they always are for a finite matrix; ``rho_c`` is
      reported for inspection).
    * ``intensity_range``: intensities stay inside (0, 1), checked
      empirically on a probe spike history when one is supplied.
    * ``kernel_validity``: the kernel is positive with finite integral.
    """

    omega: np.ndarray
    gamma_omega: float
    rho_r: float
    rho_c: float
    intensity_bounds: tuple[float, float] | None
    pass_flags: dict[str, bool]

    @property
    def all_passed(self) -> bool:
        return all(self.pass_flags.values())


def integrated_process(spikes, kernel: KernelSpec) -> np.ndarray:
    """Integrated spike history x(t), exact for the exponential kernel.

    x_j(t) = sum_{s < t} exp(-decay_rate * (t - s)) * Y_j(s), computed by the
    one-step recursion x_j(t+1) = exp(-decay_rate) * (x_j(t) + Y_j(t)) with
    x_j(1) = 0.  Accepts a :class:`SpikeData` or a (T, p) array; returns a
    (T, p) float64 matrix whose first row is zero.
    """
    ev = spikes.events if isinstance(spikes, SpikeData) else np.asarray(spikes)
    ev = _as_matrix(ev, "spikes")
    return kernels.integrated_history(
        np.ascontiguousarray(ev, dtype=np.float64), kernel.decay_factor
    )


def intensity(model: HawkesModel, x) -> np.ndarray:
    """Raw linear-predictor intensity mu + theta x, without any clipping.

    ``x`` may be a single history vector (p,) or a stacked matrix (T, p);
    the result matches that shape, with entry i (or column i) equal to
    mu_i + sum_j theta_ij x_j.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        if x.shape != (model.p,):
            raise ValueError(f"x must have shape ({model.p},), got {x.shape}")
        return model.mu + model.theta @ x
    if x.ndim == 2:
        if x.shape[1] != model.p:
            raise ValueError(f"x must have {model.p} columns, got {x.shape[1]}")
        return model.mu + x @ model.theta.T
    raise ValueError(f"x must be 1- or 2-dimensional, got shape {x.shape}")


def residual_scale(lam, floor: float = DEFAULT_SIGMA_FLOOR) -> np.ndarray:
    """Floored Bernoulli variance profile max(floor, q * (1 - q)) with
    q = clip(lam, 0, 1).

    Values always land in [floor, 0.25]; the floor keeps downstream
    weightings finite when an estimated intensity degenerates to 0 or 1.
    """
    if not (0 < floor <= 0.25):
        raise ValueError(f"floor must lie in (0, 0.25], got {floor!r}")
    q = np.clip(np.asarray(lam, dtype=np.float64), 0.0, 1.0)
    return np.maximum(floor, q * (1.0 - q))


def check_assumptions(
    model: HawkesModel, probe: SpikeData | None = None
) -> AssumptionReport:
    """Evaluate the regularity diagnostics for ``model``.

    The interaction-mass matrix has the closed form
    omega_ij = |theta_ij| / decay_rate for the exponential kernel (the
    integral of |theta_ij| * kappa(t) over t >= 0).  This reports, never
    raises: a non-stationary model yields ``pass_flags`` with false entries.
    When ``probe`` is given, the intensity range is evaluated on intensities
    the model implies along that spike history.
    """
    omega = np.abs(model.theta) / model.kernel.decay_rate
    gamma_omega = float(np.linalg.svd(omega, compute_uv=False)[0]) if model.p else 0.0
    rho_r = float(omega.sum(axis=1).max())
    rho_c = float(omega.sum(axis=0).max())
    if probe is not None:
        lam = intensity(model, integrated_process(probe, model.kernel))
        bounds = (float(lam.min()), float(lam.max()))
        intensity_ok = 0.0 < bounds[0] and bounds[1] < 1.0
    else:
        bounds = None
        intensity_ok = bool(np.all(model.mu > 0) and np.all(model.mu < 1))
    pass_flags = {
        "stationarity": bool(gamma_omega < 1.0),
        "row_sums": bool(rho_r < 1.0),
        "intensity_range": bool(intensity_ok),
        "kernel_validity": model.kernel.decay_rate > 0,
    }
    return AssumptionReport(
        omega=omega,
        gamma_omega=gamma_omega,
        rho_r=rho_r,
        rho_c=rho_c,
        intensity_bounds=bounds,
        pass_flags=pass_flags,
    )
