"""Network construction and spike-train simulation.

Simulation runs on the unit grid with Bernoulli thinning: at each step the
raw intensity is clipped into ``clip_bounds`` and a spike is drawn with the
clipped probability.  A burn-in prefix is simulated and discarded so the
recorded window starts near the stationary regime.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .model import (
    DesignState,
    HawkesModel,
    KernelSpec,
    SpikeData,
    check_assumptions,
    residual_scale,
)

__all__ = [
    "StructureSpec",
    "SimConfig",
    "make_structure",
    "simulate",
    "permute_trains",
    "STRUCTURE_KINDS",
]

STRUCTURE_KINDS = ("chain", "block", "random")


@dataclass(frozen=True)
class StructureSpec:
    """Recipe for a named network topology.

    ``beta_scale`` is the value written into every edge (negative values give
    inhibitory networks); ``mu_scale`` fills the baseline-rate vector.  Only
    ``random`` uses the seed.  ``block_size`` applies to ``block`` and
    ``density`` to ``random``.
    """

    kind: str
    p: int
    block_size: int = 2
    density: float = 0.02
    beta_scale: float = 0.3
    mu_scale: float = 0.2
    seed: int = 0
    allow_self_edges: bool = False

    def __post_init__(self):
        if self.kind not in STRUCTURE_KINDS:
            raise ValueError(f"unknown structure kind {self.kind!r}; known: {STRUCTURE_KINDS}")
        if self.p < 1:
            raise ValueError(f"p must be >= 1, got {self.p}")
        if not (0 < self.mu_scale < 1):
            raise ValueError(f"mu_scale must lie in (0, 1), got {self.mu_scale!r}")
        if not math.isfinite(self.beta_scale):
            raise ValueError(f"beta_scale must be finite, got {self.beta_scale!r}")
        if self.kind == "block":
            if self.block_size < 2:
                raise ValueError(f"block_size must be >= 2, got {self.block_size}")
            if self.p % self.block_size != 0:
                raise ValueError(
                    f"p={self.p} is not divisible by block_size={self.block_size}"
                )
        if self.kind == "random":
            if not (0 <= self.density <= 1):
                raise ValueError(f"density must lie in [0, 1], got {self.density!r}")
            if self.density * self.p * (self.p - 1) < 1:
                raise ValueError(
                    "random structure too sparse: expected edge count "
                    f"density * p * (p - 1) = {self.density * self.p * (self.p - 1):.3g} < 1"
                )


@dataclass(frozen=True)
class SimConfig:
    """Simulation window: ``T`` recorded steps after ``burn_in`` warmup steps."""

    T: int
    burn_in: int = 500
    seed: int = 0
    clip_bounds: tuple[float, float] = (0.001, 0.999)

    def __post_init__(self):
        if self.T < 1:
            raise ValueError(f"T must be >= 1, got {self.T}")
        if self.burn_in < 0:
            raise ValueError(f"burn_in must be >= 0, got {self.burn_in}")
        lo, hi = self.clip_bounds
        if not (0 < lo < hi < 1):
            raise ValueError(
                f"clip_bounds must satisfy 0 < lo < hi < 1, got {self.clip_bounds!r}"
            )


def make_structure(spec: StructureSpec, kernel: KernelSpec | None = None) -> HawkesModel:
    """Build the interaction matrix for a named topology.

    * ``chain``: each unit excites its successor, theta[i, i-1] = beta_scale
      for i = 2..p (1-based), nothing else.
    * ``block``: units are partitioned into consecutive blocks of
      ``block_size``; every ordered off-diagonal pair inside a block gets
      ``beta_scale``.
    * ``random``: every ordered off-diagonal pair carries an edge
      independently with probability ``density`` (self-edges too when
      ``allow_self_edges`` is set); deterministic in ``seed``.
    """
    p = spec.p
    theta = np.zeros((p, p))
    if spec.kind == "chain":
        for i in range(1, p):
            theta[i, i - 1] = spec.beta_scale
    elif spec.kind == "block":
        bs = spec.block_size
        for start in range(0, p, bs):
            blk = np.arange(start, start + bs)
            for i in blk:
                for j in blk:
                    if i != j:
                        theta[i, j] = spec.beta_scale
    else:
        rng = np.random.default_rng(spec.seed)
        mask = rng.random((p, p)) < spec.density
        if not spec.allow_self_edges:
            np.fill_diagonal(mask, False)
        theta[mask] = spec.beta_scale
    mu = np.full(p, spec.mu_scale)
    return HawkesModel(p=p, mu=mu, theta=theta, kernel=kernel or KernelSpec())


def simulate(model: HawkesModel, config: SimConfig) -> tuple[SpikeData, DesignState]:
    """Draw a spike matrix from ``model`` and record its design state.

    Uniform draws are pre-generated as one (burn_in + T, p) matrix so the
    realization is a pure function of ``config.seed``.  The returned
    :class:`DesignState` covers the recorded window only: ``lam`` holds raw
    intensities and ``clip_count`` counts recorded (t, i) entries whose raw
    intensity left ``clip_bounds`` (clipping during burn-in is not included,
    so the count can be re-derived from ``lam``).  Note the recorded ``x``
    carries burn-in history in its first row whenever ``burn_in > 0``;
    :func:`hawkesnet.model.integrated_process` applied to the recorded
    spikes starts from an empty history instead, which is the estimation
    pipeline's view of the data.
    """
    report = check_assumptions(model)
    if report.gamma_omega >= 1.0:
        warnings.warn(
            f"model is not stationarity-safe: gamma_omega = {report.gamma_omega:.4g} >= 1; "
            "simulated intensities may saturate the clip bounds",
            RuntimeWarning,
            stacklevel=2,
        )
    lo, hi = config.clip_bounds
    total = config.burn_in + config.T
    rng = np.random.default_rng(config.seed)
    uniforms = rng.random((total, model.p))
    events, x, lam = kernels.simulate_path(
        np.ascontiguousarray(model.mu),
        np.ascontiguousarray(model.theta),
        model.kernel.decay_factor,
        uniforms,
        lo,
        hi,
    )
    ev_rec = events[config.burn_in :]
    x_rec = x[config.burn_in :]
    lam_rec = lam[config.burn_in :]
    clip_count = int(np.count_nonzero((lam_rec < lo) | (lam_rec > hi)))
    state = DesignState(
        x=x_rec,
        lam=lam_rec,
        sigma2=residual_scale(lam_rec),
        clip_count=clip_count,
    )
    return SpikeData(events=ev_rec, origin_label="simulated"), state


def permute_trains(spikes: SpikeData, seed: int = 0) -> SpikeData:
    """Independently permute each unit's spike train in time.

    Column sums are preserved exactly while all temporal and cross-unit
    dependence is destroyed, which makes the result a null reference for the
    edge tests.  Deterministic in ``seed``.
    """
    rng = np.random.default_rng(seed)
    ev = spikes.events.copy()
    for j in range(spikes.p):
        ev[:, j] = ev[rng.permutation(spikes.n_steps), j]
    return SpikeData(events=ev, origin_label=f"{spikes.origin_label}:permuted")
