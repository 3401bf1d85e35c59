"""Inference-layer tests.

Structural identities are checked with hand-built nuisance fits (the
dataclass is plain data, so a test can realize exact corner cases like a
zero residual that the estimation path only approaches).  Monte-Carlo
checks of accuracy use modest replicate counts with majority thresholds.
"""

import math

import numpy as np
import pytest

from hawkesnet import (
    ConfidenceRegion,
    KernelSpec,
    NuisanceFit,
    SimConfig,
    SingularUpsilon,
    SingularUpsilonTilde,
    SpikeData,
    StructureSpec,
    fit_nuisance,
    integrated_process,
    make_structure,
    one_step_ci,
    oracle_fit_nuisance,
    oracle_score_test,
    score_test,
    simulate,
)

KERNEL = KernelSpec(decay_rate=1.0)


def chain_spikes(T=1500, p=6, beta=0.3, seed=0):
    model = make_structure(StructureSpec(kind="chain", p=p, beta_scale=beta))
    spikes, _ = simulate(model, SimConfig(T=T, burn_in=300, seed=seed))
    return model, spikes


def hand_fit(events, target_row, target_col, *, mu_hat, beta_hat, w0, w):
    """NuisanceFit assembled directly from supplied stage values."""
    ev = np.asarray(events, dtype=np.float64)
    x = integrated_process(ev, KERNEL)
    p = ev.shape[1]
    lam = mu_hat + x @ beta_hat
    sigma2 = np.maximum(1e-4, np.clip(lam, 0, 1) * (1 - np.clip(lam, 0, 1)))
    w_row = np.zeros((1, p))
    for j, val in w.items():
        w_row[0, j] = val
    return NuisanceFit(
        target_row=target_row,
        target_cols=(target_col,),
        mu_hat=mu_hat,
        beta_hat=np.asarray(beta_hat, dtype=np.float64),
        lambda_hat=lam,
        sigma2_hat=sigma2,
        w0_hat=np.array([w0]),
        w_hat=w_row,
    )


class TestFitNuisance:
    def test_shapes_and_structural_zero(self):
        _, spikes = chain_spikes(T=600)
        fit = fit_nuisance(spikes, KERNEL, target_row=1, target_cols=(0, 3))
        p = spikes.p
        assert fit.beta_hat.shape == (p,)
        assert fit.w0_hat.shape == (2,)
        assert fit.w_hat.shape == (2, p)
        assert fit.w_hat[0, 0] == 0.0  # projection never uses its own column
        assert fit.w_hat[1, 3] == 0.0
        assert fit.sigma2_hat.min() > 0 and fit.sigma2_hat.max() <= 0.25
        assert math.isfinite(fit.step1_lambda)
        assert len(fit.step2_lambdas) == 2
        assert fit.dof == 2

    def test_scalar_target_cols_normalized(self):
        _, spikes = chain_spikes(T=600)
        fit = fit_nuisance(spikes, KERNEL, target_row=1, target_cols=0)
        assert fit.target_cols == (0,)

    def test_restrict_matches_fresh_single_column_fit(self):
        # Stage 2 runs independently per column, so slicing a multi-column
        # fit must reproduce the dedicated single-column fit exactly.
        _, spikes = chain_spikes(T=600)
        multi = fit_nuisance(spikes, KERNEL, target_row=2, target_cols=(1, 4))
        single = fit_nuisance(spikes, KERNEL, target_row=2, target_cols=(4,))
        sliced = multi.restrict(4)
        assert sliced.target_cols == (4,)
        assert np.array_equal(sliced.w_hat, single.w_hat)
        assert np.array_equal(sliced.w0_hat, single.w0_hat)
        assert np.array_equal(sliced.beta_hat, single.beta_hat)
        assert sliced.step2_lambdas == single.step2_lambdas

    def test_chain_stage1_recovers_parent(self):
        # The lasso should place clearly more mass on the true parent of
        # unit 1 (unit 0) than on any non-parent.
        _, spikes = chain_spikes(T=2000, seed=3)
        fit = fit_nuisance(spikes, KERNEL, target_row=1, target_cols=(0,))
        others = np.delete(np.abs(fit.beta_hat), 0)
        assert fit.beta_hat[0] > 0.1
        assert fit.beta_hat[0] > others.max()

    def test_sigma_without_intercept_changes_profile(self):
        _, spikes = chain_spikes(T=600)
        with_mu = fit_nuisance(spikes, KERNEL, 1, (0,))
        without_mu = fit_nuisance(spikes, KERNEL, 1, (0,), sigma_without_intercept=True)
        assert not np.array_equal(with_mu.sigma2_hat, without_mu.sigma2_hat)

    def test_target_validation(self):
        _, spikes = chain_spikes(T=400)
        with pytest.raises(ValueError):
            fit_nuisance(spikes, KERNEL, target_row=99, target_cols=(0,))
        with pytest.raises(ValueError):
            fit_nuisance(spikes, KERNEL, target_row=0, target_cols=())
        with pytest.raises(ValueError):
            fit_nuisance(spikes, KERNEL, target_row=0, target_cols=(1, 1))
        with pytest.raises(ValueError):
            fit_nuisance(spikes, KERNEL, target_row=0, target_cols=(99,))


class TestScoreTest:
    def test_zero_residual_gives_zero_statistic(self):
        # Target row constant one with mu_hat = 1 makes the dropped-residual
        # identically zero: U must be exactly 0 with p-value 1.
        rng = np.random.default_rng(0)
        T, p = 300, 2
        ev = np.ones((T, p), dtype=np.int8)
        ev[:, 1] = (rng.random(T) < 0.4).astype(np.int8)
        x = integrated_process(ev, KERNEL)
        sigma = math.sqrt(0.25)
        z1 = x[:, 1] / sigma
        fit = hand_fit(
            ev, 0, 1, mu_hat=1.0, beta_hat=np.zeros(p), w0=float(z1.mean()), w={}
        )
        fit = NuisanceFit(
            **{
                **fit.__dict__,
                "sigma2_hat": np.full(T, 0.25),
                "lambda_hat": np.ones(T),
            }
        )
        res = score_test(ev, KERNEL, fit)
        assert res.U_hat == 0.0
        assert res.p_value == 1.0
        assert not res.reject

    def test_statistic_matches_quadratic_form(self):
        _, spikes = chain_spikes(T=800, seed=1)
        fit = fit_nuisance(spikes, KERNEL, 1, (0, 2))
        res = score_test(spikes, KERNEL, fit)
        # U = T S' Upsilon^{-1} S recomputed without the Cholesky plumbing
        u = spikes.n_steps * res.S_hat @ np.linalg.solve(res.upsilon_hat, res.S_hat)
        assert res.U_hat == pytest.approx(float(u), rel=1e-10)

    def test_independent_of_stage1_value_at_target(self):
        # The tested coordinates are dropped from the residual, so the
        # statistic cannot depend on their stage-1 values.
        _, spikes = chain_spikes(T=800, seed=2)
        fit = fit_nuisance(spikes, KERNEL, 1, (0,))
        res1 = score_test(spikes, KERNEL, fit)
        bumped = NuisanceFit(
            **{**fit.__dict__, "beta_hat": fit.beta_hat + np.eye(spikes.p)[0] * 7.0}
        )
        res2 = score_test(spikes, KERNEL, bumped)
        assert res2.U_hat == pytest.approx(res1.U_hat, rel=1e-12)

    def test_true_edge_rejects_null_edge_does_not_mostly(self):
        rejections_true, rejections_null = 0, 0
        for seed in range(10):
            _, spikes = chain_spikes(T=2000, seed=seed)
            fit_t = fit_nuisance(spikes, KERNEL, 1, (0,))
            fit_n = fit_nuisance(spikes, KERNEL, 0, (3,))
            rejections_true += score_test(spikes, KERNEL, fit_t).reject
            rejections_null += score_test(spikes, KERNEL, fit_n).reject
        assert rejections_true >= 9
        assert rejections_null <= 2

    def test_reject_consistent_with_p_value(self):
        _, spikes = chain_spikes(T=800, seed=4)
        for row, col in [(1, 0), (0, 3)]:
            fit = fit_nuisance(spikes, KERNEL, row, (col,))
            for alpha in [0.01, 0.05, 0.2]:
                res = score_test(spikes, KERNEL, fit, alpha=alpha)
                if res.p_value < alpha - 1e-12:
                    assert res.reject
                if res.p_value > alpha + 1e-12:
                    assert not res.reject

    def test_upsilon_is_psd_and_diagnostics_populated(self):
        _, spikes = chain_spikes(T=800, seed=5)
        fit = fit_nuisance(spikes, KERNEL, 2, (0, 1, 4))
        res = score_test(spikes, KERNEL, fit)
        eigs = np.linalg.eigvalsh(res.upsilon_hat)
        assert eigs.min() >= -1e-12
        assert res.diagnostics.cond >= 1.0
        assert res.diagnostics.ridge_jitter == 0.0

    def test_duplicate_target_columns_flagged_in_diagnostics(self):
        # Unit 5 mirrors unit 0 exactly, so the two de-correlated columns
        # are linearly dependent: whether the Cholesky happens to limp
        # through on rounding or needs the ridge, the diagnostics must
        # expose the degeneracy.
        rng = np.random.default_rng(6)
        T = 400
        base = (rng.random((T, 5)) < 0.25).astype(np.int8)
        ev = np.column_stack([base, base[:, 0]])
        fit = hand_fit(ev, 1, 0, mu_hat=0.2, beta_hat=np.zeros(6), w0=0.0, w={})
        dup = NuisanceFit(
            **{
                **fit.__dict__,
                "target_cols": (0, 5),
                "w0_hat": np.zeros(2),
                "w_hat": np.zeros((2, 6)),
            }
        )
        res = score_test(ev, KERNEL, dup)
        assert res.diagnostics.min_eig <= 1e-12
        assert res.diagnostics.cond > 1e12

    def test_ridge_jitter_rescues_exact_singularity(self):
        # A Gram matrix whose trailing Cholesky pivot is exactly zero makes
        # the plain factorization fail; the ridge retry must succeed and
        # report the jitter it used.
        from hawkesnet.inference import _chol_with_jitter

        ups = np.array([[1.0, 1.0], [1.0, 1.0]])
        L, diag = _chol_with_jitter(ups)
        assert diag.ridge_jitter > 0.0
        recon = L @ L.T
        assert np.allclose(recon, ups + diag.ridge_jitter * np.eye(2), atol=1e-12)

    def test_all_zero_column_raises_singular(self):
        # A never-spiking target column yields an identically zero
        # de-correlated column; no ridge can rescue a zero-trace Gram matrix.
        rng = np.random.default_rng(7)
        T = 300
        ev = np.column_stack(
            [(rng.random(T) < 0.3).astype(np.int8), np.zeros(T, dtype=np.int8)]
        )
        fit = hand_fit(ev, 0, 1, mu_hat=0.2, beta_hat=np.zeros(2), w0=0.0, w={})
        with pytest.raises(SingularUpsilon):
            score_test(ev, KERNEL, fit)

    def test_oracle_orders_magnitude_with_lasso_version(self):
        model, spikes = chain_spikes(T=2000, seed=8)
        support = list(np.flatnonzero(model.theta[1]))
        res_o = oracle_score_test(spikes, KERNEL, 1, (0,), support)
        fit = fit_nuisance(spikes, KERNEL, 1, (0,))
        res_d = score_test(spikes, KERNEL, fit)
        assert res_o.reject and res_d.reject

    def test_alpha_validation(self):
        _, spikes = chain_spikes(T=400)
        fit = fit_nuisance(spikes, KERNEL, 1, (0,))
        with pytest.raises(ValueError):
            score_test(spikes, KERNEL, fit, alpha=0.0)
        with pytest.raises(ValueError):
            score_test(spikes, KERNEL, fit, alpha=1.0)


class TestOracleFit:
    def test_stage1_is_least_squares_on_support(self):
        model, spikes = chain_spikes(T=1000, seed=9)
        support = [0]  # true parent of unit 1
        fit = oracle_fit_nuisance(spikes, KERNEL, 1, (0,), support)
        x = integrated_process(spikes.events, KERNEL)
        design = np.column_stack([np.ones(spikes.n_steps), x[:, 0]])
        coef, *_ = np.linalg.lstsq(design, spikes.events[:, 1].astype(float), rcond=None)
        assert fit.mu_hat == pytest.approx(coef[0], abs=1e-10)
        assert fit.beta_hat[0] == pytest.approx(coef[1], abs=1e-10)
        assert np.all(fit.beta_hat[1:] == 0.0)
        assert fit.method == "oracle"

    def test_support_validation(self):
        _, spikes = chain_spikes(T=400)
        with pytest.raises(ValueError):
            oracle_fit_nuisance(spikes, KERNEL, 1, (0,), support=[99])


class TestOneStepCi:
    def test_zero_score_returns_stage1_value(self):
        # Orthogonalize nothing, make the full residual orthogonal to z*:
        # the hand-built zero-residual fit has S~ = 0, so b_hat == beta_hat.
        rng = np.random.default_rng(10)
        T, p = 300, 2
        ev = np.ones((T, p), dtype=np.int8)
        ev[:, 1] = (rng.random(T) < 0.4).astype(np.int8)
        x = integrated_process(ev, KERNEL)
        z1 = x[:, 1] / math.sqrt(0.25)
        # y == 1 == mu_hat with beta_hat = 0: the full residual is exactly 0
        fit = NuisanceFit(
            target_row=0,
            target_cols=(1,),
            mu_hat=1.0,
            beta_hat=np.zeros(p),
            lambda_hat=np.ones(T),
            sigma2_hat=np.full(T, 0.25),
            w0_hat=np.array([float(z1.mean())]),
            w_hat=np.zeros((1, p)),
        )
        region = one_step_ci(ev, KERNEL, fit)
        assert region.b_hat[0] == 0.0
        lo, hi = region.interval
        assert lo < 0.0 < hi

    def test_invariant_to_stage1_value_at_target(self):
        # The Newton step must exactly cancel any shift of the stage-1 value
        # at the target coordinate: the linear model makes the first-order
        # correction exact, so b_hat stays put when beta_hat[j] is bumped.
        _, spikes = chain_spikes(T=1000, seed=11)
        fit = fit_nuisance(spikes, KERNEL, 1, (0,))
        base = one_step_ci(spikes, KERNEL, fit)
        for bump in [-0.5, 0.3, 2.0]:
            shifted = NuisanceFit(
                **{**fit.__dict__, "beta_hat": fit.beta_hat + np.eye(spikes.p)[0] * bump}
            )
            moved = one_step_ci(spikes, KERNEL, shifted)
            assert moved.b_hat[0] == pytest.approx(base.b_hat[0], abs=1e-10)
            assert moved.interval == pytest.approx(base.interval, abs=1e-10)

    def test_interval_identity_and_contains(self):
        _, spikes = chain_spikes(T=1000, seed=12)
        fit = fit_nuisance(spikes, KERNEL, 1, (0,))
        region = one_step_ci(spikes, KERNEL, fit, alpha=0.05)
        lo, hi = region.interval
        half = math.sqrt(region.region_radius / region.upsilon_hat[0, 0])
        assert hi - lo == pytest.approx(2 * half, rel=1e-12)
        assert region.b_hat[0] == pytest.approx((lo + hi) / 2, abs=1e-12)
        # contains() agrees with the interval on both sides of each endpoint
        for theta, inside in [
            ((lo + hi) / 2, True),
            (lo + 1e-9 * (hi - lo), True),
            (hi + (hi - lo), False),
            (lo - (hi - lo), False),
        ]:
            assert region.contains([theta]) is inside

    def test_level_monotonicity(self):
        _, spikes = chain_spikes(T=1000, seed=13)
        fit = fit_nuisance(spikes, KERNEL, 1, (0,))
        wide = one_step_ci(spikes, KERNEL, fit, alpha=0.01)
        narrow = one_step_ci(spikes, KERNEL, fit, alpha=0.10)
        assert wide.interval[0] < narrow.interval[0]
        assert wide.interval[1] > narrow.interval[1]
        assert wide.level == 0.99 and narrow.level == 0.90

    def test_estimator_concentrates_on_truth(self):
        hits = 0
        for seed in range(25):
            _, spikes = chain_spikes(T=1500, seed=100 + seed)
            fit = fit_nuisance(spikes, KERNEL, 1, (0,))
            region = one_step_ci(spikes, KERNEL, fit)
            hits += abs(region.b_hat[0] - 0.3) <= 0.15
        assert hits >= 21

    def test_orthogonal_normalizer_raises(self):
        # Choose w so that z* is exactly orthogonal to the target column:
        # the one-step normalizer vanishes and the estimator must refuse.
        rng = np.random.default_rng(14)
        T, p = 400, 2
        ev = (rng.random((T, p)) < 0.3).astype(np.int8)
        x = integrated_process(ev, KERNEL)
        sigma2 = np.full(T, 0.25)
        z = x / math.sqrt(0.25)
        denom = float(z[:, 1] @ z[:, 0])
        w01 = float(z[:, 0] @ z[:, 0]) / denom
        fit = NuisanceFit(
            target_row=0,
            target_cols=(0,),
            mu_hat=0.5,
            beta_hat=np.zeros(p),
            lambda_hat=np.full(T, 0.5),
            sigma2_hat=sigma2,
            w0_hat=np.array([0.0]),
            w_hat=np.array([[0.0, w01]]),
        )
        with pytest.raises(SingularUpsilonTilde):
            one_step_ci(ev, KERNEL, fit)
        # the subclass is catchable as the base singularity error
        assert issubclass(SingularUpsilonTilde, SingularUpsilon)

    def test_multi_column_region(self):
        _, spikes = chain_spikes(T=800, seed=15)
        fit = fit_nuisance(spikes, KERNEL, 2, (0, 1))
        region = one_step_ci(spikes, KERNEL, fit)
        assert region.interval is None
        assert region.b_hat.shape == (2,)
        assert region.contains(region.b_hat)
        assert isinstance(region, ConfidenceRegion)

    def test_alpha_validation(self):
        _, spikes = chain_spikes(T=400)
        fit = fit_nuisance(spikes, KERNEL, 1, (0,))
        with pytest.raises(ValueError):
            one_step_ci(spikes, KERNEL, fit, alpha=0.0)


class TestSpikeDataInterop:
    def test_accepts_spikedata_and_arrays(self):
        _, spikes = chain_spikes(T=500, seed=16)
        fit_sd = fit_nuisance(spikes, KERNEL, 1, (0,))
        fit_arr = fit_nuisance(spikes.events, KERNEL, 1, (0,))
        assert np.array_equal(fit_sd.beta_hat, fit_arr.beta_hat)
        res_sd = score_test(spikes, KERNEL, fit_sd)
        res_arr = score_test(spikes.events, KERNEL, fit_arr)
        assert res_sd.U_hat == res_arr.U_hat
