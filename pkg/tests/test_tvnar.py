import numpy as np
import pytest

from dcnar.exceptions import ExtrapolationWarning
from dcnar.panel import build_lag_design
from dcnar.synth import GeneratorSpec, PathSpec, generate_panel
from dcnar.tvnar import (KernelSpec, coefficient_matrix, fit_tvnar,
                         forecast_ensemble, local_estimate, stability_report)


def constant_system_panel(lam=0.5, adjacency=None, n=2, c=10, t=80, seed=0,
                          noise=1.0):
    adjacency = np.zeros((n, n)) if adjacency is None else adjacency
    paths = (tuple(PathSpec("constant", a=lam) for _ in range(n)),)
    spec = GeneratorSpec(adjacency=adjacency, paths=paths, noise_std=noise,
                         n_countries=c, t_steps=t, burn_in=150, seed=seed)
    return generate_panel(spec)


class TestLocalEstimate:
    def test_recovers_constant_coefficient(self):
        adj = np.zeros((2, 2))
        adj[1, 0] = 0.6
        panel, truth = constant_system_panel(adjacency=adj, c=40, t=100, seed=1)
        design = build_lag_design(panel, 1)
        kernel = KernelSpec(bandwidth=0.2)
        for tau_star in (0.3, 0.5, 0.7):
            lam = local_estimate(design, truth.adjacency, tau_star, kernel)
            assert np.all(np.abs(lam[0] - 0.5) < 0.05)

    def test_infinite_bandwidth_equals_global_least_squares(self):
        adj = np.zeros((3, 3))
        adj[2, 0] = 0.4
        panel, truth = constant_system_panel(adjacency=adj, n=3, c=5, t=60,
                                             seed=2)
        design = build_lag_design(panel, 1)
        lam = local_estimate(design, truth.adjacency, 0.5,
                             KernelSpec(bandwidth=1e9), ridge=0.0)
        mask = truth.adjacency + np.eye(3)
        rows, n = design.n_rows, 3
        z = np.zeros((rows * n, n))
        y = np.zeros(rows * n)
        for r in range(rows):
            for i in range(n):
                z[r * n + i] = mask[i] * design.lags[r, 0]
                y[r * n + i] = design.targets[r, i]
        oracle, *_ = np.linalg.lstsq(z, y, rcond=None)
        assert np.max(np.abs(lam[0] - oracle)) < 1e-8

    def test_zero_adjacency_decouples_into_univariate_fits(self):
        panel, truth = constant_system_panel(n=3, c=4, t=50, seed=3)
        design = build_lag_design(panel, 1)
        kernel = KernelSpec(bandwidth=0.15)
        ridge = 1e-6
        lam = local_estimate(design, np.zeros((3, 3)), 0.4, kernel, ridge=ridge)
        w = kernel.weights(design.tau, 0.4)
        for j in range(3):
            x = design.lags[:, 0, j]
            y = design.targets[:, j]
            expected = (w * x) @ y / ((w * x) @ x + ridge)
            assert lam[0, j] == pytest.approx(expected, abs=1e-12)

    def test_design_order_mismatch_rejected(self):
        panel, truth = constant_system_panel(t=40, seed=4)
        design = build_lag_design(panel, 2)
        with pytest.raises(ValueError, match="lag order"):
            local_estimate(design, truth.adjacency, 0.5, KernelSpec(), order=1)


class TestFitTvnar:
    def test_order_one_matches_single_lag_formulation(self):
        panel, truth = constant_system_panel(c=8, t=60, seed=5)
        design = build_lag_design(panel, 1)
        kernel = KernelSpec(bandwidth=0.2, grid_size=7)
        model = fit_tvnar(panel, truth.adjacency, order=1, kernel=kernel)
        for gi, tau_star in enumerate(model.grid):
            direct = local_estimate(design, truth.adjacency, tau_star, kernel)
            assert np.array_equal(model.lam[gi], direct)

    def test_per_country_equals_pooled_on_single_country(self):
        panel, truth = constant_system_panel(c=1, t=70, seed=6)
        kernel = KernelSpec(bandwidth=0.2, grid_size=9)
        pooled = fit_tvnar(panel, truth.adjacency, kernel=kernel)
        per = fit_tvnar(panel, truth.adjacency, kernel=kernel,
                        mode="per-country")
        assert np.array_equal(per.lam[panel.countries[0]], pooled.lam)
        assert np.array_equal(per.residuals[panel.countries[0]],
                              pooled.residuals)

    def test_residuals_use_interpolated_path(self):
        panel, truth = constant_system_panel(c=3, t=40, seed=7)
        model = fit_tvnar(panel, truth.adjacency, kernel=KernelSpec(0.2, 5))
        design = build_lag_design(panel, 1)
        r = 10
        lam = model.lambda_at(design.tau[r])
        pred = (model.mask * lam[0][None, :]) @ design.lags[r, 0]
        assert np.allclose(design.targets[r] - pred, model.residuals[r],
                           atol=1e-12)

    def test_kernel_weights_depend_only_on_tau(self):
        kernel = KernelSpec(bandwidth=0.3)
        assert kernel.weights(0.4, 0.6) == pytest.approx(
            kernel.weights(0.4, 0.2), abs=1e-15
        )
        assert kernel.weights(np.array([0.5]), 0.5)[0] == 1.0


class TestCoefficientMatrix:
    def model(self, **kw):
        panel, truth = constant_system_panel(c=6, t=50, seed=8, **kw)
        return fit_tvnar(panel, truth.adjacency, kernel=KernelSpec(0.2, 11)), truth

    def test_zero_adjacency_scales_identity(self):
        model, _ = self.model()
        coef = coefficient_matrix(model, 0.5, 1)
        assert coef[0, 1] == 0.0 and coef[1, 0] == 0.0

    def test_single_edge_formula(self):
        adj = np.zeros((2, 2))
        adj[0, 1] = 0.7   # source 1 -> target 0 with weight w
        panel, truth = constant_system_panel(adjacency=adj, c=10, t=60, seed=9)
        model = fit_tvnar(panel, truth.adjacency, kernel=KernelSpec(0.2, 11))
        tau = 0.5
        lam = model.lambda_at(tau)[0]
        coef = coefficient_matrix(model, tau, 1)
        assert coef[0, 1] == pytest.approx(0.7 * lam[1], abs=1e-14)
        assert coef[1, 1] == pytest.approx(lam[1], abs=1e-14)
        assert coef[1, 0] == 0.0

    def test_masking_holds_for_random_models(self):
        rng = np.random.default_rng(10)
        adj = np.zeros((4, 4))
        adj[rng.integers(0, 4), 0] = 0.5
        panel, truth = constant_system_panel(adjacency=adj, n=4, c=5, t=50,
                                             seed=11)
        model = fit_tvnar(panel, truth.adjacency, kernel=KernelSpec(0.2, 9))
        for tau in np.linspace(model.grid[0], 1.0, 7):
            coef = model.coef_at(tau, 1)
            off = (truth.adjacency == 0) & ~np.eye(4, dtype=bool)
            assert np.all(coef[off] == 0.0)

    def test_grid_point_lookup_is_exact(self):
        model, _ = self.model()
        gi = 4
        lam = model.lambda_at(model.grid[gi])
        assert np.array_equal(lam, model.lam[gi])

    def test_extrapolation_clamps_with_warning(self):
        model, _ = self.model()
        with pytest.warns(ExtrapolationWarning):
            clamped = coefficient_matrix(model, model.grid[0] / 2.0, 1)
        edge = model.coef_at(model.grid[0], 1)
        assert np.array_equal(clamped, edge)

    def test_invalid_tau_rejected(self):
        model, _ = self.model()
        with pytest.raises(ValueError):
            coefficient_matrix(model, 1.5, 1)


class TestForecastEnsemble:
    def model(self, seed=12):
        panel, truth = constant_system_panel(c=6, t=50, seed=seed)
        model = fit_tvnar(panel, truth.adjacency, kernel=KernelSpec(0.2, 9))
        return model, panel

    def test_zero_residual_pool_gives_identical_samples(self):
        model, panel = self.model()
        from dataclasses import replace
        degenerate = replace(model, residuals=np.zeros_like(model.residuals))
        ens = forecast_ensemble(degenerate, panel.values[0, :5], 5, 4, 16, seed=0)
        assert np.all(ens.samples == ens.samples[0])

    def test_single_sample_allowed_but_metrics_reject(self):
        model, panel = self.model()
        ens = forecast_ensemble(model, panel.values[0, :5], 5, 3, 1, seed=1)
        assert ens.n_samples == 1
        from dcnar.metrics import crps_sample
        with pytest.raises(ValueError):
            crps_sample(ens.samples[:, 0, 0], 0.0)

    def test_one_step_sample_variance_matches_residual_pool(self):
        # scalar stable model, unit-variance residuals: the h=1 spread is
        # exactly a bootstrap of the pool
        panel, truth = constant_system_panel(n=1, c=10, t=200, seed=13)
        model = fit_tvnar(panel, truth.adjacency, kernel=KernelSpec(0.3, 9))
        ens = forecast_ensemble(model, panel.values[0], 200, 1, 1000, seed=2)
        pool_var = model.residuals.var()
        sample_var = ens.samples[:, 0, 0].var()
        assert abs(sample_var - pool_var) < 0.1 * pool_var

    def test_deterministic_given_seed(self):
        model, panel = self.model()
        a = forecast_ensemble(model, panel.values[1, :10], 10, 4, 32, seed=9)
        b = forecast_ensemble(model, panel.values[1, :10], 10, 4, 32, seed=9)
        assert np.array_equal(a.samples, b.samples)

    def test_short_history_rejected(self):
        model, panel = self.model()
        with pytest.raises(ValueError, match="order"):
            forecast_ensemble(model, np.empty((0, 2)), 5, 3, 8, seed=0)


class TestStabilityReport:
    def test_scalar_half_radius(self):
        panel, truth = constant_system_panel(n=1, c=10, t=100, seed=14)
        model = fit_tvnar(panel, truth.adjacency, kernel=KernelSpec(0.3, 7))
        report = stability_report(model)
        assert np.all(np.abs(report.radius - 0.5) < 0.05)
        assert report.stable

    def test_explosive_path_flagged(self):
        from dataclasses import replace
        panel, truth = constant_system_panel(n=1, c=5, t=60, seed=15)
        model = fit_tvnar(panel, truth.adjacency, kernel=KernelSpec(0.3, 5))
        hot = replace(model, lam=np.full_like(model.lam, 1.2))
        report = stability_report(hot)
        assert np.all(report.flagged)
        assert not report.stable

    def test_order_two_companion_root(self):
        # z^2 - 0.5 z - 0.3 = 0 has largest root ~0.84244
        from dataclasses import replace
        panel, truth = constant_system_panel(n=1, c=8, t=80, seed=16)
        model = fit_tvnar(panel, truth.adjacency, order=2,
                          kernel=KernelSpec(0.3, 5))
        lam = np.zeros_like(model.lam)
        lam[:, 0, 0] = 0.5
        lam[:, 1, 0] = 0.3
        fixed = replace(model, lam=lam)
        report = stability_report(fixed)
        root = np.max(np.abs(np.roots([1.0, -0.5, -0.3])))
        assert np.all(np.abs(report.radius - root) < 1e-10)
