import numpy as np
import pytest

from dcnar.discovery import (DiscoveryConfig, causal_scores, contributions,
                             fit_navar, predict_navar)
from dcnar.panel import PanelDataset, build_lag_design, split_panel


def panel_from_values(values):
    c, _, n = values.shape
    return PanelDataset(
        countries=tuple(f"C{k}" for k in range(c)),
        variables=tuple(f"v{k}" for k in range(n)),
        values=values,
    )


def driven_pair_panel(t_steps=500, seed=0, coef=0.8):
    """x0 follows 0.8 * lagged x1 plus unit noise; x1 is white noise."""
    rng = np.random.default_rng(seed)
    x1 = rng.standard_normal(t_steps)
    noise = rng.standard_normal(t_steps)
    x0 = np.zeros(t_steps)
    x0[1:] = coef * x1[:-1] + noise[1:]
    return panel_from_values(np.stack([x0, x1], axis=1)[None, :, :])


FAST = dict(lags=2, hidden=16, learning_rate=0.02, epochs=200, batch_size=64,
            l1=0.05, weight_decay=1e-4)


class TestFitNavar:
    def test_heldout_mse_near_noise_floor(self):
        panel = driven_pair_panel(seed=1)
        train, hold = split_panel(panel, 0.8)
        model = fit_navar(train, DiscoveryConfig(seed=1, **FAST))
        design = build_lag_design(hold, 2)
        errs = []
        for r in range(design.n_rows):
            pred = predict_navar(model, design.lags[r])
            errs.append((design.targets[r] - pred) ** 2)
        mse = float(np.mean(errs))
        assert mse <= 1.3   # noise variance is 1 for both series

    def test_all_zero_panel_learns_nothing(self):
        panel = panel_from_values(np.zeros((1, 60, 2)))
        with pytest.warns(UserWarning, match="constant"):
            model = fit_navar(panel, DiscoveryConfig(
                lags=2, hidden=4, epochs=20, seed=0))
        design = build_lag_design(panel, 2)
        series = contributions(model, design)
        assert np.allclose(series.values, 0.0, atol=1e-12)
        assert np.allclose(model.bias, 0.0, atol=1e-12)

    def test_lag8_on_35_steps_gives_27_rows_per_country(self):
        rng = np.random.default_rng(2)
        panel = panel_from_values(rng.normal(size=(3, 35, 2)))
        design = build_lag_design(panel, 8)
        assert design.n_rows == 3 * 27

    def test_loss_history_recorded_and_decreasing(self):
        panel = driven_pair_panel(t_steps=200, seed=3)
        model = fit_navar(panel, DiscoveryConfig(seed=3, **FAST))
        assert model.loss_history.shape == (FAST["epochs"],)
        assert model.loss_history[-1] <= model.loss_history[0]

    def test_determinism_bit_identical_scores(self):
        panel = driven_pair_panel(t_steps=150, seed=4)
        cfg = DiscoveryConfig(seed=11, lags=2, hidden=8, epochs=40)
        design = build_lag_design(panel, 2)
        s1 = causal_scores(fit_navar(panel, cfg), design)
        s2 = causal_scores(fit_navar(panel, cfg), design)
        assert np.array_equal(s1.matrix, s2.matrix)


class TestContributions:
    def fitted(self, seed=5):
        panel = driven_pair_panel(t_steps=200, seed=seed)
        model = fit_navar(panel, DiscoveryConfig(
            seed=seed, lags=2, hidden=8, epochs=60))
        return model, build_lag_design(panel, 2)

    def test_zero_weight_networks_zero_contributions(self):
        model, design = self.fitted()
        from dataclasses import replace
        zeroed = replace(model, w2=np.zeros_like(model.w2))
        series = contributions(zeroed, design)
        assert np.all(series.values == 0.0)

    def test_additivity_exact(self):
        model, design = self.fitted(seed=6)
        series = contributions(model, design)
        preds = series.predictions()
        for r in range(0, design.n_rows, 17):
            direct = predict_navar(model, design.lags[r])
            scale = max(1.0, np.abs(direct).max())
            assert np.all(np.abs(direct - preds[r]) / scale <= 1e-12)

    def test_lag_mismatch_rejected(self):
        model, _ = self.fitted(seed=7)
        panel = driven_pair_panel(t_steps=100, seed=7)
        wrong = build_lag_design(panel, 3)
        with pytest.raises(ValueError, match="lag order"):
            contributions(model, wrong)

    def test_perturbing_source_window_moves_only_its_column(self):
        model, design = self.fitted(seed=8)
        window = design.lags[4].copy()
        base = contributions_single(model, window)
        bumped = window.copy()
        bumped[:, 1] += 0.37            # perturb source variable 1 only
        after = contributions_single(model, bumped)
        assert np.allclose(base[:, 0], after[:, 0])
        assert not np.allclose(base[:, 1], after[:, 1])


def contributions_single(model, window):
    from dcnar import kernels

    return kernels.navar_contributions(
        model.w1, model.b1, model.w2,
        np.ascontiguousarray(window.T)[None],
    )[0]


class TestCausalScores:
    def test_constant_contributions_give_zero_scores(self):
        panel = panel_from_values(np.zeros((1, 40, 2)))
        with pytest.warns(UserWarning):
            model = fit_navar(panel, DiscoveryConfig(lags=1, hidden=4,
                                                     epochs=10, seed=0))
        scores = causal_scores(model, build_lag_design(panel, 1))
        assert np.all(scores.matrix == 0.0)

    def test_known_edge_dominates_reverse(self):
        hits = 0
        for seed in range(10):
            panel = driven_pair_panel(seed=100 + seed)
            model = fit_navar(panel, DiscoveryConfig(seed=seed, **FAST))
            scores = causal_scores(model, build_lag_design(panel, 2))
            # matrix[i, j] scores source j -> target i; true edge is 1 -> 0
            if scores.matrix[0, 1] > 5.0 * scores.matrix[1, 0]:
                hits += 1
        assert hits >= 9

    @pytest.mark.parametrize("seed", [9, 21, 33])
    def test_independent_series_scores_stay_small(self, seed):
        # two independent noise-driven persistent series: the cross scores
        # must be dwarfed by the self-persistence scores
        rng = np.random.default_rng(seed)
        t_steps = 2000
        values = np.zeros((1, t_steps, 2))
        for i in range(2):
            noise = rng.standard_normal(t_steps)
            for t in range(1, t_steps):
                values[0, t, i] = 0.6 * values[0, t - 1, i] + noise[t]
        panel = panel_from_values(values)
        cfg = DiscoveryConfig(lags=2, hidden=8, learning_rate=0.02, epochs=200,
                              batch_size=64, l1=0.2, weight_decay=1e-4,
                              seed=seed)
        scores = causal_scores(fit_navar(panel, cfg),
                               build_lag_design(panel, 2)).matrix
        diag_floor = min(scores[0, 0], scores[1, 1])
        assert scores[0, 1] < 0.1 * diag_floor
        assert scores[1, 0] < 0.1 * diag_floor

    def test_two_rows_minimum(self):
        panel = panel_from_values(np.random.default_rng(1).normal(size=(1, 3, 2)))
        model = fit_navar(panel, DiscoveryConfig(lags=1, hidden=4, epochs=5,
                                                 seed=0))
        design = build_lag_design(panel, 1)
        causal_scores(model, design)   # 2 rows: allowed
        from dcnar.panel import LagDesign
        single = LagDesign(
            lags_order=1, targets=design.targets[:1], lags=design.lags[:1],
            country_idx=design.country_idx[:1], t=design.t[:1],
            tau=design.tau[:1], countries=design.countries,
            variables=design.variables,
        )
        with pytest.raises(ValueError, match="2"):
            causal_scores(model, single)

    def test_monotone_sparsity_in_l1(self):
        means = {0.05: [], 0.5: []}
        for seed in range(10):
            panel = driven_pair_panel(t_steps=200, seed=200 + seed)
            for l1 in means:
                cfg = DiscoveryConfig(lags=2, hidden=8, epochs=80,
                                      learning_rate=0.02, l1=l1, seed=seed)
                scores = causal_scores(fit_navar(panel, cfg),
                                       build_lag_design(panel, 2)).matrix
                off = scores[~np.eye(2, dtype=bool)]
                means[l1].append(off.mean())
        assert np.mean(means[0.5]) <= np.mean(means[0.05])


class TestPredictNavar:
    def test_zero_model_zero_prediction(self):
        panel = panel_from_values(np.zeros((1, 30, 2)))
        with pytest.warns(UserWarning):
            model = fit_navar(panel, DiscoveryConfig(lags=2, hidden=4,
                                                     epochs=5, seed=0))
        assert np.allclose(predict_navar(model, np.zeros((2, 2))), 0.0)

    def test_prediction_is_sum_of_contributions(self):
        panel = driven_pair_panel(t_steps=120, seed=12)
        model = fit_navar(panel, DiscoveryConfig(lags=2, hidden=8, epochs=30,
                                                 seed=12))
        window = np.random.default_rng(0).normal(size=(2, 2))
        pred = predict_navar(model, window)
        contrib = contributions_single(model, window)
        assert np.allclose(pred, contrib.sum(axis=1) + model.bias, atol=1e-12)

    def test_wrong_history_shape_rejected(self):
        panel = driven_pair_panel(t_steps=100, seed=13)
        model = fit_navar(panel, DiscoveryConfig(lags=2, hidden=4, epochs=5,
                                                 seed=13))
        with pytest.raises(ValueError, match="history"):
            predict_navar(model, np.zeros((3, 2)))
