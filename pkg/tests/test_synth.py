import numpy as np
import pytest

from dcnar.analysis import impulse_response
from dcnar.prior import AdjacencyPrior
from dcnar.synth import (GeneratorSpec, GroundTruth, PathSpec, generate_panel,
                         max_companion_radius, ranking_auroc, score_recovery)


def ar1_spec(lam=0.5, n=2, c=1, t=2000, noise=1.0, seed=0):
    paths = (tuple(PathSpec("constant", a=lam) for _ in range(n)),)
    return GeneratorSpec(adjacency=np.zeros((n, n)), paths=paths,
                         noise_std=noise, n_countries=c, t_steps=t,
                         burn_in=200, seed=seed)


class TestGeneratePanel:
    def test_ar1_lag_autocorrelation(self):
        panel, _ = generate_panel(ar1_spec())
        for i in range(panel.n_variables):
            x = panel.values[0, :, i]
            rho = np.corrcoef(x[:-1], x[1:])[0, 1]
            assert abs(rho - 0.5) < 0.05

    def test_zero_noise_zero_start_gives_zero_panel(self):
        panel, _ = generate_panel(ar1_spec(noise=0.0, t=50))
        assert np.all(panel.values == 0.0)

    def test_same_seed_bit_identical(self):
        a, _ = generate_panel(ar1_spec(t=60, c=3, seed=7))
        b, _ = generate_panel(ar1_spec(t=60, c=3, seed=7))
        assert np.array_equal(a.values, b.values)

    def test_different_seeds_differ(self):
        a, _ = generate_panel(ar1_spec(t=60, seed=1))
        b, _ = generate_panel(ar1_spec(t=60, seed=2))
        assert not np.array_equal(a.values, b.values)

    def test_explosive_spec_rejected_before_simulation(self):
        spec = ar1_spec(lam=1.05, t=50)
        with pytest.raises(ValueError, match="explosive"):
            generate_panel(spec)

    def test_stationarity_after_burn_in(self):
        panel, _ = generate_panel(ar1_spec(t=1000, seed=3))
        x = panel.values[0, :, 0]
        half = len(x) // 2
        ratio = x[half:].var() / x[:half].var()
        assert 0.5 < ratio < 2.0

    def test_time_varying_path_enters_generation(self):
        n = 1
        paths = ((PathSpec("linear", a=0.1, b=0.7),),)
        spec = GeneratorSpec(adjacency=np.zeros((1, 1)), paths=paths,
                             noise_std=1.0, n_countries=1, t_steps=4000,
                             burn_in=100, seed=5)
        panel, _ = generate_panel(spec)
        x = panel.values[0, :, 0]
        early = np.corrcoef(x[:1000][:-1], x[:1000][1:])[0, 1]
        late = np.corrcoef(x[-1000:][:-1], x[-1000:][1:])[0, 1]
        assert late > early + 0.3


class TestGroundTruth:
    def test_coef_at_combines_adjacency_and_path(self):
        adj = np.zeros((2, 2))
        adj[0, 1] = 0.4   # source 1 -> target 0
        spec = GeneratorSpec(adjacency=adj,
                             paths=((PathSpec("constant", a=0.5),
                                     PathSpec("constant", a=0.3)),),
                             noise_std=1.0, n_countries=1, t_steps=10,
                             burn_in=10, seed=0)
        truth = GroundTruth(spec)
        coef = truth.coef_at(0.5, 1)
        np.testing.assert_allclose(coef, [[0.5, 0.4 * 0.3], [0.0, 0.3]])

    def test_radius_uses_worst_tau(self):
        paths = ((PathSpec("linear", a=0.2, b=0.7),),)
        spec = GeneratorSpec(adjacency=np.zeros((1, 1)), paths=paths,
                             noise_std=1.0, n_countries=1, t_steps=100,
                             burn_in=10, seed=0)
        assert abs(max_companion_radius(GroundTruth(spec)) - 0.9) < 1e-6

    def test_json_round_trip(self):
        spec = ar1_spec(t=30)
        truth = GroundTruth(spec)
        again = GroundTruth.from_json(truth.to_json())
        assert np.array_equal(again.adjacency, truth.adjacency)
        assert again.spec.paths == truth.spec.paths

    def test_oracle_irf_superposition_with_shock_experiment(self):
        # simulate the true system noise-free with and without a unit shock;
        # the path difference must equal the truth's own IRF recursion
        adj = np.zeros((3, 3))
        adj[1, 0] = 0.6
        paths = (tuple(PathSpec("linear", a=0.2, b=0.3) for _ in range(3)),)
        spec = GeneratorSpec(adjacency=adj, paths=paths, noise_std=0.0,
                             n_countries=1, t_steps=40, burn_in=0, seed=0)
        truth = GroundTruth(spec)
        horizons = 8
        t0 = 12
        psi = impulse_response(truth, t0, horizons).psi
        state_base = np.zeros((1, 3))
        state_shock = np.zeros((1, 3))
        state_shock[0, 0] = 1.0   # unit shock to variable 0 at time t0
        base_path, shock_path = [], []
        xb, xs = state_base[0], state_shock[0]
        for h in range(1, horizons + 1):
            coef = truth.coef_at((t0 + h) / spec.t_steps, 1)
            xb = coef @ xb
            xs = coef @ xs
            base_path.append(xb.copy())
            shock_path.append(xs.copy())
        for h in range(1, horizons + 1):
            np.testing.assert_allclose(
                shock_path[h - 1] - base_path[h - 1], psi[h][:, 0], atol=1e-10
            )


class TestRankingAuroc:
    def test_perfect_separation(self):
        assert ranking_auroc([0.1, 0.9, 0.8, 0.0], [0, 1, 1, 0]) == 1.0

    def test_random_scores_near_half(self):
        rng = np.random.default_rng(0)
        labels = rng.random(400) < 0.3
        aurocs = [ranking_auroc(rng.random(400), labels) for _ in range(40)]
        assert abs(np.mean(aurocs) - 0.5) < 0.05

    def test_ties_get_midranks(self):
        assert ranking_auroc([1.0, 1.0], [1, 0]) == 0.5

    def test_single_class_rejected(self):
        with pytest.raises(ValueError):
            ranking_auroc([0.1, 0.2], [1, 1])


class TestScoreRecovery:
    def truth(self):
        adj = np.zeros((3, 3))
        adj[1, 0] = 0.5
        paths = (tuple(PathSpec("constant", a=0.4) for _ in range(3)),)
        spec = GeneratorSpec(adjacency=adj, paths=paths, noise_std=1.0,
                             n_countries=2, t_steps=30, burn_in=10, seed=0)
        return GroundTruth(spec)

    def test_scores_equal_to_support_give_auroc_one(self):
        truth = self.truth()
        rep = score_recovery(truth, scores=truth.support.astype(float))
        assert rep.auroc == 1.0

    def test_empty_prior_nonempty_truth_recall_zero(self):
        truth = self.truth()
        prior = AdjacencyPrior(weights=np.zeros((3, 3)),
                               variables=("v00", "v01", "v02"))
        rep = score_recovery(truth, prior=prior)
        assert rep.recall == 0.0

    def test_dimension_mismatch_rejected(self):
        truth = self.truth()
        with pytest.raises(ValueError):
            score_recovery(truth, scores=np.zeros((4, 4)))
