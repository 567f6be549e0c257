import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dcnar.forecast import ForecastEnsemble
from dcnar.metrics import (IntervalSpec, crps_multi_horizon, crps_sample,
                           interval_coverage)


def crps_enumerated(samples, y):
    """Independent oracle: literal double loops over the estimator's terms."""
    samples = list(samples)
    b = len(samples)
    term1 = sum(abs(x - y) for x in samples) / b
    term2 = sum(abs(a - c) for a in samples for c in samples) / (b * b)
    return term1 - 0.5 * term2


def ensemble(samples, variables=("x",)):
    arr = np.asarray(samples, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None, None]
    return ForecastEnsemble(samples=arr, variables=variables)


class TestCrpsSample:
    def test_worked_two_sample_case(self):
        assert crps_sample([0.0, 1.0], 0.5) == pytest.approx(0.25, abs=1e-15)

    def test_point_mass_on_observation_scores_zero(self):
        assert crps_sample([2.0, 2.0, 2.0], 2.0) == 0.0

    def test_degenerate_pair_reduces_to_absolute_error(self):
        assert crps_sample([3.0, 3.0], 1.25) == pytest.approx(1.75, abs=1e-15)

    def test_single_sample_rejected(self):
        with pytest.raises(ValueError):
            crps_sample([1.0], 1.0)

    def test_matches_enumeration_up_to_size_four(self):
        grid = [-1.0, -0.5, 0.0, 0.5, 1.0]
        for size in (2, 3, 4):
            for samples in itertools.product(grid, repeat=size):
                for y in (-0.75, 0.0, 0.6):
                    expected = crps_enumerated(samples, y)
                    assert crps_sample(samples, y) == pytest.approx(
                        expected, abs=1e-12
                    )

    @given(st.lists(st.floats(-50, 50), min_size=2, max_size=12),
           st.floats(-50, 50))
    def test_nonnegative_and_zero_iff_point_mass(self, samples, y):
        score = crps_sample(samples, y)
        assert score >= -1e-12
        if all(s == y for s in samples):
            assert score == 0.0

    @given(st.lists(st.floats(-20, 20), min_size=2, max_size=10),
           st.floats(-20, 20), st.floats(-100, 100))
    def test_translation_invariance(self, samples, y, shift):
        base = crps_sample(samples, y)
        moved = crps_sample([s + shift for s in samples], y + shift)
        assert moved == pytest.approx(base, abs=1e-9)

    @given(st.lists(st.floats(-20, 20), min_size=2, max_size=10),
           st.floats(-20, 20), st.floats(0.01, 50))
    def test_positive_homogeneity(self, samples, y, scale):
        base = crps_sample(samples, y)
        scaled = crps_sample([s * scale for s in samples], y * scale)
        assert scaled == pytest.approx(scale * base, rel=1e-9, abs=1e-9)

    def test_gaussian_closed_form(self):
        # E CRPS(N(0,1), y ~ N(0,1)) integrates to sigma * (1/sqrt(pi)); a
        # large Monte Carlo run must land near it
        rng = np.random.default_rng(0)
        scores = [crps_sample(rng.standard_normal(400), rng.standard_normal())
                  for _ in range(4000)]
        expected = 1.0 / np.sqrt(np.pi)
        assert abs(np.mean(scores) - expected) < 0.05 * expected


class TestCrpsMultiHorizon:
    def test_identical_cells_report_constant(self):
        ens = {("A", 1): ensemble(np.tile([[0.0], [1.0]], (1, 3, 1)).reshape(2, 3, 1))}
        obs = {("A", 1): np.full((3, 1), 0.5)}
        report = crps_multi_horizon(ens, obs)
        for h in (1, 2, 3):
            assert report.per_horizon[h] == pytest.approx(0.25)
        assert report.overall == pytest.approx(0.25)

    def test_mean_of_two_cells(self):
        ens = {
            ("A", 1): ensemble(np.array([[[1.0]], [[1.0]]])),   # crps 0
            ("B", 1): ensemble(np.array([[[0.0]], [[0.0]]])),   # crps 1
        }
        obs = {("A", 1): np.array([[1.0]]), ("B", 1): np.array([[1.0]])}
        report = crps_multi_horizon(ens, obs)
        assert report.overall == pytest.approx(0.5)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(1)
        keys = [("A", 1), ("B", 1), ("C", 2)]
        ens = {k: ensemble(rng.normal(size=(8, 2, 1))) for k in keys}
        obs = {k: rng.normal(size=(2, 1)) for k in keys}
        report = crps_multi_horizon(ens, obs)
        shuffled = crps_multi_horizon(
            dict(reversed(list(ens.items()))),
            dict(reversed(list(obs.items()))),
        )
        assert report.overall == pytest.approx(shuffled.overall, abs=1e-15)

    def test_misalignment_names_key(self):
        ens = {("A", 1): ensemble(np.zeros((2, 1, 1)))}
        with pytest.raises(KeyError, match="A"):
            crps_multi_horizon(ens, {})


class TestIntervalCoverage:
    def test_all_inside_and_all_outside(self):
        rng = np.random.default_rng(2)
        samples = rng.normal(size=(50, 1, 1))
        ens = {("A", 1): ensemble(samples)}
        inside = {("A", 1): np.array([[np.median(samples)]])}
        outside = {("A", 1): np.array([[1e6]])}
        assert interval_coverage(ens, inside).overall == 1.0
        assert interval_coverage(ens, outside).overall == 0.0

    def test_small_ensemble_rejected_with_minimum(self):
        ens = {("A", 1): ensemble(np.zeros((5, 1, 1)))}
        obs = {("A", 1): np.zeros((1, 1))}
        with pytest.raises(ValueError, match="20"):
            interval_coverage(ens, obs, IntervalSpec(0.10))

    def test_well_specified_gaussian_near_nominal(self):
        rng = np.random.default_rng(3)
        n_keys, b, n_vars = 40, 400, 25
        ens, obs = {}, {}
        variables = tuple(f"v{i}" for i in range(n_vars))
        for k in range(n_keys):
            ens[("A", k)] = ForecastEnsemble(
                samples=rng.normal(size=(b, 1, n_vars)), variables=variables
            )
            obs[("A", k)] = rng.normal(size=(1, n_vars))
        report = interval_coverage(ens, obs, IntervalSpec(0.10))
        assert 0.86 <= report.overall <= 0.94

    def test_rows_layout(self):
        ens = {("A", 1): ensemble(np.random.default_rng(4).normal(size=(30, 2, 1)))}
        obs = {("A", 1): np.zeros((2, 1))}
        rows = interval_coverage(ens, obs, label="m").rows()
        assert rows[-1][1] == "all"
        assert {r[2] for r in rows} == {"coverage"}
