"""Proper scoring and calibration metrics over forecast ensembles.

The sample CRPS uses the plain double-mean estimator
mean|X - y| - 0.5 * mean|X - X'| over all ordered sample pairs (self-pairs
included), computed exactly via the sorted-sample identity
sum_{a,b} |x_a - x_b| = 2 * sum_k (2k - 1 - B) x_(k). Interval coverage
uses order-statistic quantiles with linear interpolation between them
(inclusive endpoints); that convention is part of the reported numbers.
Aggregates are unweighted means over the stated cell sets.
"""

from dataclasses import dataclass, field

import numpy as np


def crps_sample(samples, observation):
    """Sample-form CRPS of one predictive sample set against a scalar."""
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < 2:
        raise ValueError(f"CRPS needs >= 2 samples, got {x.size}")
    return float(_crps_batch(x[None, :], np.array([observation]))[0])


def _crps_batch(samples, observations):
    """Vectorized CRPS over (cells, B) samples and (cells,) observations."""
    b = samples.shape[1]
    term1 = np.mean(np.abs(samples - observations[:, None]), axis=1)
    srt = np.sort(samples, axis=1)
    k = np.arange(1, b + 1)
    pair_sum = (2.0 * k - 1.0 - b) @ srt.T   # = 0.5 * sum over ordered pairs
    return term1 - pair_sum / (b * b)


@dataclass(frozen=True)
class MetricReport:
    """Per-horizon aggregates of one metric plus the grand cell mean."""

    metric: str
    per_horizon: dict
    counts: dict
    overall: float
    label: str = None

    def rows(self, label=None):
        """Tidy (model, horizon, metric, value, n) rows, grand mean last."""
        name = label or self.label or ""
        out = [(name, h, self.metric, self.per_horizon[h], self.counts[h])
               for h in sorted(self.per_horizon)]
        out.append((name, "all", self.metric, self.overall,
                    sum(self.counts.values())))
        return out


def _check_alignment(ensembles, observations):
    for key in ensembles:
        if key not in observations:
            raise KeyError(f"no observations for forecast key {key!r}")
    for key in observations:
        if key not in ensembles:
            raise KeyError(f"no ensemble for observation key {key!r}")


def crps_multi_horizon(ensembles, observations, horizons=None, label=None):
    """Average CRPS per horizon and across all cells.

    ``ensembles`` maps a key (typically (country, origin)) to a
    ForecastEnsemble; ``observations`` maps the same keys to (H, N) actual
    values. Cells are (key, variable, horizon) triples; aggregation is the
    unweighted mean.
    """
    _check_alignment(ensembles, observations)
    sums = {}
    counts = {}
    for key, ens in ensembles.items():
        actual = np.asarray(observations[key], dtype=np.float64)
        b, h_max, n = ens.samples.shape
        if actual.shape != (h_max, n):
            raise ValueError(
                f"observations for {key!r} have shape {actual.shape}; "
                f"expected {(h_max, n)}"
            )
        use = range(1, h_max + 1) if horizons is None else horizons
        for h in use:
            vals = _crps_batch(ens.samples[:, h - 1, :].T, actual[h - 1])
            sums[h] = sums.get(h, 0.0) + float(vals.sum())
            counts[h] = counts.get(h, 0) + n
    per_horizon = {h: sums[h] / counts[h] for h in sums}
    overall = sum(sums.values()) / sum(counts.values())
    return MetricReport(metric="crps", per_horizon=per_horizon, counts=counts,
                        overall=overall, label=label)


def local_crps(model, panel, eval_times, n_samples=200, seed=0):
    """Mean one-step CRPS over (country, variable, time) cells.

    For every country and evaluation step t, a one-step ensemble is built
    from the observed history through t - 1 and scored against the actual
    value at t. Returns the unweighted cell mean.
    """
    eval_times = list(eval_times)
    if not eval_times:
        raise ValueError("empty evaluation time set")
    rng = np.random.default_rng(seed)
    total = 0.0
    cells = 0
    t_index = list(panel.t_index)
    for ci, country in enumerate(panel.countries):
        for t in eval_times:
            col = t_index.index(t)
            history = panel.values[ci, :col, :]
            ens = model.forecast(history, t - 1, 1, n_samples,
                                 int(rng.integers(2 ** 63)))
            vals = _crps_batch(ens.samples[:, 0, :].T, panel.values[ci, col])
            total += float(vals.sum())
            cells += vals.size
    return total / cells


@dataclass(frozen=True)
class IntervalSpec:
    """Two-sided prediction interval with total tail mass alpha."""

    alpha: float = 0.10

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")

    @property
    def min_samples(self):
        return int(np.ceil(2.0 / self.alpha))


def interval_coverage(ensembles, observations, spec=None, horizons=None,
                      label=None):
    """Fraction of observations inside the nominal prediction interval.

    Interval bounds are the alpha/2 and 1 - alpha/2 sample quantiles with
    linear interpolation between order statistics. Ensembles must carry at
    least ceil(2 / alpha) samples for the tails to be estimable.
    """
    spec = spec or IntervalSpec()
    _check_alignment(ensembles, observations)
    hits = {}
    counts = {}
    lo_q, hi_q = spec.alpha / 2.0, 1.0 - spec.alpha / 2.0
    for key, ens in ensembles.items():
        if ens.n_samples < spec.min_samples:
            raise ValueError(
                f"ensemble {key!r} has {ens.n_samples} samples; "
                f"alpha={spec.alpha} needs >= {spec.min_samples}"
            )
        actual = np.asarray(observations[key], dtype=np.float64)
        b, h_max, n = ens.samples.shape
        use = range(1, h_max + 1) if horizons is None else horizons
        for h in use:
            block = ens.samples[:, h - 1, :]
            lo = np.quantile(block, lo_q, axis=0, method="linear")
            hi = np.quantile(block, hi_q, axis=0, method="linear")
            inside = (actual[h - 1] >= lo) & (actual[h - 1] <= hi)
            hits[h] = hits.get(h, 0) + int(inside.sum())
            counts[h] = counts.get(h, 0) + n
    per_horizon = {h: hits[h] / counts[h] for h in hits}
    overall = sum(hits.values()) / sum(counts.values())
    return MetricReport(metric="coverage", per_horizon=per_horizon,
                        counts=counts, overall=overall, label=label)
