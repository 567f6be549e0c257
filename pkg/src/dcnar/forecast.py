"""Sample-based predictive distributions shared by every model.

All models in the package express forecast uncertainty as a ForecastEnsemble:
B sampled trajectories over H horizons for N variables. The linear models
build theirs here by iterating their coefficient paths with residuals drawn
per variable, with replacement, from the in-sample pool.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .exceptions import EstimationError


@dataclass(frozen=True)
class ForecastEnsemble:
    """B sampled trajectories of shape (B, H, N) from one forecast origin."""

    samples: np.ndarray
    variables: tuple
    origin: int = None
    country: str = None
    seed: int = None

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 3:
            raise ValueError("samples must be (B, H, N)")
        if not np.all(np.isfinite(samples)):
            raise ValueError("ensemble contains non-finite samples")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def n_samples(self):
        return self.samples.shape[0]

    @property
    def horizons(self):
        return self.samples.shape[1]


def _draw_shocks(rng, pool, n_samples, horizons):
    """Residuals resampled with replacement, independently per variable."""
    n = pool.shape[1]
    idx = rng.integers(0, pool.shape[0], size=(n_samples, horizons, n))
    return np.take_along_axis(
        pool[None, None, :, :],
        idx[:, :, None, :],
        axis=2,
    )[:, :, 0, :]


def residual_resampling_ensemble(coef_stack, init, pool, n_samples, seed):
    """Iterate per-horizon coefficients with bootstrap residual shocks.

    coef_stack is (H, p, N, N); init is (p, N) with the most recent state
    first; pool is the (R, N) in-sample residual matrix. Trajectories that
    turn non-finite are regenerated once with fresh draws; a repeat failure
    raises.
    """
    if pool.shape[0] < 1:
        raise EstimationError("empty residual pool")
    rng = np.random.default_rng(seed)
    horizons = coef_stack.shape[0]
    shocks = _draw_shocks(rng, pool, n_samples, horizons)
    samples = kernels.rollout(coef_stack, init, shocks)
    bad = ~np.all(np.isfinite(samples), axis=(1, 2))
    if bad.any():
        retry = kernels.rollout(
            coef_stack, init, _draw_shocks(rng, pool, int(bad.sum()), horizons)
        )
        samples[bad] = retry
        if not np.all(np.isfinite(samples)):
            raise EstimationError(
                "ensemble produced non-finite trajectories twice; "
                "the fitted dynamics are likely explosive"
            )
    return samples
