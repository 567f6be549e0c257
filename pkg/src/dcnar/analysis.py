"""Impulse responses, counterfactual trajectories, and behavior diagnostics.

Everything here is a pure function of a coefficient-path provider: any
object with ``order``, ``t_total``, and ``coef_at(tau, lag)`` (fitted
dynamic models, baseline VAR models, and the synthetic ground truth all
qualify). The impulse response at origin t0 follows the recursion

    Psi(0) = I,   Psi(h) = sum_l A_l(t0 + h) Psi(h - l),   Psi(h < 0) = 0,

and counterfactual paths iterate the same dynamics noise-free with an
additive intervention, so for linear models the one-shot deviation equals
the scaled impulse-response column exactly.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import ExplosiveTrajectoryError

DIVERGENCE_GUARD = 1e6


def companion_matrix(coef_list):
    """Companion form of per-lag coefficient matrices [A_1, ..., A_p]."""
    p = len(coef_list)
    n = coef_list[0].shape[0]
    comp = np.zeros((p * n, p * n))
    comp[:n] = np.hstack(coef_list)
    if p > 1:
        comp[n:, :-n] = np.eye((p - 1) * n)
    return comp


def companion_radius(coef_list):
    """Spectral radius of the companion matrix."""
    return float(np.max(np.abs(np.linalg.eigvals(companion_matrix(coef_list)))))


def _coef(model, t, lag, country=None):
    tau = min(max(t, 1) / model.t_total, 1.0)
    if country is None:
        return model.coef_at(tau, lag)
    return model.coef_at(tau, lag, country=country)


@dataclass(frozen=True)
class IrfTensor:
    """Stacked horizon-by-horizon response matrices from one origin.

    ``psi[h, i, j]`` is the response of variable i at horizon h to a unit
    shock in variable j at the origin; ``psi[0]`` is the identity.
    """

    psi: np.ndarray        # (H + 1, N, N)
    origin: int
    variables: tuple
    country: str = None

    @property
    def horizons(self):
        return self.psi.shape[0] - 1

    def series(self, target, source):
        """Response path of one (target <- source) pair over h = 0..H."""
        i = self.variables.index(target) if isinstance(target, str) else target
        j = self.variables.index(source) if isinstance(source, str) else source
        return self.psi[:, i, j]


def impulse_response(model, t0, horizons, country=None):
    """Time-varying impulse responses from origin step t0.

    Coefficient paths clamp to their endpoints when t0 + h runs beyond the
    sample, matching the rollout convention.
    """
    n = len(model.variables) if hasattr(model, "variables") else \
        model.coef_at(1.0, 1).shape[0]
    p = model.order
    psi = np.zeros((horizons + 1, n, n))
    psi[0] = np.eye(n)
    for h in range(1, horizons + 1):
        acc = np.zeros((n, n))
        for lag in range(1, p + 1):
            if h - lag >= 0:
                acc += _coef(model, t0 + h, lag, country) @ psi[h - lag]
        psi[h] = acc
    variables = tuple(getattr(model, "variables", range(n)))
    return IrfTensor(psi=psi, origin=int(t0), variables=variables, country=country)


def country_irf(model, country, t0, horizons):
    """Impulse responses under one country's coefficient paths."""
    return impulse_response(model, t0, horizons, country=country)


@dataclass(frozen=True)
class Intervention:
    """Additive shock specification for counterfactual rollouts.

    ``magnitude=None`` scales the shock to the model's training standard
    deviation of the target variable. ``duration=None`` sustains the shock
    from onset through the end of the horizon.
    """

    variable: object           # name or index
    magnitude: float = None
    onset: int = 1             # horizon offset of the first shocked step
    duration: int = 1
    sign: int = 1

    def __post_init__(self):
        if self.onset < 1:
            raise ValueError("onset must be >= 1 (shocks start after the origin)")
        if self.duration is not None and self.duration < 1:
            raise ValueError("duration must be >= 1 or None for sustained")
        if self.sign not in (-1, 1):
            raise ValueError("sign must be -1 or +1")

    def resolve(self, variables, train_std=None):
        j = (self.variable if not isinstance(self.variable, str)
             else variables.index(self.variable))
        if not 0 <= j < len(variables):
            raise ValueError(f"intervention target {self.variable!r} out of range")
        if self.magnitude is not None:
            delta = float(self.magnitude)
        else:
            if train_std is None:
                raise ValueError(
                    "magnitude=None needs a model with recorded training std"
                )
            delta = float(train_std[j])
        return j, self.sign * delta


@dataclass(frozen=True)
class CounterfactualResult:
    """Noise-free baseline and intervened paths over h = 0..H."""

    baseline: np.ndarray        # (H + 1, N)
    counterfactual: np.ndarray  # (H + 1, N)
    origin: int
    variables: tuple
    intervention: Intervention
    country: str = None

    @property
    def deviation(self):
        return self.counterfactual - self.baseline


def counterfactual(model, init, intervention, horizons, t0, country=None):
    """Counterfactual trajectory under an additive intervention.

    ``init`` supplies the model's p most recent observed states (most
    recent first). Both the baseline and the intervened path are
    deterministic rollouts of the fitted dynamics from the same initial
    lags; their difference is exactly the intervention effect.
    """
    init = np.atleast_2d(np.asarray(init, dtype=np.float64))
    n = len(model.variables)
    if init.shape != (model.order, n):
        raise ValueError(f"init must be ({model.order}, {n}), got {init.shape}")
    j, delta = intervention.resolve(
        tuple(model.variables), getattr(model, "train_std", None)
    )
    last = (horizons if intervention.duration is None
            else intervention.onset + intervention.duration - 1)

    def no_shock(_h):
        return 0.0

    def shock(h):
        out = np.zeros(n)
        if intervention.onset <= h <= last:
            out[j] = delta
        return out

    ref = max(float(np.linalg.norm(init)), abs(delta), 1e-12)
    base = _rollout_guarded(model, init, t0, horizons, no_shock, country, ref)
    cf = _rollout_guarded(model, init, t0, horizons, shock, country, ref)
    return CounterfactualResult(
        baseline=base, counterfactual=cf, origin=int(t0),
        variables=tuple(model.variables), intervention=intervention,
        country=country,
    )


def _rollout_guarded(model, init, t0, horizons, shock_fn, country, ref):
    n = init.shape[1]
    p = init.shape[0]
    path = np.empty((horizons + 1, n))
    path[0] = init[0]
    state = init.copy()
    for h in range(1, horizons + 1):
        x = np.zeros(n)
        for lag in range(1, p + 1):
            x += _coef(model, t0 + h, lag, country) @ state[lag - 1]
        x += shock_fn(h)
        norm = float(np.linalg.norm(x))
        if norm > DIVERGENCE_GUARD * ref:
            raise ExplosiveTrajectoryError(
                f"explosive trajectory at horizon {h}: |x| = {norm:.3e} "
                f"exceeds {DIVERGENCE_GUARD:.0e} x initial norm"
            )
        path[h] = x
        if p > 1:
            state[1:] = state[:-1]
        state[0] = x
    return path


def response_magnitude(result):
    """Euclidean norm of the factual-counterfactual deviation per horizon."""
    base = np.asarray(result.baseline)
    cf = np.asarray(result.counterfactual)
    if base.shape != cf.shape:
        raise ValueError("baseline and counterfactual paths are misaligned")
    return np.linalg.norm(cf - base, axis=1)


def normalized_response(result, baseline_norms=None):
    """Response magnitude relative to the baseline state norm at each step."""
    r = response_magnitude(result)
    if baseline_norms is None:
        baseline_norms = np.linalg.norm(np.asarray(result.baseline), axis=1)
    baseline_norms = np.asarray(baseline_norms, dtype=np.float64)
    zero = np.flatnonzero(baseline_norms == 0.0)
    if zero.size:
        raise ValueError(f"zero baseline norm at horizon index {int(zero[0])}")
    return r / baseline_norms


@dataclass(frozen=True)
class SmoothnessMetrics:
    total_variation: float
    sign_changes: int
    max_amplitude: float


def series_smoothness(series):
    """Total variation, strict sign changes, and max amplitude of a series."""
    x = np.asarray(series, dtype=np.float64).ravel()
    if x.size == 0:
        raise ValueError("empty series")
    tv = float(np.sum(np.abs(np.diff(x)))) if x.size > 1 else 0.0
    signs = np.sign(x)
    signs = signs[signs != 0.0]
    changes = int(np.sum(signs[1:] != signs[:-1])) if signs.size > 1 else 0
    return SmoothnessMetrics(
        total_variation=tv,
        sign_changes=changes,
        max_amplitude=float(np.max(np.abs(x))),
    )


def smoothness_metrics(obj):
    """Behavior diagnostics of an IrfTensor (per entry) or of a 1-D series.

    For an IrfTensor, returns (N, N) arrays of total variation, sign-change
    counts, and max amplitudes over the horizon axis; for a plain series,
    returns a single SmoothnessMetrics.
    """
    if isinstance(obj, IrfTensor):
        n = obj.psi.shape[1]
        tv = np.empty((n, n))
        changes = np.empty((n, n), dtype=int)
        amp = np.empty((n, n))
        for i in range(n):
            for j in range(n):
                m = series_smoothness(obj.psi[:, i, j])
                tv[i, j] = m.total_variation
                changes[i, j] = m.sign_changes
                amp[i, j] = m.max_amplitude
        return tv, changes, amp
    return series_smoothness(obj)
