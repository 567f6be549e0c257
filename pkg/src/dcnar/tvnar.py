"""Structurally constrained time-varying network autoregression.

The dynamics are x_t = sum_l (G + I) Lambda_l(t) x_{t-l} + e_t, where G is
a sparse weighted adjacency prior fixed in advance and each Lambda_l(t) is
a diagonal matrix of node influence parameters varying smoothly in the
normalized time index. Off-diagonal coefficients therefore exist only on
admissible edges; everything time-varying lives in N * p scalar paths.

Estimation is kernel-weighted least squares at each point of a tau grid:
every panel row contributes one observation per target variable, weighted
by a Gaussian kernel in |tau_row - tau*|, pooled across countries (or
restricted to one country in per-country mode). Between grid points the
paths interpolate linearly; outside the grid they clamp to the endpoint
values.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .analysis import companion_radius
from .exceptions import EstimationError, ExtrapolationWarning
from .forecast import ForecastEnsemble, residual_resampling_ensemble
from .panel import build_lag_design


@dataclass(frozen=True)
class KernelSpec:
    """Gaussian kernel K(u) = exp(-u^2 / 2) with bandwidth on the tau scale.

    ``grid`` may be an explicit strictly increasing array of tau points;
    otherwise ``grid_size`` equispaced points spanning the fitted rows are
    used.
    """

    bandwidth: float = 0.2
    grid_size: int = 25
    grid: np.ndarray = None

    def __post_init__(self):
        if self.bandwidth <= 0.0:
            raise ValueError("bandwidth must be positive")
        if self.grid is not None:
            grid = np.asarray(self.grid, dtype=np.float64)
            if grid.ndim != 1 or grid.size < 1 or np.any(np.diff(grid) <= 0):
                raise ValueError("grid must be strictly increasing")
            if grid[0] <= 0.0 or grid[-1] > 1.0:
                raise ValueError("grid points must lie in (0, 1]")
            object.__setattr__(self, "grid", grid)
        elif self.grid_size < 1:
            raise ValueError("grid_size must be >= 1")

    def weights(self, taus, tau_star):
        u = (np.asarray(taus) - tau_star) / self.bandwidth
        return np.exp(-0.5 * u * u)

    def grid_for(self, taus):
        if self.grid is not None:
            return self.grid
        lo, hi = float(np.min(taus)), float(np.max(taus))
        if self.grid_size == 1 or lo == hi:
            return np.array([hi])
        return np.linspace(lo, hi, self.grid_size)


def _prior_weights(prior, n):
    w = np.asarray(getattr(prior, "weights", prior), dtype=np.float64)
    if w.shape != (n, n):
        raise ValueError(f"prior shape {w.shape} does not match {n} variables")
    return w


def local_estimate(design, prior, tau_star, kernel, order=None, ridge=1e-6):
    """Solve the kernel-weighted least squares problem at one tau point.

    Returns the (p, N) influence block Lambda(tau*). The regressor of the
    unknown lambda_{l,j} in a target-i observation is
    (G_{ij} + delta_{ij}) * x_{j, t-l}, so the normal equations collapse to
    a p*N system regardless of panel size. A ridge term keeps the system
    well posed; a singular solve (possible only at ridge=0) is reported
    with its tau.
    """
    order = design.lags_order if order is None else order
    if order != design.lags_order:
        raise ValueError("design was built with a different lag order")
    n = len(design.variables)
    mask = _prior_weights(prior, n) + np.eye(n)

    w = kernel.weights(design.tau, tau_star)
    flat = design.lags.reshape(design.n_rows, order * n)
    gram = flat.T @ (flat * w[:, None])
    lhs = np.tile(mask.T @ mask, (order, order)) * gram
    lhs[np.diag_indices_from(lhs)] += ridge
    proj = design.targets @ mask
    rhs = np.einsum("r,rkj,rj->kj", w, design.lags, proj).ravel()
    try:
        lam = np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError as exc:
        raise EstimationError(
            f"singular local system at tau*={tau_star:.6f}: {exc}"
        ) from exc
    return lam.reshape(order, n)


@dataclass(frozen=True)
class TvNarModel:
    """Fitted time-varying network autoregression.

    ``lam`` holds the influence paths on the grid, shape (G, p, N); in
    per-country mode ``lam`` and ``residuals`` are dicts keyed by country.
    The residual pool feeds forecast ensembles; ``train_std`` records the
    per-variable training standard deviation used to scale interventions.
    """

    prior_weights: np.ndarray
    order: int
    kernel: KernelSpec
    mode: str
    grid: np.ndarray
    lam: object
    residuals: object
    t_total: int
    countries: tuple
    variables: tuple
    ridge: float
    train_std: np.ndarray
    mask: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(
            self, "mask", self.prior_weights + np.eye(len(self.variables))
        )

    # -- coefficient-path protocol ------------------------------------

    def _lam_table(self, country):
        if self.mode == "pooled":
            return self.lam
        if country is None:
            raise KeyError("per-country model requires a country for lookups")
        if country not in self.lam:
            raise KeyError(f"country {country!r} not in the fitted panel")
        return self.lam[country]

    def lambda_at(self, tau, country=None, warn=False):
        """Interpolated (p, N) influence block at scalar tau."""
        table = self._lam_table(country)
        if warn and (tau < self.grid[0] or tau > self.grid[-1]):
            warnings.warn(
                f"tau={tau:.4f} outside the fitted grid "
                f"[{self.grid[0]:.4f}, {self.grid[-1]:.4f}]; clamped to endpoint",
                ExtrapolationWarning,
                stacklevel=3,
            )
        out = np.empty((self.order, len(self.variables)))
        for k in range(self.order):
            for j in range(len(self.variables)):
                out[k, j] = np.interp(tau, self.grid, table[:, k, j])
        return out

    def coef_at(self, tau, lag, country=None, warn=False):
        """Coefficient matrix (G + I) * diag(lambda_lag(tau))."""
        lam = self.lambda_at(tau, country=country, warn=warn)
        return self.mask * lam[lag - 1][None, :]

    def coef_stack(self, t0, horizons, country=None):
        """Per-horizon coefficient stack (H, p, N, N) from an origin step."""
        n = len(self.variables)
        stack = np.empty((horizons, self.order, n, n))
        for h in range(1, horizons + 1):
            tau = min((t0 + h) / self.t_total, 1.0)
            lam = self.lambda_at(tau, country=country)
            for k in range(self.order):
                stack[h - 1, k] = self.mask * lam[k][None, :]
        return stack

    def residual_pool(self, country=None):
        if self.mode == "pooled":
            return self.residuals
        if country is None:
            raise KeyError("per-country model requires a country for its pool")
        return self.residuals[country]

    def forecast(self, history, t0, horizons, n_samples, seed, country=None):
        """Residual-resampling ensemble from observed history rows.

        ``history`` is a (T0, N) matrix of all observations up to and
        including the origin step; the model consumes its last p rows.
        """
        return forecast_ensemble(self, history, t0, horizons, n_samples, seed,
                                 country=country)


def fit_tvnar(train, prior, order=1, kernel=None, mode="pooled", ridge=1e-6):
    """Fit influence paths on a tau grid and collect in-sample residuals.

    In pooled mode all countries' rows enter every local problem; in
    per-country mode each country gets its own paths and residual pool from
    its rows alone. Kernel weights depend only on tau, so observations of
    different countries at the same normalized time are weighted equally.
    """
    kernel = kernel or KernelSpec()
    if mode not in ("pooled", "per-country"):
        raise ValueError(f"unknown estimation mode {mode!r}")
    design = build_lag_design(train, order)
    grid = kernel.grid_for(design.tau)
    n = len(train.variables)
    weights = _prior_weights(prior, n)

    def fit_rows(rows):
        sub = _subset_design(design, rows)
        lam = np.empty((grid.size, order, n))
        for gi, tau_star in enumerate(grid):
            lam[gi] = local_estimate(sub, weights, tau_star, kernel,
                                     order=order, ridge=ridge)
        return lam

    all_rows = np.arange(design.n_rows)
    if mode == "pooled":
        lam = fit_rows(all_rows)
    else:
        lam = {
            country: fit_rows(all_rows[design.country_idx == ci])
            for ci, country in enumerate(train.countries)
        }

    mask = weights + np.eye(n)

    def residuals_for(rows, table):
        lam_rows = np.empty((rows.size, order, n))
        for k in range(order):
            for j in range(n):
                lam_rows[:, k, j] = np.interp(design.tau[rows], grid, table[:, k, j])
        pred = np.einsum("ij,rkj,rkj->ri", mask, lam_rows, design.lags[rows])
        return design.targets[rows] - pred

    if mode == "pooled":
        residuals = residuals_for(all_rows, lam)
    else:
        residuals = {
            country: residuals_for(all_rows[design.country_idx == ci], lam[country])
            for ci, country in enumerate(train.countries)
        }

    train_std = train.values.reshape(-1, n).std(axis=0)
    return TvNarModel(
        prior_weights=weights,
        order=order,
        kernel=kernel,
        mode=mode,
        grid=grid,
        lam=lam,
        residuals=residuals,
        t_total=train.t_total,
        countries=train.countries,
        variables=train.variables,
        ridge=ridge,
        train_std=train_std,
    )


def _subset_design(design, rows):
    if rows.size == design.n_rows:
        return design
    from .panel import LagDesign

    return LagDesign(
        lags_order=design.lags_order,
        targets=design.targets[rows],
        lags=design.lags[rows],
        country_idx=design.country_idx[rows],
        t=design.t[rows],
        tau=design.tau[rows],
        countries=design.countries,
        variables=design.variables,
    )


def coefficient_matrix(model, tau, lag, country=None):
    """Public coefficient lookup A_lag(tau) with an extrapolation warning.

    Values of tau beyond the fitted grid clamp to the endpoint path values
    and emit :class:`ExtrapolationWarning`.
    """
    if not 0.0 < tau <= 1.0:
        raise ValueError(f"tau={tau} outside (0, 1]")
    if lag < 1 or lag > model.order:
        raise ValueError(f"lag {lag} outside 1..{model.order}")
    return model.coef_at(tau, lag, country=country, warn=True)


def forecast_ensemble(model, history, origin, horizons, n_samples, seed,
                      country=None):
    """Residual-resampling forecast ensemble from an origin step.

    ``origin`` is the global 1-based step of the last observed row (an
    integer), or equivalently its normalized time as a float in (0, 1].
    Residuals are drawn per variable with replacement from the model's
    in-sample pool; the draw sequence is fixed by ``seed``.
    """
    history = np.atleast_2d(np.asarray(history, dtype=np.float64))
    n = len(model.variables)
    if history.shape[1] != n:
        raise ValueError(f"history must have {n} columns")
    if history.shape[0] < model.order:
        raise ValueError(
            f"history supplies {history.shape[0]} rows; order {model.order} needed"
        )
    if horizons < 1:
        raise ValueError("need at least one horizon")
    t0 = _origin_step(origin, model.t_total)
    init = history[::-1][:model.order].copy()
    stack = model.coef_stack(t0, horizons, country=country)
    pool = model.residual_pool(country=country)
    samples = residual_resampling_ensemble(stack, init, pool, n_samples, seed)
    return ForecastEnsemble(samples=samples, variables=model.variables,
                            origin=t0, country=country, seed=seed)


def _origin_step(origin, t_total):
    if isinstance(origin, (int, np.integer)):
        return int(origin)
    tau0 = float(origin)
    if not 0.0 < tau0 <= 1.0:
        raise ValueError(f"origin tau={tau0} outside (0, 1]")
    return int(round(tau0 * t_total))


@dataclass(frozen=True)
class StabilityReport:
    """Spectral radius of the companion matrix along the fitted grid."""

    grid: np.ndarray
    radius: object          # (G,) array, or dict country -> (G,) array
    flagged: object         # same layout, boolean radius >= 1

    @property
    def stable(self):
        flags = self.flagged
        if isinstance(flags, dict):
            return not any(f.any() for f in flags.values())
        return not flags.any()


def stability_report(model):
    """Companion spectral radius at every grid point (per country if fitted so)."""

    def radii(table):
        out = np.empty(model.grid.size)
        for gi, tau in enumerate(model.grid):
            mats = [model.mask * table[gi, k][None, :] for k in range(model.order)]
            out[gi] = companion_radius(mats)
        return out

    if model.mode == "pooled":
        radius = radii(model.lam)
        flagged = radius >= 1.0
    else:
        radius = {c: radii(tab) for c, tab in model.lam.items()}
        flagged = {c: r >= 1.0 for c, r in radius.items()}
    return StabilityReport(grid=model.grid, radius=radius, flagged=flagged)
