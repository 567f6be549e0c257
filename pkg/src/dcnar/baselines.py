"""Comparison models sharing the ForecastEnsemble contract.

Three baselines bracket the structurally constrained model from both
sides: a constant-coefficient ridge VAR(1), a kernel-weighted time-varying
VAR(1) with a dense unconstrained coefficient matrix, and a one-layer LSTM
trained from scratch whose predictive spread comes from Monte Carlo
dropout. The two VAR baselines also provide coefficient-thresholded
structure extraction for contrast with discovery-based support.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .exceptions import TrainingError
from .forecast import ForecastEnsemble, residual_resampling_ensemble
from .panel import build_lag_design
from .tvnar import KernelSpec, _origin_step


# ---------------------------------------------------------------------------
# Ridge VAR(1)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RidgeVarModel:
    """Constant-coefficient VAR(1) fit by ridge-penalized least squares."""

    coef: np.ndarray         # (N, N)
    ridge: float
    residuals: np.ndarray    # (R, N)
    variables: tuple
    t_total: int
    train_std: np.ndarray

    order = 1

    def coef_at(self, tau, lag, country=None):
        return self.coef

    def coef_stack(self, t0, horizons, country=None):
        n = self.coef.shape[0]
        return np.broadcast_to(self.coef, (horizons, 1, n, n)).copy()

    def forecast(self, history, t0, horizons, n_samples, seed, country=None):
        return _linear_forecast(self, history, t0, horizons, n_samples, seed,
                                country)


def fit_ridge_var(train, ridge=0.1):
    """Closed-form ridge solution of the pooled lag-1 system."""
    design = build_lag_design(train, 1)
    x = design.lags[:, 0, :]
    y = design.targets
    n = x.shape[1]
    lhs = x.T @ x + ridge * np.eye(n)
    coef = np.linalg.solve(lhs, x.T @ y).T
    residuals = y - x @ coef.T
    return RidgeVarModel(
        coef=coef, ridge=ridge, residuals=residuals,
        variables=train.variables, t_total=train.t_total,
        train_std=train.values.reshape(-1, n).std(axis=0),
    )


def ridge_forecast(model, history, origin, horizons, n_samples, seed):
    """Residual-resampling ensemble under the constant coefficients."""
    return _linear_forecast(model, history, origin, horizons, n_samples, seed,
                            None)


def _linear_forecast(model, history, origin, horizons, n_samples, seed, country):
    history = np.atleast_2d(np.asarray(history, dtype=np.float64))
    n = len(model.variables)
    if history.shape[1] != n:
        raise ValueError(f"history must have {n} columns")
    if history.shape[0] < model.order:
        raise ValueError(f"history supplies fewer than {model.order} rows")
    t0 = _origin_step(origin, model.t_total)
    init = history[::-1][:model.order].copy()
    stack = model.coef_stack(t0, horizons, country=country)
    samples = residual_resampling_ensemble(stack, init, model.residuals,
                                           n_samples, seed)
    return ForecastEnsemble(samples=samples, variables=model.variables,
                            origin=t0, country=country, seed=seed)


# ---------------------------------------------------------------------------
# Kernel-weighted TV-VAR(1)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TvVarModel:
    """Locally estimated VAR(1) with a dense time-varying coefficient path."""

    grid: np.ndarray         # (G,)
    coef_path: np.ndarray    # (G, N, N)
    kernel: KernelSpec
    ridge: float
    residuals: np.ndarray
    variables: tuple
    t_total: int
    train_std: np.ndarray

    order = 1

    def coef_at(self, tau, lag, country=None):
        n = len(self.variables)
        out = np.empty((n, n))
        for i in range(n):
            for j in range(n):
                out[i, j] = np.interp(tau, self.grid, self.coef_path[:, i, j])
        return out

    def coef_stack(self, t0, horizons, country=None):
        n = len(self.variables)
        stack = np.empty((horizons, 1, n, n))
        for h in range(1, horizons + 1):
            tau = min((t0 + h) / self.t_total, 1.0)
            stack[h - 1, 0] = self.coef_at(tau, 1)
        return stack

    def forecast(self, history, t0, horizons, n_samples, seed, country=None):
        return _linear_forecast(self, history, t0, horizons, n_samples, seed,
                                country)


def fit_tvvar(train, kernel=None, ridge=0.1):
    """Kernel-weighted ridge regression of the full coefficient matrix.

    At each grid point the dense (N, N) matrix minimizes the kernel-
    weighted squared error plus a Frobenius penalty; in-sample residuals
    use the interpolated path.
    """
    kernel = kernel or KernelSpec()
    design = build_lag_design(train, 1)
    x = design.lags[:, 0, :]
    y = design.targets
    n = x.shape[1]
    grid = kernel.grid_for(design.tau)
    path = np.empty((grid.size, n, n))
    for gi, tau_star in enumerate(grid):
        w = kernel.weights(design.tau, tau_star)
        xw = x * w[:, None]
        lhs = x.T @ xw + ridge * np.eye(n)
        path[gi] = np.linalg.solve(lhs, xw.T @ y).T

    pred = np.empty_like(y)
    for i in range(n):
        for j in range(n):
            series = np.interp(design.tau, grid, path[:, i, j])
            if j == 0:
                pred[:, i] = series * x[:, j]
            else:
                pred[:, i] += series * x[:, j]
    residuals = y - pred
    return TvVarModel(
        grid=grid, coef_path=path, kernel=kernel, ridge=ridge,
        residuals=residuals, variables=train.variables, t_total=train.t_total,
        train_std=train.values.reshape(-1, n).std(axis=0),
    )


def tvvar_forecast(model, history, origin, horizons, n_samples, seed):
    """Residual-resampling ensemble under the local coefficient path."""
    return _linear_forecast(model, history, origin, horizons, n_samples, seed,
                            None)


# ---------------------------------------------------------------------------
# Structure from coefficient thresholding
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VarStructure:
    """Binary support from thresholded coefficient magnitudes."""

    mask: np.ndarray
    threshold: float
    variables: tuple


def var_structure(model, threshold):
    """Indicator of summed absolute coefficients exceeding the threshold.

    For the time-varying baseline the grid-time average of |B(tau)| is
    thresholded.
    """
    if isinstance(model, TvVarModel):
        magnitude = np.mean(np.abs(model.coef_path), axis=0)
    else:
        magnitude = np.abs(model.coef)
    return VarStructure(mask=(magnitude > threshold).astype(np.int8),
                        threshold=float(threshold),
                        variables=model.variables)


# ---------------------------------------------------------------------------
# One-layer LSTM with Monte Carlo dropout
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LstmConfig:
    hidden: int = 32
    lags: int = 8
    dropout: float = 0.1
    epochs: int = 200
    learning_rate: float = 0.01
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.hidden < 1 or self.lags < 1 or self.epochs < 1:
            raise ValueError("hidden, lags, and epochs must be >= 1")


@dataclass(frozen=True)
class LstmModel:
    """Single recurrent layer plus a dense head, trained for one-step MSE.

    Gate weights are packed row-wise [input; forget; cell; output]. Dropout
    acts on the final hidden state before the dense head, during training
    and at prediction time (the Monte Carlo dropout convention).
    """

    wx: np.ndarray           # (4H, N)
    wh: np.ndarray           # (4H, H)
    bg: np.ndarray           # (4H,)
    wout: np.ndarray         # (N, H)
    bout: np.ndarray         # (N,)
    config: LstmConfig
    variables: tuple
    t_total: int
    loss_history: np.ndarray = field(repr=False, default=None)

    @property
    def hidden(self):
        return self.wh.shape[1]

    @property
    def lags(self):
        return self.config.lags

    def forecast(self, history, t0, horizons, n_samples, seed, country=None):
        return lstm_mc_forecast(self, history, horizons, n_samples, seed)


def _lstm_sequences(panel, lags):
    """Chronological input windows and one-step targets, pooled by country."""
    c, t_steps, n = panel.values.shape
    if t_steps <= lags:
        raise ValueError(f"series length {t_steps} does not exceed {lags} lags")
    rows = t_steps - lags
    x = np.empty((c * rows, lags, n))
    y = np.empty((c * rows, n))
    for ci in range(c):
        for r in range(rows):
            x[ci * rows + r] = panel.values[ci, r:r + lags]
            y[ci * rows + r] = panel.values[ci, r + lags]
    return x, y


def _dropout_masks(rng, n_rows, hidden, p):
    if p == 0.0:
        return np.ones((n_rows, hidden))
    keep = rng.random((n_rows, hidden)) >= p
    return keep / (1.0 - p)


def fit_lstm(train, config=None):
    """Train by backpropagation through time with Adam steps.

    Dropout masks are resampled per batch from the seeded generator, so a
    fixed seed reproduces the fit bit for bit.
    """
    config = config or LstmConfig()
    x, y = _lstm_sequences(train, config.lags)
    n = y.shape[1]
    hid = config.hidden
    rng = np.random.default_rng(config.seed)

    wx = rng.normal(0.0, 1.0 / np.sqrt(n), (4 * hid, n))
    wh = rng.normal(0.0, 1.0 / np.sqrt(hid), (4 * hid, hid))
    bg = np.zeros(4 * hid)
    bg[hid:2 * hid] = 1.0   # forget-gate bias keeps early memory open
    wout = rng.normal(0.0, 1.0 / np.sqrt(hid), (n, hid))
    bout = np.zeros(n)

    params = [wx, wh, bg, wout, bout]
    m_state = [np.zeros_like(p) for p in params]
    v_state = [np.zeros_like(p) for p in params]
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0

    rows = x.shape[0]
    history = np.empty(config.epochs)
    for epoch in range(config.epochs):
        order = rng.permutation(rows)
        total = 0.0
        for start in range(0, rows, config.batch_size):
            take = order[start:start + config.batch_size]
            mask = _dropout_masks(rng, take.size, hid, config.dropout)
            loss, *grads = kernels.lstm_batch(
                wx, wh, bg, wout, bout, x[take], y[take], mask
            )
            if not np.isfinite(loss):
                raise TrainingError(
                    f"non-finite training loss at epoch {epoch}", epoch=epoch
                )
            step += 1
            scale = (config.learning_rate
                     * np.sqrt(1.0 - beta2 ** step) / (1.0 - beta1 ** step))
            for p, g, ms, vs in zip(params, grads, m_state, v_state):
                ms += (1.0 - beta1) * (g - ms)
                vs += (1.0 - beta2) * (g * g - vs)
                p -= scale * ms / (np.sqrt(vs) + eps)
            total += loss * take.size
        history[epoch] = total / rows

    return LstmModel(wx=wx, wh=wh, bg=bg, wout=wout, bout=bout, config=config,
                     variables=train.variables, t_total=train.t_total,
                     loss_history=history)


def lstm_predict(model, window, mask=None):
    """Deterministic one-step prediction from a chronological (L, N) window."""
    window = np.asarray(window, dtype=np.float64)
    if window.shape != (model.lags, len(model.variables)):
        raise ValueError(
            f"window must be ({model.lags}, {len(model.variables)})"
        )
    if mask is None:
        mask = np.ones((1, model.hidden))
    return kernels.lstm_forward(model.wx, model.wh, model.bg, model.wout,
                                model.bout, window[None], mask)[0]


def lstm_mc_forecast(model, history, horizons, n_samples, seed):
    """Monte Carlo dropout ensemble by recursive one-step prediction.

    Each of the B stochastic passes keeps dropout active with its own mask
    per step; multi-horizon forecasts feed predictions back as inputs. With
    dropout probability zero every pass is identical.
    """
    history = np.atleast_2d(np.asarray(history, dtype=np.float64))
    lags = model.lags
    n = len(model.variables)
    if history.shape[0] < lags:
        raise ValueError(
            f"history supplies {history.shape[0]} rows; {lags} needed"
        )
    if history.shape[1] != n:
        raise ValueError(f"history must have {n} columns")
    rng = np.random.default_rng(seed)
    windows = np.broadcast_to(history[-lags:], (n_samples, lags, n)).copy()
    samples = np.empty((n_samples, horizons, n))
    for h in range(horizons):
        mask = _dropout_masks(rng, n_samples, model.hidden, model.config.dropout)
        pred = kernels.lstm_forward(model.wx, model.wh, model.bg, model.wout,
                                    model.bout, windows, mask)
        samples[:, h] = pred
        windows[:, :-1] = windows[:, 1:]
        windows[:, -1] = pred
    return ForecastEnsemble(samples=samples, variables=model.variables,
                            seed=seed)
