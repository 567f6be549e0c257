"""Neural additive autoregressive discovery of directed influence.

One small feedforward network per source variable maps that variable's
full lag window to a vector of additive contributions, one per target;
predictions are the exact sum of contributions plus a per-target bias, so
the credit each source receives is separable by construction. Directed
influence of source j on target i is then scored by how much the (i, j)
contribution series varies over the training rows: a source whose
contribution never moves cannot be driving the target. Sparsity is
encouraged with an L1 penalty on the contributions themselves plus weight
decay on the network weights.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .exceptions import TrainingError
from .panel import build_lag_design


@dataclass(frozen=True)
class DiscoveryConfig:
    """Hyperparameters of the additive discovery model.

    The defaults target desk-scale panels; all of them are surfaced in the
    run configuration because the score ranking is what downstream edge
    selection consumes.
    """

    lags: int = 8
    hidden: int = 16
    learning_rate: float = 0.02
    epochs: int = 2000
    batch_size: int = 64
    l1: float = 0.1
    weight_decay: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if self.lags < 1:
            raise ValueError("lags must be >= 1")
        if self.hidden < 1 or self.epochs < 1 or self.batch_size < 1:
            raise ValueError("hidden, epochs, and batch_size must be >= 1")
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")
        if self.l1 < 0.0 or self.weight_decay < 0.0:
            raise ValueError("penalty weights must be nonnegative")


@dataclass(frozen=True)
class AdditiveModel:
    """Fitted per-source contribution networks with a shared target bias.

    ``w1[j]``/``b1[j]`` form source j's hidden layer over its lag window;
    ``w2[j, i]`` maps that hidden state to the contribution received by
    target i. Prediction for target i is sum_j contribution(i, j) + bias[i],
    exactly.
    """

    w1: np.ndarray           # (N, H, L)
    b1: np.ndarray           # (N, H)
    w2: np.ndarray           # (N, N, H)
    bias: np.ndarray         # (N,)
    config: DiscoveryConfig
    variables: tuple
    loss_history: np.ndarray = field(repr=False, default=None)

    @property
    def n_variables(self):
        return self.w1.shape[0]

    @property
    def lags(self):
        return self.w1.shape[2]


@dataclass(frozen=True)
class ContributionSeries:
    """Per-row additive contributions c[r, i, j] of source j to target i."""

    values: np.ndarray       # (R, N, N)
    bias: np.ndarray         # (N,)
    variables: tuple

    def predictions(self):
        return self.values.sum(axis=2) + self.bias[None, :]


@dataclass(frozen=True)
class CausalScoreMatrix:
    """Nonnegative directed scores; matrix[i, j] = influence of j on i."""

    matrix: np.ndarray
    variables: tuple

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if not np.all(np.isfinite(m)) or np.any(m < 0.0):
            raise ValueError("scores must be finite and nonnegative")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)


def _design_windows(design):
    """Lag windows in kernel layout (rows, source, lag)."""
    return np.ascontiguousarray(design.lags.transpose(0, 2, 1))


def fit_navar(train, config=None):
    """Train the additive discovery model by minibatch gradient descent.

    The objective is mean squared prediction error plus an L1 penalty on
    the mean absolute contribution plus weight decay; steps are plain SGD
    with a fixed learning rate. The per-epoch loss trace is recorded on the
    returned model. Non-finite loss aborts with the epoch index; a
    zero-variance variable only warns.
    """
    config = config or DiscoveryConfig()
    design = build_lag_design(train, config.lags)
    x = _design_windows(design)
    y = np.ascontiguousarray(design.targets)
    n = len(design.variables)

    flat = np.std(y, axis=0) == 0.0
    if flat.any():
        names = [design.variables[i] for i in np.flatnonzero(flat)]
        warnings.warn(f"constant target series {names}; scores for them will be ~0")

    rng = np.random.default_rng(config.seed)
    w1 = rng.normal(0.0, 1.0 / np.sqrt(config.lags), (n, config.hidden, config.lags))
    b1 = np.zeros((n, config.hidden))
    w2 = rng.normal(0.0, 1.0 / np.sqrt(config.hidden * n), (n, n, config.hidden))
    bias = np.zeros(n)

    rows = design.n_rows
    history = np.empty(config.epochs)
    for epoch in range(config.epochs):
        order = rng.permutation(rows)
        total = 0.0
        for start in range(0, rows, config.batch_size):
            take = order[start:start + config.batch_size]
            loss, dw1, db1, dw2, dbias = kernels.navar_batch(
                w1, b1, w2, bias, x[take], y[take],
                config.l1, config.weight_decay,
            )
            if not np.isfinite(loss):
                raise TrainingError(
                    f"non-finite training loss at epoch {epoch}", epoch=epoch
                )
            lr = config.learning_rate
            w1 -= lr * dw1
            b1 -= lr * db1
            w2 -= lr * dw2
            bias -= lr * dbias
            total += loss * take.size
        history[epoch] = total / rows

    return AdditiveModel(w1=w1, b1=b1, w2=w2, bias=bias, config=config,
                         variables=design.variables, loss_history=history)


def contributions(model, design):
    """Evaluate the fitted contribution series on a lag design."""
    if design.lags_order != model.lags:
        raise ValueError(
            f"design lag order {design.lags_order} differs from model's {model.lags}"
        )
    values = kernels.navar_contributions(
        model.w1, model.b1, model.w2, _design_windows(design)
    )
    return ContributionSeries(values=values, bias=model.bias.copy(),
                              variables=model.variables)


def causal_scores(model, design):
    """Aggregate contribution variability into the directed score matrix.

    The score of edge (j -> i) is the sample standard deviation of the
    (i, j) contribution series across training rows; no normalization is
    applied. Requires at least two rows.
    """
    series = contributions(model, design)
    if series.values.shape[0] < 2:
        raise ValueError("need >= 2 design rows for a standard deviation")
    matrix = series.values.std(axis=0, ddof=1)
    return CausalScoreMatrix(matrix=matrix, variables=model.variables)


def predict_navar(model, history):
    """One-step prediction from a single (L, N) lag window.

    ``history[k, j]`` is the value of variable j at lag k + 1 (most recent
    first), matching the lag-design layout.
    """
    history = np.asarray(history, dtype=np.float64)
    if history.shape != (model.lags, model.n_variables):
        raise ValueError(
            f"history must be ({model.lags}, {model.n_variables}), got {history.shape}"
        )
    contrib = kernels.navar_contributions(
        model.w1, model.b1, model.w2,
        np.ascontiguousarray(history.T)[None, :, :],
    )
    return contrib[0].sum(axis=1) + model.bias
