"""Edge ablation, forecast-comparison testing, and the adjacency prior.

High-scoring candidate edges from discovery are kept only if removing them
measurably hurts out-of-sample one-step forecasts: for each candidate, the
dynamic model is refit without that single edge under identical settings,
the per-time loss differential between ablated and full model is formed on
the held-out segment, and a Diebold-Mariano test with a serial-dependence-
robust variance decides significance. Surviving edges are weighted by
their relative mean loss differential, so weights mean predictive
necessity, not coefficient size. A total-variation screen on the fitted
influence paths flags priors whose dynamics look erratic.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .exceptions import EstimationError
from .panel import SplitSpec, split_panel
from .tvnar import KernelSpec, fit_tvnar


@dataclass(frozen=True)
class CandidateGraph:
    """Binary support of admissible directed edges (source j -> target i)."""

    mask: np.ndarray
    variables: tuple

    def __post_init__(self):
        m = np.asarray(self.mask, dtype=bool).copy()
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("mask must be square")
        if np.any(np.diag(m)):
            raise ValueError("self-loops are handled by the identity term")
        m.setflags(write=False)
        object.__setattr__(self, "mask", m)

    @property
    def edges(self):
        """Edges as (source, target) index pairs, row-major."""
        targets, sources = np.nonzero(self.mask)
        return [(int(j), int(i)) for i, j in zip(targets, sources)]

    def without(self, edge):
        j, i = edge
        if not self.mask[i, j]:
            raise ValueError(f"edge {edge} not in the candidate graph")
        m = self.mask.copy()
        m[i, j] = False
        return CandidateGraph(mask=m, variables=self.variables)


def candidate_edges(scores, quantile=0.75):
    """Admit off-diagonal edges whose score reaches the given quantile.

    The threshold is the linear-interpolation quantile of the off-diagonal
    scores; ties at the threshold are all admitted. Diagonal entries are
    never admitted. An all-zero score matrix yields an empty graph with a
    warning.
    """
    if not 0.0 <= quantile <= 1.0:
        raise ValueError("quantile must lie in [0, 1]")
    s = np.asarray(getattr(scores, "matrix", scores), dtype=np.float64)
    n = s.shape[0]
    off = ~np.eye(n, dtype=bool)
    variables = tuple(getattr(scores, "variables", range(n)))
    if not np.any(s[off] > 0.0):
        warnings.warn("all off-diagonal scores are zero; candidate graph is empty")
        return CandidateGraph(mask=np.zeros((n, n), dtype=bool), variables=variables)
    threshold = np.quantile(s[off], quantile)
    return CandidateGraph(mask=(s >= threshold) & off, variables=variables)


@dataclass(frozen=True)
class AblationProtocol:
    """How ablation refits and scores each candidate edge."""

    train_fraction: float = 0.8
    loss: str = "squared"        # or "absolute"
    order: int = 1
    kernel: KernelSpec = field(default_factory=KernelSpec)
    ridge: float = 1e-6
    mode: str = "pooled"

    def loss_fn(self, err):
        if self.loss == "squared":
            return err * err
        if self.loss == "absolute":
            return np.abs(err)
        raise ValueError(f"unknown loss {self.loss!r}")


@dataclass(frozen=True)
class LossDifferentialSeries:
    """Per-time ablated-minus-full loss on the held-out segment."""

    edge: tuple                   # (source, target) indices
    values: np.ndarray            # (T_eval,)
    loss: str
    baseline_mean: float          # mean full-model loss, for weighting

    @property
    def mean(self):
        return float(np.mean(self.values))


def _default_fitter(protocol):
    def fit(train, mask):
        return fit_tvnar(train, mask.astype(np.float64), order=protocol.order,
                         kernel=protocol.kernel, mode=protocol.mode,
                         ridge=protocol.ridge)
    return fit


def _one_step_losses(model, panel, boundary, protocol, target):
    """Per-time loss of teacher-forced one-step predictions of one target.

    Losses are averaged over countries at each held-out time, giving one
    series point per evaluation step. Scoring the ablated edge's target
    variable keeps the differential undiluted by the other equations.
    """
    p = model.order
    values = panel.values
    t_steps = panel.n_steps
    n_eval = t_steps - boundary
    out = np.empty(n_eval)
    for idx, col in enumerate(range(boundary, t_steps)):
        t_global = panel.t_start + col
        tau = min(t_global / panel.t_total, 1.0)
        lam = model.lambda_at(tau)
        pred = np.zeros(panel.n_countries)
        for lag in range(1, p + 1):
            coef = model.mask[target] * lam[lag - 1]
            pred += values[:, col - lag, :] @ coef
        losses = protocol.loss_fn(values[:, col, target] - pred)
        out[idx] = float(np.mean(losses))
    return out


def ablate_and_score(panel, graph, edge, fit_fn=None, protocol=None,
                     full_model=None):
    """Loss differential series of removing one candidate edge.

    The dynamic model is fit on the training segment once with the full
    candidate graph and once without ``edge`` (a (source, target) pair),
    everything else identical; both are scored by the one-step loss of the
    edge's target variable, averaged over countries, at each held-out
    time, and the series of ablated-minus-full losses is returned.
    A pre-fitted ``full_model`` (from the identical protocol) may be passed
    to avoid refitting it for every edge.
    """
    protocol = protocol or AblationProtocol()
    fit_fn = fit_fn or _default_fitter(protocol)
    j, i = edge
    if not graph.mask[i, j]:
        raise ValueError(f"edge {edge} not in the candidate graph")
    min_train = max(protocol.order + 1, 2)
    train, _ = split_panel(panel, SplitSpec(protocol.train_fraction, min_train))
    boundary = train.n_steps

    if full_model is None:
        try:
            full_model = fit_fn(train, graph.mask)
        except Exception as exc:
            raise EstimationError(f"full-graph fit failed: {exc}") from exc
    try:
        ablated = fit_fn(train, graph.without(edge).mask)
    except Exception as exc:
        raise EstimationError(f"ablated fit for edge {edge} failed: {exc}") from exc

    full_loss = _one_step_losses(full_model, panel, boundary, protocol, i)
    ablated_loss = _one_step_losses(ablated, panel, boundary, protocol, i)
    return LossDifferentialSeries(
        edge=(j, i),
        values=ablated_loss - full_loss,
        loss=protocol.loss,
        baseline_mean=float(np.mean(full_loss)),
    )


@dataclass(frozen=True)
class DmTestResult:
    """Diebold-Mariano comparison of two forecast loss series."""

    mean_diff: float
    long_run_variance: float
    statistic: float
    p_value: float
    truncation: int
    degenerate: bool = False


def dm_test(series, truncation=None):
    """One-sided Diebold-Mariano test on a loss differential series.

    The long-run variance uses Bartlett weights up to the truncation lag
    (default max(1, h - 1) = 1 for one-step losses); the statistic is
    mean / sqrt(V / T) against the standard normal upper tail. A zero-
    variance series is degenerate: p = 1 when the mean is zero ("no
    difference"), p = 0 otherwise.
    """
    d = np.asarray(getattr(series, "values", series), dtype=np.float64).ravel()
    t_eval = d.size
    if t_eval < 8:
        raise ValueError(f"need >= 8 loss differentials, got {t_eval}")
    m = 1 if truncation is None else int(truncation)
    if m < 0 or m >= t_eval:
        raise ValueError("truncation lag must lie in [0, T)")
    mean = float(np.mean(d))
    centered = d - mean
    gamma0 = float(centered @ centered) / t_eval
    lrv = gamma0
    for k in range(1, m + 1):
        gamma_k = float(centered[k:] @ centered[:-k]) / t_eval
        lrv += 2.0 * (1.0 - k / (m + 1.0)) * gamma_k
    lrv = max(lrv, 0.0)

    if lrv == 0.0:
        if mean == 0.0:
            return DmTestResult(mean, 0.0, 0.0, 1.0, m, degenerate=True)
        stat = np.inf if mean > 0 else -np.inf
        return DmTestResult(mean, 0.0, stat, 0.0 if mean > 0 else 1.0, m,
                            degenerate=True)

    stat = mean / np.sqrt(lrv / t_eval)
    return DmTestResult(mean, lrv, float(stat), float(stats.norm.sf(stat)), m)


@dataclass(frozen=True)
class EdgeRecord:
    source: int
    target: int
    score: float
    mean_diff: float
    p_value: float
    retained: bool
    weight: float


@dataclass(frozen=True)
class AdjacencyPrior:
    """Sparse weighted directed adjacency with per-edge provenance."""

    weights: np.ndarray
    variables: tuple
    records: tuple = ()

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64).copy()
        if np.any(np.diag(w) != 0.0):
            raise ValueError("prior diagonal must be zero")
        if np.any(w < 0.0) or not np.all(np.isfinite(w)):
            raise ValueError("prior weights must be finite and nonnegative")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "records", tuple(self.records))

    @property
    def n_edges(self):
        return int(np.count_nonzero(self.weights))


def build_prior(candidates, results, alpha=0.05, baseline_loss=None, scores=None):
    """Retain candidates whose removal significantly degrades forecasts.

    ``results`` maps each candidate (source, target) edge to its
    DmTestResult. An edge survives iff p < alpha and the mean differential
    is positive; its weight is mean differential / baseline loss, making
    weights comparable across edges as relative predictive necessity.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    n = candidates.mask.shape[0]
    score_m = None if scores is None else np.asarray(
        getattr(scores, "matrix", scores), dtype=np.float64
    )
    weights = np.zeros((n, n))
    records = []
    for j, i in candidates.edges:
        try:
            res = results[(j, i)]
        except KeyError:
            raise ValueError(f"no test result for candidate edge {(j, i)}") from None
        retained = bool(res.p_value < alpha and res.mean_diff > 0.0)
        weight = 0.0
        if retained:
            if baseline_loss is None or baseline_loss <= 0.0:
                raise ValueError("a positive baseline_loss is required for weights")
            weight = res.mean_diff / baseline_loss
            weights[i, j] = weight
        records.append(EdgeRecord(
            source=j, target=i,
            score=float(score_m[i, j]) if score_m is not None else np.nan,
            mean_diff=res.mean_diff, p_value=res.p_value,
            retained=retained, weight=weight,
        ))
    return AdjacencyPrior(weights=weights, variables=candidates.variables,
                          records=tuple(records))


@dataclass(frozen=True)
class CoherenceReport:
    """Normalized total variation of each fitted influence path."""

    normalized_tv: np.ndarray    # (p, N)
    threshold: float
    incoherent: bool


def coherence_screen(model, threshold=5.0):
    """Flag priors whose influence paths fluctuate erratically.

    For each lag and node, the total variation of the path across the grid
    is normalized by its max absolute value; the prior is flagged
    incoherent when any normalized total variation exceeds the threshold.
    The screen is advisory: it reports, it does not modify the prior.
    """
    tables = list(model.lam.values()) if isinstance(model.lam, dict) else [model.lam]
    if not tables or any(t.shape[0] == 0 for t in tables):
        raise ValueError("model has an empty influence path")
    ntv = np.zeros(tables[0].shape[1:])
    for lam in tables:
        tv = np.sum(np.abs(np.diff(lam, axis=0)), axis=0)
        peak = np.max(np.abs(lam), axis=0)
        one = np.where(peak > 0.0, tv / np.where(peak > 0.0, peak, 1.0), 0.0)
        ntv = np.maximum(ntv, one)
    return CoherenceReport(
        normalized_tv=ntv,
        threshold=threshold,
        incoherent=bool(np.any(ntv > threshold)),
    )


def build_structural_prior(panel, scores, quantile=0.75, alpha=0.05,
                           truncation=None, protocol=None, fit_fn=None):
    """Run candidate selection, per-edge ablation, and DM retention end to end.

    Edge weights are normalized by the full model's mean one-step loss
    pooled over all variables, so they are comparable across edges.
    """
    protocol = protocol or AblationProtocol()
    graph = candidate_edges(scores, quantile)
    if not graph.edges:
        return AdjacencyPrior(
            weights=np.zeros_like(graph.mask, dtype=np.float64),
            variables=graph.variables,
        )
    fitter = fit_fn or _default_fitter(protocol)
    min_train = max(protocol.order + 1, 2)
    train, _ = split_panel(panel, SplitSpec(protocol.train_fraction, min_train))
    try:
        full_model = fitter(train, graph.mask)
    except Exception as exc:
        raise EstimationError(f"full-graph fit failed: {exc}") from exc
    n = len(graph.variables)
    baseline = float(np.mean([
        _one_step_losses(full_model, panel, train.n_steps, protocol, i)
        for i in range(n)
    ]))
    results = {}
    for edge in graph.edges:
        series = ablate_and_score(panel, graph, edge, fit_fn=fit_fn,
                                  protocol=protocol, full_model=full_model)
        results[edge] = dm_test(series, truncation)
    return build_prior(graph, results, alpha=alpha, baseline_loss=baseline,
                       scores=scores)
