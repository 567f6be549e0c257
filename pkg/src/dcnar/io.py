"""Delimited-text and JSON artifact formats.

Every writer takes ``header_lines`` that are emitted as leading ``#``
comments (the CLI puts the config hash and seed there), and floats are
written with shortest round-trip formatting so re-reading reproduces the
exact doubles. docs/formats.md describes each schema.
"""

import json

import numpy as np

from .discovery import CausalScoreMatrix
from .prior import AdjacencyPrior, EdgeRecord
from .tvnar import KernelSpec, TvNarModel


def _open_write(path, header_lines):
    fh = open(path, "w")
    for line in header_lines:
        fh.write(f"# {line}\n")
    return fh


def _fmt(value):
    return repr(float(value))


# -- score matrices ----------------------------------------------------------

def write_score_matrix(path, scores, header_lines=()):
    """Matrix layout: one row per target, one column per source."""
    with _open_write(path, header_lines) as fh:
        fh.write("target," + ",".join(scores.variables) + "\n")
        for i, name in enumerate(scores.variables):
            cells = [name] + [_fmt(v) for v in scores.matrix[i]]
            fh.write(",".join(cells) + "\n")


def read_score_matrix(path):
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if not ln.startswith("#")]
    variables = tuple(lines[0].split(",")[1:])
    matrix = np.array(
        [[float(c) for c in ln.split(",")[1:]] for ln in lines[1:]]
    )
    return CausalScoreMatrix(matrix=matrix, variables=variables)


def write_score_edges(path, scores, header_lines=()):
    """Edge-list layout: source, target, score for every directed pair."""
    with _open_write(path, header_lines) as fh:
        fh.write("source,target,score\n")
        for i, target in enumerate(scores.variables):
            for j, source in enumerate(scores.variables):
                fh.write(f"{source},{target},{_fmt(scores.matrix[i, j])}\n")


# -- adjacency priors --------------------------------------------------------

def write_prior_edges(path, prior, header_lines=()):
    """Full provenance per candidate edge; re-importable."""
    with _open_write(path, header_lines) as fh:
        fh.write("source,target,weight,score,mean_diff,p_value,retained\n")
        for rec in prior.records:
            fh.write(",".join([
                prior.variables[rec.source],
                prior.variables[rec.target],
                _fmt(rec.weight),
                _fmt(rec.score),
                _fmt(rec.mean_diff),
                _fmt(rec.p_value),
                str(int(rec.retained)),
            ]) + "\n")


def read_prior_edges(path, variables):
    variables = tuple(variables)
    index = {v: k for k, v in enumerate(variables)}
    n = len(variables)
    weights = np.zeros((n, n))
    records = []
    with open(path) as fh:
        rows = [ln.rstrip("\n") for ln in fh if not ln.startswith("#")]
    for ln in rows[1:]:
        source, target, weight, score, mean_diff, p_value, retained = ln.split(",")
        j, i = index[source], index[target]
        rec = EdgeRecord(
            source=j, target=i, score=float(score), mean_diff=float(mean_diff),
            p_value=float(p_value), retained=bool(int(retained)),
            weight=float(weight),
        )
        if rec.retained:
            weights[i, j] = rec.weight
        records.append(rec)
    return AdjacencyPrior(weights=weights, variables=variables,
                          records=tuple(records))


# -- fitted dynamic models ---------------------------------------------------

def save_tvnar(path, model, meta=None):
    """Single self-describing JSON file for exact reload."""
    lam = model.lam
    residuals = model.residuals
    payload = {
        "meta": meta or {},
        "prior_weights": model.prior_weights.tolist(),
        "order": model.order,
        "kernel": {"bandwidth": model.kernel.bandwidth,
                   "grid_size": model.kernel.grid_size},
        "mode": model.mode,
        "grid": model.grid.tolist(),
        "lam": ({c: v.tolist() for c, v in lam.items()}
                if isinstance(lam, dict) else lam.tolist()),
        "residuals": ({c: v.tolist() for c, v in residuals.items()}
                      if isinstance(residuals, dict) else residuals.tolist()),
        "t_total": model.t_total,
        "countries": list(model.countries),
        "variables": list(model.variables),
        "ridge": model.ridge,
        "train_std": model.train_std.tolist(),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_tvnar(path):
    with open(path) as fh:
        d = json.load(fh)
    lam = d["lam"]
    residuals = d["residuals"]
    if d["mode"] == "per-country":
        lam = {c: np.array(v) for c, v in lam.items()}
        residuals = {c: np.array(v) for c, v in residuals.items()}
    else:
        lam = np.array(lam)
        residuals = np.array(residuals)
    return TvNarModel(
        prior_weights=np.array(d["prior_weights"]),
        order=d["order"],
        kernel=KernelSpec(bandwidth=d["kernel"]["bandwidth"],
                          grid_size=d["kernel"]["grid_size"]),
        mode=d["mode"],
        grid=np.array(d["grid"]),
        lam=lam,
        residuals=residuals,
        t_total=d["t_total"],
        countries=tuple(d["countries"]),
        variables=tuple(d["variables"]),
        ridge=d["ridge"],
        train_std=np.array(d["train_std"]),
    )


def write_lambda_paths(path, model, header_lines=()):
    """Long format: lag, node, tau, value (plus country in per-country mode)."""
    per_country = isinstance(model.lam, dict)
    with _open_write(path, header_lines) as fh:
        if per_country:
            fh.write("country,lag,node,tau,value\n")
            for country, table in model.lam.items():
                _write_lam_rows(fh, model, table, prefix=f"{country},")
        else:
            fh.write("lag,node,tau,value\n")
            _write_lam_rows(fh, model, model.lam, prefix="")


def _write_lam_rows(fh, model, table, prefix):
    for k in range(model.order):
        for j, node in enumerate(model.variables):
            for gi, tau in enumerate(model.grid):
                fh.write(f"{prefix}{k + 1},{node},{_fmt(tau)},"
                         f"{_fmt(table[gi, k, j])}\n")


# -- analysis outputs --------------------------------------------------------

def write_irf(path, irf, header_lines=()):
    """Long format: origin, horizon, target, source, value."""
    with _open_write(path, header_lines) as fh:
        fh.write("origin,horizon,target,source,value\n")
        for h in range(irf.psi.shape[0]):
            for i, target in enumerate(irf.variables):
                for j, source in enumerate(irf.variables):
                    fh.write(f"{irf.origin},{h},{target},{source},"
                             f"{_fmt(irf.psi[h, i, j])}\n")


def write_counterfactual(path, results, header_lines=()):
    """Paired baseline and intervened paths, one row per (country, t, variable)."""
    with _open_write(path, header_lines) as fh:
        fh.write("country,t,variable,baseline,counterfactual\n")
        for result in results:
            country = result.country or ""
            for h in range(result.baseline.shape[0]):
                t = result.origin + h
                for i, name in enumerate(result.variables):
                    fh.write(f"{country},{t},{name},"
                             f"{_fmt(result.baseline[h, i])},"
                             f"{_fmt(result.counterfactual[h, i])}\n")


def write_response(path, entries, header_lines=()):
    """Companion response magnitudes per (country, t).

    ``entries`` is a list of (result, response, normalized_or_None).
    """
    with _open_write(path, header_lines) as fh:
        fh.write("country,t,response,normalized_response\n")
        for result, response, normalized in entries:
            country = result.country or ""
            for h in range(len(response)):
                norm = "" if normalized is None else _fmt(normalized[h])
                fh.write(f"{country},{result.origin + h},"
                         f"{_fmt(response[h])},{norm}\n")


def write_stability(path, report, header_lines=()):
    with _open_write(path, header_lines) as fh:
        if isinstance(report.radius, dict):
            fh.write("country,tau,radius,flagged\n")
            for country, radii in report.radius.items():
                for gi, tau in enumerate(report.grid):
                    fh.write(f"{country},{_fmt(tau)},{_fmt(radii[gi])},"
                             f"{int(report.flagged[country][gi])}\n")
        else:
            fh.write("tau,radius,flagged\n")
            for gi, tau in enumerate(report.grid):
                fh.write(f"{_fmt(tau)},{_fmt(report.radius[gi])},"
                         f"{int(report.flagged[gi])}\n")


def write_metric_rows(path, rows, header_lines=()):
    """Tidy metric table: model, horizon, metric, value, n."""
    with _open_write(path, header_lines) as fh:
        fh.write("model,horizon,metric,value,n\n")
        for model, horizon, metric, value, n in rows:
            fh.write(f"{model},{horizon},{metric},{_fmt(value)},{n}\n")


def write_training_log(path, loss_history, header_lines=()):
    with _open_write(path, header_lines) as fh:
        fh.write("epoch,loss\n")
        for epoch, loss in enumerate(loss_history):
            fh.write(f"{epoch},{_fmt(loss)}\n")
