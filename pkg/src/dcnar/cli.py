"""Command-line pipeline: simulate, discover, prior, fit-analyze, evaluate.

One command is one process; every output file carries the configuration
hash and seed in its header, and runs with identical configuration are
byte-identical. Exit codes: 0 success, 2 configuration error, 3 data
validation error, 4 numerical failure, 1 anything unexpected.
"""

import argparse
import json
import os
import sys
import traceback

import numpy as np

from . import analysis, baselines, io, metrics, synth
from .config import RunConfig
from .discovery import causal_scores, fit_navar
from .exceptions import (ConfigError, DcnarError, EstimationError,
                         ExplosiveTrajectoryError, PanelValidationError,
                         TrainingError)
from .panel import SplitSpec, build_lag_design, load_panel, save_panel, split_panel
from .prior import build_structural_prior, coherence_screen
from .tvnar import fit_tvnar, stability_report

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _parser():
    parser = argparse.ArgumentParser(
        prog="dcnar",
        description="Two-stage dynamic causal network autoregression pipeline.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in [
        ("simulate", "generate a synthetic panel with known ground truth"),
        ("discover", "fit the additive discovery model and export causal scores"),
        ("prior", "select the structural prior via edge ablation"),
        ("fit-analyze", "fit dynamics, run causal analysis, fit baselines, score"),
        ("evaluate", "recompute forecast metrics for a saved model"),
    ]:
        cmd = sub.add_parser(name, help=helptext)
        cmd.add_argument("--config", required=True, help="path to the YAML run file")
        cmd.add_argument("--seed", type=int, default=None,
                         help="override the configured master seed")
        cmd.add_argument("--output-dir", default=None,
                         help="override the configured output directory")
        if name in ("fit-analyze", "evaluate"):
            cmd.add_argument("--baselines", default=None,
                             help="comma-separated subset of ridge,tvvar,lstm "
                                  "or 'none'")
    return parser


def _load_config(args):
    cfg = RunConfig.from_file(args.config)
    if args.seed is not None:
        cfg.seed = int(args.seed)
    if args.output_dir is not None:
        cfg.output_dir = args.output_dir
    elif os.environ.get("DCNAR_OUTPUT_DIR"):
        cfg.output_dir = os.environ["DCNAR_OUTPUT_DIR"]
    os.makedirs(cfg.output_dir, exist_ok=True)
    return cfg


def _out(cfg, name):
    return os.path.join(cfg.output_dir, name)


def _load_data(cfg):
    data = cfg.data_spec()
    return load_panel(
        data["path"],
        delimiter=data.get("delimiter", ","),
        country_col=data.get("country_col", "country"),
        time_col=data.get("time_col", "year"),
        standardize=bool(data.get("standardize", False)),
    )


def cmd_simulate(cfg):
    spec = cfg.simulate_spec()
    panel, truth = synth.generate_panel(spec)
    save_panel(panel, _out(cfg, "panel.csv"), header_lines=cfg.header_lines())
    payload = {
        "config_hash": cfg.digest(),
        "seed": cfg.seed,
        "truth": json.loads(truth.to_json()),
    }
    with open(_out(cfg, "truth.json"), "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")
    print(f"wrote {_out(cfg, 'panel.csv')} and truth.json "
          f"({panel.n_countries} countries x {panel.n_steps} steps "
          f"x {panel.n_variables} variables)")
    return EXIT_OK


def _train_segment(cfg, panel, min_train):
    fraction = float(cfg.section("prior").get("train_fraction", 0.8))
    train, _ = split_panel(panel, SplitSpec(fraction, min_train))
    return train


def cmd_discover(cfg):
    panel = _load_data(cfg)
    dconf = cfg.discovery_config()
    train = _train_segment(cfg, panel, dconf.lags + 1)
    model = fit_navar(train, dconf)
    design = build_lag_design(train, dconf.lags)
    scores = causal_scores(model, design)
    header = cfg.header_lines()
    io.write_score_matrix(_out(cfg, "scores.csv"), scores, header)
    io.write_score_edges(_out(cfg, "scores_edges.csv"), scores, header)
    io.write_training_log(_out(cfg, "training_log.csv"), model.loss_history, header)
    print(f"wrote {_out(cfg, 'scores.csv')} "
          f"(final training loss {model.loss_history[-1]:.6g})")
    return EXIT_OK


def cmd_prior(cfg):
    panel = _load_data(cfg)
    scores_path = cfg.raw.get("scores_path", _out(cfg, "scores.csv"))
    try:
        scores = io.read_score_matrix(scores_path)
    except FileNotFoundError:
        raise ConfigError(f"score matrix not found: {scores_path}") from None
    except (ValueError, IndexError) as exc:
        raise PanelValidationError(
            f"malformed score matrix {scores_path}: {exc}"
        ) from None
    if scores.matrix.shape[0] != panel.n_variables:
        raise PanelValidationError(
            f"score matrix has {scores.matrix.shape[0]} variables; "
            f"panel has {panel.n_variables}"
        )
    settings = cfg.prior_settings()
    prior = build_structural_prior(
        panel, scores,
        quantile=settings["quantile"], alpha=settings["alpha"],
        truncation=settings["truncation"], protocol=settings["protocol"],
    )
    io.write_prior_edges(_out(cfg, "prior_edges.csv"), prior, cfg.header_lines())
    print(f"wrote {_out(cfg, 'prior_edges.csv')} "
          f"({prior.n_edges} edges retained of {len(prior.records)} candidates)")
    return EXIT_OK


def _fit_models(cfg, train, names):
    fitted = {}
    tv = cfg.tvnar_settings()
    if "ridge" in names:
        fitted["ridge_var"] = baselines.fit_ridge_var(
            train, ridge=float(cfg.section("ridge_var").get("ridge", 0.1))
        )
    if "tvvar" in names:
        fitted["tvvar"] = baselines.fit_tvvar(
            train,
            kernel=cfg.tvnar_kernel("tvvar"),
            ridge=float(cfg.section("tvvar").get("ridge", 0.1)),
        )
    if "lstm" in names:
        fitted["lstm"] = baselines.fit_lstm(train, cfg.lstm_config())
    return fitted


def _metric_sets(model, panel, boundary_t, horizons, n_samples, seed):
    """Keyed ensembles and matched actuals over rolling eval origins."""
    ensembles = {}
    observations = {}
    rng = np.random.default_rng(seed)
    t_last = int(panel.t_index[-1])
    origins = range(boundary_t, t_last - horizons + 1)
    t0_col = {int(t): k for k, t in enumerate(panel.t_index)}
    for ci, country in enumerate(panel.countries):
        for t0 in origins:
            history = panel.values[ci, :t0_col[t0] + 1, :]
            ens = model.forecast(history, t0, horizons, n_samples,
                                 int(rng.integers(2 ** 63)))
            key = (country, t0)
            ensembles[key] = ens
            cols = slice(t0_col[t0] + 1, t0_col[t0] + 1 + horizons)
            observations[key] = panel.values[ci, cols, :]
    return ensembles, observations


def _evaluate_models(cfg, models, panel, boundary_t):
    fc = cfg.forecast_settings()
    rows = []
    for mi, (name, model) in enumerate(sorted(models.items())):
        ens, obs = _metric_sets(model, panel, boundary_t, fc["horizons"],
                                fc["n_samples"], cfg.seed + 1000 + mi)
        crps_rep = metrics.crps_multi_horizon(ens, obs, label=name)
        cov_rep = metrics.interval_coverage(
            ens, obs, metrics.IntervalSpec(fc["alpha"]), label=name
        )
        eval_times = [int(t) for t in panel.t_index if t > boundary_t]
        local = metrics.local_crps(model, panel, eval_times,
                                   n_samples=fc["n_samples"],
                                   seed=cfg.seed + 2000 + mi)
        rows.extend(crps_rep.rows())
        rows.extend(cov_rep.rows())
        rows.append((name, 1, "local_crps", local,
                     len(eval_times) * panel.n_countries * panel.n_variables))
    return rows


def cmd_fit_analyze(cfg, baseline_override=None):
    panel = _load_data(cfg)
    prior_path = cfg.raw.get("prior_path", _out(cfg, "prior_edges.csv"))
    try:
        prior = io.read_prior_edges(prior_path, panel.variables)
    except FileNotFoundError:
        raise ConfigError(f"prior edge list not found: {prior_path}") from None

    fc = cfg.forecast_settings()
    tv = cfg.tvnar_settings()
    min_train = max(tv["order"] + 1, cfg.lstm_config().lags + 1)
    train, evaluation = split_panel(panel, SplitSpec(fc["train_fraction"], min_train))
    boundary_t = int(train.t_index[-1])

    model = fit_tvnar(train, prior, order=tv["order"], kernel=tv["kernel"],
                      mode=tv["mode"], ridge=tv["ridge"])
    header = cfg.header_lines()
    io.save_tvnar(_out(cfg, "model.json"), model,
                  meta={"config_hash": cfg.digest(), "seed": cfg.seed})
    io.write_lambda_paths(_out(cfg, "lambda_paths.csv"), model, header)
    io.write_stability(_out(cfg, "stability.csv"), stability_report(model), header)
    screen = coherence_screen(model)
    if screen.incoherent:
        print("warning: coherence screen flagged erratic influence paths "
              f"(max normalized TV {screen.normalized_tv.max():.2f})")

    irf_cfg = cfg.section("irf")
    h_irf = int(irf_cfg.get("horizons", 10))
    t0 = int(irf_cfg.get("origin") or boundary_t)
    irf = analysis.impulse_response(
        model, t0, h_irf,
        country=model.countries[0] if model.mode == "per-country" else None,
    )
    io.write_irf(_out(cfg, "irf.csv"), irf, header)

    iv_cfg = cfg.section("intervention")
    variable = iv_cfg.get("variable", panel.variables[0])
    intervention = analysis.Intervention(
        variable=variable,
        magnitude=iv_cfg.get("magnitude"),
        onset=int(iv_cfg.get("onset", 1)),
        duration=(None if iv_cfg.get("duration") in (None, "sustained")
                  else int(iv_cfg.get("duration", 1))),
        sign=int(iv_cfg.get("sign", 1)),
    )
    h_cf = int(iv_cfg.get("horizons", h_irf))
    results, entries = [], []
    boundary_col = train.n_steps
    for ci, country in enumerate(panel.countries):
        init = panel.values[ci, boundary_col - tv["order"]:boundary_col][::-1]
        res = analysis.counterfactual(
            model, init, intervention, h_cf, boundary_t,
            country=country if model.mode == "per-country" else None,
        )
        if res.country is None:
            res = analysis.CounterfactualResult(
                baseline=res.baseline, counterfactual=res.counterfactual,
                origin=res.origin, variables=res.variables,
                intervention=res.intervention, country=country,
            )
        response = analysis.response_magnitude(res)
        norms = np.linalg.norm(res.baseline, axis=1)
        normalized = (analysis.normalized_response(res)
                      if np.all(norms > 0.0) else None)
        results.append(res)
        entries.append((res, response, normalized))
    io.write_counterfactual(_out(cfg, "counterfactual.csv"), results, header)
    io.write_response(_out(cfg, "response.csv"), entries, header)

    names = cfg.baseline_names()
    if baseline_override is not None:
        names = ([] if baseline_override == "none"
                 else [s.strip() for s in baseline_override.split(",") if s.strip()])
    models = {"dcnar": model}
    models.update(_fit_models(cfg, train, names))
    rows = _evaluate_models(cfg, models, panel, boundary_t)
    io.write_metric_rows(_out(cfg, "metrics.csv"), rows, header)
    print(f"wrote model.json, lambda_paths.csv, irf.csv, counterfactual.csv, "
          f"response.csv, stability.csv, metrics.csv in {cfg.output_dir}")
    return EXIT_OK


def cmd_evaluate(cfg, baseline_override=None):
    panel = _load_data(cfg)
    model_path = cfg.raw.get("model_path", _out(cfg, "model.json"))
    try:
        model = io.load_tvnar(model_path)
    except FileNotFoundError:
        raise ConfigError(f"model file not found: {model_path}") from None
    fc = cfg.forecast_settings()
    min_train = max(model.order + 1, 2)
    train, _ = split_panel(panel, SplitSpec(fc["train_fraction"], min_train))
    boundary_t = int(train.t_index[-1])
    names = cfg.baseline_names() if baseline_override is None else (
        [] if baseline_override == "none"
        else [s.strip() for s in baseline_override.split(",") if s.strip()]
    )
    models = {"dcnar": model}
    models.update(_fit_models(cfg, train, names))
    rows = _evaluate_models(cfg, models, panel, boundary_t)
    io.write_metric_rows(_out(cfg, "metrics.csv"), rows, cfg.header_lines())
    print(f"wrote {_out(cfg, 'metrics.csv')}")
    return EXIT_OK


_COMMANDS = {
    "simulate": cmd_simulate,
    "discover": cmd_discover,
    "prior": cmd_prior,
    "fit-analyze": cmd_fit_analyze,
    "evaluate": cmd_evaluate,
}


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        cfg = _load_config(args)
        handler = _COMMANDS[args.command]
        if args.command in ("fit-analyze", "evaluate"):
            return handler(cfg, baseline_override=getattr(args, "baselines", None))
        return handler(cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PanelValidationError as exc:
        print(f"data validation error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (EstimationError, TrainingError, ExplosiveTrajectoryError,
            np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except DcnarError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNEXPECTED
    except Exception:
        traceback.print_exc()
        return EXIT_UNEXPECTED


def entry():
    sys.exit(main())
