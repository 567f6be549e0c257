"""Run configuration: one YAML file drives every pipeline command.

The parsed mapping is hashed (sha256 of its canonical JSON form) and the
hash plus the effective seed are stamped into every output file, so two
runs from the same configuration are byte-identical and artifacts can be
traced back to their settings. Only the output directory may be overridden
from the environment-free command line; there is no other out-of-band
configuration.
"""

import hashlib
import json

import yaml

from .baselines import LstmConfig
from .discovery import DiscoveryConfig
from .exceptions import ConfigError
from .prior import AblationProtocol
from .tvnar import KernelSpec

_KNOWN_SECTIONS = {
    "output_dir", "seed", "data", "simulate", "discovery", "prior", "tvnar",
    "baselines", "ridge_var", "tvvar", "lstm", "forecast", "intervention",
    "irf", "scores_path", "prior_path", "model_path",
}


class RunConfig:
    """Validated view over the configuration mapping."""

    def __init__(self, raw, path=None):
        if not isinstance(raw, dict):
            raise ConfigError("configuration must be a mapping")
        unknown = set(raw) - _KNOWN_SECTIONS
        if unknown:
            raise ConfigError(f"unknown configuration sections: {sorted(unknown)}")
        self.raw = raw
        self.path = path
        self.seed = int(raw.get("seed", 0))
        self.output_dir = raw.get("output_dir", "out")

    @classmethod
    def from_file(cls, path):
        try:
            with open(path) as fh:
                raw = yaml.safe_load(fh)
        except FileNotFoundError:
            raise ConfigError(f"configuration file not found: {path}") from None
        except yaml.YAMLError as exc:
            raise ConfigError(f"malformed configuration: {exc}") from None
        return cls(raw or {}, path=path)

    def digest(self):
        """Stable short hash of the effective configuration (seed included)."""
        effective = dict(self.raw)
        effective["seed"] = self.seed
        blob = json.dumps(effective, sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:12]

    def header_lines(self):
        return (f"config_hash={self.digest()}", f"seed={self.seed}")

    def section(self, name, default=None):
        value = self.raw.get(name, default if default is not None else {})
        if not isinstance(value, dict):
            raise ConfigError(f"section {name!r} must be a mapping")
        return value

    def require(self, name):
        if name not in self.raw:
            raise ConfigError(f"configuration section {name!r} is required")
        return self.raw[name]

    # -- typed accessors -------------------------------------------------

    def data_spec(self):
        data = self.section("data")
        if "path" not in data:
            raise ConfigError("data.path is required for this command")
        return data

    def discovery_config(self):
        d = self.section("discovery")
        try:
            return DiscoveryConfig(
                lags=int(d.get("lags", 8)),
                hidden=int(d.get("hidden", 16)),
                learning_rate=float(d.get("learning_rate", 0.02)),
                epochs=int(d.get("epochs", 2000)),
                batch_size=int(d.get("batch_size", 64)),
                l1=float(d.get("l1", 0.1)),
                weight_decay=float(d.get("weight_decay", 1e-4)),
                seed=self.seed,
            )
        except ValueError as exc:
            raise ConfigError(f"invalid discovery settings: {exc}") from None

    def tvnar_kernel(self, section="tvnar"):
        d = self.section(section)
        try:
            return KernelSpec(bandwidth=float(d.get("bandwidth", 0.2)),
                              grid_size=int(d.get("grid_size", 25)))
        except ValueError as exc:
            raise ConfigError(f"invalid {section} kernel: {exc}") from None

    def tvnar_settings(self):
        d = self.section("tvnar")
        mode = d.get("mode", "pooled")
        if mode not in ("pooled", "per-country"):
            raise ConfigError(f"tvnar.mode must be pooled or per-country, got {mode!r}")
        return {
            "order": int(d.get("order", 1)),
            "kernel": self.tvnar_kernel(),
            "ridge": float(d.get("ridge", 1e-6)),
            "mode": mode,
        }

    def ablation_protocol(self):
        d = self.section("prior")
        tv = self.tvnar_settings()
        try:
            return AblationProtocol(
                train_fraction=float(d.get("train_fraction", 0.8)),
                loss=d.get("loss", "squared"),
                order=tv["order"],
                kernel=tv["kernel"],
                ridge=tv["ridge"],
                mode="pooled",
            )
        except ValueError as exc:
            raise ConfigError(f"invalid prior settings: {exc}") from None

    def prior_settings(self):
        d = self.section("prior")
        alpha = float(d.get("alpha", 0.05))
        if not 0.0 < alpha < 1.0:
            raise ConfigError(f"prior.alpha must lie in (0, 1), got {alpha}")
        return {
            "quantile": float(d.get("quantile", 0.75)),
            "alpha": alpha,
            "truncation": d.get("truncation"),
            "protocol": self.ablation_protocol(),
        }

    def baseline_names(self):
        value = self.raw.get("baselines", ["ridge", "tvvar", "lstm"])
        if value in (None, "none", []):
            return []
        if not isinstance(value, list):
            raise ConfigError("baselines must be a list of names or 'none'")
        known = {"ridge", "tvvar", "lstm"}
        bad = set(value) - known
        if bad:
            raise ConfigError(f"unknown baselines: {sorted(bad)}")
        return list(value)

    def lstm_config(self):
        d = self.section("lstm")
        try:
            return LstmConfig(
                hidden=int(d.get("hidden", 32)),
                lags=int(d.get("lags", 8)),
                dropout=float(d.get("dropout", 0.1)),
                epochs=int(d.get("epochs", 200)),
                learning_rate=float(d.get("learning_rate", 0.01)),
                batch_size=int(d.get("batch_size", 32)),
                seed=self.seed,
            )
        except ValueError as exc:
            raise ConfigError(f"invalid lstm settings: {exc}") from None

    def forecast_settings(self):
        d = self.section("forecast")
        return {
            "train_fraction": float(d.get("train_fraction", 0.8)),
            "horizons": int(d.get("horizons", 5)),
            "n_samples": int(d.get("n_samples", 200)),
            "alpha": float(d.get("alpha", 0.10)),
        }

    def simulate_spec(self):
        from .synth import GeneratorSpec, PathSpec

        d = self.section("simulate")
        for key in ("n_variables", "n_countries", "t_steps"):
            if key not in d:
                raise ConfigError(f"simulate.{key} is required")
        n = int(d["n_variables"])
        adjacency = _build_adjacency(n, d.get("edges", []))
        raw_paths = d.get("paths", [{"kind": "constant", "a": 0.5}])
        paths = []
        for lag_entry in raw_paths:
            if isinstance(lag_entry, dict):
                paths.append(tuple(PathSpec(**lag_entry) for _ in range(n)))
            else:
                if len(lag_entry) != n:
                    raise ConfigError(
                        f"simulate.paths entries must give one path per variable ({n})"
                    )
                paths.append(tuple(PathSpec(**p) for p in lag_entry))
        try:
            return GeneratorSpec(
                adjacency=adjacency,
                paths=tuple(paths),
                noise_std=d.get("noise_std", 1.0),
                n_countries=int(d["n_countries"]),
                t_steps=int(d["t_steps"]),
                burn_in=int(d.get("burn_in", 200)),
                seed=self.seed,
            )
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"invalid simulate settings: {exc}") from None


def _build_adjacency(n, edges):
    import numpy as np

    adjacency = np.zeros((n, n))
    for entry in edges:
        if len(entry) not in (2, 3):
            raise ConfigError(
                "simulate.edges entries must be [source, target] or "
                "[source, target, weight]"
            )
        j, i = int(entry[0]), int(entry[1])
        w = float(entry[2]) if len(entry) == 3 else 1.0
        if not (0 <= j < n and 0 <= i < n) or i == j:
            raise ConfigError(f"edge {entry} is out of range or a self-loop")
        adjacency[i, j] = w
    return adjacency
