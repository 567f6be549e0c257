"""Balanced panel containers, loading, splitting, and lag designs.

A panel holds one series of identical length per country over a shared
variable set, stored as a dense (country, time, variable) array with no
missing values. Within-country time steps are mapped to a normalized index
tau = t / T so that series from different countries can be pooled on a
common (0, 1] scale. Splits produce views that keep the parent's global
time indexing, which is what makes pooled kernel smoothing and
train-versus-held-out evaluation line up without cross-country leakage.
"""

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .exceptions import PanelValidationError


@dataclass(frozen=True)
class PanelDataset:
    """Immutable balanced panel.

    Attributes
    ----------
    countries : tuple of str
        Country identifiers, lexicographically ordered.
    variables : tuple of str
        Variable names in header order.
    values : ndarray, shape (C, T, N)
        Dense float64 values; read-only.
    t_start : int
        Global step index (1-based) of the first stored time column. Views
        produced by :func:`split_panel` keep the parent's indexing.
    t_total : int
        Global series length; ``tau`` for column k is
        ``(t_start + k) / t_total``.
    """

    countries: tuple
    variables: tuple
    values: np.ndarray
    t_start: int = 1
    t_total: int = field(default=0)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 3:
            raise PanelValidationError("values must be (country, time, variable)")
        c, t, n = values.shape
        if c != len(self.countries) or n != len(self.variables):
            raise PanelValidationError("values shape does not match labels")
        if n < 1 or t < 1:
            raise PanelValidationError("panel needs at least 1 variable and 1 time step")
        if not np.all(np.isfinite(values)):
            raise PanelValidationError("panel contains non-finite values")
        object.__setattr__(self, "countries", tuple(self.countries))
        object.__setattr__(self, "variables", tuple(self.variables))
        if self.t_total == 0:
            object.__setattr__(self, "t_total", t)
        if self.t_start < 1 or self.t_start + t - 1 > self.t_total:
            raise PanelValidationError("time window exceeds the global index range")
        values = values.copy() if values.flags.writeable else values
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n_countries(self):
        return self.values.shape[0]

    @property
    def n_steps(self):
        return self.values.shape[1]

    @property
    def n_variables(self):
        return self.values.shape[2]

    @property
    def t_index(self):
        """Global (1-based) step index of every stored column."""
        return np.arange(self.t_start, self.t_start + self.n_steps)

    @property
    def tau(self):
        """Normalized time index of every stored column."""
        return self.t_index / self.t_total

    def country_index(self, country):
        try:
            return self.countries.index(country)
        except ValueError:
            raise KeyError(f"unknown country {country!r}") from None

    def series(self, country):
        """(T, N) value matrix of one country."""
        return self.values[self.country_index(country)]


@dataclass(frozen=True)
class SplitSpec:
    """Train/eval split at a common normalized position in every country."""

    train_fraction: float
    min_train_steps: int = 1

    def boundary(self, t_steps):
        if not 0.0 < self.train_fraction < 1.0:
            raise PanelValidationError(
                f"train_fraction must lie in (0, 1), got {self.train_fraction}"
            )
        b = int(np.floor(self.train_fraction * t_steps))
        if b < self.min_train_steps:
            raise PanelValidationError(
                f"train_fraction {self.train_fraction} leaves {b} training steps; "
                f"minimum fraction is {self.min_train_steps / t_steps:.4f}"
            )
        if b >= t_steps:
            raise PanelValidationError("split leaves an empty evaluation segment")
        return b


def load_panel(path, delimiter=",", country_col="country", time_col="year",
               variables=None, standardize=False):
    """Read a long-format delimited file into a validated PanelDataset.

    The file must have a header with a country column, a time column, and
    one column per variable (see docs/formats.md). Countries are ordered
    lexicographically; variables keep header order. Any missing cell or
    unbalanced country is rejected.

    ``standardize=True`` applies per-variable standardization over the whole
    panel (mean 0, sd 1); the default leaves values untouched.
    """
    frame = pd.read_csv(path, sep=delimiter, comment="#",
                        float_precision="round_trip")
    for col in (country_col, time_col):
        if col not in frame.columns:
            raise PanelValidationError(f"input file lacks required column {col!r}")
    if variables is None:
        variables = [c for c in frame.columns if c not in (country_col, time_col)]
    else:
        missing = [v for v in variables if v not in frame.columns]
        if missing:
            raise PanelValidationError(f"input file lacks variable columns {missing}")
    if not variables:
        raise PanelValidationError("no variable columns found")

    frame = frame[[country_col, time_col] + list(variables)]
    if frame.duplicated([country_col, time_col]).any():
        dup = frame[frame.duplicated([country_col, time_col])].iloc[0]
        raise PanelValidationError(
            f"duplicate observation for ({dup[country_col]}, {dup[time_col]})"
        )

    countries = sorted(frame[country_col].astype(str).unique())
    lengths = frame.groupby(country_col, sort=True).size()
    t_steps = int(lengths.iloc[0])
    if not (lengths == t_steps).all():
        bad = sorted(str(c) for c in lengths.index[lengths != t_steps])
        raise PanelValidationError(f"unbalanced panel; offending countries: {bad}")

    times = np.sort(frame[time_col].unique())
    if len(times) != t_steps:
        per_country = frame.groupby(country_col)[time_col].apply(set)
        common = set.intersection(*per_country)
        bad = sorted(
            str(c) for c, s in per_country.items() if s != set(times)
        )
        raise PanelValidationError(
            f"countries do not share one time grid (common steps: {len(common)}); "
            f"offending countries: {bad}"
        )
    if t_steps < 2:
        raise PanelValidationError("panel needs at least 2 time steps per country")

    frame = frame.sort_values([country_col, time_col], kind="mergesort")
    values = np.empty((len(countries), t_steps, len(variables)))
    for ci, country in enumerate(countries):
        block = frame[frame[country_col].astype(str) == country]
        mat = block[list(variables)].to_numpy(dtype=np.float64)
        nan_pos = np.argwhere(np.isnan(mat))
        if nan_pos.size:
            ti, vi = nan_pos[0]
            raise PanelValidationError(
                f"missing value at (country={country}, time={block[time_col].iloc[ti]}, "
                f"variable={variables[vi]})"
            )
        values[ci] = mat

    if standardize:
        mean = values.reshape(-1, len(variables)).mean(axis=0)
        sd = values.reshape(-1, len(variables)).std(axis=0, ddof=0)
        sd[sd == 0.0] = 1.0
        values = (values - mean) / sd

    return PanelDataset(tuple(countries), tuple(variables), values)


def save_panel(panel, path, delimiter=",", time_col="year", header_lines=()):
    """Write a panel in the long format understood by :func:`load_panel`.

    Values are written with shortest round-trip float formatting, so
    load(save(panel)) reproduces the array bit-for-bit. ``header_lines``
    are emitted as leading ``#`` comments.
    """
    with open(path, "w") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write(delimiter.join(["country", time_col, *panel.variables]) + "\n")
        t_index = panel.t_index
        for ci, country in enumerate(panel.countries):
            for k in range(panel.n_steps):
                cells = [country, str(int(t_index[k]))]
                cells.extend(repr(float(v)) for v in panel.values[ci, k])
                fh.write(delimiter.join(cells) + "\n")


def normalized_time(t, t_steps):
    """Normalized index tau = t / T for a 1-based step t in a length-T series."""
    if not 1 <= t <= t_steps:
        raise ValueError(f"t={t} outside the valid range 1..{t_steps}")
    return t / t_steps


def split_panel(panel, spec):
    """Split a panel into train and eval views at a shared boundary.

    The boundary is ``floor(train_fraction * T)`` in every country, so both
    views stay balanced and no evaluation time precedes the training
    boundary within any country. Views keep the parent's global time
    indexing; concatenating their values reconstructs the parent exactly.
    """
    if not isinstance(spec, SplitSpec):
        spec = SplitSpec(float(spec))
    b = spec.boundary(panel.n_steps)
    train = PanelDataset(panel.countries, panel.variables, panel.values[:, :b],
                         t_start=panel.t_start, t_total=panel.t_total)
    evaluation = PanelDataset(panel.countries, panel.variables, panel.values[:, b:],
                              t_start=panel.t_start + b, t_total=panel.t_total)
    return train, evaluation


@dataclass(frozen=True)
class LagDesign:
    """Stacked regression rows x_t ~ (x_{t-1}, ..., x_{t-L}) within countries.

    ``lags[r, k]`` holds the full variable vector k+1 steps before the
    target row r; rows never mix lags across countries.
    """

    lags_order: int
    targets: np.ndarray      # (R, N)
    lags: np.ndarray         # (R, L, N), index k = lag k+1
    country_idx: np.ndarray  # (R,)
    t: np.ndarray            # (R,) global step of the target
    tau: np.ndarray          # (R,)
    countries: tuple
    variables: tuple

    @property
    def n_rows(self):
        return self.targets.shape[0]


def build_lag_design(panel, lag_order):
    """Build the pooled lag design of a panel for a given lag order.

    Rows exist only for target steps with a complete in-country lag window,
    giving C * (T - L) rows in a balanced panel.
    """
    if lag_order < 1:
        raise ValueError("lag order must be >= 1")
    c, t_steps, n = panel.values.shape
    if t_steps <= lag_order:
        raise PanelValidationError(
            f"series length {t_steps} does not exceed lag order {lag_order}"
        )
    rows = t_steps - lag_order
    targets = np.empty((c * rows, n))
    lags = np.empty((c * rows, lag_order, n))
    country_idx = np.repeat(np.arange(c), rows)
    t_global = np.tile(panel.t_index[lag_order:], c)
    for ci in range(c):
        block = slice(ci * rows, (ci + 1) * rows)
        targets[block] = panel.values[ci, lag_order:]
        for k in range(lag_order):
            lags[block, k] = panel.values[ci, lag_order - 1 - k:t_steps - 1 - k]
    targets.setflags(write=False)
    lags.setflags(write=False)
    return LagDesign(
        lags_order=lag_order,
        targets=targets,
        lags=lags,
        country_idx=country_idx,
        t=t_global,
        tau=t_global / panel.t_total,
        countries=panel.countries,
        variables=panel.variables,
    )
