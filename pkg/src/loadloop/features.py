"""Feature construction: calendar encodings, temperature and load lags,
interaction terms, sequence inputs, and design matrix assembly.

Correlation-based selections are fitted on the training range and reused
frozen for validation and test assembly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .dataset import CleanDataset, TaskSpec

CALENDAR_MODES = ("none", "numerical", "categorical", "trigonometric")
SELECT_MODES = ("none", "correlation")
LOAD_LAG_MODES = ("none", "correlation", "fixed")
SEQUENCE_FREQUENCIES = (1, 2, 3, 4, 6, 12, 24)

# uniform per-origin history requirement (hours), matching the longest lag family
BASE_LOOKBACK = 168
TEMP_LOOKBACK = 72


class FeatureError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureConfig:
    """One point in the feature-construction search space."""

    calendar: str = "none"
    temp_lags: str = "none"
    temp_top_ratio: float = 1.0
    interaction: str = "none"
    load_lags: Optional[str] = "none"        # regression model families
    load_top_ratio: float = 1.0
    seq_frequency: Optional[int] = None      # sequence model families
    seq_length: Optional[int] = None
    other_features: str = "none"
    other_top_ratio: float = 1.0

    def validate(self) -> None:
        if self.calendar not in CALENDAR_MODES:
            raise FeatureError(f"unknown calendar mode {self.calendar!r}")
        if self.temp_lags not in SELECT_MODES:
            raise FeatureError(f"unknown temp_lags mode {self.temp_lags!r}")
        if self.interaction not in ("none", "all"):
            raise FeatureError(f"unknown interaction mode {self.interaction!r}")
        if self.other_features not in SELECT_MODES:
            raise FeatureError(f"unknown other_features mode {self.other_features!r}")
        uses_sequence = self.seq_frequency is not None or self.seq_length is not None
        uses_lags = self.load_lags is not None
        if uses_sequence == uses_lags:
            raise FeatureError("exactly one of load_lags / sequence must be active")
        if uses_lags and self.load_lags not in LOAD_LAG_MODES:
            raise FeatureError(f"unknown load_lags mode {self.load_lags!r}")
        if uses_sequence:
            if self.seq_frequency not in SEQUENCE_FREQUENCIES:
                raise FeatureError(f"sequence frequency {self.seq_frequency} not in {SEQUENCE_FREQUENCIES}")
            if not (1 <= int(self.seq_length) <= 24):
                raise FeatureError("sequence length must lie in [1, 24]")
        for mode, ratio, name in (
            (self.temp_lags, self.temp_top_ratio, "temp_top_ratio"),
            (self.load_lags or "none", self.load_top_ratio, "load_top_ratio"),
            (self.other_features, self.other_top_ratio, "other_top_ratio"),
        ):
            if mode == "correlation" and not (0.0 <= ratio <= 1.0):
                raise FeatureError(f"{name} must lie in [0, 1]")

    def lookback_hours(self) -> int:
        if self.seq_frequency is not None:
            return max(BASE_LOOKBACK, int(self.seq_frequency) * int(self.seq_length))
        return BASE_LOOKBACK

    def to_dict(self) -> dict:
        d = {
            "calendar": self.calendar,
            "temp_lags": self.temp_lags,
            "interaction": self.interaction,
            "other_features": self.other_features,
        }
        if self.temp_lags == "correlation":
            d["temp_top_ratio"] = self.temp_top_ratio
        if self.other_features == "correlation":
            d["other_top_ratio"] = self.other_top_ratio
        if self.load_lags is not None:
            d["load_lags"] = self.load_lags
            if self.load_lags == "correlation":
                d["load_top_ratio"] = self.load_top_ratio
        else:
            d["seq_frequency"] = self.seq_frequency
            d["seq_length"] = self.seq_length
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureConfig":
        cfg = cls(
            calendar=d.get("calendar", "none"),
            temp_lags=d.get("temp_lags", "none"),
            temp_top_ratio=float(d.get("temp_top_ratio", 1.0)),
            interaction=d.get("interaction", "none"),
            load_lags=d.get("load_lags") if "seq_frequency" not in d else None,
            load_top_ratio=float(d.get("load_top_ratio", 1.0)),
            seq_frequency=int(d["seq_frequency"]) if d.get("seq_frequency") is not None else None,
            seq_length=int(d["seq_length"]) if d.get("seq_length") is not None else None,
            other_features=d.get("other_features", "none"),
            other_top_ratio=float(d.get("other_top_ratio", 1.0)),
        )
        cfg.validate()
        return cfg


@dataclass
class FeatureSelection:
    """Correlation selections frozen on the training range."""

    temp_names: Optional[List[str]] = None
    load_names: Optional[List[str]] = None
    other_names: Optional[List[str]] = None


@dataclass
class DesignMatrix:
    feature_names: List[str]
    rows: np.ndarray            # (n_origins, n_features)
    targets: np.ndarray         # (n_origins, horizon)
    origin_timestamps: List[datetime]
    origin_indices: List[int]
    selection: FeatureSelection = field(default_factory=FeatureSelection)

    def __post_init__(self) -> None:
        if self.rows.shape[0] != self.targets.shape[0]:
            raise FeatureError("rows/targets origin count mismatch")
        if self.rows.shape[1] != len(self.feature_names):
            raise FeatureError("feature name count mismatch")
        if np.any(~np.isfinite(self.rows)) or np.any(~np.isfinite(self.targets)):
            raise FeatureError("design matrix contains missing cells")

    @property
    def n_origins(self) -> int:
        return self.rows.shape[0]


def encode_calendar(timestamps: Sequence[datetime], mode: str) -> Dict[str, np.ndarray]:
    """Calendar columns for each timestamp under the chosen encoding."""
    if mode not in CALENDAR_MODES:
        raise FeatureError(f"unknown calendar mode {mode!r}")
    if mode == "none":
        return {}
    hours = np.array([t.hour for t in timestamps], dtype=float)
    dows = np.array([t.weekday() for t in timestamps], dtype=float)
    months = np.array([t.month for t in timestamps], dtype=float)
    if mode == "numerical":
        return {"cal_hour": hours, "cal_dow": dows, "cal_month": months}
    if mode == "categorical":
        cols: Dict[str, np.ndarray] = {}
        for h in range(24):
            cols[f"cal_hour_{h:02d}"] = (hours == h).astype(float)
        for d in range(7):
            cols[f"cal_dow_{d}"] = (dows == d).astype(float)
        for m in range(1, 13):
            cols[f"cal_month_{m:02d}"] = (months == m).astype(float)
        return cols
    # trigonometric: (sin, cos) pairs over the natural period of each field
    return {
        "cal_hour_sin": np.sin(2 * np.pi * hours / 24.0),
        "cal_hour_cos": np.cos(2 * np.pi * hours / 24.0),
        "cal_dow_sin": np.sin(2 * np.pi * dows / 7.0),
        "cal_dow_cos": np.cos(2 * np.pi * dows / 7.0),
        "cal_month_sin": np.sin(2 * np.pi * (months - 1) / 12.0),
        "cal_month_cos": np.cos(2 * np.pi * (months - 1) / 12.0),
    }


def temperature_lag_names() -> List[str]:
    return [f"temp_lag_{k:03d}" for k in range(1, 73)] + [
        "temp_daymean_1",
        "temp_daymean_2",
        "temp_daymean_3",
    ]


def candidate_temperature_lags(temp: np.ndarray, origin: int) -> Dict[str, float]:
    """72 hourly lags plus 3 daily means for one forecast origin."""
    if origin - TEMP_LOOKBACK < 0:
        raise FeatureError(f"origin {origin} lacks {TEMP_LOOKBACK}h of temperature history")
    out: Dict[str, float] = {}
    for k in range(1, 73):
        out[f"temp_lag_{k:03d}"] = float(temp[origin - k])
    for d in range(3):
        lo, hi = origin - 24 * (d + 1), origin - 24 * d
        out[f"temp_daymean_{d + 1}"] = float(np.mean(temp[lo:hi]))
    return out


def pearson_correlations(candidates: Dict[str, np.ndarray], target: np.ndarray) -> Dict[str, float]:
    """|r| per candidate column; zero-variance candidates score 0."""
    t = np.asarray(target, dtype=float)
    if t.size < 3:
        raise FeatureError("need at least 3 aligned samples for correlation")
    t_std = float(np.std(t))
    if t_std == 0:
        raise FeatureError("constant target")
    t_centered = t - t.mean()
    scores: Dict[str, float] = {}
    for name, col in candidates.items():
        c = np.asarray(col, dtype=float)
        if c.shape != t.shape:
            raise FeatureError(f"candidate {name!r} not aligned with target")
        c_std = float(np.std(c))
        if c_std == 0:
            scores[name] = 0.0
            continue
        r = float(np.mean((c - c.mean()) * t_centered) / (c_std * t_std))
        scores[name] = abs(r)
    return scores


def pearson_select(
    candidates: Dict[str, np.ndarray], target: np.ndarray, top_ratio: float
) -> List[str]:
    """Names of the top ceil(ratio * n) candidates by |r|, name order breaking ties."""
    if not 0.0 <= top_ratio <= 1.0:
        raise FeatureError("top_ratio must lie in [0, 1]")
    if not candidates:
        return []
    scores = pearson_correlations(candidates, target)
    keep = math.ceil(top_ratio * len(candidates))
    ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    return [name for name, _ in ranked[:keep]]


def interaction_terms(
    calendar_cols: Dict[str, np.ndarray], temp_cols: Dict[str, np.ndarray]
) -> Dict[str, np.ndarray]:
    """Elementwise products of every calendar column with every temperature column."""
    out: Dict[str, np.ndarray] = {}
    for cal_name, cal in calendar_cols.items():
        for temp_name, temp in temp_cols.items():
            out[f"ix_{cal_name}_x_{temp_name}"] = cal * temp
    return out


def load_lag_names(mode: str) -> List[str]:
    if mode == "correlation":
        return [f"load_lag_{k:03d}" for k in range(1, 169)]
    if mode == "fixed":
        return [f"load_samehour_{d}" for d in range(1, 8)]
    return []


def fixed_lag_offsets(delta: int) -> List[int]:
    """Lags (hours before the origin) of the 7 most recent observations sharing
    the clock hour of the first forecast step."""
    j0 = math.ceil((delta + 1) / 24)
    return [24 * j - (delta + 1) for j in range(j0, j0 + 7)]


def load_lag_features(
    load: np.ndarray, mode: str, top_ratio: float, origin: int, delta: int = 0,
    selected: Optional[List[str]] = None,
) -> Dict[str, float]:
    """Lagged load values for one origin: full 168-lag family (correlation mode,
    restricted to `selected` when given) or the 7 same-hour daily lags."""
    if mode == "none":
        return {}
    if origin - BASE_LOOKBACK < 0:
        raise FeatureError(f"origin {origin} lacks {BASE_LOOKBACK}h of load history")
    if mode == "correlation":
        names = selected if selected is not None else load_lag_names("correlation")
        return {name: float(load[origin - int(name[-3:])]) for name in names}
    if mode == "fixed":
        offsets = fixed_lag_offsets(delta)
        return {
            f"load_samehour_{d + 1}": float(load[origin - off])
            for d, off in enumerate(offsets)
        }
    raise FeatureError(f"unknown load_lags mode {mode!r}")


def build_sequence_input(
    load: np.ndarray, frequency: int, length: int, origin: int
) -> np.ndarray:
    """`length` past loads sampled every `frequency` hours, oldest first,
    ending `frequency` hours before the origin."""
    if frequency not in SEQUENCE_FREQUENCIES:
        raise FeatureError(f"sequence frequency {frequency} not in {SEQUENCE_FREQUENCIES}")
    span = frequency * length
    if origin - span < 0:
        raise FeatureError(f"origin {origin} lacks {span}h of history for the sequence")
    return np.array([load[origin - frequency * k] for k in range(length, 0, -1)], dtype=float)


def _valid_origins(
    config: FeatureConfig, n: int, task: TaskSpec, index_range: Tuple[int, int]
) -> List[int]:
    lookback = config.lookback_hours()
    start, end = index_range
    if not (0 <= start < end <= n):
        raise FeatureError(f"index range {index_range} outside dataset of {n} rows")
    first = max(start, lookback)
    # target window t+delta+1 .. t+delta+H must stay inside the range
    last = end - 1 - task.interval_delta - task.horizon
    return list(range(first, last + 1)) if last >= first else []


def _other_role_series(data: CleanDataset) -> Dict[str, np.ndarray]:
    """Auxiliary columns covered by the Other Features group."""
    out: Dict[str, np.ndarray] = {}
    for name, role in data.semantics.assignments.items():
        if role in ("humidity", "precipitation", "holiday_flag", "other_numeric"):
            if name in data.columns and not np.any(np.isnan(data.columns[name])):
                out[name] = data.columns[name]
    return out


def assemble_design_matrix(
    config: FeatureConfig,
    data: CleanDataset,
    task: TaskSpec,
    index_range: Tuple[int, int],
    selection: Optional[FeatureSelection] = None,
) -> DesignMatrix:
    """One row per valid origin in the range. When no frozen selection is given,
    correlation statistics are fitted on this range and embedded in the result."""
    config.validate()
    load = data.load
    temp = data.series_for_role("temperature")
    n = data.n_rows
    origins = _valid_origins(config, n, task, index_range)
    if config.temp_lags == "correlation":
        if temp is None:
            raise FeatureError("config requires a temperature column")
        origins = [i for i in origins if np.all(np.isfinite(temp[i - TEMP_LOOKBACK : i]))]
    if not origins:
        raise FeatureError(f"zero valid origins in range {index_range}")

    delta, horizon = task.interval_delta, task.horizon
    targets = np.stack([load[i + delta + 1 : i + delta + 1 + horizon] for i in origins])
    # correlation target: mean of the forecast window per origin
    target_profile = targets.mean(axis=1)

    fit = selection is None
    sel = selection if selection is not None else FeatureSelection()

    # per-origin candidate tables for the lag families
    temp_cols: Dict[str, np.ndarray] = {}
    if config.temp_lags == "correlation":
        all_names = temperature_lag_names()
        table = {name: np.empty(len(origins)) for name in all_names}
        for row, i in enumerate(origins):
            vals = candidate_temperature_lags(temp, i)
            for name in all_names:
                table[name][row] = vals[name]
        if fit:
            sel.temp_names = pearson_select(table, target_profile, config.temp_top_ratio)
        temp_cols = {name: table[name] for name in (sel.temp_names or [])}

    calendar_cols = encode_calendar([data.timestamps[i] for i in origins], config.calendar)

    interaction_cols: Dict[str, np.ndarray] = {}
    if config.interaction == "all":
        interaction_cols = interaction_terms(calendar_cols, temp_cols)

    load_cols: Dict[str, np.ndarray] = {}
    seq_cols: Dict[str, np.ndarray] = {}
    if config.load_lags is not None and config.load_lags != "none":
        if config.load_lags == "correlation":
            all_names = load_lag_names("correlation")
            table = {name: np.empty(len(origins)) for name in all_names}
            for row, i in enumerate(origins):
                vals = load_lag_features(load, "correlation", 1.0, i, delta)
                for name in all_names:
                    table[name][row] = vals[name]
            if fit:
                sel.load_names = pearson_select(table, target_profile, config.load_top_ratio)
            load_cols = {name: table[name] for name in (sel.load_names or [])}
        else:  # fixed
            names = load_lag_names("fixed")
            table = {name: np.empty(len(origins)) for name in names}
            for row, i in enumerate(origins):
                vals = load_lag_features(load, "fixed", 1.0, i, delta)
                for name in names:
                    table[name][row] = vals[name]
            load_cols = table
    elif config.seq_frequency is not None:
        length = int(config.seq_length)
        seq = np.stack([build_sequence_input(load, config.seq_frequency, length, i) for i in origins])
        seq_cols = {f"seq_{k:03d}": seq[:, k] for k in range(length)}

    other_cols: Dict[str, np.ndarray] = {}
    if config.other_features == "correlation":
        series = _other_role_series(data)
        table = {name: vals[list(origins)] for name, vals in series.items()}
        if fit:
            sel.other_names = pearson_select(table, target_profile, config.other_top_ratio) if table else []
        other_cols = {name: table[name] for name in (sel.other_names or []) if name in table}

    ordered: List[Tuple[str, np.ndarray]] = []
    for group in (calendar_cols, temp_cols, interaction_cols, load_cols, seq_cols, other_cols):
        ordered.extend(sorted(group.items(), key=lambda kv: kv[0]))
    if not ordered:
        # intercept-only design: a constant column keeps downstream shapes valid
        ordered = [("const_one", np.ones(len(origins)))]

    names = [name for name, _ in ordered]
    rows = np.column_stack([col for _, col in ordered])
    return DesignMatrix(
        feature_names=names,
        rows=rows,
        targets=targets,
        origin_timestamps=[data.timestamps[i] for i in origins],
        origin_indices=origins,
        selection=sel,
    )


def assemble_feature_row(
    config: FeatureConfig,
    data: CleanDataset,
    task: TaskSpec,
    origin: int,
    selection: FeatureSelection,
) -> Tuple[List[str], np.ndarray]:
    """A single origin's feature vector using a frozen selection, with no
    target-window requirement. This is the live-deployment path: the origin may
    sit at the very end of the data."""
    config.validate()
    load = data.load
    temp = data.series_for_role("temperature")
    lookback = config.lookback_hours()
    if origin < lookback or origin >= data.n_rows:
        raise FeatureError(f"origin {origin} lacks the {lookback}h lookback window")

    temp_vals: Dict[str, float] = {}
    if config.temp_lags == "correlation":
        if temp is None:
            raise FeatureError("config requires a temperature column")
        window = temp[origin - TEMP_LOOKBACK : origin]
        if not np.all(np.isfinite(window)):
            raise FeatureError("temperature history incomplete at the forecast origin")
        all_vals = candidate_temperature_lags(temp, origin)
        if selection.temp_names is None:
            raise FeatureError("temperature selection was never fitted")
        temp_vals = {name: all_vals[name] for name in selection.temp_names}

    cal_cols = encode_calendar([data.timestamps[origin]], config.calendar)
    cal_vals = {name: float(col[0]) for name, col in cal_cols.items()}

    ix_vals: Dict[str, float] = {}
    if config.interaction == "all":
        for cal_name, cv in cal_vals.items():
            for temp_name, tv in temp_vals.items():
                ix_vals[f"ix_{cal_name}_x_{temp_name}"] = cv * tv

    load_vals: Dict[str, float] = {}
    seq_vals: Dict[str, float] = {}
    if config.load_lags is not None and config.load_lags != "none":
        if config.load_lags == "correlation":
            if selection.load_names is None:
                raise FeatureError("load-lag selection was never fitted")
            load_vals = load_lag_features(
                load, "correlation", 1.0, origin, task.interval_delta, selected=selection.load_names
            )
        else:
            load_vals = load_lag_features(load, "fixed", 1.0, origin, task.interval_delta)
    elif config.seq_frequency is not None:
        seq = build_sequence_input(load, config.seq_frequency, int(config.seq_length), origin)
        seq_vals = {f"seq_{k:03d}": float(seq[k]) for k in range(len(seq))}

    other_vals: Dict[str, float] = {}
    if config.other_features == "correlation":
        if selection.other_names is None:
            raise FeatureError("other-feature selection was never fitted")
        series = _other_role_series(data)
        for name in selection.other_names:
            if name not in series:
                raise FeatureError(f"column {name!r} unavailable at the forecast origin")
            other_vals[name] = float(series[name][origin])

    ordered: List[Tuple[str, float]] = []
    for group in (cal_vals, temp_vals, ix_vals, load_vals, seq_vals, other_vals):
        ordered.extend(sorted(group.items(), key=lambda kv: kv[0]))
    if not ordered:
        ordered = [("const_one", 1.0)]
    names = [name for name, _ in ordered]
    row = np.array([v for _, v in ordered], dtype=float)
    if not np.all(np.isfinite(row)):
        raise FeatureError("feature row contains missing values")
    return names, row
