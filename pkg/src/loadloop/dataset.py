"""Raw data ingestion, column semantics, cleaning and chronological splitting.

Missing values are carried as NaN throughout. A CleanDataset sits on a strict
hourly grid with a fully imputed load column.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .metrics import MetricSpec

COLUMN_ROLES = (
    "timestamp",
    "load",
    "temperature",
    "humidity",
    "precipitation",
    "holiday_flag",
    "other_numeric",
    "ignore",
)

# Header substrings checked in order; first hit wins within a role.
_HEADER_HINTS: List[Tuple[str, Tuple[str, ...]]] = [
    ("timestamp", ("timestamp", "datetime", "date", "time", "period", "ts", "dt")),
    ("load", ("load", "demand", "consumption", "power", "energy", "mwh", "kwh", "mw", "kw")),
    ("temperature", ("temp",)),
    ("humidity", ("humid",)),
    ("precipitation", ("precip", "rain")),
    ("holiday_flag", ("holiday",)),
]

_TS_FORMATS = (
    "%Y-%m-%dT%H:%M:%S",
    "%Y-%m-%d %H:%M:%S",
    "%Y-%m-%dT%H:%M",
    "%Y-%m-%d %H:%M",
    "%Y-%m-%d",
)


class DatasetError(ValueError):
    pass


class SemanticsError(DatasetError):
    """Raised when no usable timestamp or load column exists; the caller should
    request a new dataset (preparation step 1)."""


def parse_timestamp(text: str) -> Optional[datetime]:
    s = text.strip()
    if not s:
        return None
    for fmt in _TS_FORMATS:
        try:
            return datetime.strptime(s, fmt)
        except ValueError:
            continue
    # ISO-8601 with timezone or fractional seconds
    try:
        dt = datetime.fromisoformat(s)
        return dt.replace(tzinfo=None)
    except ValueError:
        return None


def _parse_number(text: str) -> float:
    s = text.strip()
    if not s:
        return math.nan
    try:
        return float(s)
    except ValueError:
        return math.nan


@dataclass
class RawDataset:
    """Ingested time series: parallel timestamp list and per-column value arrays."""

    timestamps: List[datetime]
    columns: Dict[str, np.ndarray]
    source_path: str = ""
    timestamp_column: str = ""

    def __post_init__(self) -> None:
        n = len(self.timestamps)
        if n < 2:
            raise DatasetError("dataset needs at least 2 rows")
        for name, vals in self.columns.items():
            if len(vals) != n:
                raise DatasetError(f"column {name!r} length {len(vals)} != {n} rows")
        for a, b in zip(self.timestamps, self.timestamps[1:]):
            if a >= b:
                raise DatasetError(f"timestamps not strictly increasing at {b}")

    @property
    def n_rows(self) -> int:
        return len(self.timestamps)

    def column_names(self) -> List[str]:
        return list(self.columns.keys())


@dataclass(frozen=True)
class ColumnSemantics:
    assignments: Dict[str, str]

    def validate(self) -> None:
        for col, role in self.assignments.items():
            if role not in COLUMN_ROLES:
                raise DatasetError(f"unknown role {role!r} for column {col!r}")
        roles = list(self.assignments.values())
        if roles.count("timestamp") != 1:
            raise SemanticsError("exactly one timestamp column required")
        if roles.count("load") != 1:
            raise SemanticsError("exactly one load column required")

    def column_for(self, role: str) -> Optional[str]:
        for col, r in self.assignments.items():
            if r == role:
                return col
        return None

    def to_dict(self) -> dict:
        return dict(self.assignments)


@dataclass(frozen=True)
class TaskSpec:
    """Forecasting task definition: interval, horizon, metric, dataset reference."""

    interval_delta: int
    horizon: int
    metric: MetricSpec
    dataset_ref: str = "dataset.csv"

    def __post_init__(self) -> None:
        if self.interval_delta < 0:
            raise DatasetError("interval_delta must be >= 0")
        if self.horizon < 1:
            raise DatasetError("horizon must be >= 1")

    def to_dict(self) -> dict:
        return {
            "interval_delta": self.interval_delta,
            "horizon": self.horizon,
            "metric": self.metric.to_dict(),
            "dataset_ref": self.dataset_ref,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TaskSpec":
        return cls(
            interval_delta=int(d["interval_delta"]),
            horizon=int(d["horizon"]),
            metric=MetricSpec.from_dict(d["metric"]),
            dataset_ref=d.get("dataset_ref", "dataset.csv"),
        )


@dataclass
class CleaningReport:
    anomalies_found: Dict[str, int] = field(default_factory=dict)
    values_imputed: Dict[str, int] = field(default_factory=dict)
    gap_histogram: Dict[int, int] = field(default_factory=dict)
    methods_applied: List[Tuple[str, str]] = field(default_factory=list)

    def merge_series(self, column: str, fragment: "CleaningReport") -> None:
        for src, dst in (
            (fragment.anomalies_found, self.anomalies_found),
            (fragment.values_imputed, self.values_imputed),
        ):
            for col, cnt in src.items():
                dst[col] = dst.get(col, 0) + cnt
        for gap, cnt in fragment.gap_histogram.items():
            self.gap_histogram[gap] = self.gap_histogram.get(gap, 0) + cnt
        self.methods_applied.extend(fragment.methods_applied)

    def to_dict(self) -> dict:
        return {
            "anomalies_found": dict(self.anomalies_found),
            "values_imputed": dict(self.values_imputed),
            "gap_histogram": {str(k): v for k, v in self.gap_histogram.items()},
            "methods_applied": [list(m) for m in self.methods_applied],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CleaningReport":
        return cls(
            anomalies_found=dict(d.get("anomalies_found", {})),
            values_imputed=dict(d.get("values_imputed", {})),
            gap_histogram={int(k): v for k, v in d.get("gap_histogram", {}).items()},
            methods_applied=[tuple(m) for m in d.get("methods_applied", [])],
        )


@dataclass
class CleanDataset:
    """Hourly-gridded dataset whose load column has no missing values."""

    timestamps: List[datetime]
    columns: Dict[str, np.ndarray]
    semantics: ColumnSemantics
    report: CleaningReport
    source_path: str = ""

    def __post_init__(self) -> None:
        n = len(self.timestamps)
        for a, b in zip(self.timestamps, self.timestamps[1:]):
            if b - a != timedelta(hours=1):
                raise DatasetError(f"hourly grid violated between {a} and {b}")
        load_col = self.semantics.column_for("load")
        if load_col is None or load_col not in self.columns:
            raise DatasetError("load column missing from clean dataset")
        if np.any(np.isnan(self.columns[load_col])):
            raise DatasetError("clean dataset load column contains missing values")
        for name, vals in self.columns.items():
            if len(vals) != n:
                raise DatasetError(f"column {name!r} length mismatch")

    @property
    def n_rows(self) -> int:
        return len(self.timestamps)

    @property
    def load(self) -> np.ndarray:
        return self.columns[self.semantics.column_for("load")]

    def series_for_role(self, role: str) -> Optional[np.ndarray]:
        col = self.semantics.column_for(role)
        if col is None:
            return None
        return self.columns.get(col)


@dataclass(frozen=True)
class AnomalyPolicy:
    lower_bound: Optional[float] = 0.0
    upper_bound: Optional[float] = None
    k: float = 5.0
    window: int = 24
    # statistical rule only applies to series at least this long
    min_statistical_length: int = 48


@dataclass(frozen=True)
class ImputePolicy:
    max_linear_gap: int = 6
    same_hour_days: int = 3
    max_gap_hours: int = 7 * 24


def load_csv(path: str) -> RawDataset:
    """Parse a headered CSV into a RawDataset. Unparseable numerics become NaN."""
    try:
        with open(path, "r", encoding="utf-8-sig", newline="") as fh:
            reader = csv.reader(fh)
            rows = [row for row in reader if row and any(cell.strip() for cell in row)]
    except FileNotFoundError:
        raise DatasetError(f"dataset file not found: {path}")
    if not rows:
        raise DatasetError(f"dataset file is empty: {path}")
    header = [h.strip() for h in rows[0]]
    data_rows = rows[1:]
    if not data_rows:
        raise DatasetError(f"dataset has a header but no data rows: {path}")

    # pick the timestamp column: first column whose values all parse as datetimes
    ts_index = None
    for idx, name in enumerate(header):
        parsed = [parse_timestamp(r[idx]) for r in data_rows if idx < len(r)]
        if parsed and all(p is not None for p in parsed):
            ts_index = idx
            break
    if ts_index is None:
        raise DatasetError("no parseable timestamp column candidate")

    stamps = [parse_timestamp(r[ts_index]) for r in data_rows]
    order = sorted(range(len(stamps)), key=lambda i: stamps[i])
    stamps = [stamps[i] for i in order]
    dupes = sorted({stamps[i] for i in range(1, len(stamps)) if stamps[i] == stamps[i - 1]})
    if dupes:
        shown = ", ".join(str(d) for d in dupes[:10])
        raise DatasetError(f"duplicate timestamps: {shown}")

    columns: Dict[str, np.ndarray] = {}
    for idx, name in enumerate(header):
        if idx == ts_index:
            continue
        vals = np.array(
            [_parse_number(data_rows[i][idx]) if idx < len(data_rows[i]) else math.nan for i in order],
            dtype=float,
        )
        columns[name] = vals
    return RawDataset(
        timestamps=stamps,
        columns=columns,
        source_path=str(path),
        timestamp_column=header[ts_index],
    )


def infer_column_semantics(data: RawDataset) -> ColumnSemantics:
    """Best-effort role proposal from header names, then value heuristics."""
    assignments: Dict[str, str] = {}
    if data.timestamp_column:
        assignments[data.timestamp_column] = "timestamp"

    for name in data.columns:
        lower = name.lower()
        for role, hints in _HEADER_HINTS:
            if role == "timestamp":
                continue
            if any(h in lower for h in hints):
                if role in ("load",) and "load" in [r for r in assignments.values()]:
                    break
                assignments[name] = role
                break

    # value-based fallback for load: highest-variance unassigned numeric column
    if "load" not in assignments.values():
        best, best_var = None, -1.0
        for name, vals in data.columns.items():
            if name in assignments:
                continue
            finite = vals[np.isfinite(vals)]
            if finite.size < 2:
                continue
            var = float(np.var(finite))
            if var > best_var:
                best, best_var = name, var
        if best is not None:
            assignments[best] = "load"

    for name in data.columns:
        assignments.setdefault(name, "other_numeric")

    if "timestamp" not in assignments.values():
        raise SemanticsError("no timestamp candidate; provide a new dataset path")
    if "load" not in assignments.values():
        raise SemanticsError("no load candidate; provide a new dataset path")
    sem = ColumnSemantics(assignments=assignments)
    sem.validate()
    return sem


def detect_anomalies(series: Sequence[float], policy: AnomalyPolicy = AnomalyPolicy()) -> np.ndarray:
    """Boolean mask of values violating hard bounds or the rolling robust z-rule."""
    x = np.asarray(series, dtype=float)
    mask = np.zeros(x.shape, dtype=bool)
    present = np.isfinite(x)

    if policy.lower_bound is not None:
        mask |= present & (x < policy.lower_bound)
    if policy.upper_bound is not None:
        mask |= present & (x > policy.upper_bound)

    n = x.size
    if n >= policy.min_statistical_length:
        half = policy.window // 2
        for i in np.nonzero(present)[0]:
            lo = max(0, i - half)
            hi = min(n, i + half + 1)
            window = x[lo:hi]
            window = window[np.isfinite(window)]
            if window.size < 3:
                continue
            med = float(np.median(window))
            mad = float(np.median(np.abs(window - med)))
            # MAD of 0 degenerates the band to a point; any deviation then flags
            if abs(x[i] - med) > policy.k * 1.4826 * mad:
                mask[i] = True
    return mask


def impute(
    series: Sequence[float],
    policy: ImputePolicy = ImputePolicy(),
    column: str = "load",
) -> Tuple[np.ndarray, CleaningReport]:
    """Fill missing entries: linear interpolation for short gaps, same-hour daily
    means for long ones. Assumes an hourly grid with present endpoints."""
    x = np.asarray(series, dtype=float).copy()
    report = CleaningReport()
    missing = ~np.isfinite(x)
    if not missing.any():
        report.values_imputed[column] = 0
        return x, report

    if missing[0] or missing[-1]:
        raise DatasetError("series endpoints missing; trim the range first")

    # collect contiguous gaps
    gaps: List[Tuple[int, int]] = []  # [start, end) of missing run
    i = 0
    n = x.size
    while i < n:
        if missing[i]:
            j = i
            while j < n and missing[j]:
                j += 1
            gaps.append((i, j))
            i = j
        else:
            i += 1

    for start, end in gaps:
        length = end - start
        if length > policy.max_gap_hours:
            raise DatasetError(
                f"segment unusable: {length}h gap exceeds {policy.max_gap_hours}h; trim the range"
            )
        report.gap_histogram[length] = report.gap_histogram.get(length, 0) + 1

    used_linear = False
    used_same_hour = False
    imputed_count = 0
    for start, end in gaps:
        length = end - start
        if length <= policy.max_linear_gap:
            left, right = x[start - 1], x[end]
            for k in range(length):
                x[start + k] = left + (right - left) * (k + 1) / (length + 1)
            used_linear = True
        else:
            for idx in range(start, end):
                prior = [
                    x[idx - 24 * d]
                    for d in range(1, policy.same_hour_days + 1)
                    if idx - 24 * d >= 0 and np.isfinite(x[idx - 24 * d])
                ]
                if prior:
                    x[idx] = float(np.mean(prior))
                else:
                    # no same-hour history: fall back to the gap's endpoints
                    x[idx] = x[start - 1] + (x[end] - x[start - 1]) * (idx - start + 1) / (length + 1)
            used_same_hour = True
        imputed_count += length

    report.values_imputed[column] = imputed_count
    if used_linear:
        report.methods_applied.append((column, "linear_interpolation"))
    if used_same_hour:
        report.methods_applied.append((column, "same_hour_daily_mean"))
    return x, report


def _hourly_grid(
    timestamps: List[datetime], columns: Dict[str, np.ndarray]
) -> Tuple[List[datetime], Dict[str, np.ndarray]]:
    """Resample onto a strict hourly grid; sub-hourly samples average per hour."""
    floored = [t.replace(minute=0, second=0, microsecond=0) for t in timestamps]
    first, last = floored[0], floored[-1]
    n_hours = int((last - first).total_seconds() // 3600) + 1
    grid = [first + timedelta(hours=i) for i in range(n_hours)]
    index = {t: i for i, t in enumerate(grid)}

    out: Dict[str, np.ndarray] = {}
    for name, vals in columns.items():
        sums = np.zeros(n_hours)
        counts = np.zeros(n_hours)
        for t, v in zip(floored, vals):
            if np.isfinite(v):
                i = index[t]
                sums[i] += v
                counts[i] += 1
        col = np.full(n_hours, math.nan)
        nz = counts > 0
        col[nz] = sums[nz] / counts[nz]
        out[name] = col
    return grid, out


def clean(
    data: RawDataset,
    semantics: ColumnSemantics,
    anomaly_policy: AnomalyPolicy = AnomalyPolicy(),
    impute_policy: ImputePolicy = ImputePolicy(),
) -> CleanDataset:
    """Full cleaning pass: hourly grid, anomaly removal, imputation, report."""
    semantics.validate()
    grid, columns = _hourly_grid(data.timestamps, data.columns)
    report = CleaningReport()
    load_col = semantics.column_for("load")

    # flag anomalies on the load column and treat them as missing
    mask = detect_anomalies(columns[load_col], anomaly_policy)
    report.anomalies_found[load_col] = int(mask.sum())
    if mask.any():
        columns[load_col] = columns[load_col].copy()
        columns[load_col][mask] = math.nan
        report.methods_applied.append((load_col, "anomalies_masked"))

    # trim to the first/last present load value
    present = np.isfinite(columns[load_col])
    if not present.any():
        raise DatasetError("load column entirely missing after cleaning")
    lo = int(np.argmax(present))
    hi = int(len(present) - np.argmax(present[::-1]))
    grid = grid[lo:hi]
    columns = {name: vals[lo:hi] for name, vals in columns.items()}

    filled, fragment = impute(columns[load_col], impute_policy, column=load_col)
    columns[load_col] = filled
    report.merge_series(load_col, fragment)

    # impute auxiliary numeric columns with the same policy where possible
    for name, vals in columns.items():
        role = semantics.assignments.get(name, "other_numeric")
        if name == load_col or role in ("timestamp", "ignore"):
            continue
        missing = ~np.isfinite(vals)
        if not missing.any():
            continue
        work = vals.copy()
        inner = np.isfinite(work)
        if inner.sum() < 2:
            continue
        first_i = int(np.argmax(inner))
        last_i = int(len(inner) - np.argmax(inner[::-1]) - 1)
        work[: first_i + 1] = np.where(np.isfinite(work[: first_i + 1]), work[: first_i + 1], work[first_i])
        work[last_i:] = np.where(np.isfinite(work[last_i:]), work[last_i:], work[last_i])
        try:
            filled_aux, frag = impute(work, impute_policy, column=name)
        except DatasetError:
            continue
        columns[name] = filled_aux
        report.merge_series(name, frag)

    return CleanDataset(
        timestamps=grid,
        columns=columns,
        semantics=semantics,
        report=report,
        source_path=data.source_path,
    )


def split_chronological(
    data: CleanDataset,
    ratios: Tuple[float, float, float] = (0.7, 0.15, 0.15),
    min_length: int = 0,
) -> Tuple[Tuple[int, int], Tuple[int, int], Tuple[int, int]]:
    """Contiguous train/val/test index ranges; boundaries floor, remainder to test."""
    train_r, val_r, test_r = ratios
    if train_r <= 0 or val_r <= 0 or test_r <= 0:
        raise DatasetError("non-positive ratio")
    if abs(train_r + val_r + test_r - 1.0) > 1e-9:
        raise DatasetError(f"ratios must sum to 1, got {train_r + val_r + test_r}")
    n = data.n_rows
    n_train = int(n * train_r)
    n_val = int(n * val_r)
    ranges = ((0, n_train), (n_train, n_train + n_val), (n_train + n_val, n))
    if min_length > 0:
        names = ("train", "val", "test")
        for name, (lo, hi) in zip(names, ranges):
            if hi - lo < min_length:
                raise DatasetError(
                    f"{name} split has {hi - lo} rows, shorter than lookback window {min_length}"
                )
    return ranges


@dataclass
class DataSummary:
    per_column: Dict[str, Dict[str, float]]
    missing_before_cleaning: Dict[str, int]
    hourly_profile: List[float]
    weekly_profile: List[float]
    n_rows: int
    start: str
    end: str

    def to_dict(self) -> dict:
        return {
            "per_column": self.per_column,
            "missing_before_cleaning": self.missing_before_cleaning,
            "hourly_profile": self.hourly_profile,
            "weekly_profile": self.weekly_profile,
            "n_rows": self.n_rows,
            "start": self.start,
            "end": self.end,
        }


def summarize(data: CleanDataset) -> DataSummary:
    """Column statistics plus mean-load profiles by hour of day and day of week."""
    per_column: Dict[str, Dict[str, float]] = {}
    for name, vals in data.columns.items():
        finite = vals[np.isfinite(vals)]
        if finite.size == 0:
            per_column[name] = {"min": math.nan, "max": math.nan, "mean": math.nan, "std": math.nan}
            continue
        per_column[name] = {
            "min": float(np.min(finite)),
            "max": float(np.max(finite)),
            "mean": float(np.mean(finite)),
            "std": float(np.std(finite)),
        }

    missing = {
        col: int(cnt) for col, cnt in data.report.values_imputed.items()
    }

    load = data.load
    hours = np.array([t.hour for t in data.timestamps])
    dows = np.array([t.weekday() for t in data.timestamps])
    hourly = [float(np.mean(load[hours == h])) if np.any(hours == h) else math.nan for h in range(24)]
    weekly = [float(np.mean(load[dows == d])) if np.any(dows == d) else math.nan for d in range(7)]

    return DataSummary(
        per_column=per_column,
        missing_before_cleaning=missing,
        hourly_profile=hourly,
        weekly_profile=weekly,
        n_rows=data.n_rows,
        start=data.timestamps[0].isoformat(),
        end=data.timestamps[-1].isoformat(),
    )
