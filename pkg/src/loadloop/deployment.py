"""Deployment of a winning configuration plus the four forecast-adjustment
transforms and their audit log.

Rules apply to the cumulative adjusted series in application order; raw values
are never mutated, so replaying the applied rules over the raw forecast always
reproduces the adjusted one.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta, timezone
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .dataset import CleanDataset, TaskSpec
from .features import FeatureConfig, FeatureError, FeatureSelection, assemble_feature_row
from .metrics import MetricSpec, evaluate as evaluate_metric
from .models import TrainedModel
from .optimizer.space import Configuration

RULE_KINDS = ("manual_override", "time_scaling", "load_scaling", "external_scaling")
DIRECTIONS = ("above", "below")


class DeploymentError(ValueError):
    pass


@dataclass(frozen=True)
class PostprocessRule:
    kind: str
    hours: Tuple[int, ...] = ()            # step offsets within the horizon
    override_values: Tuple[float, ...] = ()
    factor: float = 0.0                    # lambda; scaling multiplies by (1 + lambda)
    threshold: float = 0.0
    direction: str = "above"
    external_role: str = "temperature"
    note: str = ""

    def validate(self, horizon: int) -> None:
        if self.kind not in RULE_KINDS:
            raise DeploymentError(f"unknown rule kind {self.kind!r}")
        if self.direction not in DIRECTIONS:
            raise DeploymentError(f"unknown direction {self.direction!r}")
        if self.kind in ("time_scaling", "load_scaling", "external_scaling"):
            if not self.factor > -1:
                raise DeploymentError("scaling factor must satisfy lambda > -1")
        if self.kind in ("manual_override", "time_scaling"):
            if not self.hours:
                raise DeploymentError(f"{self.kind} requires an hour set")
            for t in self.hours:
                if not 0 <= t < horizon:
                    raise DeploymentError(f"hour offset {t} outside horizon {horizon}")
        if self.kind == "manual_override":
            if len(self.override_values) != len(self.hours):
                raise DeploymentError("override values must align with the hour set")
            if any(not np.isfinite(v) for v in self.override_values):
                raise DeploymentError("override values must be finite")

    @classmethod
    def interval(cls, kind: str, start: int, end: int, **kwargs) -> "PostprocessRule":
        """Convenience constructor for a contiguous [start, end) hour window."""
        return cls(kind=kind, hours=tuple(range(start, end)), **kwargs)

    def to_dict(self) -> dict:
        d: dict = {"kind": self.kind}
        if self.hours:
            d["hours"] = list(self.hours)
        if self.kind == "manual_override":
            d["override_values"] = list(self.override_values)
        if self.kind in ("time_scaling", "load_scaling", "external_scaling"):
            d["factor"] = self.factor
        if self.kind in ("load_scaling", "external_scaling"):
            d["threshold"] = self.threshold
            d["direction"] = self.direction
        if self.kind == "external_scaling":
            d["external_role"] = self.external_role
        if self.note:
            d["note"] = self.note
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PostprocessRule":
        return cls(
            kind=d["kind"],
            hours=tuple(int(t) for t in d.get("hours", ())),
            override_values=tuple(float(v) for v in d.get("override_values", ())),
            factor=float(d.get("factor", 0.0)),
            threshold=float(d.get("threshold", 0.0)),
            direction=d.get("direction", "above"),
            external_role=d.get("external_role", "temperature"),
            note=d.get("note", ""),
        )


@dataclass(frozen=True)
class Forecast:
    origin_timestamp: datetime
    horizon: int
    raw: np.ndarray
    adjusted: np.ndarray
    applied_rules: Tuple[PostprocessRule, ...] = ()
    context: Dict[str, np.ndarray] = field(default_factory=dict)
    target_timestamps: Tuple[datetime, ...] = ()

    def __post_init__(self) -> None:
        if len(self.raw) != self.horizon or len(self.adjusted) != self.horizon:
            raise DeploymentError("raw/adjusted length must equal the horizon")

    def to_dict(self) -> dict:
        return {
            "origin_timestamp": self.origin_timestamp.isoformat(),
            "horizon": self.horizon,
            "raw": [float(v) for v in self.raw],
            "adjusted": [float(v) for v in self.adjusted],
            "applied_rules": [r.to_dict() for r in self.applied_rules],
            "context": {k: [float(v) for v in vals] for k, vals in self.context.items()},
            "target_timestamps": [t.isoformat() for t in self.target_timestamps],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Forecast":
        return cls(
            origin_timestamp=datetime.fromisoformat(d["origin_timestamp"]),
            horizon=int(d["horizon"]),
            raw=np.array(d["raw"], dtype=float),
            adjusted=np.array(d["adjusted"], dtype=float),
            applied_rules=tuple(PostprocessRule.from_dict(r) for r in d.get("applied_rules", [])),
            context={k: np.array(v, dtype=float) for k, v in d.get("context", {}).items()},
            target_timestamps=tuple(datetime.fromisoformat(t) for t in d.get("target_timestamps", [])),
        )


@dataclass
class AdjustmentRecord:
    timestamp: str
    rule: PostprocessRule
    pre_values: List[float]
    post_values: List[float]
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "timestamp": self.timestamp,
            "rule": self.rule.to_dict(),
            "pre_values": self.pre_values,
            "post_values": self.post_values,
            "note": self.note,
        }


class AdjustmentLog:
    """Append-only record of every forecast modification."""

    def __init__(self) -> None:
        self._records: List[AdjustmentRecord] = []

    def append(self, record: AdjustmentRecord) -> None:
        self._records.append(record)

    @property
    def records(self) -> Tuple[AdjustmentRecord, ...]:
        return tuple(self._records)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r.to_dict(), sort_keys=True) + "\n" for r in self._records)


def forecast(
    best_config: Configuration,
    model: TrainedModel,
    selection: FeatureSelection,
    data: CleanDataset,
    task: TaskSpec,
    origin_index: Optional[int] = None,
) -> Forecast:
    """Raw forecast at one origin using the winning feature config and model.
    Defaults to the most recent origin; the target window may extend past the
    end of the data (live deployment)."""
    fc = FeatureConfig.from_dict(best_config.features)
    n = data.n_rows
    if origin_index is None:
        origin_index = n - 1
    try:
        names, row = assemble_feature_row(fc, data, task, origin_index, selection)
    except FeatureError as exc:
        raise DeploymentError(str(exc)) from exc
    raw = model.predict(row[None, :], names)[0]

    delta, horizon = task.interval_delta, task.horizon
    origin_ts = data.timestamps[origin_index]
    target_ts = tuple(origin_ts + timedelta(hours=delta + 1 + h) for h in range(horizon))

    # context series for the panel, only where observed data covers the window
    context: Dict[str, np.ndarray] = {}
    first, last = origin_index + delta + 1, origin_index + delta + horizon
    if last <= n - 1:
        for role in ("temperature", "humidity", "precipitation", "holiday_flag"):
            series = data.series_for_role(role)
            if series is not None:
                window = series[first : last + 1]
                if np.all(np.isfinite(window)):
                    context[role] = window.copy()
        # observed load over the window enables the pred-vs-actual view
        context["actual_load"] = data.load[first : last + 1].copy()

    return Forecast(
        origin_timestamp=origin_ts,
        horizon=horizon,
        raw=raw.copy(),
        adjusted=raw.copy(),
        applied_rules=(),
        context=context,
        target_timestamps=target_ts,
    )


def apply_rule(fc: Forecast, rule: PostprocessRule) -> Tuple[Forecast, AdjustmentRecord]:
    """New forecast snapshot with the rule applied to the adjusted series."""
    rule.validate(fc.horizon)
    adjusted = fc.adjusted.copy()
    if rule.kind == "manual_override":
        for t, v in zip(rule.hours, rule.override_values):
            adjusted[t] = v
    elif rule.kind == "time_scaling":
        for t in rule.hours:
            adjusted[t] = (1.0 + rule.factor) * adjusted[t]
    elif rule.kind == "load_scaling":
        if rule.direction == "above":
            gate = adjusted > rule.threshold
        else:
            gate = adjusted < rule.threshold
        adjusted[gate] = (1.0 + rule.factor) * adjusted[gate]
    elif rule.kind == "external_scaling":
        series = fc.context.get(rule.external_role)
        if series is None:
            raise DeploymentError(
                f"forecast carries no context series for role {rule.external_role!r}"
            )
        if rule.direction == "above":
            gate = series > rule.threshold
        else:
            gate = series < rule.threshold
        adjusted[gate] = (1.0 + rule.factor) * adjusted[gate]

    record = AdjustmentRecord(
        timestamp=datetime.now(timezone.utc).isoformat(),
        rule=rule,
        pre_values=[float(v) for v in fc.adjusted],
        post_values=[float(v) for v in adjusted],
        note=rule.note,
    )
    updated = replace(fc, adjusted=adjusted, applied_rules=fc.applied_rules + (rule,))
    return updated, record


def replay_rules(raw: np.ndarray, rules: Sequence[PostprocessRule], context: Dict[str, np.ndarray], horizon: int) -> np.ndarray:
    """Re-derive the adjusted series from raw values and the applied rule list."""
    fc = Forecast(
        origin_timestamp=datetime(1970, 1, 1),
        horizon=horizon,
        raw=np.asarray(raw, dtype=float).copy(),
        adjusted=np.asarray(raw, dtype=float).copy(),
        context=context,
    )
    for rule in rules:
        fc, _ = apply_rule(fc, rule)
    return fc.adjusted


def evaluate_adjustment(
    fc: Forecast, actual: Sequence[float], metric: MetricSpec, context: Optional[Sequence[float]] = None
) -> Tuple[float, float]:
    """(raw metric, adjusted metric) for the same actuals."""
    actual_arr = np.asarray(actual, dtype=float)
    if actual_arr.shape[0] != fc.horizon:
        raise DeploymentError("actuals must align with the forecast horizon")
    raw_metric = evaluate_metric(metric, fc.raw, actual_arr, context)
    adj_metric = evaluate_metric(metric, fc.adjusted, actual_arr, context)
    return raw_metric, adj_metric


def forecast_to_csv(fc: Forecast) -> str:
    lines = ["timestamp,raw,adjusted"]
    for i in range(fc.horizon):
        ts = fc.target_timestamps[i].isoformat() if fc.target_timestamps else str(i)
        lines.append(f"{ts},{float(fc.raw[i])!r},{float(fc.adjusted[i])!r}")
    return "\n".join(lines) + "\n"
