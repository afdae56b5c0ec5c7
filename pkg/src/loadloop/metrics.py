"""Forecast evaluation metrics, including weighted and asymmetric loss variants."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

BASE_LOSSES = ("absolute", "squared")
METRIC_KINDS = ("plain", "time_weighted", "condition_weighted", "asymmetric")


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class ConditionRule:
    """Weight switch driven by an aligned external series (e.g. temperature)."""

    column_role: str
    threshold: float
    weight_if_true: float
    weight_if_false: float

    def validate(self) -> None:
        if self.weight_if_true <= 0 or self.weight_if_false <= 0:
            raise MetricError("condition weights must be positive")

    def to_dict(self) -> dict:
        return {
            "column_role": self.column_role,
            "threshold": self.threshold,
            "weight_if_true": self.weight_if_true,
            "weight_if_false": self.weight_if_false,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ConditionRule":
        return cls(
            column_role=d["column_role"],
            threshold=float(d["threshold"]),
            weight_if_true=float(d["weight_if_true"]),
            weight_if_false=float(d["weight_if_false"]),
        )


@dataclass(frozen=True)
class MetricSpec:
    """Full description of the evaluation metric for a forecasting task."""

    base: str = "absolute"
    kind: str = "plain"
    weights: Optional[tuple] = None
    condition_rule: Optional[ConditionRule] = None
    alpha: float = 1.0
    beta: float = 1.0

    def validate(self, horizon: Optional[int] = None) -> None:
        if self.base not in BASE_LOSSES:
            raise MetricError(f"unknown base loss {self.base!r}")
        if self.kind not in METRIC_KINDS:
            raise MetricError(f"unknown metric kind {self.kind!r}")
        if self.kind == "time_weighted":
            if self.weights is None:
                raise MetricError("time_weighted metric requires a weight vector")
            if any(w <= 0 for w in self.weights):
                raise MetricError("weights must be positive")
            if horizon is not None and len(self.weights) != horizon:
                raise MetricError(
                    f"weight vector length {len(self.weights)} != horizon {horizon}"
                )
        if self.kind == "condition_weighted":
            if self.condition_rule is None:
                raise MetricError("condition_weighted metric requires a condition rule")
            self.condition_rule.validate()
        if self.kind == "asymmetric":
            if self.alpha <= 0 or self.beta <= 0:
                raise MetricError("alpha and beta must be positive")

    def to_dict(self) -> dict:
        d: dict = {"base": self.base, "kind": self.kind}
        if self.weights is not None:
            d["weights"] = list(self.weights)
        if self.condition_rule is not None:
            d["condition_rule"] = self.condition_rule.to_dict()
        if self.kind == "asymmetric":
            d["alpha"] = self.alpha
            d["beta"] = self.beta
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MetricSpec":
        rule = d.get("condition_rule")
        return cls(
            base=d.get("base", "absolute"),
            kind=d.get("kind", "plain"),
            weights=tuple(d["weights"]) if d.get("weights") is not None else None,
            condition_rule=ConditionRule.from_dict(rule) if rule else None,
            alpha=float(d.get("alpha", 1.0)),
            beta=float(d.get("beta", 1.0)),
        )


def _as_arrays(pred: Sequence[float], actual: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred, dtype=float)
    a = np.asarray(actual, dtype=float)
    if p.shape != a.shape:
        raise MetricError(f"length mismatch: pred {p.shape} vs actual {a.shape}")
    if p.size == 0:
        raise MetricError("empty input")
    return p, a


def pointwise(pred: np.ndarray, actual: np.ndarray, base: str) -> np.ndarray:
    """Per-step loss terms for the chosen base loss."""
    diff = pred - actual
    if base == "absolute":
        return np.abs(diff)
    if base == "squared":
        return diff * diff
    raise MetricError(f"unknown base loss {base!r}")


def mae(pred: Sequence[float], actual: Sequence[float]) -> float:
    p, a = _as_arrays(pred, actual)
    return float(np.mean(np.abs(p - a)))


def mape(pred: Sequence[float], actual: Sequence[float]) -> float:
    """Mean absolute percentage error as a fraction. Zero actuals are rejected."""
    p, a = _as_arrays(pred, actual)
    if np.any(a == 0):
        raise MetricError("mape undefined: actual contains zero")
    return float(np.mean(np.abs(p - a) / np.abs(a)))


def weighted_loss(
    pred: Sequence[float],
    actual: Sequence[float],
    weights: Sequence[float],
    base: str = "absolute",
) -> float:
    """Weighted mean of per-step losses, normalized by the weight sum."""
    p, a = _as_arrays(pred, actual)
    w = np.asarray(weights, dtype=float)
    if w.shape != p.shape:
        raise MetricError(f"length mismatch: weights {w.shape} vs pred {p.shape}")
    if np.any(w <= 0):
        raise MetricError("weights must be positive")
    terms = pointwise(p, a, base)
    return float(np.sum(w * terms) / np.sum(w))


def condition_weights(context_series: Sequence[float], rule: ConditionRule) -> np.ndarray:
    """Per-step weights: weight_if_true where the context exceeds the threshold."""
    rule.validate()
    ctx = np.asarray(context_series, dtype=float)
    if np.any(np.isnan(ctx)):
        raise MetricError("context series contains missing values")
    return np.where(ctx > rule.threshold, rule.weight_if_true, rule.weight_if_false)


def asymmetric_loss(
    pred: Sequence[float],
    actual: Sequence[float],
    alpha: float,
    beta: float,
    base: str = "absolute",
) -> float:
    """Mean per-step loss with alpha on over-prediction and beta otherwise (ties included)."""
    if alpha <= 0 or beta <= 0:
        raise MetricError("alpha and beta must be positive")
    p, a = _as_arrays(pred, actual)
    terms = pointwise(p, a, base)
    coef = np.where(p > a, alpha, beta)
    return float(np.mean(coef * terms))


def evaluate(
    spec: MetricSpec,
    pred: Sequence[float],
    actual: Sequence[float],
    context: Optional[Sequence[float]] = None,
) -> float:
    """Dispatch to the loss form selected by the spec."""
    spec.validate()
    if spec.kind == "condition_weighted":
        if context is None:
            raise MetricError("condition_weighted metric requires a context series")
        w = condition_weights(context, spec.condition_rule)
        return weighted_loss(pred, actual, w, spec.base)
    if context is not None:
        raise MetricError("context only valid for condition_weighted metrics")
    if spec.kind == "plain":
        p, a = _as_arrays(pred, actual)
        return float(np.mean(pointwise(p, a, spec.base)))
    if spec.kind == "time_weighted":
        return weighted_loss(pred, actual, spec.weights, spec.base)
    if spec.kind == "asymmetric":
        return asymmetric_loss(pred, actual, spec.alpha, spec.beta, spec.base)
    raise MetricError(f"unknown metric kind {spec.kind!r}")
