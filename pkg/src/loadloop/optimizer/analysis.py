"""Ledger feedback artifacts: trial summaries, hyperparameter importance, and
the best-so-far curve."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .engine import TrialRecord
from .space import SearchSpace


class AnalysisError(ValueError):
    pass


@dataclass
class TrialSummary:
    total: int
    failed: int
    counts_per_type: Dict[str, int]
    best_per_type: Dict[str, dict]
    best_overall: Optional[dict]
    trend: str  # "improving" | "flat"

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "failed": self.failed,
            "counts_per_type": self.counts_per_type,
            "best_per_type": self.best_per_type,
            "best_overall": self.best_overall,
            "trend": self.trend,
        }

    def render_text(self) -> str:
        lines = [f"trials: {self.total} ({self.failed} failed), trend: {self.trend}"]
        for m in sorted(self.counts_per_type):
            best = self.best_per_type.get(m)
            best_txt = f"best {best['loss']:.6g}" if best else "no completed trials"
            lines.append(f"  {m}: {self.counts_per_type[m]} trials, {best_txt}")
        if self.best_overall:
            lines.append(
                f"best overall: {self.best_overall['loss']:.6g}"
                f" ({self.best_overall['config']['model_type']},"
                f" trial {self.best_overall['trial_index']})"
            )
        return "\n".join(lines)


def summarize_trials(ledger: Sequence[TrialRecord], batch_size: int = 10) -> TrialSummary:
    """Counts, per-type and overall bests, and the last-two-batch trend."""
    records = list(ledger)
    counts: Dict[str, int] = {}
    best_per_type: Dict[str, dict] = {}
    best_overall: Optional[dict] = None
    for r in records:
        counts[r.config.model_type] = counts.get(r.config.model_type, 0) + 1
        if r.failed:
            continue
        entry = {"loss": r.loss, "trial_index": r.trial_index, "config": r.config.to_dict()}
        prev = best_per_type.get(r.config.model_type)
        if prev is None or r.loss < prev["loss"]:
            best_per_type[r.config.model_type] = entry
        if best_overall is None or r.loss < best_overall["loss"]:
            best_overall = entry

    # improving iff the running best dropped within the last two batches
    trend = "flat"
    window = 2 * batch_size
    if best_overall is not None and len(records) > 0:
        cutoff = max(0, len(records) - window)
        best_before = math.inf
        for r in records[:cutoff]:
            if not r.failed and r.loss < best_before:
                best_before = r.loss
        for r in records[cutoff:]:
            if not r.failed and r.loss < best_before:
                trend = "improving"
                break

    return TrialSummary(
        total=len(records),
        failed=sum(1 for r in records if r.failed),
        counts_per_type=counts,
        best_per_type=best_per_type,
        best_overall=best_overall,
        trend=trend,
    )


def _rank(values: np.ndarray) -> np.ndarray:
    """Average ranks with tie handling."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=float)
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0
        i = j + 1
    return ranks


def _spearman(x: np.ndarray, y: np.ndarray) -> float:
    if np.all(x == x[0]) or np.all(y == y[0]):
        return 0.0
    rx, ry = _rank(x), _rank(y)
    rx = rx - rx.mean()
    ry = ry - ry.mean()
    denom = math.sqrt(float(np.sum(rx * rx)) * float(np.sum(ry * ry)))
    if denom == 0:
        return 0.0
    return float(np.sum(rx * ry) / denom)


def hyperparameter_importance(
    ledger: Sequence[TrialRecord],
    model_type: str,
    space: SearchSpace,
    min_trials: int = 10,
) -> List[Tuple[str, float]]:
    """Per-dimension |Spearman| between value and loss, normalized to sum 1.
    Categorical dimensions score the max over their one-hot indicators."""
    records = [r for r in ledger if r.config.model_type == model_type and not r.failed]
    if len(records) < min_trials:
        raise AnalysisError(
            f"need at least {min_trials} completed {model_type} trials, have {len(records)}"
        )
    losses = np.array([r.loss for r in records], dtype=float)

    raw: Dict[str, float] = {}
    for group in ("features", "hyperparams"):
        for dim in space.dims(model_type, group):
            rows = [
                (r.config.values_for(group).get(dim.name), i)
                for i, r in enumerate(records)
            ]
            active = [(v, i) for v, i in rows if v is not None]
            if len(active) < 3:
                raw[dim.name] = 0.0
                continue
            idx = np.array([i for _, i in active])
            sub_losses = losses[idx]
            if dim.kind == "categorical":
                best = 0.0
                for choice in dim.choices:
                    indicator = np.array([1.0 if v == choice else 0.0 for v, _ in active])
                    best = max(best, abs(_spearman(indicator, sub_losses)))
                raw[dim.name] = best
            else:
                vals = np.array([float(v) for v, _ in active])
                raw[dim.name] = abs(_spearman(vals, sub_losses))

    total = sum(raw.values())
    if total == 0:
        uniform = 1.0 / len(raw)
        normalized = {name: uniform for name in raw}
    else:
        normalized = {name: v / total for name, v in raw.items()}
    return sorted(normalized.items(), key=lambda kv: (-kv[1], kv[0]))


def best_so_far(ledger: Sequence[TrialRecord]) -> List[float]:
    """Prefix-minimum loss curve; failed trials carry the previous value."""
    records = list(ledger)
    if not records:
        raise AnalysisError("empty ledger")
    if all(r.failed for r in records):
        raise AnalysisError("all trials failed")
    curve: List[float] = []
    best = math.inf
    for r in records:
        if not r.failed and r.loss < best:
            best = r.loss
        curve.append(best)
    return curve
