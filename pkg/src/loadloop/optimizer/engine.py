"""The interactive optimization loop: random initialization, guidance polling,
batch proposal, evaluation, ledger bookkeeping, and stopping rules.

The loop owns the ledger on a single logical thread. Guidance directives apply
at iteration boundaries; evaluator failures become failed trials, never crashes.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .guidance import GuidanceContext, GuidanceDirective, GuidanceError, apply_guidance
from .space import Configuration, SearchSpace, SpaceError, random_sample
from .tpe import fit_surrogate, propose_batch

TRIAL_ORIGINS = ("random_init", "acquisition", "user_injected")


class OptimizerError(RuntimeError):
    pass


@dataclass
class TrialRecord:
    trial_index: int
    config: Configuration
    loss: Optional[float]
    failed: bool = False
    origin: str = "random_init"
    seed: int = 0
    error: Optional[str] = None
    started_at: float = 0.0
    finished_at: float = 0.0
    report_ref: Optional[str] = None

    def __post_init__(self) -> None:
        if self.origin not in TRIAL_ORIGINS:
            raise OptimizerError(f"unknown trial origin {self.origin!r}")
        has_loss = self.loss is not None and np.isfinite(self.loss)
        if has_loss == self.failed:
            raise OptimizerError("a trial carries a finite loss xor the failed flag")

    @property
    def effective_loss(self) -> float:
        return float("inf") if self.failed else float(self.loss)

    def to_dict(self) -> dict:
        return {
            "trial_index": self.trial_index,
            "config": self.config.to_dict(),
            "loss": self.loss,
            "failed": self.failed,
            "origin": self.origin,
            "seed": self.seed,
            "error": self.error,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "report_ref": self.report_ref,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrialRecord":
        return cls(
            trial_index=int(d["trial_index"]),
            config=Configuration.from_dict(d["config"]),
            loss=d.get("loss"),
            failed=bool(d.get("failed", False)),
            origin=d.get("origin", "random_init"),
            seed=int(d.get("seed", 0)),
            error=d.get("error"),
            started_at=float(d.get("started_at", 0.0)),
            finished_at=float(d.get("finished_at", 0.0)),
            report_ref=d.get("report_ref"),
        )


# evaluator: (configuration, seed) -> loss, or anything exposing .loss/.failed
Evaluator = Callable[[Configuration, int], object]
GuidanceSource = Callable[[], List[GuidanceDirective]]
EventSink = Callable[[str, dict], None]


@dataclass
class OptimizerRun:
    space: SearchSpace
    max_trials: int = 200
    epsilon: float = 0.0
    epsilon_enabled: bool = False
    init_samples: int = 20
    batch_size: int = 10
    seed: int = 0
    ledger: List[TrialRecord] = field(default_factory=list)
    current_space: Optional[SearchSpace] = None
    batches_completed: int = 0

    def __post_init__(self) -> None:
        if self.init_samples > self.max_trials:
            raise OptimizerError("init_samples must not exceed max_trials")
        if self.batch_size < 1:
            raise OptimizerError("batch_size must be >= 1")
        if self.current_space is None:
            self.current_space = self.space.copy()

    @property
    def best(self) -> Optional[TrialRecord]:
        finite = [r for r in self.ledger if not r.failed]
        if not finite:
            return None
        return min(finite, key=lambda r: (r.loss, r.trial_index))

    def should_stop(self) -> bool:
        if len(self.ledger) >= self.max_trials:
            return True
        if self.epsilon_enabled:
            best = self.best
            if best is not None and best.loss <= self.epsilon:
                return True
        return False


def trial_seed(run_seed: int, trial_index: int) -> int:
    """Stable per-trial seed derived from the run seed."""
    ss = np.random.SeedSequence(entropy=run_seed, spawn_key=(trial_index,))
    return int(ss.generate_state(1)[0])


def _normalize_outcome(result: object) -> Tuple[Optional[float], bool, Optional[str]]:
    if hasattr(result, "failed"):
        failed = bool(result.failed)
        loss = None if failed else float(result.loss)
        if not failed and not np.isfinite(loss):
            return None, True, "non-finite loss"
        return loss, failed, getattr(result, "error", None)
    loss = float(result)  # plain number
    if not np.isfinite(loss):
        return None, True, "non-finite loss"
    return loss, False, None


def _evaluate_into_ledger(
    run: OptimizerRun,
    proposals: Sequence[Tuple[Configuration, str]],
    evaluator: Evaluator,
    event_sink: Optional[EventSink],
) -> None:
    """Evaluate proposals and commit records in trial-index order."""
    base_index = len(run.ledger)
    for offset, (config, origin) in enumerate(proposals):
        index = base_index + offset
        seed = trial_seed(run.seed, index)
        started = time.time()
        try:
            loss, failed, error = _normalize_outcome(evaluator(config, seed))
        except Exception as exc:  # evaluator failures become failed trials
            loss, failed, error = None, True, f"{type(exc).__name__}: {exc}"
        record = TrialRecord(
            trial_index=index,
            config=config,
            loss=loss,
            failed=failed,
            origin=origin,
            seed=seed,
            error=error,
            started_at=started,
            finished_at=time.time(),
        )
        run.ledger.append(record)
        if event_sink:
            event_sink("trial_completed", record.to_dict())


def run_optimization(
    run: OptimizerRun,
    evaluator: Evaluator,
    guidance_source: Optional[GuidanceSource] = None,
    event_sink: Optional[EventSink] = None,
) -> Configuration:
    """Execute the full interactive loop and return the best configuration."""
    from .analysis import summarize_trials  # local import; analysis depends on engine types

    rng = np.random.default_rng(run.seed)

    if not run.ledger:
        init = random_sample(run.current_space, run.init_samples, rng)
        _evaluate_into_ledger(run, [(c, "random_init") for c in init], evaluator, event_sink)
        if event_sink:
            event_sink("batch_completed", {"batch_index": 0, "size": run.init_samples, "phase": "init"})
            event_sink("summary_updated", summarize_trials(run.ledger, run.batch_size).to_dict())

    while not run.should_stop():
        context = GuidanceContext()
        if guidance_source is not None:
            directives = list(guidance_source() or [])
            if directives:
                try:
                    run.current_space, context = apply_guidance(
                        run.current_space, run.ledger, directives, original_space=run.space
                    )
                    if event_sink:
                        event_sink(
                            "summary_updated",
                            {"guidance_applied": [d.to_dict() for d in directives]},
                        )
                except (GuidanceError, SpaceError) as exc:
                    if event_sink:
                        event_sink("warning", {"guidance_rejected": str(exc)})

        remaining = run.max_trials - len(run.ledger)
        size = min(run.batch_size, remaining)
        state = fit_surrogate(run.ledger, run.current_space)
        try:
            proposals = propose_batch(
                run.current_space, run.ledger, context, size, rng, state=state
            )
        except GuidanceError as exc:
            # e.g. more injections than remaining slots near the trial cap
            if event_sink:
                event_sink("warning", {"guidance_rejected": str(exc)})
            proposals = propose_batch(
                run.current_space, run.ledger, GuidanceContext(), size, rng, state=state
            )
        _evaluate_into_ledger(run, proposals, evaluator, event_sink)
        run.batches_completed += 1
        if event_sink:
            event_sink(
                "batch_completed",
                {"batch_index": run.batches_completed, "size": len(proposals)},
            )
            event_sink("summary_updated", summarize_trials(run.ledger, run.batch_size).to_dict())

    best = run.best
    if best is None:
        raise OptimizerError("every trial failed; no best configuration exists")
    return best.config


def ledger_to_jsonl(ledger: Sequence[TrialRecord]) -> str:
    return "".join(json.dumps(r.to_dict(), sort_keys=True) + "\n" for r in ledger)


def ledger_from_jsonl(text: str) -> List[TrialRecord]:
    records = [TrialRecord.from_dict(json.loads(line)) for line in text.splitlines() if line.strip()]
    for i, r in enumerate(records):
        if r.trial_index != i:
            raise OptimizerError(f"ledger indices not dense at position {i}")
    return records
