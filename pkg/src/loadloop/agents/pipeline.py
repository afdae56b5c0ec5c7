"""Three-stage pipeline orchestration over the agent bus.

The Pipeline owns the run directory and all pipeline state. Its plain methods
(ingest, confirm semantics, clean, search, deploy, postprocess) are the single
implementation used both by the HTTP service and by the agent-driven headless
run, where scripted or live backends drive the same methods through tool calls.

The run directory is the source of truth: a killed run restores from disk and
resumes from the last completed stage.
"""

from __future__ import annotations

import json
import os
from collections import deque
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .. import dataset as ds
from ..deployment import (
    AdjustmentLog,
    Forecast,
    PostprocessRule,
    apply_rule,
    forecast as make_forecast,
    forecast_to_csv,
)
from ..features import FeatureConfig, assemble_design_matrix
from ..metrics import MetricSpec
from ..models import evaluate_config, save_model, train as train_model
from ..optimizer import (
    Configuration,
    GuidanceDirective,
    OptimizerRun,
    TrialRecord,
    default_search_space,
    run_optimization,
    summarize_trials,
    trial_seed,
)
from .agent import Agent, step as agent_step
from .backend import ScriptedBackend, ScriptRule
from .bus import AgentMessage, MessagePool, ToolCall
from .guidance_parse import default_strategy, parse_guidance
from .roles import (
    DEPLOYMENT_OPERATOR,
    MODEL_DEVELOPER,
    MODEL_MANAGER,
    PREPARATION_ASSISTANT,
    TASK_MANAGER,
    PROFILE_BUILDERS,
)
from .tokens import TokenLedger

STAGES = ("created", "preparing", "optimizing", "deploying", "done", "failed")
USER_ID = "user"
MAX_PUMP_STEPS = 400


class PipelineError(RuntimeError):
    pass


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass
class OptimizeSettings:
    max_trials: int = 30
    init_samples: int = 10
    batch_size: int = 5
    epsilon: Optional[float] = None
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "max_trials": self.max_trials,
            "init_samples": self.init_samples,
            "batch_size": self.batch_size,
            "epsilon": self.epsilon,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OptimizeSettings":
        return cls(
            max_trials=int(d.get("max_trials", 30)),
            init_samples=int(d.get("init_samples", 10)),
            batch_size=int(d.get("batch_size", 5)),
            epsilon=float(d["epsilon"]) if d.get("epsilon") is not None else None,
            seed=int(d.get("seed", 0)),
        )


@dataclass
class PipelineConfig:
    """Everything a headless run needs; the service fills this incrementally."""

    dataset_path: str = ""
    fallback_paths: List[str] = field(default_factory=list)
    interval_delta: int = 24
    horizon: int = 1
    metric: MetricSpec = field(default_factory=MetricSpec)
    split_ratios: Tuple[float, float, float] = (0.7, 0.15, 0.15)
    optimize: OptimizeSettings = field(default_factory=OptimizeSettings)
    semantics_override: Optional[Dict[str, str]] = None
    postprocess_rules: List[PostprocessRule] = field(default_factory=list)
    scripted_guidance: List[dict] = field(default_factory=list)  # {"after_batch": n, "directives": [...]}

    def to_dict(self) -> dict:
        return {
            "dataset_path": self.dataset_path,
            "fallback_paths": self.fallback_paths,
            "interval_delta": self.interval_delta,
            "horizon": self.horizon,
            "metric": self.metric.to_dict(),
            "split_ratios": list(self.split_ratios),
            "optimize": self.optimize.to_dict(),
            "semantics_override": self.semantics_override,
            "postprocess_rules": [r.to_dict() for r in self.postprocess_rules],
            "scripted_guidance": self.scripted_guidance,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        return cls(
            dataset_path=d.get("dataset_path", ""),
            fallback_paths=list(d.get("fallback_paths", [])),
            interval_delta=int(d.get("interval_delta", 24)),
            horizon=int(d.get("horizon", 1)),
            metric=MetricSpec.from_dict(d.get("metric", {})),
            split_ratios=tuple(d.get("split_ratios", (0.7, 0.15, 0.15))),
            optimize=OptimizeSettings.from_dict(d.get("optimize", {})),
            semantics_override=d.get("semantics_override"),
            postprocess_rules=[PostprocessRule.from_dict(r) for r in d.get("postprocess_rules", [])],
            scripted_guidance=list(d.get("scripted_guidance", [])),
        )


class RunDir:
    """Run-directory layout and append-only record files."""

    def __init__(self, path: str) -> None:
        self.path = path
        os.makedirs(path, exist_ok=True)
        os.makedirs(os.path.join(path, "forecasts"), exist_ok=True)

    def file(self, name: str) -> str:
        return os.path.join(self.path, name)

    def exists(self, name: str) -> bool:
        return os.path.exists(self.file(name))

    def write_json(self, name: str, payload: dict) -> None:
        with open(self.file(name), "w") as fh:
            json.dump(payload, fh, sort_keys=True, indent=1)

    def read_json(self, name: str) -> Optional[dict]:
        try:
            with open(self.file(name)) as fh:
                return json.load(fh)
        except FileNotFoundError:
            return None

    def append_jsonl(self, name: str, payload: dict) -> None:
        with open(self.file(name), "a") as fh:
            fh.write(json.dumps(payload, sort_keys=True) + "\n")

    def read_jsonl(self, name: str) -> List[dict]:
        try:
            with open(self.file(name)) as fh:
                return [json.loads(line) for line in fh if line.strip()]
        except FileNotFoundError:
            return []

    def remove(self, name: str) -> None:
        try:
            os.remove(self.file(name))
        except FileNotFoundError:
            pass


class Pipeline:
    """Per-run state machine: preparation, optimization, deployment."""

    def __init__(
        self,
        run_dir: str,
        backend=None,
        config: Optional[PipelineConfig] = None,
        event_sink: Optional[Callable[[str, dict], None]] = None,
    ) -> None:
        self.run = RunDir(run_dir)
        self.backend = backend if backend is not None else ScriptedBackend()
        self.config = config or PipelineConfig()
        self._external_sink = event_sink
        self._event_seq = len(self.run.read_jsonl("events.jsonl"))

        self.stage = "created"
        self.raw: Optional[ds.RawDataset] = None
        self.proposed_semantics: Optional[ds.ColumnSemantics] = None
        self.semantics: Optional[ds.ColumnSemantics] = None
        self.clean: Optional[ds.CleanDataset] = None
        self.cleaning_report: Optional[ds.CleaningReport] = None
        self.summary: Optional[ds.DataSummary] = None
        self.task: Optional[ds.TaskSpec] = None
        self.splits: Optional[Tuple[Tuple[int, int], Tuple[int, int], Tuple[int, int]]] = None
        self.opt_run: Optional[OptimizerRun] = None
        self.best_config: Optional[Configuration] = None
        self.best_record: Optional[dict] = None  # loss, trial_index, seed
        self.best_train_report: Optional[dict] = None
        self.forecasts: List[Forecast] = []
        self.adjustments = AdjustmentLog()
        self.guidance_queue: deque = deque()
        self._pending_strategy: List[GuidanceDirective] = []

        self.tokens = TokenLedger()
        self.pool = MessagePool(event_sink=self.emit_event)
        self.pool.register(USER_ID, ("user.io",))
        self.agents: Dict[str, Agent] = {}
        self._build_agents()

        self.run.write_json("config.json", self.config.to_dict())

    # ------------------------------------------------------------------ events

    def emit_event(self, kind: str, payload: dict) -> None:
        record = {"seq": self._event_seq, "kind": kind, "payload": payload, "at": _now()}
        self._event_seq += 1
        self.run.append_jsonl("events.jsonl", record)
        if self._external_sink:
            self._external_sink(kind, record)

    def _set_stage(self, stage: str) -> None:
        if stage not in STAGES:
            raise PipelineError(f"unknown stage {stage!r}")
        self.stage = stage
        self.run.write_json("state.json", self.state_dict())
        self.emit_event("stage_change", {"stage": stage})

    def state_dict(self) -> dict:
        return {
            "stage": self.stage,
            "has_dataset": self.raw is not None,
            "has_semantics": self.semantics is not None,
            "has_task": self.task is not None,
            "cleaned": self.clean is not None,
            "trials": len(self.opt_run.ledger) if self.opt_run else 0,
            "optimized": self.best_config is not None,
            "forecasts": len(self.forecasts),
        }

    # ------------------------------------------------------------------ agents

    def _build_agents(self) -> None:
        handlers = {
            TASK_MANAGER: {
                "send_to_user": self._tool_send_to_user,
                "begin_preparation": self._tool_begin_preparation,
                "begin_optimization": self._tool_begin_optimization,
                "submit_guidance": self._tool_submit_guidance,
                "begin_deployment": self._tool_begin_deployment,
            },
            PREPARATION_ASSISTANT: {
                "load_dataset": self._tool_load_dataset,
                "confirm_semantics": self._tool_confirm_semantics,
                "define_task": self._tool_define_task,
                "clean_data": self._tool_clean_data,
                "set_metric": self._tool_set_metric,
            },
            MODEL_MANAGER: {
                "propose_strategy": self._tool_propose_strategy,
                "send_trial_plan": self._tool_send_trial_plan,
            },
            MODEL_DEVELOPER: {
                "evaluate_configuration": self._tool_evaluate_configuration,
            },
            DEPLOYMENT_OPERATOR: {
                "generate_forecast": self._tool_generate_forecast,
                "apply_postprocess_rule": self._tool_apply_postprocess_rule,
            },
        }
        for agent_id, builder in PROFILE_BUILDERS.items():
            profile = builder()
            agent = Agent(profile, handlers[agent_id])
            self.pool.register(agent_id, profile.subscriptions)
            self.agents[agent_id] = agent

    def post(
        self,
        sender: str,
        topics: Sequence[str],
        content: str,
        role: str = "agent",
        tool_calls: Sequence[ToolCall] = (),
    ) -> AgentMessage:
        msg = AgentMessage(
            sender=sender,
            topics=tuple(topics),
            role_marker=role,
            content=content,
            tool_calls=tuple(tool_calls),
            timestamp=_now(),
        )
        self.pool.publish(msg)
        self.run.append_jsonl("transcript.jsonl", msg.to_dict())
        self.emit_event("agent_message", {"message": msg.to_dict()})
        return msg

    def pump(self, max_steps: int = MAX_PUMP_STEPS, only: Optional[Sequence[str]] = None) -> int:
        """Step agents with pending deliveries until the pool is quiet."""
        steps = 0
        while steps < max_steps:
            pending = [
                a
                for a in self.pool.pending_agents()
                if a != USER_ID and (only is None or a in only)
            ]
            if not pending:
                break
            for agent_id in pending:
                published = agent_step(self.agents[agent_id], self.backend, self.pool, self.tokens)
                for msg in published:
                    self.run.append_jsonl("transcript.jsonl", msg.to_dict())
                    self.emit_event("agent_message", {"message": msg.to_dict()})
                steps += 1
                if steps >= max_steps:
                    break
        return steps

    def chat_transcript(self) -> List[dict]:
        return [m.to_dict() for m in self.pool.messages if "user.io" in m.topics]

    def user_message(self, text: str) -> List[dict]:
        """Bridge one user chat message through the task manager."""
        self.post(USER_ID, ("user.io",), text, role="user")
        self.pump(only=(TASK_MANAGER,))
        return self.chat_transcript()

    # ------------------------------------------------------- preparation stage

    def ingest_dataset(self, path: str) -> ds.ColumnSemantics:
        raw = ds.load_csv(path)
        dest = self.run.file("dataset.csv")
        if os.path.abspath(path) != os.path.abspath(dest):
            with open(path, "rb") as src, open(dest, "wb") as out:
                out.write(src.read())
        self.raw = raw
        self.proposed_semantics = ds.infer_column_semantics(raw)
        if self.stage == "created":
            self._set_stage("preparing")
        self.run.write_json("semantics_proposed.json", self.proposed_semantics.to_dict())
        return self.proposed_semantics

    def ingest_dataset_text(self, csv_text: str) -> ds.ColumnSemantics:
        dest = self.run.file("dataset.csv")
        with open(dest, "w") as fh:
            fh.write(csv_text)
        return self.ingest_dataset(dest)

    def confirm_semantics(self, assignments: Optional[Dict[str, str]] = None) -> ds.ColumnSemantics:
        if assignments is None:
            if self.proposed_semantics is None:
                raise PipelineError("no dataset ingested yet")
            self.semantics = self.proposed_semantics
        else:
            sem = ds.ColumnSemantics(assignments=dict(assignments))
            sem.validate()
            self.semantics = sem
        self.run.write_json("semantics.json", self.semantics.to_dict())
        return self.semantics

    def set_task(self, interval_delta: int, horizon: int) -> ds.TaskSpec:
        metric = self.task.metric if self.task else self.config.metric
        self.task = ds.TaskSpec(
            interval_delta=int(interval_delta),
            horizon=int(horizon),
            metric=metric,
            dataset_ref="dataset.csv",
        )
        self.run.write_json("task.json", self.task.to_dict())
        return self.task

    def set_metric(self, metric: MetricSpec) -> MetricSpec:
        metric.validate(self.task.horizon if self.task else None)
        if self.task is not None:
            self.task = ds.TaskSpec(
                interval_delta=self.task.interval_delta,
                horizon=self.task.horizon,
                metric=metric,
                dataset_ref=self.task.dataset_ref,
            )
            self.run.write_json("task.json", self.task.to_dict())
        else:
            self.config.metric = metric
        self.run.write_json("metric.json", metric.to_dict())
        return metric

    def run_cleaning(self) -> Tuple[ds.CleaningReport, ds.DataSummary]:
        if self.raw is None:
            raise PipelineError("no dataset ingested yet")
        if self.semantics is None:
            raise PipelineError("column semantics not confirmed yet")
        self.clean = ds.clean(self.raw, self.semantics)
        self.cleaning_report = self.clean.report
        self.summary = ds.summarize(self.clean)
        self.run.write_json("cleaning_report.json", self.cleaning_report.to_dict())
        self.run.write_json("summary.json", self.summary.to_dict())
        self.emit_event("summary_updated", {"data_summary": self.summary.to_dict()})
        return self.cleaning_report, self.summary

    def _require_prepared(self) -> None:
        missing = []
        if self.clean is None:
            missing.append("cleaned dataset")
        if self.task is None:
            missing.append("task definition")
        if missing:
            raise PipelineError("preparation incomplete: missing " + ", ".join(missing))

    # ------------------------------------------------------ optimization stage

    def _compute_splits(self) -> None:
        min_length = 168 + self.task.horizon
        self.splits = ds.split_chronological(self.clean, self.config.split_ratios, min_length)

    def build_evaluator(self):
        train_range, val_range, _ = self.splits

        def evaluator(config: Configuration, seed: int):
            return evaluate_config(config, self.clean, self.task, train_range, val_range, seed)

        return evaluator

    def enqueue_guidance_directives(self, directives: Sequence[GuidanceDirective]) -> None:
        for d in directives:
            d.validate()
            self.guidance_queue.append(d)
            self.run.append_jsonl("directives.jsonl", {"at": _now(), "directive": d.to_dict()})

    def enqueue_guidance_text(self, text: str) -> Tuple[List[GuidanceDirective], Optional[str]]:
        if self.opt_run is None:
            raise PipelineError("no optimization in progress")
        summary = summarize_trials(self.opt_run.ledger, self.opt_run.batch_size)
        directives, clarification = parse_guidance(text, summary, self.backend, TASK_MANAGER)
        if directives:
            self.enqueue_guidance_directives(directives)
        if clarification:
            self.post(TASK_MANAGER, ("user.io",), clarification)
        return directives, clarification

    def _guidance_source(self) -> List[GuidanceDirective]:
        """Engine poll at each iteration boundary: user directives first, the
        scripted trace second, the model manager's default strategy last."""
        out: List[GuidanceDirective] = []
        while self.guidance_queue:
            out.append(self.guidance_queue.popleft())
        batch_index = self.opt_run.batches_completed
        for entry in self.config.scripted_guidance:
            if int(entry.get("after_batch", -1)) == batch_index:
                scripted = [GuidanceDirective.from_dict(d) for d in entry.get("directives", [])]
                for d in scripted:
                    self.run.append_jsonl(
                        "directives.jsonl", {"at": _now(), "directive": d.to_dict()}
                    )
                out.extend(scripted)
        if out:
            return out
        return self._model_manager_strategy()

    def _model_manager_strategy(self) -> List[GuidanceDirective]:
        """One model-manager step; its propose_strategy tool runs the
        deterministic balancing rule."""
        self._pending_strategy = []
        summary = summarize_trials(self.opt_run.ledger, self.opt_run.batch_size)
        self.post(TASK_MANAGER, ("model.optimize",), "trial summary:\n" + summary.render_text())
        self.pump(max_steps=1, only=(MODEL_MANAGER,))
        # absorb the tool result so the manager does not stay pending forever
        mm = self.agents[MODEL_MANAGER]
        mm.remember(self.pool.drain(MODEL_MANAGER))
        return list(self._pending_strategy)

    def run_search(self, settings: Optional[OptimizeSettings] = None) -> Configuration:
        self._require_prepared()
        settings = settings or self.config.optimize
        self.config.optimize = settings
        self.run.write_json("config.json", self.config.to_dict())
        self._compute_splits()
        space = default_search_space()
        self.run.write_json("space.json", space.to_dict())
        self.run.remove("trials.jsonl")  # a restarted stage rebuilds its ledger
        self.opt_run = OptimizerRun(
            space=space,
            max_trials=settings.max_trials,
            epsilon=settings.epsilon if settings.epsilon is not None else 0.0,
            epsilon_enabled=settings.epsilon is not None,
            init_samples=settings.init_samples,
            batch_size=settings.batch_size,
            seed=settings.seed,
        )
        self._set_stage("optimizing")

        def sink(kind: str, payload: dict) -> None:
            if kind == "trial_completed":
                self.run.append_jsonl("trials.jsonl", payload)
            if kind == "batch_completed":
                best = self.opt_run.best
                best_txt = f"best loss {best.loss:.6g}" if best else "no completed trials"
                self.post(
                    MODEL_DEVELOPER,
                    ("model.optimize",),
                    f"batch {payload.get('batch_index')} evaluated ({payload.get('size')} trials); {best_txt}",
                )
            self.emit_event(kind, payload)

        best = run_optimization(
            self.opt_run,
            evaluator=self.build_evaluator(),
            guidance_source=self._guidance_source,
            event_sink=sink,
        )
        self.best_config = best
        best_trial = self.opt_run.best
        self.best_record = {
            "config": best.to_dict(),
            "loss": best_trial.loss,
            "trial_index": best_trial.trial_index,
            "seed": best_trial.seed,
        }
        self.run.write_json("best_config.json", self.best_record)
        self._set_stage("deploying")
        return best

    # -------------------------------------------------------- deployment stage

    def _retrain_best(self):
        train_range, val_range, _ = self.splits
        fc = FeatureConfig.from_dict(self.best_config.features)
        train_dm = assemble_design_matrix(fc, self.clean, self.task, train_range)
        val_dm = assemble_design_matrix(fc, self.clean, self.task, val_range, selection=train_dm.selection)
        model, report = train_model(
            self.best_config.model_type,
            self.best_config.hyperparams,
            train_dm,
            val_dm,
            seed=int(self.best_record["seed"]),
        )
        self.best_train_report = report.to_dict()
        self.run.write_json("best_train_report.json", self.best_train_report)
        return model, train_dm.selection

    def deploy(self, origin_index: Optional[int] = None) -> Forecast:
        if self.best_config is None:
            raise PipelineError("no winning configuration; run the search first")
        self._require_prepared()
        if self.splits is None:
            self._compute_splits()
        model, selection = self._retrain_best()
        save_model(model, self.run.file("best_model.bin"))
        fc = make_forecast(self.best_config, model, selection, self.clean, self.task, origin_index)
        self.forecasts.append(fc)
        self._persist_forecast(len(self.forecasts) - 1)
        self.emit_event("forecast_ready", {"index": len(self.forecasts) - 1, "forecast": fc.to_dict()})
        return fc

    def _persist_forecast(self, index: int) -> None:
        fc = self.forecasts[index]
        self.run.write_json(os.path.join("forecasts", f"forecast_{index:03d}.json"), fc.to_dict())
        with open(self.run.file(os.path.join("forecasts", f"forecast_{index:03d}.csv")), "w") as fh:
            fh.write(forecast_to_csv(fc))

    def postprocess(self, rule: PostprocessRule, index: int = -1) -> Forecast:
        if not self.forecasts:
            raise PipelineError("no forecast to adjust")
        idx = index if index >= 0 else len(self.forecasts) - 1
        updated, record = apply_rule(self.forecasts[idx], rule)
        self.forecasts[idx] = updated
        self.adjustments.append(record)
        self.run.append_jsonl("adjustments.jsonl", record.to_dict())
        self._persist_forecast(idx)
        self.emit_event("forecast_ready", {"index": idx, "forecast": updated.to_dict()})
        return updated

    def finish(self) -> None:
        self.run.write_json("tokens.json", self.tokens.report())
        self._set_stage("done")

    def fail(self, reason: str) -> None:
        self.emit_event("error", {"reason": reason})
        self.run.write_json("tokens.json", self.tokens.report())
        self._set_stage("failed")

    # ------------------------------------------------------------ tool handlers

    def _tool_send_to_user(self, args: dict) -> str:
        self.post(TASK_MANAGER, ("user.io",), str(args.get("text", "")))
        return "sent"

    def _tool_begin_preparation(self, args: dict) -> dict:
        delta = int(args.get("interval_delta", self.config.interval_delta))
        horizon = int(args.get("horizon", self.config.horizon))
        path = str(args.get("dataset_path", self.config.dataset_path))
        self.set_task(delta, horizon)
        self.post(
            TASK_MANAGER,
            ("task.prepare",),
            f"prepare the task: dataset_path={path} interval_delta={delta} horizon={horizon}",
        )
        return {"status": "preparation started", "dataset_path": path}

    def _tool_begin_optimization(self, args: dict) -> dict:
        best = self.run_search()
        summary = summarize_trials(self.opt_run.ledger, self.opt_run.batch_size)
        return {
            "status": "optimization complete",
            "best_loss": self.best_record["loss"],
            "best_config": best.to_dict(),
            "trials": summary.total,
        }

    def _tool_submit_guidance(self, args: dict) -> dict:
        directives = [GuidanceDirective.from_dict(d) for d in json.loads(args["directives_json"])]
        self.enqueue_guidance_directives(directives)
        return {"queued": len(directives)}

    def _tool_begin_deployment(self, args: dict) -> dict:
        self.post(TASK_MANAGER, ("deploy.forecast",), "deploy the winning configuration")
        return {"status": "deployment requested"}

    def _tool_load_dataset(self, args: dict) -> dict:
        proposal = self.ingest_dataset(str(args["path"]))
        return {"rows": self.raw.n_rows, "proposed_semantics": proposal.to_dict()}

    def _tool_confirm_semantics(self, args: dict) -> dict:
        payload = args.get("assignments_json", "proposed")
        if payload in ("proposed", "", None):
            sem = self.confirm_semantics(self.config.semantics_override)
        else:
            sem = self.confirm_semantics(json.loads(payload))
        return {"semantics": sem.to_dict()}

    def _tool_define_task(self, args: dict) -> dict:
        task = self.set_task(int(args["interval_delta"]), int(args["horizon"]))
        return {"task": task.to_dict()}

    def _tool_clean_data(self, args: dict) -> dict:
        report, _summary = self.run_cleaning()
        return {"cleaning_report": report.to_dict(), "rows": self.clean.n_rows}

    def _tool_set_metric(self, args: dict) -> dict:
        metric = MetricSpec.from_dict(json.loads(args["metric_json"]))
        self.set_metric(metric)
        return {"metric": metric.to_dict()}

    def _tool_propose_strategy(self, args: dict) -> dict:
        summary = summarize_trials(self.opt_run.ledger, self.opt_run.batch_size)
        directives = default_strategy(
            summary, self.opt_run.current_space.model_types, self.opt_run.batch_size
        )
        self._pending_strategy = directives
        return {"directives": [d.to_dict() for d in directives]}

    def _tool_send_trial_plan(self, args: dict) -> dict:
        self.post(MODEL_MANAGER, ("model.execute",), f"trial plan: {args.get('plan_json', '')}")
        return {"status": "plan forwarded"}

    def _tool_evaluate_configuration(self, args: dict) -> dict:
        self._require_prepared()
        if self.splits is None:
            self._compute_splits()
        config = Configuration.from_dict(json.loads(args["config_json"]))
        evaluator = self.build_evaluator()
        seed = trial_seed(self.config.optimize.seed, 0)
        outcome = evaluator(config, seed)
        return {"loss": outcome.loss, "failed": outcome.failed, "error": outcome.error}

    def _tool_generate_forecast(self, args: dict) -> dict:
        origin = args.get("origin_index")
        fc = self.deploy(int(origin) if origin is not None else None)
        return {"forecast": fc.to_dict()}

    def _tool_apply_postprocess_rule(self, args: dict) -> dict:
        rule = PostprocessRule.from_dict(json.loads(args["rule_json"]))
        fc = self.postprocess(rule)
        return {"adjusted": [float(v) for v in fc.adjusted]}


# ----------------------------------------------------------------- restoration


def restore_pipeline(
    run_dir: str,
    backend=None,
    event_sink: Optional[Callable[[str, dict], None]] = None,
) -> Pipeline:
    """Rebuild a pipeline from its run directory. Deterministic artifacts
    (cleaning, splits) are recomputed; search results load from disk."""
    probe = RunDir(run_dir)
    saved = probe.read_json("config.json")
    config = PipelineConfig.from_dict(saved) if saved else PipelineConfig()
    if backend is None:
        backend = build_pipeline_script(config)
    pipe = Pipeline(run_dir, backend=backend, config=config, event_sink=event_sink)

    state = pipe.run.read_json("state.json") or {}
    pipe.stage = state.get("stage", "created")

    if pipe.run.exists("dataset.csv"):
        pipe.raw = ds.load_csv(pipe.run.file("dataset.csv"))
        pipe.proposed_semantics = ds.infer_column_semantics(pipe.raw)
    sem = pipe.run.read_json("semantics.json")
    if sem and pipe.raw is not None:
        pipe.semantics = ds.ColumnSemantics(assignments=sem)
        pipe.semantics.validate()
    task = pipe.run.read_json("task.json")
    if task:
        pipe.task = ds.TaskSpec.from_dict(task)
    if pipe.raw is not None and pipe.semantics is not None and pipe.run.exists("cleaning_report.json"):
        pipe.clean = ds.clean(pipe.raw, pipe.semantics)
        pipe.cleaning_report = pipe.clean.report
        pipe.summary = ds.summarize(pipe.clean)
    best = pipe.run.read_json("best_config.json")
    if best:
        pipe.best_config = Configuration.from_dict(best["config"])
        pipe.best_record = best
    pipe.best_train_report = pipe.run.read_json("best_train_report.json")
    for entry in sorted(os.listdir(pipe.run.file("forecasts"))):
        if entry.endswith(".json"):
            with open(pipe.run.file(os.path.join("forecasts", entry))) as fh:
                pipe.forecasts.append(Forecast.from_dict(json.load(fh)))
    return pipe


# --------------------------------------------------------------- headless run


def build_pipeline_script(config: PipelineConfig) -> ScriptedBackend:
    """Canned completions that walk the five agents through all three stages
    for the given run configuration. Rule order encodes priority: progress
    evidence in the prompt outranks retry rules."""
    paths = [config.dataset_path] + list(config.fallback_paths)
    rules: List[ScriptRule] = [
        ScriptRule(
            TASK_MANAGER,
            "start forecasting task",
            text="Starting the forecasting pipeline.",
            tool_calls=(
                ToolCall(
                    "begin_preparation",
                    {
                        "dataset_path": paths[0],
                        "interval_delta": config.interval_delta,
                        "horizon": config.horizon,
                    },
                ),
            ),
        ),
        # preparation steps 2-4 fire on evidence of the previous step
        ScriptRule(
            PREPARATION_ASSISTANT,
            "proposed_semantics",
            tool_calls=(ToolCall("confirm_semantics", {"assignments_json": "proposed"}),),
        ),
        ScriptRule(
            PREPARATION_ASSISTANT,
            "confirm_semantics ->",
            tool_calls=(
                ToolCall(
                    "define_task",
                    {"interval_delta": config.interval_delta, "horizon": config.horizon},
                ),
            ),
        ),
        ScriptRule(
            PREPARATION_ASSISTANT,
            "define_task ->",
            tool_calls=(ToolCall("clean_data", {}),),
        ),
        ScriptRule(
            PREPARATION_ASSISTANT,
            "clean_data ->",
            tool_calls=(
                ToolCall("set_metric", {"metric_json": json.dumps(config.metric.to_dict(), sort_keys=True)}),
            ),
        ),
        ScriptRule(
            PREPARATION_ASSISTANT,
            "set_metric ->",
            text="preparation complete",
        ),
    ]
    # step 1: first load attempt, then one retry rule per fallback path
    rules.append(
        ScriptRule(
            PREPARATION_ASSISTANT,
            "prepare the task",
            tool_calls=(ToolCall("load_dataset", {"path": paths[0]}),),
        )
    )
    for path in paths[1:]:
        rules.append(
            ScriptRule(
                PREPARATION_ASSISTANT,
                'load_dataset -> {"error"',
                tool_calls=(ToolCall("load_dataset", {"path": path}),),
            )
        )
    rules.extend(
        [
            ScriptRule(
                TASK_MANAGER,
                "preparation complete",
                tool_calls=(ToolCall("begin_optimization", {}),),
            ),
            ScriptRule(
                MODEL_MANAGER,
                "trial summary:",
                tool_calls=(ToolCall("propose_strategy", {}),),
                once=False,
            ),
            ScriptRule(
                TASK_MANAGER,
                'begin_optimization -> {"best_config"',
                text="optimization finished",
                tool_calls=(ToolCall("begin_deployment", {}),),
            ),
            ScriptRule(
                DEPLOYMENT_OPERATOR,
                "deploy the winning configuration",
                tool_calls=(ToolCall("generate_forecast", {}),),
            ),
        ]
    )
    for rule_obj in config.postprocess_rules:
        rules.append(
            ScriptRule(
                DEPLOYMENT_OPERATOR,
                'generate_forecast -> {"forecast"',
                tool_calls=(
                    ToolCall("apply_postprocess_rule", {"rule_json": json.dumps(rule_obj.to_dict(), sort_keys=True)}),
                ),
            )
        )
    rules.extend(
        [
            ScriptRule(
                DEPLOYMENT_OPERATOR,
                'generate_forecast -> {"forecast"',
                text="deployment complete",
            ),
            ScriptRule(
                TASK_MANAGER,
                "deployment complete",
                tool_calls=(ToolCall("send_to_user", {"text": "The forecasting task is complete."}),),
            ),
        ]
    )
    return ScriptedBackend(rules)


def run_pipeline(
    run_dir: str,
    config: PipelineConfig,
    backend=None,
    event_sink: Optional[Callable[[str, dict], None]] = None,
) -> Pipeline:
    """Headless end-to-end run. With no backend given, a scripted backend is
    generated from the config. Raises PipelineError on stage failure, leaving
    resumable state in the run directory."""
    if backend is None:
        backend = build_pipeline_script(config)
    pipe = Pipeline(run_dir, backend=backend, config=config, event_sink=event_sink)
    return _drive(pipe, agent_choreography=True)


def resume_pipeline(
    run_dir: str,
    backend=None,
    event_sink: Optional[Callable[[str, dict], None]] = None,
) -> Pipeline:
    """Continue a killed run from its last completed stage."""
    pipe = restore_pipeline(run_dir, backend=backend, event_sink=event_sink)
    fresh = pipe.clean is None or pipe.task is None
    return _drive(pipe, agent_choreography=fresh)


def _drive(pipe: Pipeline, agent_choreography: bool) -> Pipeline:
    try:
        if agent_choreography:
            pipe.post(
                USER_ID,
                ("user.io",),
                f"start forecasting task: dataset={pipe.config.dataset_path} "
                f"delta={pipe.config.interval_delta} horizon={pipe.config.horizon}",
                role="user",
            )
            pipe.pump()
        else:
            # stage-level resume drives the remaining stages directly
            if pipe.best_config is None:
                pipe.run_search()
            if not pipe.forecasts:
                pipe.deploy()
                for rule in pipe.config.postprocess_rules:
                    pipe.postprocess(rule)
        if pipe.best_config is None:
            raise PipelineError("optimization stage did not complete")
        if not pipe.forecasts:
            raise PipelineError("deployment stage did not complete")
        pipe.finish()
        return pipe
    except PipelineError:
        pipe.fail("pipeline halted before completion")
        raise
