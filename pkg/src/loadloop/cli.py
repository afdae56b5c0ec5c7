"""Command-line entry points: serve the HTTP API, run a headless pipeline from
a config file, replay a persisted run, or generate synthetic data."""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys
from typing import List, Optional

from .agents.pipeline import OptimizeSettings, PipelineConfig, PipelineError, run_pipeline
from .dataset import DatasetError
from .deployment import PostprocessRule
from .metrics import ConditionRule, MetricSpec
from .optimizer import ledger_from_jsonl, summarize_trials, best_so_far


def _parse_float_list(text: str) -> List[float]:
    return [float(part.strip()) for part in text.split(",") if part.strip()]


def load_config_file(path: str) -> PipelineConfig:
    """Flat key-value config with sections; see README for the schema."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise FileNotFoundError(f"config file not found: {path}")

    dataset = parser["dataset"] if parser.has_section("dataset") else {}
    task = parser["task"] if parser.has_section("task") else {}
    metric_sec = parser["metric"] if parser.has_section("metric") else {}
    split = parser["split"] if parser.has_section("split") else {}
    optimizer = parser["optimizer"] if parser.has_section("optimizer") else {}
    answers = parser["answers"] if parser.has_section("answers") else {}

    metric_dict: dict = {
        "base": metric_sec.get("base", "absolute"),
        "kind": metric_sec.get("kind", "plain"),
    }
    if metric_sec.get("weights"):
        metric_dict["weights"] = _parse_float_list(metric_sec["weights"])
    if metric_sec.get("alpha"):
        metric_dict["alpha"] = float(metric_sec["alpha"])
    if metric_sec.get("beta"):
        metric_dict["beta"] = float(metric_sec["beta"])
    if metric_sec.get("condition_rule"):
        metric_dict["condition_rule"] = json.loads(metric_sec["condition_rule"])

    fallback = [
        p.strip() for p in dataset.get("fallback_paths", "").split(",") if p.strip()
    ]
    ratios = (0.7, 0.15, 0.15)
    if split.get("ratios"):
        parts = _parse_float_list(split["ratios"])
        if len(parts) != 3:
            raise ValueError("split ratios need exactly three values")
        ratios = tuple(parts)

    epsilon: Optional[float] = None
    if optimizer.get("epsilon", "").strip():
        epsilon = float(optimizer["epsilon"])

    settings = OptimizeSettings(
        max_trials=int(optimizer.get("max_trials", 30)),
        init_samples=int(optimizer.get("init_samples", 10)),
        batch_size=int(optimizer.get("batch_size", 5)),
        epsilon=epsilon,
        seed=int(optimizer.get("seed", 0)),
    )

    postprocess_rules = []
    if answers.get("postprocess_rules"):
        postprocess_rules = [
            PostprocessRule.from_dict(d) for d in json.loads(answers["postprocess_rules"])
        ]
    scripted_guidance = []
    if answers.get("guidance"):
        scripted_guidance = json.loads(answers["guidance"])
    semantics_override = None
    if answers.get("semantics"):
        semantics_override = json.loads(answers["semantics"])

    return PipelineConfig(
        dataset_path=dataset.get("path", ""),
        fallback_paths=fallback,
        interval_delta=int(task.get("interval_delta", 24)),
        horizon=int(task.get("horizon", 1)),
        metric=MetricSpec.from_dict(metric_dict),
        split_ratios=ratios,
        optimize=settings,
        semantics_override=semantics_override,
        postprocess_rules=postprocess_rules,
        scripted_guidance=scripted_guidance,
    )


def cmd_run(args: argparse.Namespace) -> int:
    try:
        config = load_config_file(args.config)
    except (FileNotFoundError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    run_dir = args.run_dir
    if run_dir is None:
        parser = configparser.ConfigParser()
        parser.read(args.config)
        run_dir = parser.get("run", "dir", fallback="loadloop_run")

    if not os.path.exists(config.dataset_path):
        candidates = [p for p in config.fallback_paths if os.path.exists(p)]
        if not candidates:
            print(f"error: dataset not found: {config.dataset_path}", file=sys.stderr)
            return 2

    try:
        pipe = run_pipeline(run_dir, config)
    except (PipelineError, DatasetError) as exc:
        print(f"error: pipeline failed: {exc}", file=sys.stderr)
        return 1
    best = pipe.best_record
    print(f"run complete: {run_dir}")
    print(f"best loss {best['loss']:.6g} (trial {best['trial_index']})")
    print(json.dumps(best["config"], sort_keys=True))
    return 0


def cmd_replay(args: argparse.Namespace) -> int:
    run_dir = args.run_dir
    trials_path = os.path.join(run_dir, "trials.jsonl")
    if not os.path.exists(trials_path):
        print(f"error: no trials log under {run_dir}", file=sys.stderr)
        return 2
    with open(trials_path) as fh:
        ledger = ledger_from_jsonl(fh.read())
    state_path = os.path.join(run_dir, "state.json")
    if os.path.exists(state_path):
        with open(state_path) as fh:
            print("stage:", json.load(fh).get("stage"))
    summary = summarize_trials(ledger)
    print(summary.render_text())
    if any(not r.failed for r in ledger):
        curve = best_so_far(ledger)
        print("best-so-far tail:", [round(v, 6) for v in curve[-5:]])
    tokens_path = os.path.join(run_dir, "tokens.json")
    if os.path.exists(tokens_path):
        with open(tokens_path) as fh:
            total = json.load(fh).get("total", {})
        print(
            f"tokens: {total.get('input_tokens', 0)} in / {total.get('output_tokens', 0)} out,"
            f" cost ${total.get('cost', 0.0):.3f}"
        )
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service.app import create_app

    app = create_app(data_dir=args.data_dir)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    from . import synthetic

    path = synthetic.write_csv(
        args.out,
        hours=24 * args.days,
        seed=args.seed,
        missing_rate=args.missing_rate,
        include_humidity=args.humidity,
    )
    print(f"wrote {path}")
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="loadloop", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the full pipeline headlessly from a config file")
    p_run.add_argument("--config", required=True, help="INI config file")
    p_run.add_argument("--run-dir", default=None, help="run directory (overrides [run] dir)")
    p_run.set_defaults(func=cmd_run)

    p_replay = sub.add_parser("replay", help="re-render summaries from a persisted run")
    p_replay.add_argument("--run-dir", required=True)
    p_replay.set_defaults(func=cmd_replay)

    p_serve = sub.add_parser("serve", help="start the HTTP service")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--data-dir", default="loadloop_data")
    p_serve.set_defaults(func=cmd_serve)

    p_synth = sub.add_parser("synth", help="generate a synthetic dataset CSV")
    p_synth.add_argument("--out", required=True)
    p_synth.add_argument("--days", type=int, default=90)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--missing-rate", type=float, default=0.0)
    p_synth.add_argument("--humidity", action="store_true")
    p_synth.set_defaults(func=cmd_synth)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
