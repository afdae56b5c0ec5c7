import json
import os

import pytest

from loadloop import synthetic
from loadloop.cli import load_config_file, main


@pytest.fixture(scope="module")
def cli_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("clidata") / "cli.csv"
    synthetic.write_csv(str(path), hours=24 * 40, seed=9)
    return str(path)


def write_config(path, dataset, run_dir, extra=""):
    path.write_text(
        f"""
[dataset]
path = {dataset}

[task]
interval_delta = 24
horizon = 1

[metric]
base = absolute
kind = plain

[split]
ratios = 0.6, 0.2, 0.2

[optimizer]
max_trials = 4
init_samples = 4
batch_size = 2
seed = 3

[run]
dir = {run_dir}
{extra}
"""
    )
    return str(path)


class TestRunCommand:
    def test_full_run_writes_artifacts(self, cli_csv, tmp_path, capsys):
        run_dir = str(tmp_path / "run_out")
        cfg = write_config(tmp_path / "job.ini", cli_csv, run_dir)
        code = main(["run", "--config", cfg])
        assert code == 0
        out = capsys.readouterr().out
        assert "best loss" in out
        assert os.path.exists(os.path.join(run_dir, "trials.jsonl"))
        assert os.path.exists(os.path.join(run_dir, "best_config.json"))
        assert os.path.exists(os.path.join(run_dir, "forecasts", "forecast_000.csv"))

    def test_missing_dataset_exit_2_names_path(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "job.ini", "/nope/missing.csv", str(tmp_path / "rd"))
        code = main(["run", "--config", cfg])
        assert code == 2
        assert "/nope/missing.csv" in capsys.readouterr().err

    def test_missing_config_exit_2(self, tmp_path, capsys):
        assert main(["run", "--config", str(tmp_path / "ghost.ini")]) == 2

    def test_answers_sections_parsed(self, cli_csv, tmp_path):
        rules = json.dumps([{"kind": "time_scaling", "hours": [0], "factor": -0.1}])
        guidance = json.dumps([{ "after_batch": 0, "directives": [
            {"kind": "prune_space", "exclude_model_types": ["gbt"]}]}])
        extra = f"\n[answers]\npostprocess_rules = {rules}\nguidance = {guidance}\n"
        cfg = write_config(tmp_path / "job.ini", cli_csv, str(tmp_path / "rd"), extra)
        config = load_config_file(cfg)
        assert config.postprocess_rules[0].factor == -0.1
        assert config.scripted_guidance[0]["after_batch"] == 0

    def test_metric_section_parsed(self, cli_csv, tmp_path):
        cfg_path = tmp_path / "job.ini"
        write_config(cfg_path, cli_csv, str(tmp_path / "rd"))
        text = cfg_path.read_text().replace("kind = plain", "kind = asymmetric\nalpha = 2.0\nbeta = 1.0")
        cfg_path.write_text(text)
        config = load_config_file(str(cfg_path))
        assert config.metric.kind == "asymmetric"
        assert config.metric.alpha == 2.0


class TestReplayCommand:
    def test_replay_renders_without_recompute(self, cli_csv, tmp_path, capsys):
        run_dir = str(tmp_path / "run_replay")
        cfg = write_config(tmp_path / "job.ini", cli_csv, run_dir)
        assert main(["run", "--config", cfg]) == 0
        capsys.readouterr()
        trials_path = os.path.join(run_dir, "trials.jsonl")
        mtime = os.path.getmtime(trials_path)
        assert main(["replay", "--run-dir", run_dir]) == 0
        out = capsys.readouterr().out
        assert "trials: 4" in out
        assert "best-so-far" in out
        assert "stage: done" in out
        assert os.path.getmtime(trials_path) == mtime  # read-only

    def test_replay_without_run_dir_exit_2(self, tmp_path, capsys):
        assert main(["replay", "--run-dir", str(tmp_path / "void")]) == 2


class TestSynthCommand:
    def test_synth_writes_csv(self, tmp_path, capsys):
        out_path = str(tmp_path / "gen.csv")
        assert main(["synth", "--out", out_path, "--days", "2", "--seed", "4"]) == 0
        lines = open(out_path).read().splitlines()
        assert lines[0] == "ts,load,temp"
        assert len(lines) == 1 + 48
