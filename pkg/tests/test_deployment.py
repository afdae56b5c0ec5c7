from datetime import datetime

import numpy as np
import pytest

from loadloop import dataset as ds
from loadloop import deployment as dep
from loadloop import features as ft
from loadloop import models
from loadloop.metrics import MetricSpec, mape
from loadloop.optimizer.space import Configuration


def make_forecast(raw=None, horizon=24, context=None):
    raw = np.asarray(raw if raw is not None else np.linspace(90, 120, horizon), dtype=float)
    return dep.Forecast(
        origin_timestamp=datetime(2023, 6, 1, 0),
        horizon=len(raw),
        raw=raw.copy(),
        adjusted=raw.copy(),
        context=context or {},
    )


class TestApplyRule:
    def test_time_scaling_zero_lambda_is_identity(self):
        fc = make_forecast()
        rule = dep.PostprocessRule.interval("time_scaling", 0, 24, factor=0.0)
        updated, record = dep.apply_rule(fc, rule)
        assert np.array_equal(updated.adjusted, fc.raw)
        assert record.pre_values == record.post_values

    def test_ten_percent_reduction_after_hour_15(self):
        fc = make_forecast(horizon=24)
        rule = dep.PostprocessRule.interval("time_scaling", 15, 24, factor=-0.10)
        updated, _ = dep.apply_rule(fc, rule)
        assert np.allclose(updated.adjusted[15:], fc.raw[15:] * 0.9)
        assert np.array_equal(updated.adjusted[:15], fc.raw[:15])

    def test_load_scaling_empty_gate_is_identity(self):
        fc = make_forecast()
        rule = dep.PostprocessRule(kind="load_scaling", factor=0.5, threshold=float("inf"), direction="above")
        updated, _ = dep.apply_rule(fc, rule)
        assert np.array_equal(updated.adjusted, fc.raw)

    def test_load_scaling_gates_on_current_adjusted(self):
        fc = make_forecast(raw=[50.0, 150.0])
        rule = dep.PostprocessRule(kind="load_scaling", factor=-0.2, threshold=100.0, direction="above")
        updated, _ = dep.apply_rule(fc, rule)
        assert updated.adjusted.tolist() == [50.0, 120.0]

    def test_load_scaling_below_direction(self):
        fc = make_forecast(raw=[50.0, 150.0])
        rule = dep.PostprocessRule(kind="load_scaling", factor=0.1, threshold=100.0, direction="below")
        updated, _ = dep.apply_rule(fc, rule)
        assert updated.adjusted.tolist() == [pytest.approx(55.0), 150.0]

    def test_manual_override(self):
        fc = make_forecast(raw=[10.0, 20.0, 30.0])
        rule = dep.PostprocessRule(kind="manual_override", hours=(1,), override_values=(99.0,))
        updated, _ = dep.apply_rule(fc, rule)
        assert updated.adjusted.tolist() == [10.0, 99.0, 30.0]

    def test_external_scaling_uses_context(self):
        fc = make_forecast(raw=[100.0, 100.0], context={"temperature": np.array([30.0, 40.0])})
        rule = dep.PostprocessRule(
            kind="external_scaling", factor=0.2, threshold=35.0, direction="above",
            external_role="temperature",
        )
        updated, _ = dep.apply_rule(fc, rule)
        assert updated.adjusted.tolist() == [100.0, pytest.approx(120.0)]

    def test_external_scaling_without_context_rejected(self):
        fc = make_forecast(raw=[1.0, 2.0])
        rule = dep.PostprocessRule(kind="external_scaling", factor=0.2, threshold=0.0)
        with pytest.raises(dep.DeploymentError, match="context"):
            dep.apply_rule(fc, rule)

    def test_hours_outside_horizon_rejected(self):
        fc = make_forecast(horizon=4)
        rule = dep.PostprocessRule(kind="time_scaling", hours=(5,), factor=0.1)
        with pytest.raises(dep.DeploymentError, match="horizon"):
            dep.apply_rule(fc, rule)

    def test_lambda_at_most_minus_one_rejected(self):
        fc = make_forecast()
        rule = dep.PostprocessRule.interval("time_scaling", 0, 2, factor=-1.0)
        with pytest.raises(dep.DeploymentError, match="lambda"):
            dep.apply_rule(fc, rule)

    def test_raw_never_mutates_and_replay_reproduces(self):
        fc = make_forecast(horizon=8, context={"temperature": np.linspace(20, 42, 8)})
        rules = [
            dep.PostprocessRule.interval("time_scaling", 2, 6, factor=0.25),
            dep.PostprocessRule(kind="manual_override", hours=(0,), override_values=(77.0,)),
            dep.PostprocessRule(kind="external_scaling", factor=-0.1, threshold=30.0, direction="above"),
            dep.PostprocessRule(kind="load_scaling", factor=0.05, threshold=100.0, direction="above"),
        ]
        original_raw = fc.raw.copy()
        for rule in rules:
            fc, _ = dep.apply_rule(fc, rule)
        assert np.array_equal(fc.raw, original_raw)
        replayed = dep.replay_rules(fc.raw, fc.applied_rules, fc.context, fc.horizon)
        assert np.array_equal(replayed, fc.adjusted)

    def test_disjoint_override_and_scaling_commute(self):
        fc = make_forecast(horizon=6)
        override = dep.PostprocessRule(kind="manual_override", hours=(0, 1), override_values=(5.0, 6.0))
        scaling = dep.PostprocessRule.interval("time_scaling", 3, 6, factor=0.5)
        a, _ = dep.apply_rule(fc, override)
        a, _ = dep.apply_rule(a, scaling)
        b, _ = dep.apply_rule(fc, scaling)
        b, _ = dep.apply_rule(b, override)
        assert np.array_equal(a.adjusted, b.adjusted)

    def test_overlapping_rules_depend_on_order(self):
        fc = make_forecast(raw=[100.0])
        override = dep.PostprocessRule(kind="manual_override", hours=(0,), override_values=(50.0,))
        scaling = dep.PostprocessRule.interval("time_scaling", 0, 1, factor=0.5)
        a, _ = dep.apply_rule(fc, override)
        a, _ = dep.apply_rule(a, scaling)
        b, _ = dep.apply_rule(fc, scaling)
        b, _ = dep.apply_rule(b, override)
        assert a.adjusted.tolist() == [75.0]
        assert b.adjusted.tolist() == [50.0]
        assert a.applied_rules == (override, scaling)

    def test_sign_preserved_for_valid_lambda(self):
        fc = make_forecast(raw=[10.0, 20.0])
        rule = dep.PostprocessRule.interval("time_scaling", 0, 2, factor=-0.999)
        updated, _ = dep.apply_rule(fc, rule)
        assert np.all(updated.adjusted > 0)

    def test_rule_roundtrip(self):
        rule = dep.PostprocessRule(
            kind="external_scaling", factor=-0.2, threshold=35.0,
            direction="below", external_role="temperature", note="typhoon",
        )
        assert dep.PostprocessRule.from_dict(rule.to_dict()) == rule


class TestAdjustmentLog:
    def test_append_only_records(self):
        fc = make_forecast(horizon=3)
        log = dep.AdjustmentLog()
        rule = dep.PostprocessRule.interval("time_scaling", 0, 3, factor=0.1)
        fc2, record = dep.apply_rule(fc, rule)
        log.append(record)
        assert len(log.records) == 1
        assert log.records[0].pre_values == [float(v) for v in fc.raw]
        assert log.records[0].post_values == [float(v) for v in fc2.adjusted]
        assert log.to_jsonl().count("\n") == 1


class TestEvaluateAdjustment:
    def test_no_rules_equal_metrics(self):
        fc = make_forecast(raw=[10.0, 12.0])
        raw_m, adj_m = dep.evaluate_adjustment(fc, [11.0, 11.0], MetricSpec())
        assert raw_m == adj_m

    def test_uniform_overprediction_corrected(self):
        # raw over-predicts by +10% after hour 15; lambda = -1/11 cancels it:
        # (1.10) * (1 - 1/11) = 1.0 exactly
        actual = np.linspace(100, 140, 24)
        raw = actual.copy()
        raw[15:] = actual[15:] * 1.10
        fc = make_forecast(raw=raw)
        rule = dep.PostprocessRule.interval("time_scaling", 15, 24, factor=-1.0 / 11.0)
        fc, _ = dep.apply_rule(fc, rule)
        span_mape = mape(fc.adjusted[15:], actual[15:])
        assert span_mape < 1e-10
        raw_m, adj_m = dep.evaluate_adjustment(fc, actual, MetricSpec())
        assert adj_m < raw_m

    def test_length_mismatch_rejected(self):
        fc = make_forecast(horizon=4)
        with pytest.raises(dep.DeploymentError):
            dep.evaluate_adjustment(fc, [1.0, 2.0], MetricSpec())


@pytest.fixture(scope="module")
def trained(clean_data, task24, splits24):
    train_r, val_r, _ = splits24
    config = Configuration(
        "linear",
        {"calendar": "trigonometric", "temp_lags": "none", "interaction": "none",
         "load_lags": "fixed", "other_features": "none"},
        {"regularization": "ridge", "alpha": 0.01},
    )
    fc_cfg = ft.FeatureConfig.from_dict(config.features)
    train_dm = ft.assemble_design_matrix(fc_cfg, clean_data, task24, train_r)
    val_dm = ft.assemble_design_matrix(fc_cfg, clean_data, task24, val_r, selection=train_dm.selection)
    model, _ = models.train(config.model_type, config.hyperparams, train_dm, val_dm, seed=0)
    return config, model, train_dm


class TestForecastOperation:

    def test_forecast_on_train_origin_matches_training_prediction(self, trained, clean_data, task24):
        config, model, train_dm = trained
        origin = train_dm.origin_indices[-1]
        fc = dep.forecast(config, model, train_dm.selection, clean_data, task24, origin)
        row = train_dm.origin_indices.index(origin)
        expected = model.predict(train_dm.rows[row : row + 1], train_dm.feature_names)[0]
        assert np.array_equal(fc.raw, expected)
        assert fc.horizon == 24 and len(fc.raw) == 24

    def test_adjusted_initially_equals_raw(self, trained, clean_data, task24):
        config, model, train_dm = trained
        fc = dep.forecast(config, model, train_dm.selection, clean_data, task24)
        assert np.array_equal(fc.raw, fc.adjusted)
        assert fc.applied_rules == ()

    def test_live_origin_at_data_edge(self, trained, clean_data, task24):
        config, model, train_dm = trained
        fc = dep.forecast(config, model, train_dm.selection, clean_data, task24, clean_data.n_rows - 1)
        assert len(fc.raw) == task24.horizon
        assert fc.context == {}  # no observed context beyond the data edge

    def test_insufficient_lookback_rejected(self, trained, clean_data, task24):
        config, model, train_dm = trained
        with pytest.raises(dep.DeploymentError):
            dep.forecast(config, model, train_dm.selection, clean_data, task24, 10)

    def test_forecast_roundtrip_and_csv(self, trained, clean_data, task24):
        config, model, train_dm = trained
        fc = dep.forecast(config, model, train_dm.selection, clean_data, task24)
        restored = dep.Forecast.from_dict(fc.to_dict())
        assert np.array_equal(restored.raw, fc.raw)
        csv_text = dep.forecast_to_csv(fc)
        lines = csv_text.strip().splitlines()
        assert lines[0] == "timestamp,raw,adjusted"
        assert len(lines) == 1 + task24.horizon
        # repr round-trip keeps values bit-exact
        assert float(lines[1].split(",")[1]) == fc.raw[0]
