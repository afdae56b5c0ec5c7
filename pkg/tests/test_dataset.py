import math
from datetime import datetime, timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from loadloop import dataset as ds
from loadloop import synthetic
from loadloop.metrics import MetricSpec


def write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(str(c) for c in row) + "\n")
    return str(path)


class TestLoadCsv:
    def test_simple_parse(self, tmp_path):
        path = write_csv(
            tmp_path / "a.csv",
            ["ts", "load"],
            [["2023-01-01 00:00", 1.0], ["2023-01-01 01:00", 2.0], ["2023-01-01 02:00", 3.0]],
        )
        raw = ds.load_csv(path)
        assert raw.n_rows == 3
        assert raw.column_names() == ["load"]
        assert raw.timestamp_column == "ts"

    def test_nan_cell_becomes_missing(self, tmp_path):
        path = write_csv(
            tmp_path / "b.csv",
            ["ts", "load"],
            [["2023-01-01 00:00", "NaN"], ["2023-01-01 01:00", 2.0]],
        )
        raw = ds.load_csv(path)
        assert math.isnan(raw.columns["load"][0])
        assert raw.columns["load"][1] == 2.0

    def test_unparseable_cell_becomes_missing(self, tmp_path):
        path = write_csv(
            tmp_path / "c.csv",
            ["ts", "load"],
            [["2023-01-01 00:00", "oops"], ["2023-01-01 01:00", 2.0]],
        )
        assert math.isnan(ds.load_csv(path).columns["load"][0])

    def test_duplicate_timestamps_error_names_them(self, tmp_path):
        path = write_csv(
            tmp_path / "d.csv",
            ["ts", "load"],
            [["2023-01-01 00:00", 1], ["2023-01-01 00:00", 2], ["2023-01-01 01:00", 3]],
        )
        with pytest.raises(ds.DatasetError, match="2023-01-01 00:00"):
            ds.load_csv(path)

    def test_missing_file(self):
        with pytest.raises(ds.DatasetError, match="not found"):
            ds.load_csv("/nonexistent/nope.csv")

    def test_empty_file(self, tmp_path):
        path = tmp_path / "e.csv"
        path.write_text("")
        with pytest.raises(ds.DatasetError, match="empty"):
            ds.load_csv(str(path))

    def test_no_timestamp_candidate(self, tmp_path):
        path = write_csv(tmp_path / "f.csv", ["a", "b"], [[1, 2], [3, 4]])
        with pytest.raises(ds.DatasetError, match="timestamp"):
            ds.load_csv(str(path))

    def test_unsorted_rows_are_ordered(self, tmp_path):
        path = write_csv(
            tmp_path / "g.csv",
            ["ts", "load"],
            [["2023-01-01 02:00", 3.0], ["2023-01-01 00:00", 1.0], ["2023-01-01 01:00", 2.0]],
        )
        raw = ds.load_csv(path)
        assert raw.columns["load"].tolist() == [1.0, 2.0, 3.0]


class TestInferSemantics:
    def make_raw(self, tmp_path, header, n=4, values=None):
        rows = []
        for i in range(n):
            row = [f"2023-01-01 {i:02d}:00"]
            for j in range(len(header) - 1):
                row.append(values[j][i] if values else (i + 1) * (j + 1))
            rows.append(row)
        return ds.load_csv(write_csv(tmp_path / "x.csv", header, rows))

    def test_exact_names(self, tmp_path):
        raw = self.make_raw(tmp_path, ["time", "load", "temp"])
        sem = ds.infer_column_semantics(raw)
        assert sem.assignments == {"time": "timestamp", "load": "load", "temp": "temperature"}

    def test_heuristic_names(self, tmp_path):
        raw = self.make_raw(tmp_path, ["dt", "mw"])
        sem = ds.infer_column_semantics(raw)
        assert sem.assignments == {"dt": "timestamp", "mw": "load"}

    def test_value_fallback_picks_highest_variance(self, tmp_path):
        values = [[5.0, 5.0, 5.0, 5.0], [1.0, 9.0, 2.0, 14.0]]
        raw = self.make_raw(tmp_path, ["ts", "flat", "wild"], values=values)
        sem = ds.infer_column_semantics(raw)
        assert sem.assignments["wild"] == "load"

    def test_aux_roles(self, tmp_path):
        raw = self.make_raw(tmp_path, ["ts", "load", "humidity", "precip", "holiday"])
        sem = ds.infer_column_semantics(raw)
        assert sem.assignments["humidity"] == "humidity"
        assert sem.assignments["precip"] == "precipitation"
        assert sem.assignments["holiday"] == "holiday_flag"

    def test_validation_requires_one_load(self):
        with pytest.raises(ds.SemanticsError):
            ds.ColumnSemantics({"ts": "timestamp", "a": "load", "b": "load"}).validate()


def rolling_mask_oracle(x, k=5.0, window=24, lower=0.0):
    """Independent re-implementation of the anomaly rule for comparison."""
    n = len(x)
    half = window // 2
    mask = np.zeros(n, dtype=bool)
    for i in range(n):
        if not np.isfinite(x[i]):
            continue
        if lower is not None and x[i] < lower:
            mask[i] = True
            continue
        lo, hi = max(0, i - half), min(n, i + half + 1)
        win = x[lo:hi]
        win = win[np.isfinite(win)]
        if win.size < 3:
            continue
        med = np.median(win)
        mad = np.median(np.abs(win - med))
        if abs(x[i] - med) > k * 1.4826 * mad:
            mask[i] = True
    return mask


class TestDetectAnomalies:
    def test_constant_series_empty_mask(self):
        assert not ds.detect_anomalies(np.full(100, 7.0)).any()

    def test_single_spike_flagged_exactly(self):
        rng = np.random.default_rng(1)
        x = 100 + rng.normal(0, 1.0, 168)
        x[42] = 10000.0
        mask = ds.detect_anomalies(x, ds.AnomalyPolicy(k=5.0, window=24))
        oracle = rolling_mask_oracle(x)
        assert mask[42]
        assert mask.sum() == 1
        assert np.array_equal(mask, oracle)

    def test_negative_load_flagged_by_bound(self):
        x = np.full(30, 50.0)  # short series: range checks only
        x[3] = -1.0
        mask = ds.detect_anomalies(x, ds.AnomalyPolicy(lower_bound=0.0))
        assert mask[3] and mask.sum() == 1

    @given(st.integers(0, 2**32 - 1), st.floats(-50, 50))
    @settings(max_examples=30, deadline=None)
    def test_translation_equivariance(self, seed, c):
        rng = np.random.default_rng(seed)
        x = 100 + rng.normal(0, 2.0, 96)
        x[rng.integers(0, 96)] = 500.0
        base = ds.detect_anomalies(x, ds.AnomalyPolicy(lower_bound=-1e9, k=5.0, window=24))
        shifted = ds.detect_anomalies(x + c, ds.AnomalyPolicy(lower_bound=-1e9 + c, k=5.0, window=24))
        assert np.array_equal(base, shifted)


class TestImpute:
    def test_linear_midpoint(self):
        filled, report = ds.impute(np.array([1.0, np.nan, 3.0]))
        assert filled.tolist() == [1.0, 2.0, 3.0]
        assert report.values_imputed["load"] == 1

    def test_long_gap_same_hour_mean(self):
        # deterministic daily profile over 5 days; a 10h gap must be refilled
        # with the same-hour mean of the 3 preceding days = the profile itself
        hours = 24 * 5
        x = np.array([100.0 + (i % 24) for i in range(hours)])
        expected = x.copy()
        x[72:82] = np.nan
        filled, report = ds.impute(x)
        assert np.allclose(filled, expected)
        assert report.values_imputed["load"] == 10
        assert ("load", "same_hour_daily_mean") in report.methods_applied
        assert report.gap_histogram[10] == 1

    def test_no_missing_is_identity(self):
        x = np.arange(10, dtype=float)
        filled, report = ds.impute(x)
        assert np.array_equal(filled, x)
        assert report.values_imputed["load"] == 0

    def test_gap_longer_than_seven_days_rejected(self):
        x = np.ones(24 * 10)
        x[24 : 24 + 169] = np.nan
        with pytest.raises(ds.DatasetError, match="unusable"):
            ds.impute(x)

    def test_missing_endpoint_rejected(self):
        with pytest.raises(ds.DatasetError):
            ds.impute(np.array([np.nan, 1.0, 2.0]))

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_idempotence(self, seed):
        rng = np.random.default_rng(seed)
        x = 50 + rng.normal(0, 3, 24 * 8)
        holes = rng.random(x.size) < 0.1
        holes[0] = holes[-1] = False
        x[holes] = np.nan
        once, _ = ds.impute(x)
        twice, report = ds.impute(once)
        assert np.array_equal(once, twice)
        assert report.values_imputed["load"] == 0


class TestSplitChronological:
    def test_exact_ranges(self, clean_data):
        n = clean_data.n_rows
        tr, va, te = ds.split_chronological(clean_data, (0.7, 0.15, 0.15))
        assert tr == (0, int(n * 0.7))
        assert va == (int(n * 0.7), int(n * 0.7) + int(n * 0.15))
        assert te[1] == n
        # partition: contiguous, ordered, disjoint, covering
        assert tr[1] == va[0] and va[1] == te[0] and tr[0] == 0

    def test_non_positive_ratio_rejected(self, clean_data):
        with pytest.raises(ds.DatasetError, match="ratio"):
            ds.split_chronological(clean_data, (1.0, 0.0, 0.0))

    def test_ratios_must_sum_to_one(self, clean_data):
        with pytest.raises(ds.DatasetError, match="sum"):
            ds.split_chronological(clean_data, (0.5, 0.2, 0.2))

    def test_short_split_rejected(self, tmp_path):
        path = synthetic.write_csv(str(tmp_path / "short.csv"), hours=400, seed=0)
        raw = ds.load_csv(path)
        clean = ds.clean(raw, ds.infer_column_semantics(raw))
        with pytest.raises(ds.DatasetError, match="lookback"):
            ds.split_chronological(clean, (0.7, 0.15, 0.15), min_length=168 + 24)


class TestCleanAndSummarize:
    def test_clean_invariants(self, clean_data):
        load = clean_data.load
        assert not np.any(np.isnan(load))
        assert np.all(load >= 0)
        for a, b in zip(clean_data.timestamps, clean_data.timestamps[1:]):
            assert b - a == timedelta(hours=1)

    def test_subhourly_averaged_per_hour(self, tmp_path):
        rows = [
            ["2023-01-01 00:00", 10.0],
            ["2023-01-01 00:30", 20.0],
            ["2023-01-01 01:00", 30.0],
            ["2023-01-01 02:00", 40.0],
        ]
        raw = ds.load_csv(write_csv(tmp_path / "sub.csv", ["ts", "load"], rows))
        clean = ds.clean(raw, ds.infer_column_semantics(raw))
        assert clean.load.tolist() == [15.0, 30.0, 40.0]

    def test_constant_load_summary(self, tmp_path):
        rows = [[f"2023-01-01 {i:02d}:00", 5.0] for i in range(24)]
        raw = ds.load_csv(write_csv(tmp_path / "const.csv", ["ts", "load"], rows))
        summary = ds.summarize(ds.clean(raw, ds.infer_column_semantics(raw)))
        assert summary.per_column["load"]["mean"] == 5.0
        assert summary.per_column["load"]["std"] == 0.0

    def test_hourly_profile_identity_ramp(self, tmp_path):
        rows = [[f"2023-01-0{1 + i // 24} {i % 24:02d}:00", float(i % 24)] for i in range(48)]
        raw = ds.load_csv(write_csv(tmp_path / "ramp.csv", ["ts", "load"], rows))
        summary = ds.summarize(ds.clean(raw, ds.infer_column_semantics(raw)))
        assert summary.hourly_profile == [float(h) for h in range(24)]

    def test_summary_matches_independent_recompute(self, clean_data):
        summary = ds.summarize(clean_data)
        load = clean_data.load
        hours = np.array([t.hour for t in clean_data.timestamps])
        dows = np.array([t.weekday() for t in clean_data.timestamps])
        assert summary.per_column["load"]["mean"] == pytest.approx(float(load.mean()))
        assert summary.per_column["load"]["std"] == pytest.approx(float(load.std()))
        assert summary.per_column["load"]["min"] == float(load.min())
        assert summary.per_column["load"]["max"] == float(load.max())
        for h in range(24):
            assert summary.hourly_profile[h] == pytest.approx(float(load[hours == h].mean()))
        for d in range(7):
            assert summary.weekly_profile[d] == pytest.approx(float(load[dows == d].mean()))

    def test_taskspec_validation(self):
        with pytest.raises(ds.DatasetError):
            ds.TaskSpec(interval_delta=-1, horizon=1, metric=MetricSpec())
        with pytest.raises(ds.DatasetError):
            ds.TaskSpec(interval_delta=0, horizon=0, metric=MetricSpec())
        spec = ds.TaskSpec(interval_delta=24, horizon=1, metric=MetricSpec())
        assert ds.TaskSpec.from_dict(spec.to_dict()) == spec
