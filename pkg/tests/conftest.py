"""Shared fixtures: synthetic datasets, cleaned data, task specs."""

import numpy as np
import pytest

from loadloop import dataset as ds
from loadloop import synthetic
from loadloop.metrics import MetricSpec


@pytest.fixture(scope="session")
def synth_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "synth.csv"
    synthetic.write_csv(str(path), hours=24 * 60, seed=3, missing_rate=0.01)
    return str(path)


@pytest.fixture(scope="session")
def clean_data(synth_csv):
    raw = ds.load_csv(synth_csv)
    sem = ds.infer_column_semantics(raw)
    return ds.clean(raw, sem)


@pytest.fixture(scope="session")
def task24():
    return ds.TaskSpec(interval_delta=0, horizon=24, metric=MetricSpec())


@pytest.fixture(scope="session")
def task1():
    return ds.TaskSpec(interval_delta=24, horizon=1, metric=MetricSpec())


@pytest.fixture(scope="session")
def splits24(clean_data, task24):
    return ds.split_chronological(clean_data, (0.7, 0.15, 0.15), 168 + task24.horizon)


@pytest.fixture(scope="session")
def splits1(clean_data, task1):
    return ds.split_chronological(clean_data, (0.7, 0.15, 0.15), 168 + task1.horizon)


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
