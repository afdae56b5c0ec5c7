"""Deterministic synthetic load/temperature series for fixtures and demos."""

from __future__ import annotations

import csv
from datetime import datetime, timedelta
from typing import Optional

import numpy as np


def generate_load_series(
    hours: int = 24 * 90,
    seed: int = 0,
    start: datetime = datetime(2023, 1, 1),
    base_load: float = 100.0,
    daily_amplitude: float = 25.0,
    weekly_amplitude: float = 8.0,
    temperature_gain: float = 1.2,
    noise_scale: float = 2.0,
    missing_rate: float = 0.0,
):
    """Hourly (timestamps, load, temperature) with daily/weekly cycles and a
    temperature-coupled component. Same seed, same series."""
    rng = np.random.default_rng(seed)
    t = np.arange(hours)
    hour_of_day = (start.hour + t) % 24
    day = t / 24.0

    temperature = (
        15.0
        + 8.0 * np.sin(2 * np.pi * (day - 30) / 365.0)
        + 5.0 * np.sin(2 * np.pi * (hour_of_day - 14) / 24.0)
        + rng.normal(0, 1.0, hours)
    )
    load = (
        base_load
        + daily_amplitude * np.sin(2 * np.pi * (hour_of_day - 18) / 24.0)
        + weekly_amplitude * np.sin(2 * np.pi * t / (24.0 * 7))
        + temperature_gain * np.maximum(temperature - 20.0, 0.0) ** 1.5
        + rng.normal(0, noise_scale, hours)
    )
    load = np.maximum(load, 1.0)

    if missing_rate > 0:
        holes = rng.random(hours) < missing_rate
        holes[0] = holes[-1] = False
        load = load.copy()
        load[holes] = np.nan

    timestamps = [start + timedelta(hours=int(i)) for i in range(hours)]
    return timestamps, load, temperature


def write_csv(
    path: str,
    hours: int = 24 * 90,
    seed: int = 0,
    start: datetime = datetime(2023, 1, 1),
    missing_rate: float = 0.0,
    include_humidity: bool = False,
) -> str:
    """Write a synthetic dataset CSV with ts,load,temp (and optionally humidity)."""
    timestamps, load, temperature = generate_load_series(
        hours=hours, seed=seed, start=start, missing_rate=missing_rate
    )
    rng = np.random.default_rng(seed + 1)
    humidity: Optional[np.ndarray] = None
    if include_humidity:
        humidity = np.clip(60 + 15 * np.sin(2 * np.pi * np.arange(hours) / (24 * 3)) + rng.normal(0, 3, hours), 5, 100)

    header = ["ts", "load", "temp"] + (["humidity"] if include_humidity else [])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i, ts in enumerate(timestamps):
            row = [ts.strftime("%Y-%m-%d %H:%M"), "" if np.isnan(load[i]) else f"{load[i]:.4f}", f"{temperature[i]:.4f}"]
            if humidity is not None:
                row.append(f"{humidity[i]:.4f}")
            writer.writerow(row)
    return path
