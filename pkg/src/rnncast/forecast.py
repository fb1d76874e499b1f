"""Recursive multi-day forecasts."""
from __future__ import annotations

import csv
import datetime as dt
import json
from dataclasses import dataclass, field

import numpy as np

from .data import InsufficientDataError, inverse_transform, parse_date, transform
from .evaluation import evaluate_one_step
from .training import NumericError

# 2021-12-16 .. 2022-03-05 inclusive
INDIA_HORIZON = 80


@dataclass
class Forecast:
    region_name: str
    seed_dates: list
    seed_window: np.ndarray
    horizon: int
    dates: list
    values: np.ndarray
    scaled: np.ndarray
    model_descriptor: str = ""
    warnings: list = field(default_factory=list)

    def to_dict(self):
        return {
            "region_name": self.region_name,
            "model_descriptor": self.model_descriptor,
            "horizon": self.horizon,
            "seed_dates": [d.isoformat() for d in self.seed_dates],
            "seed_window": [float(v) for v in self.seed_window],
            "dates": [d.isoformat() for d in self.dates],
            "forecast_active_cases": [float(v) for v in self.values],
            "scaled": [float(v) for v in self.scaled],
            "warnings": self.warnings,
        }

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["date", "forecast_active_cases"])
            for d, v in zip(self.dates, self.values):
                w.writerow([d.isoformat(), repr(float(v))])

    def write_json(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1)


def recursive_forecast(model, scaler, series, horizon):
    """Roll the model forward ``horizon`` days, feeding predictions back in.

    The first window is the last ``w`` scaled actual values. Predictions are
    not clipped; negative ones are reported on ``warnings``.
    """
    w = model.window_size
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    if len(series) < w:
        raise InsufficientDataError(
            f"{series.region_name}: {len(series)} values, seed window needs {w}")
    seed = transform(series.values[-w:], scaler)
    window = seed.copy()
    scaled = np.empty(horizon)
    for k in range(horizon):
        y = float(np.asarray(model.predict(window[None, :])).reshape(-1)[0])
        if not np.isfinite(y):
            raise NumericError(f"non-finite prediction at forecast step {k + 1}")
        scaled[k] = y
        window = np.append(window[1:], y)
    warnings = [f"negative scaled prediction at step {k + 1}"
                for k in np.flatnonzero(scaled < 0)]
    dates = [series.end + dt.timedelta(days=k) for k in range(1, horizon + 1)]
    return Forecast(series.region_name, list(series.dates[-w:]), seed, horizon, dates,
                    inverse_transform(scaled, scaler), scaled,
                    getattr(model, "describe", lambda: "")(), warnings)


def evaluate_then_forecast(model, scaler, series, test_start, horizon):
    """Teacher-forced evaluation from ``test_start`` to the series end, then a forecast."""
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    report = evaluate_one_step(model, scaler, series, parse_date(test_start), approach="transfer")
    return report, recursive_forecast(model, scaler, series, horizon)
