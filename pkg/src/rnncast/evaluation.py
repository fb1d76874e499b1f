"""One-step-ahead evaluation, transfer vs native runs, architecture sweep."""
from __future__ import annotations

import csv
import datetime as dt
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import TABLE1_PRESETS, ModelConfig, RecurrentModel
from .data import (DataError, InsufficientDataError, ScalerParams, fit_scaler,
                   inverse_transform, make_windows, parse_date, split_by_date, transform)
from .training import train

TRANSFER = "transfer"
NATIVE = "native"


def mae(pred, actual):
    pred = np.asarray(pred, dtype=np.float64)
    actual = np.asarray(actual, dtype=np.float64)
    if pred.shape != actual.shape or pred.size == 0:
        raise ValueError("mae needs two non-empty sequences of equal length")
    return float(np.mean(np.abs(pred - actual)))


@dataclass
class EvaluationReport:
    region_name: str
    approach: str
    mae: float
    dates: list
    predictions: np.ndarray
    actuals: np.ndarray
    model_descriptor: str
    scaler_used: ScalerParams

    def to_dict(self):
        return {
            "region_name": self.region_name,
            "approach": self.approach,
            "mae": self.mae,
            "model_descriptor": self.model_descriptor,
            "scaler_used": self.scaler_used.to_dict(),
            "dates": [d.isoformat() for d in self.dates],
            "predictions": [float(v) for v in self.predictions],
            "actuals": [float(v) for v in self.actuals],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["region_name"], d["approach"], d["mae"],
                   [parse_date(s) for s in d["dates"]],
                   np.array(d["predictions"], dtype=np.float64),
                   np.array(d["actuals"], dtype=np.float64),
                   d["model_descriptor"], ScalerParams.from_dict(d["scaler_used"]))

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["date", "actual", "predicted"])
            for d, a, p in zip(self.dates, self.actuals, self.predictions):
                w.writerow([d.isoformat(), repr(float(a)), repr(float(p))])


@dataclass
class RegionFailure:
    region_name: str
    error: str
    kind: str = "data"


def teacher_forced_windows(series, scaler, w, test_start=None):
    """Teacher-forced windows for every date from ``test_start`` on.

    Each window holds the ``w`` actual (scaled) values preceding its date.
    Without ``test_start`` every date with a full window of history is used.
    Returns ``(dates, windows, actuals)``.
    """
    k0 = w if test_start is None else series.index_of(parse_date(test_start))
    if k0 < w:
        raise InsufficientDataError(
            f"{series.region_name}: {k0} days before {series.dates[k0]}, window needs {w}")
    if k0 >= len(series):
        raise InsufficientDataError(f"{series.region_name}: no test days")
    scaled = transform(series.values, scaler)
    windows = np.lib.stride_tricks.sliding_window_view(scaled, w)[k0 - w:len(series) - w]
    return list(series.dates[k0:]), np.ascontiguousarray(windows), series.values[k0:].copy()


def evaluate_one_step(model, scaler, series, test_start=None, approach=NATIVE):
    """Predict each test day from the previous ``w`` actual values and score it."""
    dates, windows, actuals = teacher_forced_windows(series, scaler, model.window_size, test_start)
    preds = inverse_transform(model.predict(windows), scaler)
    return EvaluationReport(series.region_name, approach, mae(preds, actuals), dates,
                            preds, actuals, model.describe(), scaler)


def first_test_date(spec):
    return parse_date(spec.train_end_date) + dt.timedelta(days=1)


def ordered_map(fn, items, jobs):
    if jobs and jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def target_scaler(series, policy, model=None, spec=None):
    """Scaler for a region under ``policy``.

    ``target-full`` fits on the region's whole series, ``target-train`` on its
    training split, ``source`` reuses the scaler stored with the model.
    """
    if policy == "target-full":
        return fit_scaler(series)
    if policy == "target-train":
        return fit_scaler(split_by_date(series, spec)[0])
    if policy == "source":
        if model is None or model.scaler is None:
            raise ValueError("model carries no scaler")
        return model.scaler
    raise ValueError(f"unknown scaler policy {policy!r}")


def run_approach1(model, regions, spec, scaler_policy="target-full", jobs=1):
    """Evaluate frozen pretrained weights on each region's test split.

    Failures are returned as RegionFailure entries in place; the remaining
    regions are unaffected. Output order follows ``regions``.
    """
    start = first_test_date(spec)

    def one(series):
        try:
            scaler = target_scaler(series, scaler_policy, model, spec)
            return evaluate_one_step(model, scaler, series, start, approach=TRANSFER)
        except (DataError, KeyError) as exc:
            return RegionFailure(series.region_name, str(exc))

    return ordered_map(one, regions, jobs)


def native_split(series, spec, late_start_train_days=None):
    """Train/test split for a region trained on its own data.

    When ``late_start_train_days`` is given and the region's first nonzero
    value comes after the train end date, the first that many days train
    instead.
    """
    first = series.first_nonzero_date()
    if (late_start_train_days and first is not None
            and first > parse_date(spec.train_end_date)):
        if late_start_train_days >= len(series):
            raise InsufficientDataError(
                f"{series.region_name}: {late_start_train_days} training days requested, "
                f"series has {len(series)}")
        return series.slice(0, late_start_train_days), series.slice(late_start_train_days)
    return split_by_date(series, spec)


def train_native(series, config, spec, late_start_train_days=None):
    """Fit a fresh model on a region's training split.

    Returns ``(model, train_report, test_start_date)``.
    """
    train_part, test_part = native_split(series, spec, late_start_train_days)
    scaler = fit_scaler(train_part)
    dataset = make_windows(transform(train_part.values, scaler), config.window_size)
    params, report = train(config, dataset)
    model = RecurrentModel(config, params, scaler, series.region_name)
    return model, report, test_part.start


def run_approach2(series, config, spec, late_start_train_days=None):
    model, _, start = train_native(series, config, spec, late_start_train_days)
    return evaluate_one_step(model, model.scaler, series, start, approach=NATIVE)


@dataclass
class ComparisonRow:
    architecture: str
    hidden_units: tuple
    window_size: int
    mae: float | None
    seed: int
    error: str | None = None


@dataclass
class ComparisonTable:
    rows: list = field(default_factory=list)

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["sr_no", "model", "hidden_units", "layers", "input_window",
                        "output_window", "mae", "seed", "error"])
            for k, r in enumerate(self.rows, start=1):
                w.writerow([k, r.architecture, ",".join(map(str, r.hidden_units)),
                            len(r.hidden_units), f"1x{r.window_size}", 1,
                            "" if r.mae is None else repr(r.mae), r.seed, r.error or ""])

    def to_dict(self):
        return {"rows": [{"architecture": r.architecture, "hidden_units": list(r.hidden_units),
                          "window_size": r.window_size, "mae": r.mae, "seed": r.seed,
                          "error": r.error} for r in self.rows]}


def compare_architectures(series, spec, presets=TABLE1_PRESETS, base=None, base_seed=0, jobs=1):
    """Train every preset on the training split and rank by one-step test MAE.

    Preset ``k`` (0-based) trains with seed ``base_seed + k``. ``base``
    supplies the remaining ModelConfig fields (epochs, batch size, ...).
    """
    base = base or ModelConfig()
    train_part, _ = split_by_date(series, spec)
    scaler = fit_scaler(train_part)
    start = first_test_date(spec)
    scaled = transform(train_part.values, scaler)

    def one(item):
        k, (arch, hidden, w) = item
        seed = base_seed + k
        try:
            cfg = ModelConfig.from_dict({**base.to_dict(), "architecture": arch,
                                         "hidden_units": hidden, "window_size": w,
                                         "seed": seed})
            params, _ = train(cfg, make_windows(scaled, w))
            model = RecurrentModel(cfg, params, scaler, series.region_name)
            rep = evaluate_one_step(model, scaler, series, start)
            return ComparisonRow(arch, tuple(hidden), w, rep.mae, seed)
        except Exception as exc:  # a failed preset becomes an error row
            return ComparisonRow(arch, tuple(hidden), w, None, seed, f"{type(exc).__name__}: {exc}")

    rows = ordered_map(one, list(enumerate(presets)), jobs)
    rows.sort(key=lambda r: (r.mae is None, r.mae if r.mae is not None else 0.0))
    return ComparisonTable(rows)


def approach_table(transfer_reports, native_reports=None):
    """Rows of ``(region, transfer MAE, native MAE)``; missing entries are None."""
    native = {}
    for r in native_reports or []:
        native[r.region_name] = r.mae if isinstance(r, EvaluationReport) else None
    rows = []
    for r in transfer_reports:
        t = r.mae if isinstance(r, EvaluationReport) else None
        rows.append((r.region_name, t, native.get(r.region_name)))
    return rows


def write_approach_table(rows, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sr_no", "state", "mae_approach1", "mae_approach2"])
        for k, (region, a1, a2) in enumerate(rows, start=1):
            w.writerow([k, region, "" if a1 is None else repr(a1), "" if a2 is None else repr(a2)])
