"""Hidden-state capture, heatmaps and min/max activation envelopes."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .data import TimeSeries, transform, fit_scaler
from .evaluation import teacher_forced_windows

# default analysis windows, half-open day indices into the test period
ANALYSIS_WINDOWS = {
    "Kerala": (75, 203),
    "Chhattisgarh": (50, 150),
    "Gujarat": (75, 175),
    "Karnataka": (75, 175),
    "Tamil Nadu": (75, 175),
}


@dataclass
class ActivationTrace:
    matrix: np.ndarray  # (T, H)
    dates: list
    region_name: str
    model_descriptor: str

    @property
    def shape(self):
        return self.matrix.shape


@dataclass
class Envelope:
    max_series: np.ndarray
    min_series: np.ndarray
    day_range: tuple
    dates: list | None = None
    absolute: bool = False

    def window(self, series):
        lo, hi = self.day_range
        return np.asarray(series)[lo:hi]

    def write_csv(self, path):
        lo, hi = self.day_range
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["day", "date", "max_output", "min_output", "in_window"])
            for t, (mx, mn) in enumerate(zip(self.max_series, self.min_series)):
                d = self.dates[t].isoformat() if self.dates else ""
                w.writerow([t, d, repr(float(mx)), repr(float(mn)), int(lo <= t < hi)])


def capture_trace(model, scaler, series, test_start=None):
    """Final recurrent layer's last-step output for every test day.

    Rows line up with the predictions of ``evaluate_one_step`` for the same
    arguments.
    """
    dates, windows, _ = teacher_forced_windows(series, scaler, model.window_size, test_start)
    _, hidden = model.predict(windows, capture=True)
    return ActivationTrace(np.array(hidden), dates, series.region_name, model.describe())


def extract_envelope(trace, day_range=None, absolute=False):
    """Per-day max and min across hidden units.

    ``day_range`` is a half-open ``(start, end)`` pair of day indices marking
    the analysis window; it defaults to the whole trace. With ``absolute``
    the extremes are taken over ``|output|``.
    """
    T = trace.matrix.shape[0]
    lo, hi = (0, T) if day_range is None else (int(day_range[0]), int(day_range[1]))
    if not 0 <= lo < hi <= T:
        raise ValueError(f"day range {(lo, hi)} is empty, inverted or outside [0, {T}]")
    m = np.abs(trace.matrix) if absolute else trace.matrix
    return Envelope(m.max(axis=1), m.min(axis=1), (lo, hi), list(trace.dates), absolute)


def _rgba(matrix, cmap):
    from matplotlib import colormaps

    lo, hi = float(matrix.min()), float(matrix.max())
    norm = (matrix - lo) / (hi - lo) if hi > lo else np.zeros_like(matrix)
    return (colormaps[cmap](norm) * 255).round().astype(np.uint8), lo, hi


def export_heatmap(trace, out_path, cell_px=2, cmap="viridis"):
    """Write ``<out>.csv`` (raw matrix), ``<out>.png`` and ``<out>.json``.

    The PNG has one ``cell_px`` square block per matrix entry, days running
    down and hidden units across. Colours map linearly from the matrix
    minimum to its maximum. The JSON sidecar records dimensions and scale.
    Returns the three paths.
    """
    import matplotlib.pyplot as plt

    out = Path(out_path)
    csv_path, png_path, meta_path = (out.with_name(out.name + ext)
                                     for ext in (".csv", ".png", ".json"))
    T, H = trace.matrix.shape
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date"] + [f"u{j:03d}" for j in range(H)])
        for d, row in zip(trace.dates, trace.matrix):
            w.writerow([d.isoformat()] + [repr(float(v)) for v in row])

    rgba, lo, hi = _rgba(trace.matrix, cmap)
    img = np.repeat(np.repeat(rgba, cell_px, axis=0), cell_px, axis=1)
    plt.imsave(png_path, img, format="png")

    meta = {
        "region_name": trace.region_name,
        "model_descriptor": trace.model_descriptor,
        "rows": T, "columns": H,
        "row_axis": "test day", "column_axis": "hidden unit",
        "cell_px": cell_px,
        "image_height_px": T * cell_px, "image_width_px": H * cell_px,
        "colormap": cmap, "scale": "linear", "vmin": lo, "vmax": hi,
        "first_date": trace.dates[0].isoformat() if trace.dates else None,
        "last_date": trace.dates[-1].isoformat() if trace.dates else None,
    }
    with open(meta_path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=1)
    return csv_path, png_path, meta_path


def best_lag(reference, series, max_lag):
    """``(lag, correlation)`` maximising correlation of ``series`` against ``reference``.

    Ties go to the smallest absolute lag.
    """
    corr = kernels.lagged_correlation(np.ascontiguousarray(reference, dtype=np.float64),
                                      np.ascontiguousarray(series, dtype=np.float64), max_lag)
    lags = np.arange(-max_lag, max_lag + 1)
    order = np.argsort(np.abs(lags), kind="stable")
    k = order[np.argmax(corr[order])]
    return int(lags[k]), float(corr[k])


@dataclass
class DriftReport:
    day_range: tuple
    max_lag: int
    lag_a_vs_actual: int
    corr_a_vs_actual: float
    lag_b_vs_actual: int
    corr_b_vs_actual: float
    lag_b_vs_a: int
    corr_b_vs_a: float
    zero_lag_corr_b_vs_a: float
    peak_difference: int

    def to_dict(self):
        return dict(self.__dict__, day_range=list(self.day_range))


def compare_envelopes(env_a, env_b, actual, max_lag=None):
    """Quantify drift between two envelopes inside the analysis window.

    Lags compare each envelope's max series against the min-max scaled
    actual series, and ``env_b`` against ``env_a``; a positive lag means the
    second series trails the first. ``peak_difference`` is the day offset
    between the peaks of the two max series.
    """
    a_max, b_max = np.asarray(env_a.max_series), np.asarray(env_b.max_series)
    values = actual.values if isinstance(actual, TimeSeries) else np.asarray(actual, float)
    if not (len(a_max) == len(b_max) == len(values)):
        raise ValueError(f"length mismatch: {len(a_max)}, {len(b_max)}, {len(values)}")
    lo, hi = env_a.day_range
    a, b, act = a_max[lo:hi], b_max[lo:hi], values[lo:hi]
    if act.max() > act.min():
        act = transform(act, fit_scaler(act))
    m = hi - lo
    if max_lag is None:
        max_lag = max(1, min(30, m // 3))
    max_lag = min(max_lag, m - 2)
    if max_lag < 0:
        raise ValueError("analysis window too short")
    lag_a, corr_a = best_lag(act, a, max_lag)
    lag_b, corr_b = best_lag(act, b, max_lag)
    lag_ab, corr_ab = best_lag(a, b, max_lag)
    zero = float(kernels.lagged_correlation(np.ascontiguousarray(a), np.ascontiguousarray(b), 0)[0])
    return DriftReport((lo, hi), max_lag, lag_a, corr_a, lag_b, corr_b, lag_ab, corr_ab,
                       zero, int(np.argmax(b)) - int(np.argmax(a)))
