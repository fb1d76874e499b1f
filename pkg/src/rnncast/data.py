"""Region time series: CSV ingestion, active-case derivation, scaling, windows."""
from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

JHU_HEADER = ["date", "region", "confirmed", "deaths", "recovered"]
SIMPLE_HEADER = ["date", "active"]
ONE_DAY = dt.timedelta(days=1)


class DataError(Exception):
    """Base class for ingestion and preprocessing failures."""


class ParseError(DataError):
    def __init__(self, path, line, message):
        self.path, self.line = str(path), line
        super().__init__(f"{path}:{line}: {message}")


class IngestionError(DataError):
    pass


class AlignmentError(DataError):
    pass


class DegenerateScalerError(DataError):
    pass


class InsufficientDataError(DataError):
    pass


class SplitError(DataError):
    pass


@dataclass(frozen=True)
class TimeSeries:
    region_name: str
    dates: tuple
    values: np.ndarray
    warnings: tuple = field(default=(), compare=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64).copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "dates", tuple(self.dates))
        if values.ndim != 1 or len(values) != len(self.dates):
            raise IngestionError(
                f"{self.region_name}: {len(self.dates)} dates but {values.size} values")
        if not np.all(np.isfinite(values)):
            raise IngestionError(f"{self.region_name}: non-finite values")
        for prev, cur in zip(self.dates, self.dates[1:]):
            if cur - prev != ONE_DAY:
                raise IngestionError(
                    f"{self.region_name}: dates not daily between {prev} and {cur}")

    def __len__(self):
        return len(self.dates)

    @property
    def start(self):
        return self.dates[0]

    @property
    def end(self):
        return self.dates[-1]

    def index_of(self, date):
        if not self.dates or not self.start <= date <= self.end:
            raise KeyError(f"{date} outside {self.region_name} range")
        return (date - self.start).days

    def slice(self, start=None, stop=None):
        """Sub-series over positional indices ``[start, stop)``."""
        return TimeSeries(self.region_name, self.dates[start:stop],
                          self.values[start:stop])

    def between(self, first, last):
        """Sub-series with dates in ``[first, last]``, clipped to the range."""
        lo = max(0, (first - self.start).days)
        hi = min(len(self), (last - self.start).days + 1)
        return self.slice(lo, max(lo, hi))

    def first_nonzero_date(self):
        nz = np.flatnonzero(self.values)
        return self.dates[nz[0]] if nz.size else None


@dataclass(frozen=True)
class ScalerParams:
    x_min: float
    x_max: float

    def __post_init__(self):
        if not (np.isfinite(self.x_min) and np.isfinite(self.x_max)):
            raise DegenerateScalerError("scaler bounds must be finite")
        if not self.x_max > self.x_min:
            raise DegenerateScalerError(
                f"x_max ({self.x_max}) must exceed x_min ({self.x_min})")

    def to_dict(self):
        return {"x_min": self.x_min, "x_max": self.x_max}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["x_min"]), float(d["x_max"]))


@dataclass(frozen=True)
class WindowedDataset:
    inputs: np.ndarray
    targets: np.ndarray
    w: int

    def __len__(self):
        return len(self.targets)


@dataclass(frozen=True)
class SplitSpec:
    train_end_date: dt.date
    validation_fraction: float | None = None


def parse_date(text):
    if isinstance(text, dt.date):
        return text
    return dt.date.fromisoformat(str(text).strip())


def _read_rows(path, header):
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None or [c.strip() for c in first] != header:
            raise ParseError(path, 1, f"expected header {','.join(header)}")
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(path, reader.line_num,
                                 f"expected {len(header)} fields, got {len(row)}")
            yield reader.line_num, [c.strip() for c in row]


def _field(path, line, name, text, conv):
    try:
        return conv(text)
    except ValueError:
        raise ParseError(path, line, f"bad {name} value {text!r}") from None


def _check_daily(path, region, dates):
    for prev, cur in zip(dates, dates[1:]):
        if cur == prev:
            raise IngestionError(f"{path}: {region}: duplicate date {cur}")
        if cur < prev:
            raise IngestionError(f"{path}: {region}: dates not increasing at {cur}")
        if cur - prev != ONE_DAY:
            missing = [str(prev + ONE_DAY * k) for k in range(1, (cur - prev).days)]
            raise IngestionError(
                f"{path}: {region}: missing dates {', '.join(missing)}")


def _decrease_warnings(region, kind, dates, values):
    drops = np.flatnonzero(np.diff(values) < 0)
    return [f"{region}: cumulative {kind} decreases on {dates[i + 1]}" for i in drops]


def load_jhu_csv(path):
    """Read ``date,region,confirmed,deaths,recovered`` rows.

    Returns ``(series, warnings)`` where ``series`` maps each region to a
    ``(confirmed, deceased, recovered)`` triple of aligned TimeSeries and
    ``warnings`` lists cumulative decreases (kept, since real data gets
    revised).
    """
    rows = {}
    for line, (d, region, conf, dead, rec) in _read_rows(path, JHU_HEADER):
        rows.setdefault(region, []).append((
            _field(path, line, "date", d, parse_date),
            _field(path, line, "confirmed", conf, float),
            _field(path, line, "deaths", dead, float),
            _field(path, line, "recovered", rec, float),
        ))
        if not np.all(np.isfinite(rows[region][-1][1:])):
            raise ParseError(path, line, "non-finite count")

    out, warnings = {}, []
    for region, recs in rows.items():
        dates = [r[0] for r in recs]
        _check_daily(path, region, dates)
        triple = []
        for k, kind in enumerate(("confirmed", "deceased", "recovered"), start=1):
            vals = np.array([r[k] for r in recs])
            warnings += _decrease_warnings(region, kind, dates, vals)
            triple.append(TimeSeries(region, dates, vals))
        out[region] = tuple(triple)
    return out, warnings


def load_simple_csv(path, label):
    """Read a two-column ``date,active`` file as one series named ``label``."""
    dates, values = [], []
    for line, (d, active) in _read_rows(path, SIMPLE_HEADER):
        dates.append(_field(path, line, "date", d, parse_date))
        values.append(_field(path, line, "active", active, float))
        if not np.isfinite(values[-1]):
            raise ParseError(path, line, "non-finite count")
    _check_daily(path, label, dates)
    return TimeSeries(label, dates, values)


def compute_active(confirmed, deceased, recovered):
    """Active cases = confirmed - deceased - recovered, day by day.

    Negative results are kept and reported on ``warnings``.
    """
    if not (confirmed.dates == deceased.dates == recovered.dates):
        raise AlignmentError(f"{confirmed.region_name}: date vectors differ")
    values = confirmed.values - deceased.values - recovered.values
    warnings = tuple(f"{confirmed.region_name}: negative active count on {confirmed.dates[i]}"
                     for i in np.flatnonzero(values < 0))
    return TimeSeries(confirmed.region_name, confirmed.dates, values, warnings)


def load_active(path, regions=None):
    """Active-case series for every region (or the listed ones) in a JHU-style file."""
    raw, warnings = load_jhu_csv(path)
    if regions is not None:
        missing = [r for r in regions if r not in raw]
        if missing:
            raise IngestionError(f"{path}: regions not found: {', '.join(missing)}")
        raw = {r: raw[r] for r in regions}
    active = {name: compute_active(*triple) for name, triple in raw.items()}
    for s in active.values():
        warnings += list(s.warnings)
    return active, warnings


def write_active_csv(series, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SIMPLE_HEADER)
        for d, v in zip(series.dates, series.values):
            writer.writerow([d.isoformat(), repr(float(v))])


def fit_scaler(series):
    values = series.values if isinstance(series, TimeSeries) else np.asarray(series, float)
    name = series.region_name if isinstance(series, TimeSeries) else "series"
    if values.size < 2:
        raise InsufficientDataError(f"{name}: need at least 2 values to fit a scaler")
    lo, hi = float(values.min()), float(values.max())
    if lo == hi:
        raise DegenerateScalerError(f"{name}: constant series ({lo}), cannot scale")
    return ScalerParams(lo, hi)


def transform(x, params):
    x = np.asarray(x.values if isinstance(x, TimeSeries) else x, dtype=np.float64)
    return (x - params.x_min) / (params.x_max - params.x_min)


def inverse_transform(scaled, params):
    scaled = np.asarray(scaled, dtype=np.float64)
    return scaled * (params.x_max - params.x_min) + params.x_min


def make_windows(scaled_series, w):
    """Slide a length-``w`` window one step at a time; target is the next value."""
    x = np.asarray(scaled_series, dtype=np.float64)
    if w < 1:
        raise ValueError("window size must be positive")
    if len(x) <= w:
        raise InsufficientDataError(f"series of length {len(x)} too short for window {w}")
    inputs = np.lib.stride_tricks.sliding_window_view(x, w)[:-1].copy()
    return WindowedDataset(inputs, x[w:].copy(), w)


def split_by_date(series, spec):
    """Split into ``(train, test)``; train ends on ``spec.train_end_date`` inclusive."""
    end = parse_date(spec.train_end_date)
    if not series.dates or not series.start <= end < series.end:
        raise SplitError(
            f"{series.region_name}: train end {end} must fall within "
            f"[{series.start if series.dates else None}, "
            f"{series.end if series.dates else None}) so both parts are non-empty")
    k = series.index_of(end) + 1
    return series.slice(0, k), series.slice(k, None)
