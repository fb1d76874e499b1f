"""Synthetic two-wave case data in the ingestion formats.

Used for fixtures and demos; the shapes loosely follow the first and second
waves of 2020-2021 but none of the numbers are real.
"""
import csv
import datetime as dt

import numpy as np

START = dt.date(2020, 6, 10)
END = dt.date(2021, 8, 4)

# name: (peak active cases of wave 2, wave-1 share, first nonzero date or None)
REGIONS = {
    "Maharashtra": (700_000, 0.45, None),
    "Chhattisgarh": (130_000, 0.25, None),
    "Gujarat": (150_000, 0.12, None),
    "Haryana": (115_000, 0.15, None),
    "Karnataka": (600_000, 0.2, None),
    "Kerala": (450_000, 0.2, None),
    "Tamil Nadu": (310_000, 0.18, None),
    "Telangana": (80_000, 0.3, None),
    "Uttar Pradesh": (310_000, 0.2, None),
    "Uttarakhand": (80_000, 0.1, None),
    "Delhi": (100_000, 0.3, None),
    "Lakshadweep": (1_500, 0.0, dt.date(2021, 1, 18)),
}


def _bump(t, centre, width):
    return np.exp(-0.5 * ((t - centre) / width) ** 2)


def active_curve(n_days, peak, wave1_share, rng, first_index=0, shift=0.0):
    t = np.arange(n_days, dtype=float)
    curve = (wave1_share * _bump(t, 100 + shift, 35) + _bump(t, 335 + shift, 22)) * peak
    curve *= np.exp(rng.normal(0.0, 0.02, n_days))
    curve[:first_index] = 0.0
    return np.round(np.maximum(curve, 0.0))


def region_frame(name, peak, wave1_share, first_date, rng, start=START, end=END):
    """Cumulative (confirmed, deaths, recovered) whose difference is the active curve."""
    n = (end - start).days + 1
    first = 0 if first_date is None else (first_date - start).days
    active = active_curve(n, peak, wave1_share, rng, first, shift=rng.uniform(-8, 8))
    drop = np.maximum(0.0, -np.diff(active, prepend=0.0))
    deaths = np.cumsum(np.round(0.001 * active))
    recovered = np.cumsum(drop + np.round(0.05 * active))
    confirmed = active + deaths + recovered
    dates = [start + dt.timedelta(days=k) for k in range(n)]
    return dates, confirmed, deaths, recovered


def write_jhu_csv(path, regions=None, seed=0, start=START, end=END):
    rng = np.random.default_rng(seed)
    regions = REGIONS if regions is None else {r: REGIONS[r] for r in regions}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "region", "confirmed", "deaths", "recovered"])
        for name, (peak, share, first) in regions.items():
            dates, c, d, r = region_frame(name, peak, share, first, rng, start, end)
            for row in zip(dates, c, d, r):
                w.writerow([row[0].isoformat(), name] + [int(v) for v in row[1:]])
    return path


def write_india_csv(path, seed=0, start=START, end=dt.date(2021, 12, 15)):
    """National ``date,active`` series ending on ``end``."""
    rng = np.random.default_rng(seed)
    n = (end - start).days + 1
    active = active_curve(n, 3_700_000, 0.27, rng)
    t = np.arange(n)
    active += np.round(90_000 * _bump(t, 520, 40))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "active"])
        for k in range(n):
            w.writerow([(start + dt.timedelta(days=k)).isoformat(), int(active[k])])
    return path
