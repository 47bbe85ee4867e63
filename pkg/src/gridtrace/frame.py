"""Hourly wide frames and the calendar operations built on them.

A :class:`WideFrame` stores one variable for one region as a ``dates x 24``
matrix. Missing cells are ``NaN``; every other cell must be finite. Frames and
series views are immutable: their arrays are flagged read-only on creation and
every operation returns a new object.
"""

from __future__ import annotations

import datetime as dt
import enum
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import FileIOError, GridtraceError

HOURS = 24
CSV_HEADER = ["date"] + [str(h) for h in range(HOURS)]


class AggregationLevel(str, enum.Enum):
    HOURLY = "hourly"
    DAILY = "daily"
    MONTHLY = "monthly"


@dataclass(frozen=True)
class Timestamp:
    """A calendar hour ``(year, month, day, hour)``."""

    year: int
    month: int
    day: int
    hour: int = 0

    def __post_init__(self):
        try:
            dt.date(self.year, self.month, self.day)
        except ValueError as exc:
            raise GridtraceError("bad-timestamp", str(exc)) from None
        if not 0 <= self.hour < HOURS:
            raise GridtraceError("bad-timestamp", f"hour {self.hour} outside 0-23")

    @property
    def date(self) -> dt.date:
        return dt.date(self.year, self.month, self.day)

    def to_datetime64(self) -> np.datetime64:
        return np.datetime64(self.date, "h") + np.timedelta64(self.hour, "h")

    @classmethod
    def from_datetime64(cls, value) -> "Timestamp":
        value = np.datetime64(value, "h")
        day = value.astype("datetime64[D]")
        hour = int((value - day.astype("datetime64[h]")).astype(int))
        d = day.astype(dt.date)
        return cls(d.year, d.month, d.day, hour)

    def __str__(self) -> str:
        return f"{self.date.isoformat()}T{self.hour:02d}"


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


def to_day(d) -> np.datetime64:
    """Coerce ``date``/``str``/``datetime64`` into ``datetime64[D]``."""
    if isinstance(d, dt.datetime):
        d = d.date()
    return np.datetime64(d, "D")


def format_hour(ts: np.datetime64) -> str:
    """``YYYY-MM-DDTHH`` rendering used by every hourly CSV."""
    return str(np.datetime64(ts, "h"))


@dataclass(frozen=True)
class SeriesView:
    """Chronological series; ``NaN`` marks a missing value."""

    timestamps: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        ts = np.asarray(self.timestamps).astype("datetime64[h]")
        vals = np.asarray(self.values, dtype=float).ravel()
        if ts.shape != vals.shape:
            raise GridtraceError(
                "misaligned", f"{ts.size} timestamps for {vals.size} values"
            )
        if ts.size > 1 and not np.all(np.diff(ts) > np.timedelta64(0, "h")):
            raise GridtraceError("unordered", "timestamps must be strictly increasing")
        if np.isinf(vals).any():
            raise GridtraceError("non-finite", "series contains infinite values")
        object.__setattr__(self, "timestamps", _readonly(ts))
        object.__setattr__(self, "values", _readonly(vals))

    def __len__(self) -> int:
        return self.values.size

    @property
    def present(self) -> np.ndarray:
        return ~np.isnan(self.values)

    def with_values(self, values) -> "SeriesView":
        return SeriesView(self.timestamps, values)

    @classmethod
    def from_values(cls, values, start="2000-01-01", freq: str = "h") -> "SeriesView":
        """Regular series starting at ``start`` with one step of ``freq`` per value."""
        values = np.asarray(values, dtype=float)
        origin = np.datetime64(start, freq)
        ts = origin + np.arange(values.size).astype(f"timedelta64[{freq}]")
        return cls(ts.astype("datetime64[h]"), values)


@dataclass(frozen=True, eq=False)
class WideFrame:
    """Date-by-hour matrix of one variable in one region."""

    region: str
    variable: str
    unit: str
    dates: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.unit:
            raise GridtraceError("bad-unit", "unit must be non-empty")
        dates = np.asarray(self.dates).astype("datetime64[D]").ravel()
        vals = np.asarray(self.values, dtype=float)
        if vals.size == 0:
            vals = vals.reshape(0, HOURS)
        if vals.ndim != 2 or vals.shape[1] != HOURS:
            raise GridtraceError("bad-shape", f"values must be (n, 24), got {vals.shape}")
        if vals.shape[0] != dates.size:
            raise GridtraceError("misaligned", f"{dates.size} dates for {vals.shape[0]} rows")
        if dates.size > 1 and not np.all(np.diff(dates) > np.timedelta64(0, "D")):
            raise GridtraceError("dup-date", "dates must be strictly increasing")
        if np.isinf(vals).any():
            raise GridtraceError("non-finite", "frame contains infinite values")
        object.__setattr__(self, "dates", _readonly(dates))
        object.__setattr__(self, "values", _readonly(vals))

    def __eq__(self, other) -> bool:
        if not isinstance(other, WideFrame):
            return NotImplemented
        return ((self.region, self.variable, self.unit) == (other.region, other.variable, other.unit)
                and np.array_equal(self.dates, other.dates)
                and np.array_equal(self.values, other.values, equal_nan=True))

    __hash__ = None

    @property
    def n_days(self) -> int:
        return self.dates.size

    @property
    def empty(self) -> bool:
        return self.dates.size == 0

    def with_values(self, values) -> "WideFrame":
        return replace(self, values=values)

    def row(self, day) -> np.ndarray | None:
        """Hour vector of ``day`` or ``None`` when the date is not in the frame."""
        day = to_day(day)
        i = np.searchsorted(self.dates, day)
        if i < self.dates.size and self.dates[i] == day:
            return self.values[i]
        return None

    def hourly_timestamps(self) -> np.ndarray:
        base = self.dates.astype("datetime64[h]")[:, None]
        return (base + np.arange(HOURS).astype("timedelta64[h]")).ravel()

    @classmethod
    def from_hourly(cls, start, values, region="region", variable="variable",
                    unit="unit") -> "WideFrame":
        """Build a frame from a flat hourly vector starting at midnight of ``start``.

        A trailing partial day is padded with missing cells.
        """
        values = np.asarray(values, dtype=float).ravel()
        n_days = -(-values.size // HOURS)
        padded = np.full(n_days * HOURS, np.nan)
        padded[: values.size] = values
        dates = to_day(start) + np.arange(n_days).astype("timedelta64[D]")
        return cls(region, variable, unit, dates, padded.reshape(n_days, HOURS))

    @classmethod
    def from_series(cls, series: SeriesView, region="region", variable="variable",
                    unit="unit") -> "WideFrame":
        """Scatter an hourly series into a frame; absent hours become missing."""
        ts = series.timestamps
        if ts.size == 0:
            return cls(region, variable, unit, np.array([], "datetime64[D]"),
                       np.empty((0, HOURS)))
        days = ts.astype("datetime64[D]")
        dates = np.unique(days)
        out = np.full((dates.size, HOURS), np.nan)
        rows = np.searchsorted(dates, days)
        hours = (ts - days.astype("datetime64[h]")).astype(int)
        out[rows, hours] = series.values
        return cls(region, variable, unit, dates, out)


def flatten(frame: WideFrame) -> SeriesView:
    """Chronological hourly view of ``frame``; missing cells stay missing."""
    return SeriesView(frame.hourly_timestamps(), frame.values.ravel())


def _group_mean(keys: np.ndarray, values: np.ndarray):
    """Mean of present values per key (keys sorted). Returns (uniq, mean, count)."""
    uniq, inverse = np.unique(keys, return_inverse=True)
    present = ~np.isnan(values)
    counts = np.bincount(inverse, weights=present.astype(float), minlength=uniq.size)
    sums = np.bincount(inverse, weights=np.where(present, values, 0.0), minlength=uniq.size)
    with np.errstate(invalid="ignore", divide="ignore"):
        means = np.where(counts > 0, sums / np.where(counts > 0, counts, 1.0), np.nan)
    return uniq, means, counts.astype(int)


def aggregate(frame: WideFrame, level: AggregationLevel | str):
    """Period means plus the number of present cells in each period.

    Returns
    -------
    (SeriesView, ndarray)
        Means stamped at the first hour of each period, and the counts.
    """
    level = AggregationLevel(level)
    if frame.empty:
        raise GridtraceError("empty-frame", "cannot aggregate an empty frame")
    flat = flatten(frame)
    if level is AggregationLevel.HOURLY:
        return flat, (~np.isnan(flat.values)).astype(int)
    unit = "D" if level is AggregationLevel.DAILY else "M"
    keys = flat.timestamps.astype(f"datetime64[{unit}]")
    uniq, means, counts = _group_mean(keys, flat.values)
    stamps = uniq.astype("datetime64[D]").astype("datetime64[h]")
    return SeriesView(stamps, means), counts


def aggregate_mean(frame: WideFrame, level: AggregationLevel | str) -> SeriesView:
    """Average present values over hours, days or months (missing skipped)."""
    return aggregate(frame, level)[0]


def aggregate_series(series: SeriesView, level: AggregationLevel | str) -> SeriesView:
    """Same as :func:`aggregate_mean` for an arbitrary hourly series."""
    level = AggregationLevel(level)
    if len(series) == 0:
        raise GridtraceError("empty-frame", "cannot aggregate an empty series")
    if level is AggregationLevel.HOURLY:
        return series
    unit = "D" if level is AggregationLevel.DAILY else "M"
    uniq, means, _ = _group_mean(series.timestamps.astype(f"datetime64[{unit}]"),
                                 series.values)
    return SeriesView(uniq.astype("datetime64[D]").astype("datetime64[h]"), means)


def filter_dates(frame: WideFrame, start, end) -> WideFrame:
    """Rows with ``start <= date <= end`` (inclusive)."""
    start, end = to_day(start), to_day(end)
    if start > end:
        raise GridtraceError("bad-range", f"{start} is after {end}")
    keep = (frame.dates >= start) & (frame.dates <= end)
    return replace(frame, dates=frame.dates[keep], values=frame.values[keep])


def align_date(d, years_back: int) -> dt.date:
    """Same month and day ``years_back`` years earlier.

    Feb 29 falls back to Feb 28 when the target year has no leap day.
    """
    d = to_day(d).astype(dt.date)
    year = d.year - years_back
    try:
        return d.replace(year=year)
    except ValueError:
        return dt.date(year, 2, 28)


def align_week(d, years_back: int) -> dt.date:
    """Date sharing the weekday, ``364 * years_back`` days earlier."""
    return to_day(d).astype(dt.date) - dt.timedelta(days=364 * years_back)


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    da = a - a.mean()
    db = b - b.mean()
    return float(np.dot(da, db) / np.sqrt(np.dot(da, da) * np.dot(db, db)))


def pearson_matrix(series: Sequence[SeriesView]) -> np.ndarray:
    """Pairwise Pearson correlations on the intersection of present timestamps."""
    if len(series) < 2:
        raise GridtraceError("no-overlap", "need at least two series")
    k = len(series)
    out = np.eye(k)
    for i in range(k):
        for j in range(i + 1, k):
            a, b = series[i], series[j]
            common, ia, ib = np.intersect1d(a.timestamps, b.timestamps,
                                            return_indices=True)
            xa, xb = a.values[ia], b.values[ib]
            ok = ~np.isnan(xa) & ~np.isnan(xb)
            xa, xb = xa[ok], xb[ok]
            if xa.size < 3:
                raise GridtraceError("no-overlap", f"series {i} and {j} share {xa.size} points")
            if np.ptp(xa) == 0 or np.ptp(xb) == 0:
                raise GridtraceError("zero-variance", f"series {i} or {j} is constant on the overlap")
            r = float(np.clip(_pearson(xa, xb), -1.0, 1.0))
            out[i, j] = out[j, i] = r
    return out


def format_value(v: float) -> str:
    """Shortest positional decimal that round-trips; empty for missing."""
    if np.isnan(v):
        return ""
    return np.format_float_positional(float(v), unique=True, trim="-")


def write_csv(frame: WideFrame, path) -> Path:
    """Write ``frame`` in the wide CSV layout (``date,0,...,23``, LF endings)."""
    path = Path(path)
    lines = [",".join(CSV_HEADER)]
    for day, row in zip(frame.dates, frame.values):
        lines.append(",".join([str(day)] + [format_value(v) for v in row]))
    try:
        path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    except OSError as exc:
        raise FileIOError("io-error", str(exc)) from None
    return path
