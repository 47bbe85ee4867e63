"""Loading, validating and repairing wide-frame CSV files.

Repairs never touch a present cell. Each modified cell is recorded once in a
:class:`QualityReport`, which serializes to JSON lines (one action per line).
"""

from __future__ import annotations

import csv
import datetime as dt
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import FileIOError, GridtraceError
from .frame import (CSV_HEADER, HOURS, SeriesView, WideFrame, align_week,
                    flatten, format_hour, to_day)

MAD_SCALE = 1.4826

RULE_KINDS = frozenset({"gap-interpolate", "week-fill", "outlier-flag"})
ACTIONS = ("filled-interpolate", "filled-week-aligned", "flagged-outlier", "left-missing")


@dataclass(frozen=True)
class QualityRule:
    """Repair parameters.

    ``kinds`` selects the enabled steps; ``max_gap`` is in hours and
    ``window_days`` is the width of the centred outlier window.
    """

    kinds: frozenset = RULE_KINDS
    max_gap: int = 3
    z_threshold: float = 5.0
    window_days: int = 7

    def __post_init__(self):
        kinds = frozenset(self.kinds)
        unknown = kinds - RULE_KINDS
        if unknown:
            raise GridtraceError("bad-rule", f"unknown rule kinds {sorted(unknown)}")
        object.__setattr__(self, "kinds", kinds)
        if self.max_gap < 1:
            raise GridtraceError("bad-rule", "max_gap must be >= 1")
        if self.z_threshold <= 0 or self.window_days <= 0:
            raise GridtraceError("bad-rule", "thresholds must be positive")


@dataclass(frozen=True)
class QualityAction:
    ts: np.datetime64
    action: str
    old: float | None = None
    new: float | None = None

    def to_json(self) -> str:
        return json.dumps({"ts": format_hour(self.ts), "action": self.action,
                           "old": self.old, "new": self.new})


@dataclass
class QualityReport:
    actions: list = field(default_factory=list)

    @property
    def counts(self) -> dict:
        out = {a: 0 for a in ACTIONS}
        for act in self.actions:
            out[act.action] += 1
        return out

    @property
    def modified(self) -> list:
        """Actions that changed the frame."""
        return [a for a in self.actions if a.new is not None or a.action == "flagged-outlier"]

    def __len__(self):
        return len(self.actions)

    def to_jsonl(self) -> str:
        return "".join(a.to_json() + "\n" for a in self.actions)

    def write(self, path) -> Path:
        path = Path(path)
        try:
            path.write_text(self.to_jsonl(), encoding="utf-8", newline="\n")
        except OSError as exc:
            raise FileIOError("io-error", str(exc)) from None
        return path


def _parse_cell(text: str, line: int, col: str) -> float:
    text = text.strip()
    if text == "":
        return math.nan
    try:
        v = float(text)
    except ValueError:
        raise GridtraceError("bad-cell", f"line {line} column {col}: {text!r}",
                             row=line, column=col) from None
    if not math.isfinite(v) or "," in text:
        raise GridtraceError("bad-cell", f"line {line} column {col}: {text!r}",
                             row=line, column=col)
    return v


def load_csv(path, region: str, variable: str, unit: str) -> WideFrame:
    """Parse a wide-frame CSV file into a :class:`WideFrame` sorted by date."""
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise FileIOError("io-error", str(exc)) from None
    rows = list(csv.reader(raw.splitlines()))
    if not rows or [c.strip() for c in rows[0]] != CSV_HEADER:
        raise GridtraceError("bad-header", f"{path.name}: expected {','.join(CSV_HEADER)}")
    dates, values = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != HOURS + 1:
            raise GridtraceError("bad-cell", f"line {lineno}: {len(row)} fields",
                                 row=lineno, column="date")
        try:
            day = dt.date.fromisoformat(row[0].strip())
        except ValueError:
            raise GridtraceError("bad-cell", f"line {lineno}: invalid date {row[0]!r}",
                                 row=lineno, column="date") from None
        dates.append(day)
        values.append([_parse_cell(c, lineno, str(h)) for h, c in enumerate(row[1:])])
    order = sorted(range(len(dates)), key=dates.__getitem__)
    dates = [dates[i] for i in order]
    for a, b in zip(dates, dates[1:]):
        if a == b:
            raise GridtraceError("dup-date", f"{path.name}: {a} appears twice")
    vals = np.array([values[i] for i in order], dtype=float).reshape(len(dates), HOURS)
    return WideFrame(region, variable, unit, np.array(dates, dtype="datetime64[D]"), vals)


def _rolling_median_mad(x: np.ndarray, half: int):
    """Centred rolling median and MAD ignoring NaN; the window shrinks at edges."""
    pad = np.concatenate([np.full(half, np.nan), x, np.full(half, np.nan)])
    win = sliding_window_view(pad, 2 * half + 1)
    med = np.empty(x.size)
    mad = np.empty(x.size)
    step = 4096
    for s in range(0, x.size, step):
        w = win[s:s + step]
        m = np.nanmedian(w, axis=1)
        med[s:s + step] = m
        mad[s:s + step] = np.nanmedian(np.abs(w - m[:, None]), axis=1)
    return med, mad


def detect_outliers(frame: WideFrame, rule: QualityRule = QualityRule()) -> list:
    """Timestamps whose value departs from the rolling median by more than
    ``z_threshold`` robust standard deviations (MAD x 1.4826)."""
    hours = rule.window_days * HOURS
    if hours >= frame.n_days * HOURS:
        raise GridtraceError("window-too-long",
                             f"{rule.window_days} day window vs {frame.n_days} day frame")
    flat = flatten(frame)
    x = flat.values
    present = ~np.isnan(x)
    if not present.any():
        return []
    med, mad = _rolling_median_mad(x, hours // 2)
    sigma = MAD_SCALE * mad
    with np.errstate(invalid="ignore"):
        flagged = present & (np.abs(x - med) > rule.z_threshold * sigma)
    return list(flat.timestamps[flagged])


def _runs(mask: np.ndarray):
    """(start, stop) index pairs of consecutive True runs."""
    padded = np.concatenate([[False], mask, [False]])
    edges = np.flatnonzero(np.diff(padded.astype(int)))
    return list(zip(edges[::2], edges[1::2]))


def _interpolate_short(x: np.ndarray, max_gap: int, filled: dict, action: str):
    for a, b in _runs(np.isnan(x)):
        if b - a > max_gap or a == 0 or b == x.size:
            continue
        left, right = x[a - 1], x[b]
        steps = np.arange(1, b - a + 1) / (b - a + 1)
        x[a:b] = left + (right - left) * steps
        for i in range(a, b):
            filled[i] = action


def fill_missing(frame: WideFrame, rule: QualityRule = QualityRule()):
    """Repair missing cells.

    Gaps of at most ``max_gap`` hours with present neighbours on both sides
    are linearly interpolated; other missing cells take the value observed
    364 days earlier at the same hour when available. Remaining holes are
    reported as ``left-missing``.

    Returns
    -------
    (WideFrame, QualityReport)
    """
    if frame.empty:
        return frame, QualityReport()
    x = frame.values.ravel().copy()
    filled: dict[int, str] = {}
    interpolate = "gap-interpolate" in rule.kinds
    week = "week-fill" in rule.kinds
    day_index = {d: i for i, d in enumerate(frame.dates.astype(dt.date))}

    while True:
        before = len(filled)
        if interpolate:
            _interpolate_short(x, rule.max_gap, filled, "filled-interpolate")
        if week:
            # chronological so that a source filled earlier in the pass is reused
            for a, b in _runs(np.isnan(x)):
                if interpolate and b - a <= rule.max_gap and a > 0 and b < x.size:
                    continue
                for i in range(a, b):
                    day, hour = divmod(i, HOURS)
                    src = day_index.get(align_week(frame.dates[day], 1))
                    if src is None:
                        continue
                    v = x[src * HOURS + hour]
                    if not np.isnan(v):
                        x[i] = v
                        filled[i] = "filled-week-aligned"
        if len(filled) == before:
            break

    stamps = frame.hourly_timestamps()
    original = frame.values.ravel()
    actions = []
    for i in range(x.size):
        if i in filled:
            actions.append(QualityAction(stamps[i], filled[i], None, float(x[i])))
        elif np.isnan(x[i]):
            actions.append(QualityAction(stamps[i], "left-missing", None, None))
    assert np.array_equal(x[~np.isnan(original)], original[~np.isnan(original)])
    return frame.with_values(x.reshape(-1, HOURS)), QualityReport(actions)


def quality_control(frame: WideFrame, rule: QualityRule = QualityRule()):
    """Flag outliers, blank them, then fill every gap.

    A flagged cell is reported once as ``flagged-outlier`` with its original
    value and whatever value the fill step gave it.
    """
    flags = []
    if "outlier-flag" in rule.kinds and frame.n_days > rule.window_days:
        flags = detect_outliers(frame, rule)
    x = frame.values.ravel().copy()
    stamps = frame.hourly_timestamps()
    idx = np.searchsorted(stamps, np.array(flags, dtype="datetime64[h]"))
    old = {int(i): float(x[i]) for i in idx}
    x[idx] = np.nan
    repaired, report = fill_missing(frame.with_values(x.reshape(-1, HOURS)), rule)
    actions = []
    for act in report.actions:
        i = int(np.searchsorted(stamps, act.ts))
        if i in old:
            actions.append(QualityAction(act.ts, "flagged-outlier", old[i], act.new))
        else:
            actions.append(act)
    return repaired, QualityReport(actions)
