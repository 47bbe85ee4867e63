"""Counterfactual baselines: calendar alignment, trends, backcasts,
distribution-based fluctuation indices and quantile baselines."""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import learners
from .errors import FileIOError, GridtraceError
from .frame import (HOURS, AggregationLevel, SeriesView, WideFrame,
                    aggregate_series, align_date, align_week, flatten,
                    format_hour, format_value, to_day)
from .learners import QUANTILE_LEVELS, FeatureMatrix, LearnerSpec, LossKind

MIN_WINDOW = 30


@dataclass(frozen=True)
class BaselineSeries:
    """Baseline values per target timestamp (``NaN`` where no source exists)."""

    method: str
    timestamps: np.ndarray
    values: np.ndarray
    observed: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        ts = np.asarray(self.timestamps).astype("datetime64[h]")
        vals = np.asarray(self.values, dtype=float)
        if ts.shape != vals.shape:
            raise GridtraceError("misaligned", "one baseline value per timestamp required")
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "values", vals)
        if self.observed is not None:
            object.__setattr__(self, "observed", np.asarray(self.observed, dtype=float))
        self.meta.setdefault("missing", [format_hour(t) for t in ts[np.isnan(vals)]])

    def __len__(self):
        return self.values.size

    @property
    def residual(self) -> np.ndarray:
        """Observation minus baseline."""
        if self.observed is None:
            raise GridtraceError("no-observation", "baseline carries no observations")
        return self.observed - self.values

    def as_series(self) -> SeriesView:
        return SeriesView(self.timestamps, self.values)


@dataclass(frozen=True)
class ProbabilisticBaseline:
    """Quantile tracks, shape ``(len(levels), n)``, non-decreasing along levels."""

    timestamps: np.ndarray
    tracks: np.ndarray
    levels: tuple = QUANTILE_LEVELS
    observed: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        ts = np.asarray(self.timestamps).astype("datetime64[h]")
        tracks = np.asarray(self.tracks, dtype=float)
        if tracks.shape != (len(self.levels), ts.size):
            raise GridtraceError("misaligned", f"tracks shape {tracks.shape}")
        if np.any(np.diff(tracks, axis=0) < 0):
            raise GridtraceError("crossing", "quantile tracks cross")
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "tracks", tracks)
        object.__setattr__(self, "levels", tuple(float(q) for q in self.levels))

    def track(self, q: float) -> np.ndarray:
        for i, level in enumerate(self.levels):
            if abs(level - q) < 1e-12:
                return self.tracks[i]
        raise GridtraceError("unsupported-level", f"no track at q={q}")

    def median(self) -> BaselineSeries:
        return BaselineSeries("prob-q50", self.timestamps, self.track(0.5), self.observed)


@dataclass(frozen=True)
class DistributionWindow:
    """A sample of values that defines one empirical CDF."""

    values: np.ndarray
    length: int | None = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float).ravel()
        vals = vals[~np.isnan(vals)]
        if vals.size == 0:
            raise GridtraceError("empty-window", "window holds no values")
        object.__setattr__(self, "values", np.sort(vals))
        if self.length is None:
            object.__setattr__(self, "length", vals.size)
        elif self.length <= 0:
            raise GridtraceError("empty-window", "window length must be positive")


@dataclass(frozen=True)
class WindowSpec:
    """How the reference sample for each observation is chosen.

    ``trailing``: the ``length`` previous hours (the observation excluded).
    ``month``: the other hours of the same calendar month.
    """

    kind: str = "trailing"
    length: int = 720
    min_samples: int = MIN_WINDOW

    def __post_init__(self):
        if self.kind not in ("trailing", "month"):
            raise GridtraceError("bad-window", f"unknown window kind {self.kind!r}")
        if self.min_samples < MIN_WINDOW:
            raise GridtraceError("small-window", f"at least {MIN_WINDOW} samples required")
        if self.kind == "trailing" and self.length < self.min_samples:
            raise GridtraceError("small-window", f"window of {self.length} < {self.min_samples}")


@dataclass(frozen=True)
class FluctuationSeries:
    timestamps: np.ndarray
    values: np.ndarray
    window: WindowSpec = WindowSpec()
    sample_sizes: np.ndarray | None = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if np.any((vals < 0) | (vals > 1)):
            raise GridtraceError("bad-index", "fluctuation index outside [0, 1]")
        object.__setattr__(self, "timestamps", np.asarray(self.timestamps).astype("datetime64[h]"))
        object.__setattr__(self, "values", vals)

    def as_series(self) -> SeriesView:
        return SeriesView(self.timestamps, self.values)


# --------------------------------------------------------------------------
# calendar-aligned baselines


def _aligned_lookup(frame: WideFrame, years_back: int, align, method: str,
                    start=None, end=None) -> BaselineSeries:
    if years_back < 0:
        raise GridtraceError("bad-shift", "years_back must be >= 0")
    dates = frame.dates
    if start is not None:
        dates = dates[dates >= to_day(start)]
    if end is not None:
        dates = dates[dates <= to_day(end)]
    base = np.full((dates.size, HOURS), np.nan)
    obs = np.full((dates.size, HOURS), np.nan)
    sources = []
    for i, d in enumerate(dates):
        src = align(d, years_back) if years_back else d.astype(dt.date)
        sources.append(src.isoformat())
        row = frame.row(src)
        if row is not None:
            base[i] = row
        obs[i] = frame.row(d)
    ts = (dates.astype("datetime64[h]")[:, None] + np.arange(HOURS).astype("timedelta64[h]")).ravel()
    return BaselineSeries(method, ts, base.ravel(), obs.ravel(),
                          {"years_back": years_back, "source_dates": sources})


def date_aligned(frame: WideFrame, years_back: int = 1, start=None, end=None) -> BaselineSeries:
    """Baseline taken from the same calendar date ``years_back`` years earlier.

    Targets are the frame's dates in ``[start, end]``; the frame must also hold
    the history.
    """
    return _aligned_lookup(frame, years_back, align_date, "date", start, end)


def week_aligned(frame: WideFrame, years_back: int = 1, start=None, end=None) -> BaselineSeries:
    """Baseline from the date with the same weekday 364 days per year earlier."""
    return _aligned_lookup(frame, years_back, align_week, "week", start, end)


# --------------------------------------------------------------------------
# trends


def trend_ma(series: SeriesView, w: int) -> SeriesView:
    """Centred moving average of width ``w``.

    Even widths use the usual 2 x w form (half weight on both ends). Near the
    edges the window shrinks symmetrically. Missing points are skipped and the
    weights renormalized. Series shorter than ``w`` are allowed as long as
    they hold ``w // 2 + 1`` points.
    """
    if w < 1:
        raise GridtraceError("bad-window", "window must be >= 1")
    n = len(series)
    # the window may shrink at both ends, but not below what half a window needs
    if n < w // 2 + 1:
        raise GridtraceError("short-series", f"{n} points for window {w}")
    x = series.values
    present = ~np.isnan(x)
    xv = np.where(present, x, 0.0)
    cs = np.concatenate([[0.0], np.cumsum(xv)])
    cc = np.concatenate([[0.0], np.cumsum(present.astype(float))])
    half = w // 2
    i = np.arange(n)
    k = np.minimum(half, np.minimum(i, n - 1 - i))
    total = cs[i + k + 1] - cs[i - k]
    count = cc[i + k + 1] - cc[i - k]
    if w % 2 == 0:
        full = k == half
        lo, hi = (i - k)[full], (i + k)[full]
        total[full] -= 0.5 * (xv[lo] + xv[hi])
        count[full] -= 0.5 * (present[lo].astype(float) + present[hi])
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(count > 0, total / np.where(count > 0, count, 1.0), np.nan)
    return series.with_values(out)


def trend_model(series: SeriesView, order=(1, 0, 0)) -> SeriesView:
    """In-sample one-step-ahead predictions of an ARIMA model fitted by CSS.

    The first ``d + p`` points have no conditional prediction and are missing.
    """
    if np.isnan(series.values).any():
        raise GridtraceError("non-finite", "repair missing values before trend_model")
    model = learners.fit_arma_css(series.values, order)
    return series.with_values(model.fitted_values())


def trend_baseline(trend: SeriesView, years_back: int = 1) -> BaselineSeries:
    """Baseline for hour ``(y, m, d, t)`` is the trend at the date-aligned hour."""
    if years_back == 0:
        return BaselineSeries("trend", trend.timestamps, trend.values, None, {"years_back": 0})
    frame = WideFrame.from_series(trend)
    b = date_aligned(frame, years_back)
    keep = np.isin(b.timestamps, trend.timestamps)
    return BaselineSeries("trend", b.timestamps[keep], b.values[keep], None,
                          {"years_back": years_back})


def detrend_baseline(series: SeriesView, trend: SeriesView) -> BaselineSeries:
    """The trend itself serves as the baseline; ``residual`` is series - trend."""
    if len(series) != len(trend) or not np.array_equal(series.timestamps, trend.timestamps):
        raise GridtraceError("misaligned", "series and trend timestamps differ")
    return BaselineSeries("detrend", series.timestamps, trend.values, series.values, {})


# --------------------------------------------------------------------------
# backcast


def ensemble_average(models: Sequence) -> learners.EnsembleModel:
    """Model whose prediction is the mean of ``models``' predictions."""
    return learners.EnsembleModel(list(models))


def _split_event(features: FeatureMatrix, target: SeriesView, horizon_start, horizon_end):
    if features.timestamps is None:
        raise GridtraceError("misaligned", "features need row timestamps")
    if features.shape[0] != len(target) or not np.array_equal(features.timestamps, target.timestamps):
        raise GridtraceError("misaligned", "features and target rows differ")
    start = np.datetime64(horizon_start, "h")
    end = np.datetime64(horizon_end, "h") if horizon_end is not None else features.timestamps[-1]
    train = (features.timestamps < start) & ~np.isnan(target.values)
    horizon = (features.timestamps >= start) & (features.timestamps <= end)
    if not train.any():
        raise GridtraceError("no-training-data", "no pre-event observations")
    return train, horizon


def backcast(features: FeatureMatrix, target: SeriesView, model, horizon_start,
             horizon_end=None) -> BaselineSeries:
    """Train on rows before ``horizon_start`` and predict the horizon.

    ``model`` is a :class:`LearnerSpec`, a list of specs (an ensemble), or an
    already fitted model exposing ``predict``.
    """
    train, horizon = _split_event(features, target, horizon_start, horizon_end)
    specs = [model] if isinstance(model, LearnerSpec) else model
    if isinstance(specs, (list, tuple)):
        if not specs:
            raise GridtraceError("empty-ensemble", "no base learners given")
        fitted = ensemble_average([learners.fit(s, features.values[train], target.values[train])
                                   for s in specs])
        names = [s.kind for s in specs]
    else:
        if not hasattr(specs, "predict"):
            raise GridtraceError("not-fitted", "model has no predict method")
        fitted, names = specs, [type(specs).__name__]
    pred = fitted.predict(features.values[horizon])
    return BaselineSeries("backcast", features.timestamps[horizon], pred,
                          target.values[horizon],
                          {"members": names, "n_train": int(train.sum()),
                           "train_end": format_hour(features.timestamps[train][-1])})


def calendar_features(timestamps, extra: dict | None = None, holidays=()) -> FeatureMatrix:
    """Calendar design: hour and day-of-year harmonics, weekday dummies, holiday flag.

    ``extra`` maps names to aligned columns (temperature, lagged load...).
    """
    ts = np.asarray(timestamps).astype("datetime64[h]")
    days = ts.astype("datetime64[D]")
    hour = (ts - days.astype("datetime64[h]")).astype(int)
    weekday = (days.astype(int) + 3) % 7
    doy = (days - days.astype("datetime64[Y]")).astype(int)
    cols, names = [], []
    for k in (1, 2):
        cols += [np.sin(2 * np.pi * k * hour / 24), np.cos(2 * np.pi * k * hour / 24)]
        names += [f"hour_sin{k}", f"hour_cos{k}"]
    cols += [np.sin(2 * np.pi * doy / 365.25), np.cos(2 * np.pi * doy / 365.25)]
    names += ["doy_sin", "doy_cos"]
    for wd in range(1, 7):
        cols.append((weekday == wd).astype(float))
        names.append(f"weekday{wd}")
    hol = np.isin(days, np.asarray(list(holidays), dtype="datetime64[D]")).astype(float)
    if hol.any():
        cols.append(hol)
        names.append("holiday")
    for name, col in (extra or {}).items():
        cols.append(np.asarray(col, dtype=float))
        names.append(name)
    return FeatureMatrix(np.column_stack(cols), tuple(names), ts)


def trend_features(timestamps) -> FeatureMatrix:
    """Linear time plus daily and weekly harmonics; the design of the quantile trend."""
    ts = np.asarray(timestamps).astype("datetime64[h]")
    t = (ts - ts[0]).astype(float)
    scale = max(t[-1], 1.0)
    cols = [t / scale]
    names = ["time"]
    for period, label in ((24.0, "day"), (168.0, "week")):
        cols += [np.sin(2 * np.pi * t / period), np.cos(2 * np.pi * t / period)]
        names += [f"{label}_sin", f"{label}_cos"]
    return FeatureMatrix(np.column_stack(cols), tuple(names), ts)


# --------------------------------------------------------------------------
# distribution-based estimation


def ecdf(sample, x):
    """Empirical CDF of ``sample`` at ``x``, right-continuous."""
    s = np.sort(np.asarray(sample, dtype=float))
    return np.searchsorted(s, x, side="right") / s.size


def distribution_distance(a: DistributionWindow, b: DistributionWindow) -> float:
    """Kolmogorov-Smirnov distance sup |F_a - F_b| between two samples."""
    if not isinstance(a, DistributionWindow):
        a = DistributionWindow(a)
    if not isinstance(b, DistributionWindow):
        b = DistributionWindow(b)
    grid = np.union1d(a.values, b.values)
    return float(np.max(np.abs(ecdf(a.values, grid) - ecdf(b.values, grid))))


def midrank_cdf(less, equal, n):
    """Mid-rank CDF ``(#less + #equal/2 + 1/2) / (n + 1)``."""
    return (np.asarray(less, float) + 0.5 * np.asarray(equal, float) + 0.5) / (np.asarray(n, float) + 1.0)


def fluctuation_value(sample, x) -> np.ndarray | float:
    """Index ``|1 - 2 F(x)|`` of ``x`` against a reference sample (x not in it)."""
    s = np.sort(np.asarray(sample, dtype=float))
    s = s[~np.isnan(s)]
    if s.size < MIN_WINDOW:
        raise GridtraceError("small-window", f"{s.size} reference values < {MIN_WINDOW}")
    lo = np.searchsorted(s, x, side="left")
    hi = np.searchsorted(s, x, side="right")
    out = np.abs(1.0 - 2.0 * midrank_cdf(lo, hi - lo, s.size))
    return float(out) if np.ndim(out) == 0 else out


def _trailing_counts(x: np.ndarray, length: int, chunk: int = 2048):
    pad = np.concatenate([np.full(length, np.nan), x])
    win = sliding_window_view(pad, length)[: x.size]
    less = np.empty(x.size, dtype=np.int64)
    equal = np.empty(x.size, dtype=np.int64)
    count = np.empty(x.size, dtype=np.int64)
    for s in range(0, x.size, chunk):
        w = win[s:s + chunk]
        v = x[s:s + chunk, None]
        less[s:s + chunk] = np.sum(w < v, axis=1)
        equal[s:s + chunk] = np.sum(w == v, axis=1)
        count[s:s + chunk] = np.sum(~np.isnan(w), axis=1)
    return less, equal, count


def _month_counts(ts: np.ndarray, x: np.ndarray):
    months = ts.astype("datetime64[M]")
    less = np.zeros(x.size, dtype=np.int64)
    equal = np.zeros(x.size, dtype=np.int64)
    count = np.zeros(x.size, dtype=np.int64)
    for m in np.unique(months):
        idx = np.flatnonzero((months == m) & ~np.isnan(x))
        s = np.sort(x[idx])
        lo = np.searchsorted(s, x[idx], side="left")
        hi = np.searchsorted(s, x[idx], side="right")
        less[idx] = lo
        equal[idx] = hi - lo - 1  # the observation itself is not in its reference
        count[idx] = s.size - 1
    return less, equal, count


def fluctuation_index(series: SeriesView, window: WindowSpec = WindowSpec()) -> FluctuationSeries:
    """Fluctuation index of every present observation with enough reference data.

    Observations whose reference sample holds fewer than ``window.min_samples``
    present values are left out of the result.
    """
    x = series.values
    if window.kind == "trailing":
        less, equal, count = _trailing_counts(x, window.length)
    else:
        less, equal, count = _month_counts(series.timestamps, x)
    keep = ~np.isnan(x) & (count >= window.min_samples)
    if not keep.any():
        raise GridtraceError("small-window", f"no observation has {window.min_samples} reference values")
    idx = np.abs(1.0 - 2.0 * midrank_cdf(less[keep], equal[keep], count[keep]))
    return FluctuationSeries(series.timestamps[keep], idx, window, count[keep])


def index_baseline(idx: FluctuationSeries, years_back: int = 1,
                   level: AggregationLevel | str = AggregationLevel.HOURLY) -> BaselineSeries:
    """Year-over-year baseline of the index at hourly, daily or monthly level.

    Hourly compares each hour with its date-aligned hour; coarser levels
    compare period means, e.g. a month with the same month ``years_back``
    years earlier.
    """
    level = AggregationLevel(level)
    series = aggregate_series(idx.as_series(), level)
    ts = series.timestamps
    if years_back == 0:
        return BaselineSeries("index", ts, series.values, series.values,
                              {"years_back": 0, "level": level.value})
    lookup = dict(zip(ts.tolist(), series.values))
    base = np.full(ts.size, np.nan)
    for i, t in enumerate(ts):
        day = t.astype("datetime64[D]")
        hour = (t - day.astype("datetime64[h]")).astype("timedelta64[h]")
        src = np.datetime64(align_date(day, years_back), "h") + hour
        base[i] = lookup.get(src.tolist(), np.nan)
    return BaselineSeries("index", ts, base, series.values,
                          {"years_back": years_back, "level": level.value})


# --------------------------------------------------------------------------
# probabilistic baselines


def rearrange(tracks: np.ndarray) -> np.ndarray:
    """Sort each column so the quantile tracks never cross."""
    return np.sort(np.asarray(tracks, dtype=float), axis=0)


def probabilistic_baseline(features: FeatureMatrix | None, target: SeriesView,
                           spec: LearnerSpec = LearnerSpec("ridge"), horizon_start=None,
                           horizon_end=None, family: str = "backcast",
                           levels=QUANTILE_LEVELS) -> ProbabilisticBaseline:
    """One pinball-loss model per quantile level, trained before the horizon.

    ``family="backcast"`` uses ``features``; ``family="trend"`` regresses on
    :func:`trend_features` of the target's own timestamps.
    """
    if family not in ("trend", "backcast"):
        raise GridtraceError("bad-family", f"unknown family {family!r}")
    if spec.kind == "arma":
        raise GridtraceError("bad-spec", "quantile baselines need a ridge or mlp learner")
    if family == "trend":
        features = trend_features(target.timestamps)
    if features is None:
        raise GridtraceError("misaligned", "backcast family needs features")
    if horizon_start is None:
        horizon_start = target.timestamps[0]
        train = ~np.isnan(target.values)
        horizon = np.ones(len(target), dtype=bool)
        if features.shape[0] != len(target):
            raise GridtraceError("misaligned", "features and target rows differ")
    else:
        train, horizon = _split_event(features, target, horizon_start, horizon_end)
    Xtr, ytr = features.values[train], target.values[train]
    tracks = []
    for q in levels:
        model = learners.fit(spec.with_loss(LossKind.pinball(q)), Xtr, ytr)
        tracks.append(model.predict(features.values[horizon]))
    raw = np.asarray(tracks)
    fixed = rearrange(raw)
    ts = target.timestamps[horizon]
    meta = {"family": family, "learner": spec.kind, "levels": list(levels),
            "rearranged": int(np.sum(np.any(raw != fixed, axis=0)))}
    return ProbabilisticBaseline(ts, fixed, tuple(levels), target.values[horizon], meta)


def confidence_interval(pb: ProbabilisticBaseline, level: int = 80):
    """(lower, upper) tracks: 50 -> (q25, q75), 80 -> (q10, q90)."""
    if level == 50:
        return pb.track(0.25), pb.track(0.75)
    if level == 80:
        return pb.track(0.10), pb.track(0.90)
    raise GridtraceError("unsupported-level", f"interval {level}% not available (50 or 80)")


# --------------------------------------------------------------------------
# output


def baseline_csv(baseline: BaselineSeries | ProbabilisticBaseline) -> str:
    """``timestamp,observed,baseline[,q10,q25,q50,q75,q90]`` text."""
    prob = isinstance(baseline, ProbabilisticBaseline)
    header = ["timestamp", "observed", "baseline"]
    if prob:
        header += [f"q{int(round(q * 100)):02d}" for q in baseline.levels]
        point = baseline.track(0.5)
    else:
        point = baseline.values
    observed = baseline.observed if baseline.observed is not None else np.full(point.size, np.nan)
    lines = [",".join(header)]
    for i, t in enumerate(baseline.timestamps):
        row = [format_hour(t), format_value(observed[i]), format_value(point[i])]
        if prob:
            row += [format_value(v) for v in baseline.tracks[:, i]]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def write_baseline_csv(baseline, path) -> Path:
    path = Path(path)
    try:
        path.write_text(baseline_csv(baseline), encoding="utf-8", newline="\n")
    except OSError as exc:
        raise FileIOError("io-error", str(exc)) from None
    return path
