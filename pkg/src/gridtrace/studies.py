"""Study recipes: peak-demand reduction, extreme-price counts, duck curves,
renewable shares, price-factor regressions and mobility-enhanced forecasts."""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import learners
from .baseline import (BaselineSeries, ProbabilisticBaseline, WindowSpec,
                       fluctuation_index)
from .errors import GridtraceError
from .frame import (HOURS, AggregationLevel, SeriesView, WideFrame,
                    aggregate_series, align_week, flatten, format_hour, to_day)
from .learners import FeatureMatrix, LearnerSpec
from .regress.ols import OLSReport, ols_matrix

EXTREME_THRESHOLD = 0.9544
LOI_UNUSUAL = 0.75
LOI_HIGHLY_UNUSUAL = 3.0


def _month_key(month) -> np.datetime64:
    if isinstance(month, tuple):
        return np.datetime64(f"{month[0]:04d}-{month[1]:02d}", "M")
    return np.datetime64(str(month)[:7], "M")


def _daily_peaks(frame: WideFrame):
    with np.errstate(all="ignore"):
        peaks = np.where(np.isnan(frame.values).all(axis=1), np.nan,
                         np.nanmax(np.where(np.isnan(frame.values), -np.inf, frame.values), axis=1))
    return frame.dates, peaks


def _daily_baseline(ts: np.ndarray, values: np.ndarray):
    """Daily baseline: the single value of a daily series or the max of hourly values."""
    days = ts.astype("datetime64[D]")
    uniq, inv = np.unique(days, return_inverse=True)
    out = np.full(uniq.size, -np.inf)
    np.maximum.at(out, inv, np.where(np.isnan(values), -np.inf, values))
    out[np.isinf(out)] = np.nan
    return uniq, out


def _reduction(days_d, peaks, days_b, base, month) -> float:
    key = _month_key(month)
    common, i_d, i_b = np.intersect1d(days_d, days_b, return_indices=True)
    in_month = common.astype("datetime64[M]") == key
    d, b = peaks[i_d][in_month], base[i_b][in_month]
    ok = ~np.isnan(d) & ~np.isnan(b)
    if not ok.any():
        raise GridtraceError("no-data", f"no day of {key} has both baseline and observation")
    d, b = d[ok], b[ok]
    if np.any(b == 0):
        raise GridtraceError("zero-baseline", f"zero baseline in {key}")
    return float(np.mean((b - d) / b) * 100.0)


def peak_demand_reduction(demand: WideFrame, baseline: BaselineSeries, month) -> float:
    """Mean over the month's days of ``(B - D_peak) / B``, in percent.

    ``D_peak`` is the daily maximum of hourly demand. A daily baseline is used
    as is; an hourly one is reduced to its daily maximum.
    """
    days_d, peaks = _daily_peaks(demand)
    days_b, base = _daily_baseline(baseline.timestamps, baseline.values)
    return _reduction(days_d, peaks, days_b, base, month)


@dataclass
class PeakDemandReport:
    region: str
    reduction: dict
    quantiles: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"region": self.region, "reduction": self.reduction, "quantiles": self.quantiles}


def peak_demand_report(demand: WideFrame, baseline: BaselineSeries, months,
                       pb: ProbabilisticBaseline | None = None) -> PeakDemandReport:
    reduction = {}
    quantiles = {}
    for m in months:
        label = str(_month_key(m))
        try:
            reduction[label] = peak_demand_reduction(demand, baseline, m)
        except GridtraceError as exc:
            if exc.code != "no-data":
                raise
            continue
        if pb is not None:
            quantiles[label] = probabilistic_peak_reduction(demand, pb, m)
    return PeakDemandReport(demand.region, reduction, quantiles)


def probabilistic_peak_reduction(demand: WideFrame, pb: ProbabilisticBaseline, month) -> dict:
    """Peak reduction against every quantile track, with interval widths.

    ``widths["50"]`` is alpha(q75) - alpha(q25) and ``widths["80"]`` is
    alpha(q90) - alpha(q10). ``crosses_zero`` tells whether each interval
    contains zero.
    """
    days_d, peaks = _daily_peaks(demand)
    alphas = {}
    for q, track in zip(pb.levels, pb.tracks):
        days_b, base = _daily_baseline(pb.timestamps, track)
        alphas[q] = _reduction(days_d, peaks, days_b, base, month)
    out = {"alpha": {f"q{int(round(q * 100)):02d}": a for q, a in alphas.items()}}
    if {0.10, 0.25, 0.75, 0.90} <= set(alphas):
        lo50, hi50 = alphas[0.25], alphas[0.75]
        lo80, hi80 = alphas[0.10], alphas[0.90]
        out["widths"] = {"50": hi50 - lo50, "80": hi80 - lo80}
        out["crosses_zero"] = {"50": bool(min(lo50, hi50) <= 0 <= max(lo50, hi50)),
                               "80": bool(min(lo80, hi80) <= 0 <= max(lo80, hi80))}
    return out


# --------------------------------------------------------------------------
# extreme prices


def week_of_month(day) -> int:
    return (to_day(day).astype(dt.date).day - 1) // 7 + 1


def _bucket_key(ts: np.datetime64, bucket: str):
    d = ts.astype("datetime64[D]").astype(dt.date)
    if bucket == "monthly":
        return (d.year, d.month)
    return (d.year, d.month, (d.day - 1) // 7 + 1)


def extreme_price_count(price: WideFrame | SeriesView, window: WindowSpec = WindowSpec(),
                        threshold: float = EXTREME_THRESHOLD, bucket: str = "weekly") -> dict:
    """Hours with fluctuation index at or above ``threshold``, per bucket.

    Weekly buckets are ``(year, month, week_of_month)`` with weeks starting on
    days 1, 8, 15, 22 and 29; monthly buckets are ``(year, month)``. Every
    bucket that holds an indexed hour appears, with a zero when nothing
    crosses the threshold.
    """
    if bucket not in ("weekly", "monthly"):
        raise GridtraceError("bad-bucket", f"unknown bucket {bucket!r}")
    series = flatten(price) if isinstance(price, WideFrame) else price
    idx = fluctuation_index(series, window)
    counts: dict = {}
    for t, v in zip(idx.timestamps, idx.values):
        key = _bucket_key(t, bucket)
        counts[key] = counts.get(key, 0) + int(v >= threshold)
    return counts


def extreme_price_comparison(price: WideFrame | SeriesView, year: int, months=(3, 4, 5, 6),
                             years_back: int = 1, window: WindowSpec = WindowSpec(),
                             threshold: float = EXTREME_THRESHOLD) -> list:
    """Weekly extreme-price counts of ``year`` next to their week-aligned history.

    The reference count of a week sums the hours of the dates 364 days per
    year earlier, so weekdays line up.
    """
    series = flatten(price) if isinstance(price, WideFrame) else price
    idx = fluctuation_index(series, window)
    day_flags: dict = {}
    for t, v in zip(idx.timestamps, idx.values):
        d = t.astype("datetime64[D]").astype(dt.date)
        day_flags[d] = day_flags.get(d, 0) + int(v >= threshold)
    rows = []
    for m in months:
        first = dt.date(year, m, 1)
        n_days = (dt.date(year + (m == 12), m % 12 + 1, 1) - first).days
        weeks: dict = {}
        for k in range(n_days):
            d = first + dt.timedelta(days=k)
            weeks.setdefault((k // 7) + 1, []).append(d)
        for w, days in weeks.items():
            now = sum(day_flags.get(d, 0) for d in days)
            then = sum(day_flags.get(align_week(d, years_back), 0) for d in days)
            rows.append({"month": m, "week": w, "reference": then, "current": now,
                         "increment": now - then})
    return rows


# --------------------------------------------------------------------------
# duck curve and renewable share


@dataclass
class DuckCurveReport:
    profile: np.ndarray
    ramp: float
    range: float
    days: int

    def to_dict(self) -> dict:
        return {"profile": self.profile.tolist(), "ramp": self.ramp, "range": self.range,
                "days": self.days}


def duck_curve(demand: WideFrame, solar: WideFrame, start=None, end=None) -> DuckCurveReport:
    """Average 24-hour residual demand (demand minus solar) over a period.

    ``ramp`` is the largest increase between consecutive hours of the profile
    and ``range`` its peak-to-valley spread.
    """
    if demand.unit != solar.unit:
        raise GridtraceError("unit-mismatch", f"{demand.unit!r} vs {solar.unit!r}")
    common, i_d, i_s = np.intersect1d(demand.dates, solar.dates, return_indices=True)
    keep = np.ones(common.size, dtype=bool)
    if start is not None:
        keep &= common >= to_day(start)
    if end is not None:
        keep &= common <= to_day(end)
    if not keep.any():
        raise GridtraceError("no-data", "no common dates in the period")
    resid = demand.values[i_d[keep]] - solar.values[i_s[keep]]
    present = ~np.isnan(resid)
    counts = present.sum(axis=0)
    if np.any(counts == 0):
        raise GridtraceError("no-data", "an hour of the day has no data in the period")
    profile = np.where(present, resid, 0.0).sum(axis=0) / counts
    return DuckCurveReport(profile, float(np.max(np.diff(profile))),
                           float(profile.max() - profile.min()), int(keep.sum()))


@dataclass
class RenewableShareReport:
    share: SeriesView
    baseline: SeriesView | None = None
    order: tuple = (2, 0, 1)
    observed_mean: float | None = None
    baseline_mean: float | None = None

    def to_dict(self) -> dict:
        d = {"months": [str(t.astype("datetime64[M]")) for t in self.share.timestamps],
             "share": self.share.values.tolist(), "order": list(self.order)}
        if self.baseline is not None:
            d.update(baseline_months=[str(t.astype("datetime64[M]")) for t in self.baseline.timestamps],
                     baseline=self.baseline.values.tolist(), observed_mean=self.observed_mean,
                     baseline_mean=self.baseline_mean)
        return d


ARMA_GRID = tuple((p, 0, q) for p in range(3) for q in range(3))


def renewable_share(hydro: SeriesView, solar: SeriesView, wind: SeriesView,
                    study_start=None, study_end=None, order=(2, 0, 1),
                    folds: int = 3) -> RenewableShareReport:
    """Monthly renewable share (hydro + solar + wind, percent) and an ARMA
    baseline forecast over the study months.

    ``order="auto"`` picks the order from a small (p, 0, q) grid by
    forward-chaining validation on the pre-study months.
    """
    if not (np.array_equal(hydro.timestamps, solar.timestamps)
            and np.array_equal(hydro.timestamps, wind.timestamps)):
        raise GridtraceError("misaligned", "share series cover different months")
    parts = np.vstack([hydro.values, solar.values, wind.values])
    if np.any((parts < 0) | (parts > 100)):
        raise GridtraceError("bad-share", "shares must lie in [0, 100]")
    beta = parts.sum(axis=0)
    if np.any(beta > 100 + 1e-9):
        raise GridtraceError("share-overflow", "renewable share exceeds 100%")
    share = hydro.with_values(beta)
    if study_start is None:
        return RenewableShareReport(share, order=tuple(order) if order != "auto" else ARMA_GRID[0])
    start = np.datetime64(to_day(study_start), "h")
    end = np.datetime64(to_day(study_end), "h") if study_end is not None else share.timestamps[-1]
    history = beta[share.timestamps < start]
    study = (share.timestamps >= start) & (share.timestamps <= end)
    if order == "auto":
        grid = [LearnerSpec("arma", order=o) for o in ARMA_GRID]
        order = learners.grid_search(grid, None, history, folds).order
    model = learners.fit_arma_css(history, order)
    forecast = model.forecast(int(study.sum()))
    baseline = SeriesView(share.timestamps[study], forecast)
    return RenewableShareReport(share, baseline, tuple(order), float(beta[study].mean()),
                                float(forecast.mean()))


# --------------------------------------------------------------------------
# price factor regressions


@dataclass
class LoIResult:
    values: np.ndarray
    bands: list
    clamped: np.ndarray


def loi_band(v: float) -> str:
    if v > LOI_HIGHLY_UNUSUAL:
        return "highly-unusual"
    if v >= LOI_UNUSUAL:
        return "unusual"
    return "normal"


def loi(index, n=720) -> LoIResult:
    """Logit of the fluctuation index, ``ln(I / (1 - I))``.

    Values outside ``[1/(n+1), n/(n+1)]`` are clamped to that range (``n`` is
    the reference sample size) and flagged.
    """
    values = np.asarray(index, dtype=float)
    n = np.broadcast_to(np.asarray(n, dtype=float), values.shape)
    lo, hi = 1.0 / (n + 1.0), n / (n + 1.0)
    clamped = (values < lo) | (values > hi)
    v = np.clip(values, lo, hi)
    out = np.log(v / (1.0 - v))
    return LoIResult(out, [loi_band(x) for x in np.atleast_1d(out)], clamped)


@dataclass
class PriceStudyInputs:
    dates: np.ndarray
    loi: np.ndarray
    gas: np.ndarray
    cases: np.ndarray
    delta: np.ndarray

    def __post_init__(self):
        arrays = [np.asarray(a, dtype=float) for a in (self.loi, self.gas, self.cases, self.delta)]
        if len({a.size for a in arrays} | {np.asarray(self.dates).size}) != 1:
            raise GridtraceError("misaligned", "price study inputs differ in length")
        self.loi, self.gas, self.cases, self.delta = arrays
        if not np.all(np.isin(self.delta, (0.0, 1.0))):
            raise GridtraceError("bad-dummy", "pandemic dummy must be 0 or 1")
        if np.any(self.cases < 0):
            raise GridtraceError("bad-cases", "case counts must be non-negative")
        if not np.all(np.isfinite(self.loi)):
            raise GridtraceError("non-finite", "LoI must be finite")


def pandemic_dummy(dates, event_date) -> np.ndarray:
    """0 before ``event_date``, 1 on and after it."""
    return (np.asarray(dates).astype("datetime64[D]") >= to_day(event_date)).astype(float)


def price_study_inputs(price: WideFrame, gas: SeriesView, cases: SeriesView, event_date,
                       window: WindowSpec = WindowSpec(), log_cases: bool = True) -> PriceStudyInputs:
    """Daily LoI of price fluctuation, gas price, cases and the pandemic dummy
    on the dates present in every input. ``log_cases`` applies ``log(1 + C)``."""
    idx = fluctuation_index(flatten(price), window)
    daily = aggregate_series(idx.as_series(), AggregationLevel.DAILY)
    n_daily = aggregate_series(SeriesView(idx.timestamps, idx.sample_sizes.astype(float)),
                               AggregationLevel.DAILY)
    days = [s.timestamps.astype("datetime64[D]") for s in (daily, gas, cases)]
    common = np.intersect1d(np.intersect1d(days[0], days[1]), days[2])
    pick = lambda s, d: s.values[np.searchsorted(d, common)]
    i_val = pick(daily, days[0])
    keep = ~np.isnan(i_val)
    g, c = pick(gas, days[1]), pick(cases, days[2])
    keep &= ~np.isnan(g) & ~np.isnan(c)
    common, i_val, g, c = common[keep], i_val[keep], g[keep], c[keep]
    n_ref = pick(n_daily, days[0])[keep]
    c = np.log1p(c) if log_cases else c
    return PriceStudyInputs(common, loi(i_val, n_ref).values, g, c,
                            pandemic_dummy(common, event_date))


def price_regression_dummy(inputs: PriceStudyInputs) -> OLSReport:
    """``LoI = (t1 * delta + t2) * gas + (t3 * delta + t4)``."""
    X = np.column_stack([inputs.delta * inputs.gas, inputs.gas, inputs.delta,
                         np.ones(inputs.gas.size)])
    return ols_matrix(X, inputs.loi, ["theta1", "theta2", "theta3", "theta4"], True, "LoI")


def price_regression_cases(inputs: PriceStudyInputs) -> OLSReport:
    """``LoI = t5 * gas + t6 * C + t7 * gas * C + t8``."""
    X = np.column_stack([inputs.gas, inputs.cases, inputs.gas * inputs.cases,
                         np.ones(inputs.gas.size)])
    return ols_matrix(X, inputs.loi, ["theta5", "theta6", "theta7", "theta8"], True, "LoI")


# --------------------------------------------------------------------------
# forecast enhancement


def mape(actual, predicted, timestamps=None) -> float:
    """Mean absolute percentage error, in percent."""
    a = np.asarray(actual, dtype=float)
    p = np.asarray(predicted, dtype=float)
    zero = np.flatnonzero(a == 0)
    if zero.size:
        where = format_hour(timestamps[zero[0]]) if timestamps is not None else f"index {zero[0]}"
        raise GridtraceError("zero-actual", f"actual value is zero at {where}")
    return float(np.mean(np.abs(a - p) / np.abs(a)) * 100.0)


@dataclass
class ForecastEnhancementReport:
    """Rows ``name -> {"normal", "lockdown", "improvement"}`` (MAPE in percent,
    improvement in percentage points relative to the base model)."""

    rows: dict
    calibration_days: int
    coefficients: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"rows": self.rows, "calibration_days": self.calibration_days,
                "coefficients": self.coefficients}

    def relative_improvement(self, name: str) -> float:
        base = self.rows["base"]["lockdown"]
        return (base - self.rows[name]["lockdown"]) / base


def _window(ts: np.ndarray, window) -> np.ndarray:
    start = np.datetime64(to_day(window[0]), "h")
    end = np.datetime64(to_day(window[1]), "h") + np.timedelta64(HOURS - 1, "h")
    return (ts >= start) & (ts <= end)


def lag_one_day(covariate: SeriesView, timestamps: np.ndarray) -> np.ndarray:
    """Covariate value on the previous day: same hour for hourly input, the
    day's value for daily input."""
    ts = covariate.timestamps
    days = ts.astype("datetime64[D]")
    daily = np.unique(days).size == ts.size and np.all(ts == days.astype("datetime64[h]"))
    target = np.asarray(timestamps).astype("datetime64[h]") - np.timedelta64(HOURS, "h")
    if daily:
        target = target.astype("datetime64[D]").astype("datetime64[h]")
    pos = np.searchsorted(ts, target)
    pos = np.clip(pos, 0, ts.size - 1)
    out = np.where(ts[pos] == target, covariate.values[pos], np.nan)
    return out


def mobility_enhanced_forecast(features: FeatureMatrix, actual: SeriesView,
                               covariates: Mapping[str, SeriesView], train, calibration,
                               normal, lockdown, spec: LearnerSpec = LearnerSpec("ridge", lam=1e-6),
                               base_model=None, update: bool = True) -> ForecastEnhancementReport:
    """Compare a base load forecaster with residual-corrected variants.

    The base model is fitted on ``train`` (unless given). For every covariate
    a linear correction ``a + b * M[d-1]`` is fitted by OLS to the base
    residuals in ``calibration`` and added to the base forecast. With
    ``update`` the base learner is also refitted on train + calibration data
    without any covariate ("updated"). MAPE is reported on the ``normal`` and
    ``lockdown`` windows.
    """
    if features.timestamps is None or not np.array_equal(features.timestamps, actual.timestamps):
        raise GridtraceError("misaligned", "features and actual values must share timestamps")
    ts = actual.timestamps
    y = actual.values
    present = ~np.isnan(y)
    tr = _window(ts, train) & present
    cal = _window(ts, calibration) & present
    nor = _window(ts, normal) & present
    lock = _window(ts, lockdown) & present
    if not cal.any():
        raise GridtraceError("no-calibration-data", "calibration window holds no observations")
    if base_model is None:
        if not tr.any():
            raise GridtraceError("no-training-data", "training window holds no observations")
        base_model = learners.fit(spec, features.values[tr], y[tr])
    base = base_model.predict(features.values)
    resid = y - base

    def row(pred, with_normal=False):
        return {"normal": mape(y[nor], pred[nor], ts[nor]) if with_normal and nor.any() else None,
                "lockdown": mape(y[lock], pred[lock], ts[lock])}

    rows = {"base": row(base, True)}
    coefs = {}
    if update:
        both = tr | cal
        updated = learners.fit(spec, features.values[both], y[both]).predict(features.values)
        rows["updated"] = row(updated)
    for name, cov in covariates.items():
        m = lag_one_day(cov, ts)
        use = cal & ~np.isnan(m)
        if use.sum() < 3:
            raise GridtraceError("no-calibration-data", f"covariate {name!r} missing in calibration")
        A = np.column_stack([np.ones(use.sum()), m[use]])
        theta, *_ = np.linalg.lstsq(A, resid[use], rcond=None)
        coefs[name] = {"intercept": float(theta[0]), "slope": float(theta[1])}
        enhanced = base + theta[0] + theta[1] * np.nan_to_num(m, nan=0.0)
        rows[name] = row(enhanced)
    base_lock = rows["base"]["lockdown"]
    for r in rows.values():
        r["improvement"] = base_lock - r["lockdown"]
    days = int(np.unique(ts[cal].astype("datetime64[D]")).size)
    return ForecastEnhancementReport(rows, days, coefs)
