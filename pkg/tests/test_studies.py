import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridtrace import studies
from gridtrace.baseline import BaselineSeries, ProbabilisticBaseline, WindowSpec
from gridtrace.errors import GridtraceError, NumericalError
from gridtrace.frame import HOURS, SeriesView, WideFrame, align_week
from gridtrace.learners import FeatureMatrix, fit_arma_css

from conftest import make_frame
from synthetic import (CALIBRATION, LOCKDOWN, NORMAL, PRICE_THETA, TRAIN,
                       mobility_scenario, price_dummy_sample, simulate_arma)


def daily(start, values):
    ts = (np.datetime64(start, "D") + np.arange(len(values))).astype("datetime64[h]")
    return ts, np.asarray(values, float)


def peak_frame(peaks, start="2020-04-01", seed=0):
    """Hourly frame whose daily maximum is ``peaks``."""
    rng = np.random.default_rng(seed)
    peaks = np.asarray(peaks, float)
    vals = peaks[:, None] * rng.uniform(0.5, 0.99, (peaks.size, HOURS))
    vals[np.arange(peaks.size), rng.integers(0, HOURS, peaks.size)] = peaks
    return WideFrame("r", "demand", "MW", np.datetime64(start, "D") + np.arange(peaks.size), vals)


class TestPeakDemand:
    def test_constant_ten_percent(self):
        ts, b = daily("2020-04-01", np.full(30, 100.0))
        alpha = studies.peak_demand_reduction(peak_frame(np.full(30, 90.0)),
                                              BaselineSeries("week", ts, b), "2020-04")
        assert alpha == pytest.approx(10.0, abs=1e-12)

    def test_equal_peaks(self):
        ts, b = daily("2020-04-01", np.linspace(90, 120, 30))
        frame = peak_frame(b)
        assert studies.peak_demand_reduction(frame, BaselineSeries("week", ts, b), (2020, 4)) == 0.0

    def test_thirty_day_oracle(self, rng):
        base = rng.uniform(80, 120, 30)
        peaks = rng.uniform(70, 130, 30)
        ts, b = daily("2020-04-01", base)
        got = studies.peak_demand_reduction(peak_frame(peaks), BaselineSeries("w", ts, b), "2020-04")
        oracle = sum((base[i] - peaks[i]) / base[i] for i in range(30)) / 30 * 100
        assert got == pytest.approx(oracle, abs=1e-12)

    def test_hourly_baseline_reduced_to_daily_peak(self, rng):
        frame = peak_frame(np.full(30, 90.0))
        hourly = BaselineSeries("w", np.datetime64("2020-04-01T00") + np.arange(30 * 24),
                                np.tile(np.r_[np.full(23, 50.0), 100.0], 30))
        assert studies.peak_demand_reduction(frame, hourly, "2020-04") == pytest.approx(10.0)

    @settings(max_examples=25, deadline=None)
    @given(st.floats(0.01, 1e4), st.integers(0, 1000))
    def test_scale_invariance(self, c, seed):
        rng = np.random.default_rng(seed)
        base = rng.uniform(50, 150, 10)
        frame = peak_frame(rng.uniform(50, 150, 10), seed=seed)
        ts, b = daily("2020-04-01", base)
        a = studies.peak_demand_reduction(frame, BaselineSeries("w", ts, b), "2020-04")
        scaled = WideFrame("r", "demand", "MW", frame.dates, frame.values * c)
        a2 = studies.peak_demand_reduction(scaled, BaselineSeries("w", ts, b * c), "2020-04")
        assert a2 == pytest.approx(a, abs=1e-12 * max(1.0, abs(a)) + 1e-10)

    def test_errors(self):
        ts, b = daily("2020-04-01", np.r_[0.0, np.full(29, 100.0)])
        with pytest.raises(GridtraceError, match="zero-baseline"):
            studies.peak_demand_reduction(peak_frame(np.full(30, 90.0)), BaselineSeries("w", ts, b),
                                          "2020-04")
        with pytest.raises(GridtraceError, match="no-data"):
            studies.peak_demand_reduction(peak_frame(np.full(30, 90.0)), BaselineSeries("w", ts, b),
                                          "2020-05")

    def test_report_skips_empty_months(self):
        ts, b = daily("2020-04-01", np.full(30, 100.0))
        rep = studies.peak_demand_report(peak_frame(np.full(30, 95.0)), BaselineSeries("w", ts, b),
                                         ["2020-04", "2020-05"])
        assert rep.reduction == {"2020-04": pytest.approx(5.0)}


class TestProbabilisticPeak:
    def pb(self, offsets, n=30):
        ts, _ = daily("2020-04-01", np.zeros(n))
        return ProbabilisticBaseline(ts, 100.0 + np.asarray(offsets, float)[:, None] * np.ones(n))

    def test_degenerate(self):
        out = studies.probabilistic_peak_reduction(peak_frame(np.full(30, 90.0)),
                                                   self.pb([0, 0, 0, 0, 0]), "2020-04")
        assert len(set(out["alpha"].values())) == 1
        assert out["widths"] == {"50": 0.0, "80": 0.0}

    def test_sign_flip(self):
        out = studies.probabilistic_peak_reduction(peak_frame(np.full(30, 100.0)),
                                                   self.pb([-20, -10, 0, 10, 20]), "2020-04")
        a = out["alpha"]
        assert a["q10"] < 0 < a["q90"] and a["q50"] == 0
        assert out["crosses_zero"] == {"50": True, "80": True}
        # larger baseline quantiles mean larger reductions when the observation is fixed
        assert list(a.values()) == sorted(a.values())

    def test_widths_match_subtraction(self, rng):
        offsets = np.sort(rng.uniform(-30, 30, 5))
        out = studies.probabilistic_peak_reduction(peak_frame(rng.uniform(80, 120, 30)),
                                                   self.pb(offsets), "2020-04")
        a = out["alpha"]
        assert out["widths"]["50"] == pytest.approx(a["q75"] - a["q25"], abs=1e-12)
        assert out["widths"]["80"] == pytest.approx(a["q90"] - a["q10"], abs=1e-12)


def hourly_series(values, start="2019-01-01T00"):
    return SeriesView(np.datetime64(start, "h") + np.arange(len(values)), values)


class TestExtremePrice:
    def test_gaussian_fraction(self, rng):
        x = rng.normal(size=100_000)
        counts = studies.extreme_price_count(hourly_series(x), bucket="monthly")
        frac = sum(counts.values()) / (x.size - 720)
        assert abs(frac - 0.0456) <= 0.005

    def test_threshold_one(self, rng):
        counts = studies.extreme_price_count(hourly_series(rng.normal(size=3000)), threshold=1.0)
        assert sum(counts.values()) == 0

    def test_injected_spikes(self, rng):
        x = np.full(3000, 30.0)
        spikes = 800 + 100 * np.arange(20)
        x[spikes] = 200 + rng.uniform(0, 50, 20)
        counts = studies.extreme_price_count(hourly_series(x))
        assert sum(counts.values()) == 20
        assert all(len(k) == 3 for k in counts)

    def test_week_of_month(self):
        assert [studies.week_of_month(f"2020-03-{d:02d}") for d in (1, 7, 8, 28, 29, 31)] == \
            [1, 1, 2, 4, 5, 5]

    def test_comparison_uses_week_alignment(self):
        ts = np.arange(np.datetime64("2019-01-01T00"), np.datetime64("2020-04-01T00"))
        x = np.full(ts.size, 30.0)
        now = np.datetime64("2020-03-10T12")
        then = np.datetime64(align_week(np.datetime64("2020-03-10"), 1), "h") + 12
        x[ts == now] = 300
        x[ts == then] = 300
        x[ts == then + 1] = 310
        rows = studies.extreme_price_comparison(SeriesView(ts, x), 2020, months=(3,))
        week2 = next(r for r in rows if r["week"] == 2)
        assert (week2["reference"], week2["current"], week2["increment"]) == (2, 1, -1)
        assert len(rows) == 5 and sum(r["current"] for r in rows) == 1

    def test_bad_bucket(self, rng):
        with pytest.raises(GridtraceError, match="bad-bucket"):
            studies.extreme_price_count(hourly_series(rng.normal(size=100)), bucket="daily")


class TestDuckCurve:
    def test_zero_solar(self):
        d = make_frame("2020-04-01", 10)
        s = WideFrame("test", "solar", "MW", d.dates, np.zeros_like(d.values))
        rep = studies.duck_curve(d, s)
        assert np.allclose(rep.profile, d.values.mean(axis=0))

    def test_noon_dip(self):
        d = make_frame("2020-04-01", 7, fn=lambda day, h: 100.0)
        s = make_frame("2020-04-01", 7, fn=lambda day, h: 30.0 * (h == 12), variable="solar")
        rep = studies.duck_curve(d, s)
        assert rep.profile[12] == 70 and rep.range == 30 and rep.ramp == 30

    def test_oracle_with_period(self, rng):
        d = make_frame("2020-04-01", 30, seed=1)
        s = make_frame("2020-03-25", 40, fn=lambda day, h: max(0.0, 300 * np.sin(np.pi * (h - 6) / 12)),
                       variable="solar")
        rep = studies.duck_curve(d, s, "2020-04-05", "2020-04-20")
        resid = d.values[4:20] - s.values[11:27]
        assert rep.days == 16
        assert np.allclose(rep.profile, resid.mean(axis=0), atol=1e-9)
        assert rep.ramp == pytest.approx(np.max(np.diff(rep.profile)))

    def test_translation_invariance(self, rng):
        d = make_frame("2020-04-01", 10, seed=2)
        s = make_frame("2020-04-01", 10, seed=3, variable="solar")
        a = studies.duck_curve(d, s)
        shifted = WideFrame("test", "demand", "MW", d.dates, d.values + 500)
        b = studies.duck_curve(shifted, s)
        assert b.ramp == pytest.approx(a.ramp) and b.range == pytest.approx(a.range)
        assert np.allclose(b.profile - a.profile, 500)

    def test_unit_mismatch(self):
        d = make_frame("2020-04-01", 3)
        with pytest.raises(GridtraceError, match="unit-mismatch"):
            studies.duck_curve(d, make_frame("2020-04-01", 3, unit="GW"))


def monthly(values, start="2017-01"):
    months = np.datetime64(start, "M") + np.arange(len(values))
    return SeriesView(months.astype("datetime64[D]").astype("datetime64[h]"), values)


class TestRenewableShare:
    def test_sum(self):
        rep = studies.renewable_share(monthly([10.0]), monthly([15.0]), monthly([5.0]))
        assert rep.share.values[0] == 30.0

    def test_zeros(self):
        z = monthly(np.zeros(3))
        assert np.all(studies.renewable_share(z, z, z).share.values == 0)

    def test_errors(self):
        with pytest.raises(GridtraceError, match="share-overflow"):
            studies.renewable_share(monthly([60.0]), monthly([30.0]), monthly([20.0]))
        with pytest.raises(GridtraceError, match="bad-share"):
            studies.renewable_share(monthly([-1.0]), monthly([0.0]), monthly([0.0]))
        with pytest.raises(GridtraceError, match="misaligned"):
            studies.renewable_share(monthly([1.0]), monthly([1.0], "2018-01"), monthly([1.0]))

    def test_thirty_six_point_arima_201(self):
        x = 30 + simulate_arma((0.5, 0.2), (0.3,), 36, seed=3)
        third = monthly(x / 3)
        rep = studies.renewable_share(third, third, third, "2019-09-01", order=(2, 0, 1))
        assert rep.order == (2, 0, 1) and rep.baseline.values.size == 4
        assert np.all(np.isfinite(rep.baseline.values))

    def test_ar2_forecast_band(self):
        phi = (0.6, 0.25)
        inside = 0
        for seed in range(20):
            x = 30 + 2 * simulate_arma(phi, (), 120, seed)
            third = monthly(x / 3)
            rep = studies.renewable_share(third, third, third, "2026-01-01", order=(2, 0, 0))
            hist = x[:108]
            # the forecast from the true parameters, and its error sd from the psi weights
            true = list(hist - 30)
            for _ in range(12):
                true.append(phi[0] * true[-1] + phi[1] * true[-2])
            psi = [1.0, phi[0]]
            for _ in range(10):
                psi.append(phi[0] * psi[-1] + phi[1] * psi[-2])
            sd = 2 * np.sqrt(np.cumsum(np.square(psi)))
            inside += np.all(np.abs(rep.baseline.values - 30 - np.array(true[108:])) <= 1.96 * sd)
        assert inside >= 17

    @pytest.mark.filterwarnings("ignore:only .* points:RuntimeWarning")
    def test_auto_order(self):
        x = 30 + simulate_arma((0.7,), (), 60, seed=4)
        third = monthly(x / 3)
        rep = studies.renewable_share(third, third, third, "2021-01-01", order="auto")
        assert rep.order in studies.ARMA_GRID


class TestLoI:
    def test_values_and_bands(self):
        r = studies.loi([0.5, 0.8, 0.99])
        assert r.values[0] == 0 and r.values[1] == pytest.approx(np.log(4))
        assert r.bands == ["normal", "unusual", "highly-unusual"]
        assert not r.clamped.any()

    def test_clamped_bounds(self):
        r = studies.loi([0.0, 1.0], n=720)
        assert np.allclose(r.values, [-np.log(720), np.log(720)]) and r.clamped.all()

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(0.01, 0.99), min_size=2, max_size=30, unique=True))
    def test_strictly_increasing(self, xs):
        xs = np.sort(xs)
        apart = np.diff(xs) > 1e-9
        assert np.all(np.diff(studies.loi(xs).values)[apart] > 0)


class TestPriceRegression:
    def test_recovery(self):
        rep = studies.price_regression_dummy(price_dummy_sample(0))
        assert rep.names == ["theta1", "theta2", "theta3", "theta4"]
        assert np.all(np.abs(rep.coef - PRICE_THETA) <= 0.2)
        assert rep.p_value[0] < 0.01 and rep.p_value[2] < 0.01

    def test_no_event_collinear(self):
        s = price_dummy_sample(1, event=10_000)
        with pytest.raises(NumericalError, match="collinear"):
            studies.price_regression_dummy(s)

    def test_orthogonality(self):
        s = price_dummy_sample(2)
        rep = studies.price_regression_dummy(s)
        X = np.column_stack([s.delta * s.gas, s.gas, s.delta, np.ones(s.gas.size)])
        assert np.all(np.abs(X.T @ rep.residuals) <= 1e-8 * np.linalg.norm(X, axis=0) * np.linalg.norm(s.loi))

    @pytest.mark.slow
    def test_zero_interaction_within_two_se(self):
        hits = 0
        for seed in range(100):
            rng = np.random.default_rng(seed)
            n = 500
            gas = rng.uniform(1.5, 4.0, n)
            cases = np.log1p(rng.integers(0, 5000, n))
            y = 0.4 * gas + 0.3 * cases - 1.0 + rng.normal(0, 0.5, n)
            rep = studies.price_regression_cases(studies.PriceStudyInputs(
                np.arange(n), y, gas, cases, np.zeros(n)))
            hits += abs(rep.coef[2]) <= 2 * rep.std_err[2]
        assert hits >= 90

    def test_inputs_validation(self):
        with pytest.raises(GridtraceError, match="bad-dummy"):
            studies.PriceStudyInputs(np.arange(2), [0, 0], [1, 1], [0, 0], [0, 2])
        with pytest.raises(GridtraceError, match="bad-cases"):
            studies.PriceStudyInputs(np.arange(2), [0, 0], [1, 1], [0, -1], [0, 1])
        with pytest.raises(GridtraceError, match="non-finite"):
            studies.PriceStudyInputs(np.arange(2), [np.inf, 0], [1, 1], [0, 0], [0, 1])

    def test_pandemic_dummy(self):
        dates = np.datetime64("2020-03-13") + np.arange(4)
        assert studies.pandemic_dummy(dates, "2020-03-15").tolist() == [0, 0, 1, 1]

    def test_inputs_from_frames(self, rng):
        price = make_frame("2019-10-01", 120, seed=5, variable="price")
        days = (np.datetime64("2019-10-01") + np.arange(120)).astype("datetime64[h]")
        gas = SeriesView(days, rng.uniform(2, 3, 120))
        cases = SeriesView(days, np.r_[np.zeros(60), np.arange(60.0)])
        s = studies.price_study_inputs(price, gas, cases, "2019-12-15")
        # the first day with at least 30 earlier hours is the second one
        assert s.dates[0] == np.datetime64("2019-10-02") and s.dates[-1] == np.datetime64("2020-01-28")
        assert np.all(np.isfinite(s.loi)) and s.delta.sum() == 45
        assert s.cases[-1] == pytest.approx(np.log1p(59))


class TestMape:
    def test_examples(self, rng):
        a = rng.uniform(1, 100, 50)
        p = rng.uniform(1, 100, 50)
        assert studies.mape(a, a) == 0
        assert studies.mape(np.full(4, 100.0), np.full(4, 90.0)) == pytest.approx(10.0)
        oracle = sum(abs(x - y) / abs(x) for x, y in zip(a, p)) / 50 * 100
        assert studies.mape(a, p) == pytest.approx(oracle, abs=1e-12)

    def test_zero_actual_names_timestamp(self):
        ts = np.datetime64("2020-01-01T00") + np.arange(3)
        with pytest.raises(GridtraceError, match="zero-actual") as exc:
            studies.mape([1.0, 0.0, 2.0], [1.0, 1.0, 1.0], ts)
        assert "2020-01-01T01" in str(exc.value)


class Flat:
    def predict(self, X):
        return np.full(X.shape[0], 1000.0)


def flat_setup(seed, linear):
    rng = np.random.default_rng(seed)
    ts = np.arange(np.datetime64("2020-01-01T00"), np.datetime64("2020-07-01T00"))
    days = ts.astype("datetime64[D]")
    uniq, inv = np.unique(days, return_inverse=True)
    m = rng.uniform(0.6, 1.0, uniq.size)
    lagged = np.r_[np.nan, m[:-1]][inv]
    if linear:
        y = 1000 - 50 + 100 * np.nan_to_num(lagged, nan=1.0)
    else:
        y = 1000 * (1 + rng.normal(0, 0.02, ts.size))
    feats = FeatureMatrix(np.ones((ts.size, 1)), ("c",), ts)
    return feats, SeriesView(ts, y), {"m": SeriesView(uniq.astype("datetime64[h]"), m)}


class TestMobility:
    def test_realizable_residuals(self):
        f, y, c = flat_setup(0, linear=True)
        rep = studies.mobility_enhanced_forecast(f, y, c, TRAIN, CALIBRATION, NORMAL, LOCKDOWN,
                                                 base_model=Flat(), update=False)
        assert rep.rows["m"]["lockdown"] <= 1e-8
        assert rep.coefficients["m"]["slope"] == pytest.approx(100.0)

    def test_uncorrelated_covariate(self):
        f, y, c = flat_setup(1, linear=False)
        rep = studies.mobility_enhanced_forecast(f, y, c, TRAIN, CALIBRATION, NORMAL, LOCKDOWN,
                                                 base_model=Flat(), update=False)
        assert abs(rep.rows["m"]["improvement"]) <= 0.1

    def test_lockdown_scenario(self):
        f, y, c = mobility_scenario(0)
        rep = studies.mobility_enhanced_forecast(f, y, c, TRAIN, CALIBRATION, NORMAL, LOCKDOWN)
        assert set(rep.rows) == {"base", "updated", "mobility"}
        assert rep.rows["mobility"]["lockdown"] <= 0.5 * rep.rows["base"]["lockdown"]
        assert rep.relative_improvement("updated") < 0.1
        assert rep.calibration_days == 14
        assert all(r["lockdown"] >= 0 for r in rep.rows.values())

    def test_no_calibration_data(self):
        f, y, c = flat_setup(2, linear=True)
        with pytest.raises(GridtraceError, match="no-calibration-data"):
            studies.mobility_enhanced_forecast(f, y, c, TRAIN, ("2021-01-01", "2021-01-10"),
                                               NORMAL, LOCKDOWN, base_model=Flat())

    def test_lag_one_day(self):
        ts = np.datetime64("2020-01-02T00") + np.arange(3)
        daily_cov = SeriesView(np.array(["2020-01-01T00", "2020-01-02T00"], "datetime64[h]"), [7.0, 8.0])
        assert studies.lag_one_day(daily_cov, ts).tolist() == [7.0, 7.0, 7.0]
        hourly_cov = SeriesView(np.datetime64("2020-01-01T00") + np.arange(48), np.arange(48.0))
        assert studies.lag_one_day(hourly_cov, ts).tolist() == [0.0, 1.0, 2.0]
