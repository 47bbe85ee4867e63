"""Correcting a load forecaster with lagged mobility data.

A ridge forecaster learns 2019 load from calendar and temperature features.
From 2020-03-21 a lockdown scales load by a daily mobility factor the
forecaster never saw. Two weeks of residuals calibrate a linear correction on
yesterday's mobility; refitting the forecaster on the same two weeks without
mobility is the comparison.

Run: python3 demos/mobility_enhanced_forecast.py
"""

import numpy as np

from gridtrace import studies
from gridtrace.baseline import calendar_features
from gridtrace.frame import SeriesView

rng = np.random.default_rng(0)
ts = np.arange(np.datetime64("2019-01-01T00"), np.datetime64("2020-07-01T00"))
days = ts.astype("datetime64[D]")
uniq, inv = np.unique(days, return_inverse=True)
hour = (ts - days.astype("datetime64[h]")).astype(int)
doy = (days - days.astype("datetime64[Y]")).astype(int)
temp = (15 - 10 * np.cos(2 * np.pi * doy / 365.25) + 5 * np.sin(2 * np.pi * (hour - 9) / 24)
        + rng.normal(0, 2, uniq.size)[inv])
weekend = (days.astype(int) + 3) % 7 >= 5
load = 1000 + 150 * np.sin(2 * np.pi * (hour - 6) / 24) + 0.8 * (temp - 15) ** 2 - 80 * weekend

mobility = np.ones(uniq.size)
lock = uniq >= np.datetime64("2020-03-21")
k = int(lock.sum())
mobility[lock] = np.clip(0.8 + 0.06 * np.sin(np.arange(k) / 5) + rng.normal(0, 0.02, k), 0.5, 0.99)
actual = SeriesView(ts, load * mobility[inv] * (1 + rng.normal(0, 0.02, ts.size)))

features = calendar_features(ts, {"temperature": temp, "temperature2": (temp - 15) ** 2})
report = studies.mobility_enhanced_forecast(
    features, actual, {"mobility": SeriesView(uniq.astype("datetime64[h]"), mobility)},
    train=("2019-01-01", "2019-12-31"), calibration=("2020-03-21", "2020-04-03"),
    normal=("2020-01-01", "2020-03-20"), lockdown=("2020-04-04", "2020-06-30"))

print(f"calibrated on {report.calibration_days} days")
print(f"{'model':<10}{'normal MAPE':>13}{'lockdown MAPE':>15}{'gain (pp)':>11}")
for name, row in report.rows.items():
    normal = f"{row['normal']:.2f}" if row["normal"] is not None else "-"
    print(f"{name:<10}{normal:>13}{row['lockdown']:>15.2f}{row['improvement']:>11.2f}")
c = report.coefficients["mobility"]
print(f"\ncorrection: {c['intercept']:.1f} + {c['slope']:.1f} * mobility[d-1] MW")
