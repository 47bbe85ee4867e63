"""Counterfactual demand baselines and the peak-demand reduction they imply.

A synthetic region consumes a little more every year until 2020-03-21, when a
lockdown cuts demand by about 12%. Four baselines estimate what demand would
have been, and the monthly peak reduction is measured against each.

Run: python3 demos/baselines_and_peak_demand.py
"""

import numpy as np

from gridtrace import baseline as bl
from gridtrace import studies
from gridtrace.frame import HOURS, WideFrame, flatten
from gridtrace.learners import LearnerSpec

rng = np.random.default_rng(1)
dates = np.datetime64("2018-01-01") + np.arange(3 * 365 - 180)
hours = np.arange(HOURS)
doy = (dates - dates.astype("datetime64[Y]")).astype(int)
weekend = ((dates.astype(int) + 3) % 7 >= 5)[:, None]
temp = 15 - 10 * np.cos(2 * np.pi * doy / 365.25) + rng.normal(0, 2, dates.size)
load = (1000 + 150 * np.sin(2 * np.pi * (hours - 6) / 24)[None, :]
        + 0.8 * ((temp - 15) ** 2)[:, None] - 60 * weekend
        + 0.02 * (dates - dates[0]).astype(int)[:, None])
lockdown = dates >= np.datetime64("2020-03-21")
load[lockdown] *= 0.88
load += rng.normal(0, 15, load.shape)
demand = WideFrame("demo", "demand", "MW", dates, load)

start = "2020-03-21"
series = flatten(demand)
feats = bl.calendar_features(series.timestamps, {"temp": np.repeat(temp, HOURS),
                                                 "temp2": np.repeat((temp - 15) ** 2, HOURS)})
candidates = {
    "date-aligned": bl.date_aligned(demand, 1, start),
    "week-aligned": bl.week_aligned(demand, 1, start),
    "backcast (ridge)": bl.backcast(feats, series, LearnerSpec("ridge", lam=1e-3),
                                    np.datetime64(start, "h")),
}
pb = bl.probabilistic_baseline(feats, series, LearnerSpec(lam=1e-3), np.datetime64(start, "h"))

print("peak-demand reduction, percent (true effect is about 12%)")
print(f"{'baseline':<20}" + "".join(f"{m:>10}" for m in ("2020-04", "2020-05", "2020-06")))
for name, base in candidates.items():
    row = [studies.peak_demand_reduction(demand, base, m) for m in ("2020-04", "2020-05", "2020-06")]
    print(f"{name:<20}" + "".join(f"{a:10.2f}" for a in row))

# the quantile tracks turn the point estimate into a band
april = studies.probabilistic_peak_reduction(demand, pb, "2020-04")
print("\nApril reduction per baseline quantile:",
      ", ".join(f"{k}={v:.2f}" for k, v in april["alpha"].items()))
print("80% band width:", round(april["widths"]["80"], 2),
      "| band contains zero:", april["crosses_zero"]["80"])
