"""Counterfactual baselines, regression diagnostics and study recipes for
hourly power-system time series.

Modules
-------
frame      wide date x hour frames, aggregation, calendar alignment
ingest     CSV loading and quality control
baseline   date/week, trend, backcast, fluctuation-index and quantile baselines
learners   ridge/quantile regression, MLP and ARMA learners
regress    OLS and VAR with their statistical tests
studies    peak demand, extreme prices, duck curve, shares, price factors, forecasts
viz        plot data and deterministic SVG
cli        ``gridtrace`` command
"""

from .errors import FileIOError, GridtraceError, NumericalError
from .frame import (AggregationLevel, SeriesView, Timestamp, WideFrame,
                    aggregate, align_date, align_week, flatten)

__version__ = "0.1.0"

__all__ = [
    "FileIOError", "GridtraceError", "NumericalError",
    "AggregationLevel", "SeriesView", "Timestamp", "WideFrame",
    "aggregate", "align_date", "align_week", "flatten",
]
