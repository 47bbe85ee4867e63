"""``gridtrace`` command-line front end.

Grammar: ``gridtrace <ingest|baseline|regress|study|viz> [--config FILE] [flags]``.
A JSON config supplies defaults for any flag (keys use underscores); explicit
flags win. ``GRIDTRACE_SEED`` overrides the config seed. Exit codes: 0
success, 2 usage or validation, 3 I/O, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import baseline as bl
from . import learners, studies, viz
from .errors import FileIOError, GridtraceError, NumericalError
from .frame import (AggregationLevel, SeriesView, WideFrame, flatten,
                    write_csv)
from .ingest import QualityRule, load_csv, quality_control
from .learners import DEFAULT_SEED, FeatureMatrix, LearnerSpec
from .regress import OLSSpec, fit_ols, fit_var, robustness_test

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4
BASELINE_METHODS = ("date", "week", "trend", "detrend", "backcast", "index", "prob")
STUDIES = ("peak-demand", "extreme-price", "duck-curve", "renewable-share",
           "price-regression", "mobility")
PLOTS = ("stacked-bar", "line", "boxplot", "histogram", "cdf", "heatmap")


class _Parser(argparse.ArgumentParser):
    """Argument parser that raises instead of exiting, so ``main`` owns exit codes."""

    def error(self, message):
        raise GridtraceError("usage", f"{self.prog}: {message}")


# --------------------------------------------------------------------------
# shared helpers


def _dump_json(obj, path) -> Path:
    path = Path(path)
    text = json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"
    try:
        path.write_text(text, encoding="utf-8", newline="\n")
    except OSError as exc:
        raise FileIOError("io-error", str(exc)) from None
    return path


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _meta(args, command: str) -> dict:
    return {"command": command, "seed": args.seed}


def _write_sidecar(path, meta: dict) -> None:
    _dump_json(meta, f"{path}.meta.json")


def _load_frame(path, args, variable="value") -> WideFrame:
    return load_csv(path, args.region, variable, args.unit)


def read_table(path) -> tuple:
    """Header and string columns of a plain CSV table."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FileIOError("io-error", str(exc)) from None
    rows = [r for r in csv.reader(text.splitlines()) if r]
    if not rows:
        raise GridtraceError("bad-header", f"{path}: empty table")
    header = [h.strip() for h in rows[0]]
    if any(len(r) != len(header) for r in rows[1:]):
        raise GridtraceError("bad-cell", f"{path}: ragged rows")
    cols = {h: [r[i].strip() for r in rows[1:]] for i, h in enumerate(header)}
    return header, cols


def _numeric(values, name) -> np.ndarray:
    try:
        return np.array([float(v) if v != "" else np.nan for v in values])
    except ValueError:
        raise GridtraceError("bad-cell", f"column {name!r} is not numeric") from None


def _column(cols, name) -> list:
    if name not in cols:
        raise GridtraceError("bad-header", f"missing column {name!r}")
    return cols[name]


def _timestamps(values) -> np.ndarray:
    try:
        return np.array([v[:13] for v in values], dtype="datetime64[h]")
    except ValueError:
        raise GridtraceError("bad-cell", "unparseable timestamp") from None


def _series_table(path, value_col, time_col="timestamp") -> SeriesView:
    _, cols = read_table(path)
    return SeriesView(_timestamps(_column(cols, time_col)), _numeric(_column(cols, value_col), value_col))


def _order(text) -> tuple:
    try:
        order = tuple(int(v) for v in str(text).split(","))
    except ValueError:
        raise GridtraceError("usage", f"bad order {text!r}") from None
    if len(order) != 3:
        raise GridtraceError("usage", "order must be p,d,q")
    return order


def _spec(args) -> LearnerSpec:
    hidden = tuple(int(h) for h in args.hidden.split(",")) if args.learner == "mlp" else ()
    return LearnerSpec(args.learner, lam=args.lam, hidden=hidden, epochs=args.epochs,
                       seed=args.seed)


# --------------------------------------------------------------------------
# commands


def cmd_ingest(args) -> int:
    rule = QualityRule(max_gap=args.max_gap, z_threshold=args.z, window_days=args.window_days)
    # validate every input before writing anything
    results = []
    for path in args.inputs:
        frame = _load_frame(path, args, args.variable)
        repaired, report = quality_control(frame, rule)
        results.append((Path(path), repaired, report))
    out = Path(args.out)
    for path, repaired, report in results:
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise FileIOError("io-error", str(exc)) from None
        write_csv(repaired, out / f"{path.stem}.csv")
        report.write(out / f"{path.stem}.quality.jsonl")
        _write_sidecar(out / f"{path.stem}.csv", {**_meta(args, "ingest"), "counts": report.counts})
    return EXIT_OK


def _baseline_result(args):
    frame = _load_frame(args.input, args)
    series = flatten(frame)
    m = args.method
    if m == "date":
        return bl.date_aligned(frame, args.years_back, args.start, args.end)
    if m == "week":
        return bl.week_aligned(frame, args.years_back, args.start, args.end)
    if m in ("trend", "detrend"):
        trend = bl.trend_ma(series, args.trend_window)
        return (bl.trend_baseline(trend, args.years_back) if m == "trend"
                else bl.detrend_baseline(series, trend))
    if m == "index":
        idx = bl.fluctuation_index(series, bl.WindowSpec(args.window_kind, args.window))
        return bl.index_baseline(idx, args.years_back, AggregationLevel(args.level))
    if args.start is None:
        raise GridtraceError("usage", f"--method {m} needs --start (event start date)")
    feats = bl.calendar_features(series.timestamps)
    start = np.datetime64(args.start, "h")
    end = np.datetime64(args.end, "h") + np.timedelta64(23, "h") if args.end else None
    if m == "backcast":
        return bl.backcast(feats, series, _spec(args), start, end)
    return bl.probabilistic_baseline(feats, series, _spec(args), start, end, family=args.family)


def cmd_baseline(args) -> int:
    result = _baseline_result(args)
    bl.write_baseline_csv(result, args.out)
    meta = {**_meta(args, "baseline"), "method": args.method}
    _write_sidecar(args.out, meta)
    return EXIT_OK


def cmd_regress(args) -> int:
    header, cols = read_table(args.input)
    names = args.names.split(",") if args.names else [h for h in header if h != "timestamp"]
    data = np.column_stack([_numeric(_column(cols, n), n) for n in names])
    if args.model == "var":
        report = fit_var(data, args.order, names, irf_horizon=args.horizon)
        out = report.to_dict()
        if args.robustness_trials:
            out["robustness"] = robustness_test(report, args.epsilon, args.robustness_trials,
                                                args.seed).to_dict()
    else:
        if not args.formula:
            raise GridtraceError("usage", "regress ols needs --formula")
        spec = OLSSpec.parse(args.formula)
        fm = FeatureMatrix(data, tuple(names))
        report = fit_ols(spec, fm)
        out = report.to_dict()
        out["table"] = report.table()
    out["meta"] = {**_meta(args, f"regress {args.model}")}
    _dump_json(out, args.out)
    return EXIT_OK


def _study_peak(args) -> dict:
    frame = _load_frame(args.demand, args, "demand")
    align = bl.week_aligned if args.baseline_method == "week" else bl.date_aligned
    base = align(frame, args.years_back, args.start, args.end)
    months = args.months.split(",") if args.months else sorted(
        {str(t.astype("datetime64[M]")) for t in base.timestamps})
    return studies.peak_demand_report(frame, base, months).to_dict()


def _study_extreme(args) -> dict:
    frame = _load_frame(args.price, args, "price")
    window = bl.WindowSpec(args.window_kind, args.window)
    counts = studies.extreme_price_count(frame, window, args.threshold, args.bucket)
    out = {"counts": [{"bucket": list(k), "count": v} for k, v in sorted(counts.items())],
           "threshold": args.threshold, "bucket": args.bucket}
    if args.year:
        months = tuple(int(m) for m in args.month_list.split(","))
        out["comparison"] = studies.extreme_price_comparison(
            frame, args.year, months, args.years_back, window, args.threshold)
    return out


def _study_duck(args) -> dict:
    demand = load_csv(args.demand, args.region, "demand", args.unit)
    solar = load_csv(args.solar, args.region, "solar", args.solar_unit or args.unit)
    return studies.duck_curve(demand, solar, args.start, args.end).to_dict()


def _study_renewable(args) -> dict:
    _, cols = read_table(args.table)
    ts = np.array([v[:7] for v in _column(cols, "month")], dtype="datetime64[M]")
    ts = ts.astype("datetime64[D]").astype("datetime64[h]")
    parts = [SeriesView(ts, _numeric(_column(cols, c), c)) for c in ("hydro", "solar", "wind")]
    order = "auto" if args.arma_order == "auto" else _order(args.arma_order)
    return studies.renewable_share(*parts, study_start=args.start, study_end=args.end,
                                   order=order).to_dict()


def _study_price(args) -> dict:
    frame = _load_frame(args.price, args, "price")
    _, cols = read_table(args.table)
    days = np.array([v[:10] for v in _column(cols, "date")], dtype="datetime64[D]")
    ts = days.astype("datetime64[h]")
    gas = SeriesView(ts, _numeric(_column(cols, "gas"), "gas"))
    cases = SeriesView(ts, _numeric(_column(cols, "cases"), "cases"))
    inputs = studies.price_study_inputs(frame, gas, cases, args.event_date,
                                        bl.WindowSpec(args.window_kind, args.window),
                                        log_cases=not args.raw_cases)
    out = {}
    for key, fn in (("dummy", studies.price_regression_dummy), ("cases", studies.price_regression_cases)):
        r = fn(inputs)
        out[key] = {**r.to_dict(), "significant_5pct": r.significant(0.05), "table": r.table()}
    return out


def _study_mobility(args) -> dict:
    header, cols = read_table(args.table)
    ts = _timestamps(_column(cols, "timestamp"))
    load = SeriesView(ts, _numeric(_column(cols, "load"), "load"))
    weather = {c: _numeric(cols[c], c) for c in args.weather.split(",") if c}
    covariates = {c: SeriesView(ts, _numeric(_column(cols, c), c))
                  for c in args.covariates.split(",") if c}
    feats = bl.calendar_features(ts, weather)
    report = studies.mobility_enhanced_forecast(
        feats, load, covariates, (args.train_start, args.train_end),
        (args.calibration_start, args.calibration_end), (args.normal_start, args.normal_end),
        (args.lockdown_start, args.lockdown_end), _spec(args))
    return report.to_dict()


def cmd_study(args) -> int:
    runners = {"peak-demand": _study_peak, "extreme-price": _study_extreme,
               "duck-curve": _study_duck, "renewable-share": _study_renewable,
               "price-regression": _study_price, "mobility": _study_mobility}
    out = runners[args.study](args)
    out["meta"] = _meta(args, f"study {args.study}")
    _dump_json(out, args.out)
    return EXIT_OK


def _plot(args) -> viz.PlotData:
    header, cols = read_table(args.input)
    if args.plot == "stacked-bar":
        labels = _column(cols, args.label_column)
        total = _numeric(_column(cols, args.total_column), args.total_column)
        cats = {h: _numeric(cols[h], h) for h in header
                if h not in (args.label_column, args.total_column)}
        return viz.build_stacked_bar(cats, total, labels)
    names = args.columns.split(",") if args.columns else [h for h in header if h != "timestamp"]
    data = [_numeric(_column(cols, n), n) for n in names]
    if args.plot == "boxplot":
        return viz.build_boxplot(data, names)
    if args.plot == "histogram":
        return viz.build_histogram(data[0], args.bins)
    if args.plot == "cdf":
        return viz.build_cdf(data[0])
    ts = (_timestamps(cols["timestamp"]) if "timestamp" in cols
          else np.arange(len(data[0])).astype("datetime64[h]"))
    series = [SeriesView(ts, d) for d in data]
    if args.plot == "heatmap":
        return viz.build_heatmap(series, names)
    events = args.events.split(",") if args.events else None
    return viz.build_line(series, events, names)


def cmd_viz(args) -> int:
    plot = _plot(args)
    plot.meta["seed"] = args.seed
    viz.render_svg(plot, args.out, args.title)
    if args.json:
        viz.write_plot_json(plot, args.json)
    _write_sidecar(args.out, {**_meta(args, f"viz {args.plot}")})
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def _common(p):
    p.add_argument("--config", help="JSON file with default flag values")
    p.add_argument("--seed", type=int, help="root seed (default 42; GRIDTRACE_SEED overrides)")
    p.add_argument("--region", default="region")
    p.add_argument("--unit", default="MW")


def _learner(p):
    p.add_argument("--learner", choices=("ridge", "mlp"), default="ridge")
    p.add_argument("--lam", type=float, default=1e-6)
    p.add_argument("--hidden", default="16")
    p.add_argument("--epochs", type=int, default=200)


def _window(p):
    p.add_argument("--window", type=int, default=720, help="trailing window length (hours)")
    p.add_argument("--window-kind", choices=("trailing", "month"), default="trailing")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gridtrace", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="repair wide-frame CSVs and log quality actions")
    _common(p)
    p.add_argument("inputs", nargs="+")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--variable", default="value")
    p.add_argument("--max-gap", type=int, default=3)
    p.add_argument("--z", type=float, default=5.0)
    p.add_argument("--window-days", type=int, default=7)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("baseline", help="estimate a baseline and write it as CSV")
    _common(p)
    _learner(p)
    _window(p)
    p.add_argument("input")
    p.add_argument("--method", choices=BASELINE_METHODS, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--years-back", type=int, default=1)
    p.add_argument("--start")
    p.add_argument("--end")
    p.add_argument("--trend-window", type=int, default=168)
    p.add_argument("--level", choices=[lv.value for lv in AggregationLevel], default="hourly")
    p.add_argument("--family", choices=("backcast", "trend"), default="backcast")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("regress", help="OLS or VAR with the test battery, as JSON")
    _common(p)
    p.add_argument("model", choices=("var", "ols"))
    p.add_argument("input", help="CSV table, one column per variable")
    p.add_argument("--out", required=True)
    p.add_argument("--names", help="comma-separated columns in identification order")
    p.add_argument("--order", type=int, default=1)
    p.add_argument("--horizon", type=int, default=10)
    p.add_argument("--robustness-trials", type=int, default=0)
    p.add_argument("--epsilon", type=float, default=0.01)
    p.add_argument("--formula", help='e.g. "y ~ x + x^2 + 1"')
    p.set_defaults(func=cmd_regress)

    p = sub.add_parser("study", help="run a study recipe, as JSON")
    _common(p)
    _learner(p)
    _window(p)
    p.add_argument("study", choices=STUDIES)
    p.add_argument("--out", required=True)
    p.add_argument("--demand")
    p.add_argument("--solar")
    p.add_argument("--solar-unit")
    p.add_argument("--price")
    p.add_argument("--table")
    p.add_argument("--baseline-method", choices=("week", "date"), default="week")
    p.add_argument("--years-back", type=int, default=1)
    p.add_argument("--start")
    p.add_argument("--end")
    p.add_argument("--months", help="comma-separated YYYY-MM list")
    p.add_argument("--threshold", type=float, default=studies.EXTREME_THRESHOLD)
    p.add_argument("--bucket", choices=("weekly", "monthly"), default="weekly")
    p.add_argument("--year", type=int)
    p.add_argument("--month-list", default="3,4,5,6")
    p.add_argument("--arma-order", default="2,0,1")
    p.add_argument("--event-date", default="2020-03-15")
    p.add_argument("--raw-cases", action="store_true", help="use C instead of log(1 + C)")
    p.add_argument("--weather", default="temperature")
    p.add_argument("--covariates", default="mobility")
    p.add_argument("--train-start", default="2019-01-01")
    p.add_argument("--train-end", default="2019-12-31")
    p.add_argument("--normal-start", default="2020-01-01")
    p.add_argument("--normal-end", default="2020-03-20")
    p.add_argument("--calibration-start", default="2020-03-21")
    p.add_argument("--calibration-end", default="2020-04-03")
    p.add_argument("--lockdown-start", default="2020-04-04")
    p.add_argument("--lockdown-end", default="2020-06-30")
    p.set_defaults(func=cmd_study)

    p = sub.add_parser("viz", help="emit plot data and a deterministic SVG")
    _common(p)
    p.add_argument("plot", choices=PLOTS)
    p.add_argument("input", help="CSV table")
    p.add_argument("--out", required=True, help="SVG path")
    p.add_argument("--json", help="also write plot data JSON here")
    p.add_argument("--title", default="")
    p.add_argument("--label-column", default="label")
    p.add_argument("--total-column", default="total")
    p.add_argument("--columns")
    p.add_argument("--bins", type=int, default=10)
    p.add_argument("--events", help="comma-separated event dates")
    p.set_defaults(func=cmd_viz)
    return parser


def _apply_config(parser, args, argv):
    """Fill flags not given on the command line from the JSON config."""
    if args.config:
        try:
            config = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except OSError as exc:
            raise FileIOError("io-error", str(exc)) from None
        except json.JSONDecodeError as exc:
            raise GridtraceError("bad-config", str(exc)) from None
        given = {a.split("=")[0].lstrip("-").replace("-", "_") for a in argv if a.startswith("--")}
        for key, value in config.items():
            key = key.replace("-", "_")
            if not hasattr(args, key):
                raise GridtraceError("bad-config", f"unknown config key {key!r}")
            if key not in given:
                setattr(args, key, value)
    env = os.environ.get("GRIDTRACE_SEED")
    if env is not None:
        try:
            args.seed = int(env)
        except ValueError:
            raise GridtraceError("bad-config", f"GRIDTRACE_SEED={env!r} is not an integer") from None
    if args.seed is None:
        args.seed = DEFAULT_SEED
    return args


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args = _apply_config(parser, args, argv)
        return args.func(args)
    except FileIOError as exc:
        print(f"gridtrace: {exc}", file=sys.stderr)
        return EXIT_IO
    except NumericalError as exc:
        print(f"gridtrace: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except GridtraceError as exc:
        print(f"gridtrace: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"gridtrace: {exc}", file=sys.stderr)
        return EXIT_IO
    except SystemExit as exc:  # --help
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
