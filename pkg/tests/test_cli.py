import json
from pathlib import Path

import numpy as np
import pytest

from gridtrace import baseline as bl
from gridtrace import studies
from gridtrace.cli import main
from gridtrace.frame import write_csv
from gridtrace.ingest import load_csv
from gridtrace.regress import simulate_var

from conftest import make_frame

DATA = Path(__file__).parent / "data"


@pytest.fixture
def demand_csv(tmp_path):
    frame = make_frame("2019-01-01", 500, seed=7)
    return write_csv(frame, tmp_path / "demand.csv")


def run(*argv):
    return main([str(a) for a in argv])


class TestIngest:
    def test_valid(self, tmp_path, demand_csv):
        out = tmp_path / "out"
        assert run("ingest", demand_csv, "--out", out) == 0
        assert (out / "demand.csv").exists() and (out / "demand.quality.jsonl").exists()
        assert json.loads((out / "demand.csv.meta.json").read_text())["seed"] == 42

    def test_bad_header_writes_nothing(self, tmp_path, demand_csv, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("x,y\n1,2\n")
        out = tmp_path / "out"
        assert run("ingest", demand_csv, bad, "--out", out) == 2
        assert not out.exists()
        assert "bad-header" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert run("ingest", tmp_path / "nope.csv", "--out", tmp_path / "o") == 3


class TestBaseline:
    def test_week_golden(self, tmp_path):
        out = tmp_path / "week.csv"
        code = run("baseline", DATA / "week_fixture.csv", "--method", "week", "--years-back", 1,
                   "--start", "2020-03-02", "--out", out)
        assert code == 0
        assert out.read_bytes() == (DATA / "week_golden.csv").read_bytes()

    def test_prob_columns(self, tmp_path, demand_csv):
        out = tmp_path / "prob.csv"
        assert run("baseline", demand_csv, "--method", "prob", "--start", "2020-03-01",
                   "--out", out) == 0
        header = out.read_text().splitlines()[0].split(",")
        assert header == ["timestamp", "observed", "baseline", "q10", "q25", "q50", "q75", "q90"]

    def test_unknown_method_lists_choices(self, tmp_path, demand_csv, capsys):
        assert run("baseline", demand_csv, "--method", "nope", "--out", tmp_path / "x.csv") == 2
        err = capsys.readouterr().err
        assert all(m in err for m in ("date", "week", "backcast", "prob"))

    def test_learned_method_needs_start(self, tmp_path, demand_csv):
        assert run("baseline", demand_csv, "--method", "backcast", "--out", tmp_path / "x.csv") == 2

    @pytest.mark.parametrize("method", ["date", "trend", "detrend", "index"])
    def test_other_methods(self, tmp_path, demand_csv, method):
        out = tmp_path / f"{method}.csv"
        assert run("baseline", demand_csv, "--method", method, "--out", out) == 0
        assert out.read_text().startswith("timestamp,")


class TestStudyAndRegress:
    def test_peak_demand_matches_library(self, tmp_path, demand_csv):
        out = tmp_path / "peak.json"
        assert run("study", "peak-demand", "--demand", demand_csv, "--months", "2020-03,2020-04",
                   "--out", out) == 0
        got = json.loads(out.read_text())["reduction"]
        frame = load_csv(demand_csv, "region", "demand", "MW")
        base = bl.week_aligned(frame, 1)
        for m in ("2020-03", "2020-04"):
            assert got[m] == pytest.approx(studies.peak_demand_reduction(frame, base, m), abs=1e-12)

    def test_var_report(self, tmp_path):
        coefs = np.array([[[0.5, 0.1], [0.0, 0.4]], [[-0.2, 0.0], [0.1, 0.1]]])
        y = simulate_var(coefs, 400, seed=1)
        table = tmp_path / "var.csv"
        table.write_text("a,b\n" + "\n".join(f"{float(u)!r},{float(v)!r}" for u, v in y) + "\n")
        out = tmp_path / "var.json"
        assert run("regress", "var", table, "--order", 2, "--out", out) == 0
        report = json.loads(out.read_text())
        assert np.allclose(np.sum(report["fevd"], axis=2), 1, atol=1e-9)

    def test_collinear_ols_exit_4(self, tmp_path):
        table = tmp_path / "t.csv"
        table.write_text("x,y\n" + "\n".join(f"3,{i}" for i in range(10)) + "\n")
        assert run("regress", "ols", table, "--formula", "y ~ x + 1", "--out", tmp_path / "o.json") == 4


def stacked_table(path):
    path.write_text("label,total,hydro,solar,wind\n"
                    "2020-01,50,20,10,20\n2020-02,40,10,10,20\n2020-03,80,20,40,20\n")
    return path


class TestViz:
    def test_stacked_bar_byte_stable(self, tmp_path):
        table = stacked_table(tmp_path / "shares.csv")
        a, b = tmp_path / "a.svg", tmp_path / "b.svg"
        assert run("viz", "stacked-bar", table, "--out", a, "--json", tmp_path / "p.json") == 0
        assert run("viz", "stacked-bar", table, "--out", b) == 0
        assert a.read_bytes() == b.read_bytes()
        plot = json.loads((tmp_path / "p.json").read_text())
        assert plot["kind"] == "stacked-bar" and plot["series"][0]["y"][0] == 40.0

    def test_unwritable_output(self, tmp_path):
        table = stacked_table(tmp_path / "shares.csv")
        assert run("viz", "stacked-bar", table, "--out", tmp_path / "no" / "dir" / "x.svg") == 3


class TestConfigAndSeed:
    def test_config_supplies_flags(self, tmp_path, demand_csv):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"years_back": 1, "seed": 7}))
        out = tmp_path / "w.csv"
        assert run("baseline", demand_csv, "--method", "week", "--config", cfg, "--out", out) == 0
        assert json.loads(Path(f"{out}.meta.json").read_text())["seed"] == 7

    def test_unknown_config_key(self, tmp_path, demand_csv):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"nonsense": 1}))
        assert run("baseline", demand_csv, "--method", "week", "--config", cfg,
                   "--out", tmp_path / "w.csv") == 2

    def test_env_seed_wins(self, tmp_path, demand_csv, monkeypatch):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"seed": 7}))
        monkeypatch.setenv("GRIDTRACE_SEED", "99")
        out = tmp_path / "w.csv"
        assert run("baseline", demand_csv, "--method", "week", "--config", cfg, "--out", out) == 0
        assert json.loads(Path(f"{out}.meta.json").read_text())["seed"] == 99
        monkeypatch.setenv("GRIDTRACE_SEED", "x")
        assert run("baseline", demand_csv, "--method", "week", "--out", out) == 2

    def test_learned_run_deterministic(self, tmp_path, demand_csv):
        outs = []
        for k in range(2):
            out = tmp_path / f"mlp{k}.csv"
            assert run("baseline", demand_csv, "--method", "backcast", "--learner", "mlp",
                       "--epochs", 5, "--hidden", "4", "--start", "2020-04-01", "--out", out) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_inputs_untouched(self, tmp_path, demand_csv):
        before = demand_csv.read_bytes()
        run("study", "peak-demand", "--demand", demand_csv, "--out", tmp_path / "p.json")
        assert demand_csv.read_bytes() == before


class TestStudyPlumbing:
    def test_duck_and_extreme(self, tmp_path, demand_csv):
        solar = write_csv(make_frame("2019-01-01", 500, fn=lambda d, h: 50.0 * (h == 12),
                                     variable="solar"), tmp_path / "solar.csv")
        out = tmp_path / "duck.json"
        assert run("study", "duck-curve", "--demand", demand_csv, "--solar", solar, "--start",
                   "2020-04-01", "--end", "2020-04-30", "--out", out) == 0
        assert json.loads(out.read_text())["days"] == 30
        out = tmp_path / "extreme.json"
        assert run("study", "extreme-price", "--price", demand_csv, "--year", 2020,
                   "--month-list", "3,4", "--out", out) == 0
        rep = json.loads(out.read_text())
        assert len(rep["comparison"]) == 10 and rep["threshold"] == 0.9544

    def test_renewable_share(self, tmp_path):
        rng = np.random.default_rng(3)
        months = np.datetime64("2017-07", "M") + np.arange(36)
        rows = [f"{m},{10 + rng.normal():.4f},{5 + rng.normal():.4f},{8 + rng.normal():.4f}"
                for m in months]
        table = tmp_path / "share.csv"
        table.write_text("month,hydro,solar,wind\n" + "\n".join(rows) + "\n")
        out = tmp_path / "share.json"
        assert run("study", "renewable-share", "--table", table, "--start", "2020-03-01",
                   "--out", out) == 0
        rep = json.loads(out.read_text())
        assert rep["order"] == [2, 0, 1] and len(rep["baseline"]) == 4

    def test_mobility(self, tmp_path):
        from synthetic import mobility_scenario
        feats, load, cov = mobility_scenario(1)
        temp = feats.values[:, list(feats.names).index("temperature")]
        lagged = cov["mobility"].values[np.unique(load.timestamps.astype("datetime64[D]"),
                                                  return_inverse=True)[1]]
        lines = [f"{str(t)},{y!r},{tc!r},{m!r}" for t, y, tc, m in
                 zip(load.timestamps, load.values.tolist(), temp.tolist(), lagged.tolist())]
        table = tmp_path / "mob.csv"
        table.write_text("timestamp,load,temperature,mobility\n" + "\n".join(lines) + "\n")
        out = tmp_path / "mob.json"
        assert run("study", "mobility", "--table", table, "--out", out) == 0
        rows = json.loads(out.read_text())["rows"]
        assert rows["mobility"]["lockdown"] < rows["base"]["lockdown"]

    def test_price_regression(self, tmp_path):
        price = write_csv(make_frame("2019-12-01", 150, seed=4, variable="price"), tmp_path / "p.csv")
        rng = np.random.default_rng(4)
        days = np.datetime64("2019-12-01") + np.arange(150)
        cases = np.where(days >= np.datetime64("2020-03-01"), (days - days[0]).astype(int) ** 2, 0)
        table = tmp_path / "t.csv"
        table.write_text("date,gas,cases\n" + "\n".join(
            f"{d},{g:.3f},{c}" for d, g, c in zip(days, rng.uniform(1.5, 3, 150), cases)) + "\n")
        out = tmp_path / "price.json"
        assert run("study", "price-regression", "--price", price, "--table", table, "--out", out) == 0
        rep = json.loads(out.read_text())
        assert [c["name"] for c in rep["dummy"]["coefficients"]] == ["theta1", "theta2", "theta3", "theta4"]
        assert [c["name"] for c in rep["cases"]["coefficients"]] == ["theta5", "theta6", "theta7", "theta8"]
