import json
import shutil
from pathlib import Path

import numpy as np
import pytest
from numpy.testing import assert_allclose

from offshore_ems.cli import EXIT_IO, EXIT_OK, EXIT_SOLVER, EXIT_USER, run_cli
from offshore_ems.config import (
    ConfigError,
    TimeSeriesError,
    ValidationError,
    dump_config,
    load_case,
    load_config,
    load_timeseries,
    parse_config_text,
)
from offshore_ems.fixtures import CASES, fixture_path
from offshore_ems.kpi import kpi_summary
from offshore_ems.results import read_results


SMALL_CASE = """\
simulation:
  timestep: 5 min
  horizon: 20 min
  reopt_interval: 10 min
  reserve_min: 0 MW
carriers:
  gas: {calorific_value: 40 MJ/Sm3, co2_content: 2.34 kg/Sm3}
nodes:
  - {id: n}
devices:
  - {id: wind, node: n, type: source, f_max: 5 MW, profile: wind, params: {carrier: electricity}}
  - {id: load, node: n, type: sink, f_max: %s, f_min: %s, params: {carrier: electricity}}
  - {id: grid, node: n, type: source, f_max: 10 MW, params: {carrier: electricity},
     penalty: {points: [[0 MW, 0], [10 MW, 10]]}}
profiles:
  file: wind.csv
"""


def small_case(tmp_path: Path, load="4 MW", grid=True) -> Path:
    text = SMALL_CASE % (load, load)
    if not grid:
        text = text.replace("  - {id: grid", "  # - {id: grid").replace("     penalty:", "  #   penalty:")
    (tmp_path / "case.yaml").write_text(text)
    rows = ["step,wind.forecast"] + [f"{t},{0.5 + 0.4 * np.sin(t):.6f}" for t in range(40)]
    (tmp_path / "wind.csv").write_text("\n".join(rows) + "\n")
    return tmp_path / "case.yaml"


class TestFixtures:
    @pytest.mark.parametrize("name", CASES)
    def test_cases_load(self, name):
        case = load_case(fixture_path(name))
        if name == "leogo_base":
            assert case.profiles == {}  # no wind on the base platform
        else:
            assert len(case.profiles["wind"]) == 2040

    def test_base_case_turbines(self):
        case = load_case(fixture_path("leogo_base"))
        gts = [d for d in case.model.devices if d.type == "gas_turbine"]
        assert len(gts) == 3
        for d in gts:
            assert d.f_max == pytest.approx(21.8) and d.f_min == pytest.approx(3.5)
            assert d.startup_delay == 6
        assert case.config.horizon == 24 and case.config.reopt_interval == 6
        assert case.config.nowcast_window == 2 and case.config.reserve_min == 5.0

    def test_missing_fixture(self):
        with pytest.raises(FileNotFoundError):
            fixture_path("nowhere")


class TestConfig:
    def test_unknown_top_level_key(self):
        text = fixture_path("leogo_base").read_text() + "windturbines:\n  - {id: w}\n"
        with pytest.raises(ConfigError, match="windturbines") as err:
            parse_config_text(text, "case.yaml")
        assert err.value.line is not None

    def test_unknown_device_key(self):
        text = SMALL_CASE % ("4 MW", "4 MW")
        text = text.replace("profile: wind,", "profile: wind, colour: red,")
        with pytest.raises(ConfigError, match="colour"):
            parse_config_text(text)

    def test_empty_file(self):
        with pytest.raises(ConfigError, match="empty"):
            parse_config_text("", "case.yaml")

    def test_parse_error_location(self):
        with pytest.raises(ConfigError, match="line 3"):
            parse_config_text("simulation:\n  timestep: [5 min\n", "case.yaml")

    def test_duplicate_key(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config_text("simulation: {}\nsimulation: {}\n")

    @pytest.mark.parametrize("bad", ["7 days", "5 MW", "forever"])
    def test_time_units(self, bad):
        text = SMALL_CASE.replace("horizon: 20 min", f"horizon: {bad}") % ("4 MW", "4 MW")
        with pytest.raises(ConfigError):
            parse_config_text(text)

    def test_horizon_must_be_whole_steps(self):
        text = SMALL_CASE.replace("horizon: 20 min", "horizon: 22 min") % ("4 MW", "4 MW")
        with pytest.raises(ConfigError, match="whole number"):
            parse_config_text(text)

    def test_flow_units_converted(self):
        text = SMALL_CASE % ("4 MW", "4 MW")
        text = text.replace("  - {id: wind", "  - {id: fuel, node: n, type: source, f_max: 3600 Sm3/h, "
                                             "params: {carrier: gas}}\n  - {id: wind")
        model, _ = parse_config_text(text)
        assert model.device("fuel").f_max == pytest.approx(1.0)

    def test_validation_lists_every_problem(self, tmp_path):
        path = small_case(tmp_path)
        text = path.read_text().replace("node: n, type: sink", "node: nowhere, type: sink")
        path.write_text(text)
        with pytest.raises(ValidationError) as err:
            load_config(path)
        assert any("nowhere" in str(d) for d in err.value.diagnostics)

    @pytest.mark.parametrize("name", CASES)
    def test_round_trip(self, name):
        case = load_case(fixture_path(name))
        model, config = parse_config_text(dump_config(case.model, case.config, case.profile_file))
        assert model == case.model
        assert config == case.config


class TestTimeSeries:
    def write(self, tmp_path, text):
        path = tmp_path / "ts.csv"
        path.write_text(text)
        return path

    def test_week_at_five_minutes(self, tmp_path):
        rows = ["step,wind.forecast,wind.nowcast"] + [f"{t},0.5,0.4" for t in range(2016)]
        profiles = load_timeseries(self.write(tmp_path, "\n".join(rows) + "\n"))
        assert len(profiles["wind"]) == 2016
        assert_allclose(profiles["wind"].nowcast[:3], 0.4)

    def test_forecast_only(self, tmp_path):
        profiles = load_timeseries(self.write(tmp_path, "step,wind.forecast\n0,0.1\n1,0.2\n"))
        assert profiles["wind"].nowcast is None

    def test_negative_value_names_row(self, tmp_path):
        # rows are counted as file lines, header included
        with pytest.raises(TimeSeriesError, match="row 3"):
            load_timeseries(self.write(tmp_path, "step,wind.forecast\n0,0.1\n1,-0.2\n"))

    @pytest.mark.parametrize("text, match", [
        ("step,wind.forecast\n0,0.1,0.3\n", "fields"),
        ("step,wind.forecast\n0,abc\n", "not a number"),
        ("step,wind.forecast,wind.forecast\n0,0.1,0.1\n", "duplicate"),
        ("time,wind.forecast\n0,0.1\n", "step"),
        ("step,wind\n0,0.1\n", "forecast or"),
        ("step,wind.nowcast\n0,0.1\n", "no forecast"),
        ("", "empty"),
    ])
    def test_malformed(self, tmp_path, text, match):
        with pytest.raises(TimeSeriesError, match=match):
            load_timeseries(self.write(tmp_path, text))


def error_record(capsys):
    lines = [line for line in capsys.readouterr().err.splitlines() if line.startswith("{")]
    return json.loads(lines[-1])


class TestCli:
    def test_validate(self, tmp_path, capsys):
        assert run_cli(["validate", "--config", str(small_case(tmp_path))]) == EXIT_OK
        assert "ok" in capsys.readouterr().out

    def test_validate_reports_bad_config(self, tmp_path, capsys):
        path = small_case(tmp_path)
        path.write_text(path.read_text() + "windturbines: []\n")
        assert run_cli(["validate", "--config", str(path)]) == EXIT_USER
        assert "windturbines" in error_record(capsys)["message"]

    def test_missing_file_is_io_error(self, tmp_path, capsys):
        assert run_cli(["validate", "--config", str(tmp_path / "none.yaml")]) == EXIT_IO
        assert error_record(capsys)["exit_code"] == EXIT_IO

    def test_infeasible_is_solver_error(self, tmp_path, capsys):
        path = small_case(tmp_path, load="9 MW", grid=False)
        code = run_cli(["simulate", "--config", str(path), "--out", str(tmp_path / "out"), "--steps", "4",
                        "--quiet"])
        assert code == EXIT_SOLVER
        record = error_record(capsys)
        assert record["status"] == "infeasible" and record["window"] == 0

    def test_simulate_kpi_round_trip(self, tmp_path, capsys):
        out = tmp_path / "bundle"
        args = ["simulate", "--config", str(small_case(tmp_path)), "--out", str(out), "--steps", "8", "--quiet"]
        assert run_cli(args) == EXIT_OK
        result, model, kpis, meta = read_results(out)
        assert meta["n_steps"] == 8 and result.n_steps == 8
        assert kpi_summary(result, model) == kpis
        capsys.readouterr()
        assert run_cli(["kpi", str(out), "--json"]) == EXIT_OK
        assert json.loads(capsys.readouterr().out) == kpis

    def test_existing_bundle_refused(self, tmp_path, capsys):
        case = small_case(tmp_path)
        out = tmp_path / "bundle"
        args = ["simulate", "--config", str(case), "--out", str(out), "--steps", "4", "--quiet"]
        assert run_cli(args) == EXIT_OK
        assert run_cli(args) == EXIT_USER
        assert error_record(capsys)["error"] == "BundleExistsError"
        assert run_cli(args + ["--force"]) == EXIT_OK

    def test_bundle_is_rerunnable(self, tmp_path):
        case = small_case(tmp_path)
        first, second = tmp_path / "a", tmp_path / "b"
        assert run_cli(["simulate", "--config", str(case), "--out", str(first), "--steps", "4", "--quiet"]) == 0
        # the bundle carries its own config and profiles
        assert run_cli(["simulate", "--config", str(first / "config.yaml"), "--out", str(second), "--steps", "4",
                        "--quiet"]) == 0
        assert (first / "flows.csv").read_bytes() == (second / "flows.csv").read_bytes()

    def test_compare(self, tmp_path, capsys):
        case = small_case(tmp_path)
        for name in ("a", "b"):
            run_cli(["simulate", "--config", str(case), "--out", str(tmp_path / name), "--steps", "4", "--quiet"])
        capsys.readouterr()
        assert run_cli(["compare", str(tmp_path / "a"), str(tmp_path / "b"), "--csv"]) == EXIT_OK
        assert "emission_total_kg_ratio" in capsys.readouterr().out

    def test_compare_span_mismatch(self, tmp_path, capsys):
        case = small_case(tmp_path)
        run_cli(["simulate", "--config", str(case), "--out", str(tmp_path / "a"), "--steps", "4", "--quiet"])
        run_cli(["simulate", "--config", str(case), "--out", str(tmp_path / "b"), "--steps", "6", "--quiet"])
        assert run_cli(["compare", str(tmp_path / "a"), str(tmp_path / "b")]) == EXIT_USER
        assert error_record(capsys)["error"] == "SpanMismatchError"

    @pytest.mark.parametrize("fmt", ["lp", "mps"])
    def test_export_problem(self, tmp_path, fmt):
        out = tmp_path / f"window.{fmt}"
        args = ["export-problem", "--config", str(small_case(tmp_path)), "--at", "2", "--format", fmt,
                "--out", str(out)]
        assert run_cli(args) == EXIT_OK
        assert "(wind,2)" in out.read_text() or "wind" in out.read_text()

    def test_plot(self, tmp_path):
        case = small_case(tmp_path)
        run_cli(["simulate", "--config", str(case), "--out", str(tmp_path / "a"), "--steps", "4", "--quiet"])
        assert run_cli(["plot", str(tmp_path / "a"), "--out", str(tmp_path / "png")]) == EXIT_OK
        assert list((tmp_path / "png").glob("*.png"))

    def test_fixture_copy_validates(self, tmp_path):
        for name in ("leogo_base.yaml", "wind_week.csv"):
            shutil.copy(fixture_path(name), tmp_path / name)
        assert run_cli(["validate", "--config", str(tmp_path / "leogo_base.yaml")]) == EXIT_OK


def test_empty_bundle_round_trip(tmp_path):
    from offshore_ems.results import write_results
    from offshore_ems.simulation import run_simulation
    from oracles import random_toy

    model, cfg, profiles = random_toy(3, horizon=3, profile_length=10)
    result = run_simulation(model, cfg, profiles, n_steps=0)
    write_results(result, tmp_path / "empty", model, cfg, profiles)
    back, _, kpis, _ = read_results(tmp_path / "empty")
    assert back.n_steps == 0 and kpis["n_steps"] == 0
