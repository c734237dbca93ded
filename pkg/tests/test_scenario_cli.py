"""Scenario files, report emitters, figures, and the command-line interface."""

import json
import math
from importlib import resources

import numpy as np
import pytest

from fbmgame.cli import main
from fbmgame.equilibrium import StrategyTrace
from fbmgame.fbm import TimeGrid, generate_paths
from fbmgame.girsanov import GirsanovKernel
from fbmgame.report import (
    fmt17,
    function_table_csv,
    kernel_table_csv,
    path_to_csv,
    paths_to_csv,
    reports_from_jsonl,
    reports_to_csv,
    reports_to_jsonl,
    reports_to_table,
    solution_summary_json,
    trace_to_csv,
)
from fbmgame.scenario import (
    ScenarioError,
    parse_scenario,
    scenario_from_payload,
    scenario_to_payload,
    write_scenario,
)
from fbmgame.verify import McReport


def _payload(name="two_player_scenario.json"):
    """Fresh mutable copy of a bundled scenario document."""
    text = resources.files("fbmgame").joinpath("data").joinpath(name).read_text("utf-8")
    return json.loads(text)


def _scenario_path(name):
    return str(resources.files("fbmgame").joinpath("data").joinpath(name))


REFERENCE = _scenario_path("reference_scenario.json")
TWO_PLAYER = _scenario_path("two_player_scenario.json")


# --------------------------------------------------------------------- #
# scenario parsing
# --------------------------------------------------------------------- #


class TestScenarioParsing:
    def test_bundled_reference_fields(self, reference_scenario):
        game = reference_scenario.game
        assert game.terminal_only is True
        assert game.count == 1
        assert float(game.hurst) == 0.75
        assert game.horizon == 1.0
        assert game.drift == 1.0
        assert game.initial_budget == 1.0
        assert game.terminal_exponent == 0.5
        assert reference_scenario.numerics.grid_cells == 256
        assert reference_scenario.numerics.path_count == 100_000
        assert reference_scenario.numerics.seed == 2024
        assert reference_scenario.outputs.directory == "out"
        assert reference_scenario.outputs.formats == ("jsonl", "csv", "table", "png")

    def test_bundled_two_player_fields(self, two_player_scenario):
        game = two_player_scenario.game
        assert game.terminal_only is False
        assert game.count == 2
        first, second = game.players
        assert first.risk_exponent == 0.3
        assert first.terminal_weight == 2.0
        assert second.running_weight == 2.0
        # Tabulated drift gain interpolates between its knots.
        assert second.drift_gain(0.5) == pytest.approx(1.5)

    def test_payload_round_trip(self, reference_scenario, two_player_scenario):
        for scenario in (reference_scenario, two_player_scenario):
            rebuilt = scenario_from_payload(scenario_to_payload(scenario))
            assert rebuilt == scenario

    def test_write_and_parse_round_trip(self, two_player_scenario, tmp_path):
        target = tmp_path / "scenario.json"
        write_scenario(two_player_scenario, str(target))
        text = target.read_text("utf-8")
        assert text.endswith("\n")
        assert json.loads(text)["game"]["N"] == 2
        assert parse_scenario(str(target)) == two_player_scenario

    def test_error_is_value_error_with_problem_list(self):
        payload = _payload()
        payload["game"]["H"] = 0.5
        with pytest.raises(ValueError) as err:
            scenario_from_payload(payload)
        assert isinstance(err.value, ScenarioError)
        assert isinstance(err.value.problems, list)
        assert any("game.H" in p for p in err.value.problems)

    @pytest.mark.parametrize(
        "mutate, fragment",
        [
            (lambda p: p.update(extra={}), "extra: unknown section"),
            (lambda p: p.pop("game"), "game: missing or not an object"),
            (lambda p: p.update(players=[]), "players: missing or empty array"),
            (lambda p: p["game"].update(H=0.5), "game.H"),
            (lambda p: p["players"][0].update(c=-1.0), "players[0].c"),
            (lambda p: p["game"].update(r="fast"), "game.r: expected a number, got str"),
            (lambda p: p["game"].update(r=True), "game.r: expected a number, got bool"),
            (lambda p: p["game"].pop("x"), "game.x: missing required field"),
            (lambda p: p["game"].update(N=3), "game.N: declares 3 players but 2 are given"),
            (lambda p: p["numerics"].update(grid=1), "numerics.grid: need at least 2 cells; got 1"),
            (lambda p: p["numerics"].update(paths=0), "numerics.paths: need at least 1 path"),
            (lambda p: p["numerics"].update(grid=12.5), "numerics.grid: expected an integer, got float"),
            (
                lambda p: p["players"][0].update(alpha={"constant": 1.0, "table": [[0.0, 1.0]]}),
                "players[0].alpha: expected an object with exactly one of 'constant' or 'table'",
            ),
            (
                lambda p: p["players"][0].update(alpha={"ramp": 1.0}),
                "players[0].alpha: unknown coefficient form ['ramp']",
            ),
            (
                lambda p: p["players"][0].update(beta={"table": [[0.0], [1.0, 2.0]]}),
                "players[0].beta.table: expected a list of [time, value] pairs",
            ),
            (
                lambda p: p["players"][1].update(alpha={"table": [[1.0, 1.0], [0.0, 2.0]]}),
                "players[1].alpha.table",
            ),
            (lambda p: p["players"][1].pop("gamma"), "players[1].gamma: missing required field"),
            (
                lambda p: p["outputs"].update(formats=["jsonl", "yaml"]),
                "outputs.formats: unknown format 'yaml' (known: jsonl, csv, table, png)",
            ),
            (lambda p: p["outputs"].update(formats="jsonl"), "outputs.formats: expected a list of strings"),
        ],
    )
    def test_named_complaints(self, mutate, fragment):
        payload = _payload()
        mutate(payload)
        with pytest.raises(ScenarioError) as err:
            scenario_from_payload(payload)
        assert fragment in str(err.value)

    def test_player_entry_must_be_object(self):
        payload = _payload()
        payload["game"].pop("N")
        payload["players"] = [5]
        with pytest.raises(ScenarioError, match=r"players\[0\]: expected an object"):
            scenario_from_payload(payload)

    def test_top_level_must_be_object(self):
        with pytest.raises(ScenarioError, match="top level"):
            scenario_from_payload([1, 2])

    def test_problems_accumulate(self):
        payload = _payload()
        payload.pop("game")
        payload["outputs"]["formats"] = ["yaml"]
        with pytest.raises(ScenarioError) as err:
            scenario_from_payload(payload)
        assert len(err.value.problems) >= 2

    def test_parse_missing_file(self, tmp_path):
        with pytest.raises(ScenarioError, match="file:"):
            parse_scenario(str(tmp_path / "missing.json"))

    def test_parse_invalid_json(self, tmp_path):
        bad = tmp_path / "broken.json"
        bad.write_text("{not json", encoding="utf-8")
        with pytest.raises(ScenarioError, match="file: not valid JSON"):
            parse_scenario(str(bad))


# --------------------------------------------------------------------- #
# report emitters
# --------------------------------------------------------------------- #


def _sample_reports():
    return [
        McReport.build("alpha_check", 1.25, 1.0, 0.125, 0.0625, 400, 32, 7),
        McReport.build("beta_check", 2.0, 1.0, 0.01, 0.0, 400, 32, 7),
    ]


class TestFmt17:
    def test_lossless_round_trip(self):
        for value in (0.1, 1.0 / 3.0, 1e-300, 6.02214076e23, -2.5, 0.0, 1.6628059538404258):
            assert float(fmt17(value)) == value

    def test_special_values(self):
        assert fmt17(float("nan")) == "nan"
        assert fmt17(float("inf")) == "inf"
        assert fmt17(float("-inf")) == "-inf"
        assert fmt17(2) == "2"


class TestReportSerialization:
    def test_jsonl_empty(self):
        assert reports_to_jsonl([]) == ""

    def test_jsonl_round_trip_and_field_order(self):
        reports = _sample_reports()
        text = reports_to_jsonl(reports)
        assert text.endswith("\n")
        assert reports_from_jsonl(text) == reports
        record = json.loads(text.splitlines()[0])
        assert list(record) == [
            "name", "estimate", "target", "stderr", "allowance",
            "passed", "samples", "grid_cells", "seed",
        ]
        assert record["passed"] is True
        assert json.loads(text.splitlines()[1])["passed"] is False

    def test_csv_header_only_when_empty(self):
        assert reports_to_csv([]) == (
            "name,estimate,target,stderr,allowance,passed,samples,grid_cells,seed\n"
        )

    def test_csv_rows(self):
        lines = reports_to_csv(_sample_reports()).splitlines()
        assert len(lines) == 3
        cells = lines[1].split(",")
        assert cells[0] == "alpha_check"
        assert float(cells[1]) == 1.25
        assert cells[5] == "true"
        assert lines[2].split(",")[5] == "false"

    def test_table_layout(self):
        text = reports_to_table(_sample_reports())
        lines = text.splitlines()
        assert lines[0].startswith("status  check")
        assert set(lines[1]) <= {"-", " "}
        assert "PASS" in lines[2] and "FAIL" in lines[3]
        assert text.endswith("\n")


class TestTraceAndPathEmitters:
    def test_trace_csv_shape_and_nan(self):
        grid = TimeGrid(1.0, 4)
        trace = StrategyTrace(
            grid=grid,
            drift_controls=np.full((5, 2), 0.5),
            discounted_aggregate=np.array([np.nan, 1.0, 2.0, 3.0, np.nan]),
            noise_controls=np.zeros((5, 2)),
            terminal_value=1.0,
        )
        lines = trace_to_csv(trace).splitlines()
        assert lines[0] == "t,u_1,u_2,aggregate_v,v_1,v_2"
        assert len(lines) == 6
        assert lines[1].split(",")[3] == "nan"
        assert lines[2].split(",")[3] == "1"

    def test_paths_csv(self):
        grid = TimeGrid(1.0, 4)
        paths = generate_paths(grid, 0.75, 2, seed=5)
        lines = paths_to_csv(paths).splitlines()
        assert lines[0] == "t,path_1,path_2"
        assert len(lines) == 6
        assert lines[1].split(",") == ["0", "0", "0"]
        assert float(lines[5].split(",")[1]) == paths[0].values[-1]

    def test_paths_csv_empty(self):
        assert paths_to_csv([]) == "t\n"

    def test_single_path_csv(self):
        grid = TimeGrid(1.0, 4)
        path = generate_paths(grid, 0.75, 1, seed=5)[0]
        lines = path_to_csv(path).splitlines()
        assert lines[0] == "t,value"
        assert len(lines) == 6
        assert lines[1] == "0,0"
        assert float(lines[5].split(",")[1]) == path.values[-1]

    def test_function_table_csv(self):
        lines = function_table_csv(lambda t: 2.0 * t, [0.0, 0.25, 0.5]).splitlines()
        assert lines[0] == "t,value"
        assert lines[2] == "0.25,0.5"


class TestKernelTable:
    HEADER = "t,kernel,half_horizon_kernel,tail_integral,trunc_norm_sq,shrunk_norm_sq"

    def test_interior_rows_and_values(self):
        kern = GirsanovKernel(drift=1.0, horizon=1.0, hurst=0.75)
        lines = kernel_table_csv(kern, TimeGrid(1.0, 8).points).splitlines()
        assert lines[0] == self.HEADER
        assert len(lines) == 8  # endpoints are skipped
        row = {float(ln.split(",")[0]): ln.split(",") for ln in lines[1:]}
        mid = row[0.5]
        assert float(mid[1]) == kern(0.5)
        assert float(mid[2]) == 0.0  # half-horizon kernel undefined at its own edge
        quarter = row[0.25]
        assert float(quarter[2]) == kern.shrink(0.5)(0.25)
        assert float(quarter[3]) == kern.tail_integral(0.25)
        assert 0.0 < float(quarter[4]) < kern.norm_sq

    def test_zero_drift_table_is_zero(self):
        kern = GirsanovKernel(drift=0.0, horizon=1.0, hurst=0.75)
        lines = kernel_table_csv(kern, TimeGrid(1.0, 8).points).splitlines()
        for line in lines[1:]:
            assert all(float(cell) == 0.0 for cell in line.split(",")[1:])


class TestSolutionSummary:
    def test_reference_summary_document(self, reference_solution):
        text = solution_summary_json(reference_solution)
        record = json.loads(text)
        assert list(record) == [
            "multiplier",
            "budget_residual",
            "kernel_norm_sq",
            "terminal_budget_term",
            "running_budget_terms",
            "expected_terminal_payout",
            "players",
            "terminal_only",
        ]
        assert record["multiplier"] == reference_solution.multiplier
        assert record["players"] == 1
        assert record["terminal_only"] is True
        # Terminal-only games still report one (zero) running term per player.
        assert record["running_budget_terms"] == [0.0]

    def test_two_player_summary_document(self, two_player_solution):
        record = json.loads(solution_summary_json(two_player_solution))
        assert record["terminal_only"] is False
        assert record["players"] == 2
        assert len(record["running_budget_terms"]) == 2
        assert all(v > 0 for v in record["running_budget_terms"])


# --------------------------------------------------------------------- #
# figures
# --------------------------------------------------------------------- #


class TestFigures:
    def _assert_renders(self, fig, tmp_path, name):
        from matplotlib.figure import Figure

        from fbmgame.plots import save_figure

        assert isinstance(fig, Figure)
        target = tmp_path / name
        save_figure(fig, str(target))
        assert target.stat().st_size > 0

    def test_figure_paths(self, tmp_path):
        from fbmgame.plots import figure_paths

        paths = generate_paths(TimeGrid(1.0, 8), 0.75, 2, seed=3)
        self._assert_renders(figure_paths(paths), tmp_path, "paths.png")

    def test_figure_kernel(self, tmp_path):
        from fbmgame.plots import figure_kernel

        kern = GirsanovKernel(drift=1.0, horizon=1.0, hurst=0.75)
        self._assert_renders(figure_kernel(kern, 16), tmp_path, "kernel.png")

    def test_figure_reports(self, tmp_path):
        from fbmgame.plots import figure_reports

        self._assert_renders(figure_reports(_sample_reports()), tmp_path, "reports.png")

    def test_figure_traces(self, tmp_path):
        from fbmgame.plots import figure_traces

        grid = TimeGrid(1.0, 4)
        trace = StrategyTrace(
            grid=grid,
            drift_controls=np.ones((5, 1)),
            discounted_aggregate=np.array([np.nan, 1.0, 1.0, 1.0, np.nan]),
            noise_controls=np.ones((5, 1)),
            terminal_value=1.0,
        )
        self._assert_renders(figure_traces([trace]), tmp_path, "traces.png")


# --------------------------------------------------------------------- #
# command-line interface
# --------------------------------------------------------------------- #


class TestCliSolve:
    def test_writes_outputs_and_summary_line(self, tmp_path, capsys):
        out = tmp_path / "solve_out"
        rc = main([
            "solve", REFERENCE, "--grid", "16", "--sample-paths", "1",
            "--out", str(out),
        ])
        assert rc == 0
        captured = capsys.readouterr()
        summary_line = captured.out.splitlines()[0].split()
        assert summary_line[0] == "multiplier"
        assert math.isclose(float(summary_line[1]), 1.6628059538404258, rel_tol=1e-10)
        assert summary_line[2] == "residual"
        assert abs(float(summary_line[3])) <= 1e-10
        assert captured.out.count("wrote ") == 4
        for name in ("solution.json", "trace_1.csv", "wealth_1.csv", "traces.png"):
            assert (out / name).exists()
        record = json.loads((out / "solution.json").read_text("utf-8"))
        assert math.isclose(record["multiplier"], 1.6628059538404258, rel_tol=1e-10)
        wealth_lines = (out / "wealth_1.csv").read_text("utf-8").splitlines()
        assert wealth_lines[0] == "t,wealth"
        assert len(wealth_lines) == 18
        assert float(wealth_lines[1].split(",")[1]) == 1.0  # starts at the budget

    def test_two_player_trace_columns(self, tmp_path, capsys):
        out = tmp_path / "solve_two"
        rc = main([
            "solve", TWO_PLAYER, "--grid", "16", "--sample-paths", "1",
            "--out", str(out),
        ])
        assert rc == 0
        trace_lines = (out / "trace_1.csv").read_text("utf-8").splitlines()
        assert trace_lines[0] == "t,u_1,u_2,aggregate_v,v_1,v_2"
        assert len(trace_lines) == 18

    def test_reruns_are_byte_identical(self, tmp_path, capsys):
        outputs = []
        for sub in ("first", "second"):
            out = tmp_path / sub
            assert main([
                "solve", REFERENCE, "--grid", "16", "--sample-paths", "1",
                "--out", str(out),
            ]) == 0
            outputs.append(out)
        for name in ("solution.json", "trace_1.csv", "wealth_1.csv"):
            assert (outputs[0] / name).read_bytes() == (outputs[1] / name).read_bytes()

    def test_zero_sample_paths(self, tmp_path, capsys):
        out = tmp_path / "solve_none"
        rc = main(["solve", REFERENCE, "--grid", "16", "--sample-paths", "0", "--out", str(out)])
        assert rc == 0
        assert (out / "solution.json").exists()
        assert not (out / "trace_1.csv").exists()
        assert not (out / "traces.png").exists()


class TestCliPaths:
    def test_writes_csv_and_figure(self, tmp_path, capsys):
        out = tmp_path / "paths_out"
        rc = main(["paths", REFERENCE, "--grid", "8", "--paths", "3", "--out", str(out)])
        assert rc == 0
        lines = (out / "paths.csv").read_text("utf-8").splitlines()
        assert lines[0] == "t,path_1,path_2,path_3"
        assert len(lines) == 10
        assert (out / "paths.png").exists()
        # One `t,value` file per path, named by its stream index.
        for stream in (0, 1, 2):
            per_path = (out / f"path_{stream}.csv").read_text("utf-8").splitlines()
            assert per_path[0] == "t,value"
            assert len(per_path) == 10
            assert per_path[-1].split(",")[1] == lines[-1].split(",")[stream + 1]

    def test_seed_override_changes_samples(self, tmp_path, capsys):
        texts = []
        for seed in ("11", "12"):
            out = tmp_path / f"seed_{seed}"
            assert main([
                "paths", REFERENCE, "--grid", "8", "--paths", "2",
                "--seed", seed, "--out", str(out),
            ]) == 0
            texts.append((out / "paths.csv").read_text("utf-8"))
        assert texts[0] != texts[1]


class TestCliVerify:
    def test_subset_runs_and_reports(self, tmp_path, capsys):
        out = tmp_path / "verify_out"
        rc = main([
            "verify", REFERENCE, "--grid", "32", "--paths", "400",
            "--out", str(out), "--checks", "wick_mean", "brownian_limit",
        ])
        assert rc == 0
        captured = capsys.readouterr()
        assert "PASS: all 6 checks passed" in captured.out
        assert captured.out.startswith("status  check")
        for name in ("report.jsonl", "report.csv", "report.txt", "verification.png"):
            assert (out / name).exists()
        reports = reports_from_jsonl((out / "report.jsonl").read_text("utf-8"))
        assert [r.name for r in reports[:3]] == [
            "wick_mean(indicator)",
            "wick_mean(drift_kernel)",
            "wick_mean(half_horizon_kernel)",
        ]
        assert all(r.name.startswith("brownian_limit") for r in reports[3:])
        assert all(r.passed for r in reports)

    def test_reruns_are_byte_identical(self, tmp_path, capsys):
        outputs = []
        for sub in ("first", "second"):
            out = tmp_path / sub
            assert main([
                "verify", REFERENCE, "--grid", "32", "--paths", "400",
                "--out", str(out), "--checks", "wick_mean",
            ]) == 0
            outputs.append(out)
        assert (outputs[0] / "report.jsonl").read_bytes() == (outputs[1] / "report.jsonl").read_bytes()

    def test_unknown_check_is_input_error(self, tmp_path, capsys):
        rc = main([
            "verify", REFERENCE, "--out", str(tmp_path / "x"), "--checks", "bogus",
        ])
        assert rc == 2
        err = capsys.readouterr().err
        assert err.startswith("error[input]:")
        assert "unknown checks: bogus" in err


class TestCliKernel:
    def test_reference_kernel_table(self, tmp_path, capsys):
        out = tmp_path / "kernel_out"
        rc = main(["kernel", REFERENCE, "--grid", "8", "--out", str(out)])
        assert rc == 0
        lines = (out / "kernel.csv").read_text("utf-8").splitlines()
        assert lines[0] == TestKernelTable.HEADER
        assert len(lines) == 8
        kern = GirsanovKernel(drift=1.0, horizon=1.0, hurst=0.75)
        mid = [ln for ln in lines[1:] if float(ln.split(",")[0]) == 0.5][0]
        assert float(mid.split(",")[1]) == kern(0.5)
        assert (out / "kernel.png").exists()

    def test_zero_drift_scenario(self, tmp_path, capsys):
        payload = _payload("reference_scenario.json")
        payload["game"]["C"] = 0.0
        scenario_file = tmp_path / "driftless.json"
        scenario_file.write_text(json.dumps(payload), encoding="utf-8")
        out = tmp_path / "kernel_zero"
        rc = main(["kernel", str(scenario_file), "--grid", "8", "--out", str(out)])
        assert rc == 0
        lines = (out / "kernel.csv").read_text("utf-8").splitlines()
        for line in lines[1:]:
            assert all(float(cell) == 0.0 for cell in line.split(",")[1:])


class TestCliErrors:
    def test_missing_file(self, tmp_path, capsys):
        rc = main(["solve", str(tmp_path / "missing.json")])
        assert rc == 2
        assert capsys.readouterr().err.startswith("error[input]: file:")

    def test_invalid_scenario(self, tmp_path, capsys):
        payload = _payload()
        payload["game"]["H"] = 0.5
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(payload), encoding="utf-8")
        rc = main(["solve", str(bad)])
        assert rc == 2
        assert "game.H" in capsys.readouterr().err

    def test_bad_tolerance_is_input_error(self, tmp_path, capsys):
        rc = main(["solve", REFERENCE, "--grid", "16", "--tol", "2.0", "--out", str(tmp_path / "x")])
        assert rc == 2
        assert capsys.readouterr().err.startswith("error[input]:")

    def test_missing_subcommand_exits(self):
        with pytest.raises(SystemExit):
            main([])

    def test_unknown_method_exits(self):
        with pytest.raises(SystemExit):
            main(["paths", REFERENCE, "--method", "fourier"])
