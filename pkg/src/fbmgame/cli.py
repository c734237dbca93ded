"""Command-line front end: solve, paths, verify, kernel.

Every command reads a scenario file, applies flag overrides, writes its
delimited outputs (and figures, when the scenario asks for "png") into
the output directory, and exits 0 on success, 1 if a verification check
failed, 2 on input errors, 3 on numerical failures.  Errors print a
single machine-parsable line ``error[<class>]: <message>`` on stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

import numpy as np

from .equilibrium import (
    GameValidationError,
    SolverError,
    solve_multiplier,
    simulate_wealth,
    strategy_trace,
)
from .fbm import EmbeddingError, TimeGrid, generate_paths
from .report import (
    fmt17,
    kernel_table_csv,
    path_to_csv,
    paths_to_csv,
    reports_to_csv,
    reports_to_jsonl,
    reports_to_table,
    solution_summary_json,
    trace_to_csv,
)
from .scenario import Scenario, ScenarioError, parse_scenario
from .singular_calculus import QuadratureError
from .verify import VerifyConfig, run_suite

__all__ = ["main"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fbmgame",
        description="Long-memory stochastic game: solve equilibria, sample paths, verify identities.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("solve", "solve the game and write summary plus strategy traces"),
        ("paths", "write sampled fractional Brownian paths"),
        ("verify", "run the Monte Carlo verification suite"),
        ("kernel", "tabulate the drift-removal kernel and its norm caches"),
    ):
        cmd = sub.add_parser(name, help=text)
        cmd.add_argument("scenario", help="scenario JSON file")
        cmd.add_argument("--seed", type=int, default=None, help="override the master seed")
        cmd.add_argument("--grid", type=int, default=None, help="override the grid cell count")
        cmd.add_argument("--paths", type=int, default=None, help="override the sample path count")
        cmd.add_argument(
            "--method", choices=("cholesky", "circulant"), default=None,
            help="path synthesis method",
        )
        cmd.add_argument("--out", default=None, help="override the output directory")
        cmd.add_argument("--tol", type=float, default=None, help="override the multiplier tolerance")
        if name == "solve":
            cmd.add_argument(
                "--sample-paths", type=int, default=2,
                help="number of simulated paths to trace (default 2)",
            )
        if name == "verify":
            cmd.add_argument(
                "--checks", nargs="*", default=None,
                help="subset of check groups to run (default: all)",
            )
    return parser


def _apply_overrides(scenario: Scenario, args: argparse.Namespace) -> Scenario:
    numerics = scenario.numerics
    if args.seed is not None:
        numerics = dataclasses.replace(numerics, seed=args.seed)
    if args.grid is not None:
        numerics = dataclasses.replace(numerics, grid_cells=args.grid)
    if args.paths is not None:
        numerics = dataclasses.replace(numerics, path_count=args.paths)
    if args.tol is not None:
        numerics = dataclasses.replace(numerics, multiplier_tol=args.tol)
    outputs = scenario.outputs
    if args.out is not None:
        outputs = dataclasses.replace(outputs, directory=args.out)
    return dataclasses.replace(scenario, numerics=numerics, outputs=outputs)


def _write(directory: str, name: str, text: str) -> str:
    path = os.path.join(directory, name)
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(text)
    return path


def _method(args: argparse.Namespace) -> str:
    return args.method or "circulant"


def _run_solve(scenario: Scenario, args: argparse.Namespace) -> int:
    game = scenario.game
    out = scenario.outputs.directory
    os.makedirs(out, exist_ok=True)
    sol = solve_multiplier(game, tol=scenario.numerics.multiplier_tol)
    written = [_write(out, "solution.json", solution_summary_json(sol))]

    grid = TimeGrid(game.horizon, scenario.numerics.grid_cells)
    count = max(0, args.sample_paths)
    paths = generate_paths(
        grid, float(game.hurst), count, seed=scenario.numerics.seed, method=_method(args)
    )
    traces = []
    for k, path in enumerate(paths):
        trace = strategy_trace(sol, path, rel_tol=scenario.numerics.quad_tol)
        traces.append(trace)
        written.append(_write(out, f"trace_{k + 1}.csv", trace_to_csv(trace)))
        wealth = simulate_wealth(sol, trace, path)
        rows = ["t,wealth"] + [
            f"{fmt17(t)},{fmt17(w)}" for t, w in zip(grid.points, wealth)
        ]
        written.append(_write(out, f"wealth_{k + 1}.csv", "\n".join(rows) + "\n"))
    if "png" in scenario.outputs.formats and traces:
        from .plots import figure_traces, save_figure

        fig_path = os.path.join(out, "traces.png")
        save_figure(figure_traces(traces), fig_path)
        written.append(fig_path)
    print(f"multiplier {fmt17(sol.multiplier)} residual {fmt17(sol.residual)}")
    for path in written:
        print(f"wrote {path}")
    return 0


def _run_paths(scenario: Scenario, args: argparse.Namespace) -> int:
    game = scenario.game
    out = scenario.outputs.directory
    os.makedirs(out, exist_ok=True)
    count = args.paths if args.paths is not None else 8
    grid = TimeGrid(game.horizon, scenario.numerics.grid_cells)
    paths = generate_paths(
        grid, float(game.hurst), count, seed=scenario.numerics.seed, method=_method(args)
    )
    written = [_write(out, "paths.csv", paths_to_csv(paths))]
    for path in paths:
        written.append(_write(out, f"path_{path.stream}.csv", path_to_csv(path)))
    if "png" in scenario.outputs.formats and paths:
        from .plots import figure_paths, save_figure

        fig_path = os.path.join(out, "paths.png")
        save_figure(figure_paths(paths), fig_path)
        written.append(fig_path)
    for path in written:
        print(f"wrote {path}")
    return 0


def _run_verify(scenario: Scenario, args: argparse.Namespace) -> int:
    game = scenario.game
    out = scenario.outputs.directory
    os.makedirs(out, exist_ok=True)
    cfg = VerifyConfig(
        grid_cells=scenario.numerics.grid_cells,
        path_count=scenario.numerics.path_count,
        master_seed=scenario.numerics.seed,
        method=_method(args),
    )
    reports = run_suite(game, cfg, checks=args.checks)
    written = [_write(out, "report.jsonl", reports_to_jsonl(reports))]
    if "csv" in scenario.outputs.formats:
        written.append(_write(out, "report.csv", reports_to_csv(reports)))
    if "table" in scenario.outputs.formats:
        written.append(_write(out, "report.txt", reports_to_table(reports)))
    if "png" in scenario.outputs.formats and reports:
        from .plots import figure_reports, save_figure

        fig_path = os.path.join(out, "verification.png")
        save_figure(figure_reports(reports), fig_path)
        written.append(fig_path)
    sys.stdout.write(reports_to_table(reports))
    for path in written:
        print(f"wrote {path}")
    failed = [r for r in reports if not r.passed]
    if failed:
        print(f"FAIL: {len(failed)} of {len(reports)} checks failed")
        return 1
    print(f"PASS: all {len(reports)} checks passed")
    return 0


def _run_kernel(scenario: Scenario, args: argparse.Namespace) -> int:
    game = scenario.game
    out = scenario.outputs.directory
    os.makedirs(out, exist_ok=True)
    kern = game.kernel()
    grid = TimeGrid(game.horizon, scenario.numerics.grid_cells)
    written = [_write(out, "kernel.csv", kernel_table_csv(kern, grid.points))]
    if "png" in scenario.outputs.formats:
        from .plots import figure_kernel, save_figure

        fig_path = os.path.join(out, "kernel.png")
        save_figure(figure_kernel(kern, scenario.numerics.grid_cells), fig_path)
        written.append(fig_path)
    for path in written:
        print(f"wrote {path}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        scenario = _apply_overrides(parse_scenario(args.scenario), args)
        if args.command == "solve":
            return _run_solve(scenario, args)
        if args.command == "paths":
            return _run_paths(scenario, args)
        if args.command == "verify":
            return _run_verify(scenario, args)
        if args.command == "kernel":
            return _run_kernel(scenario, args)
        raise ValueError(f"unknown command {args.command!r}")
    except (ScenarioError, GameValidationError, FileNotFoundError, ValueError) as exc:
        sys.stderr.write(f"error[input]: {exc}\n")
        return 2
    except (SolverError, QuadratureError, EmbeddingError, np.linalg.LinAlgError, ArithmeticError) as exc:
        sys.stderr.write(f"error[numeric]: {exc}\n")
        return 3


if __name__ == "__main__":
    sys.exit(main())
