"""Scenario files: JSON descriptions of a game plus sampling numerics.

A scenario document has four sections: ``game`` (scalar market and
preference parameters), ``players`` (coefficient and payoff settings per
player), ``numerics`` (grid, path count, seed, tolerances), and
``outputs`` (directory and formats).  Parsing is strict and every
complaint names the offending key, e.g. ``players[0].c``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

from .equilibrium import (
    GameSpec,
    GameValidationError,
    PlayerSpec,
    TimeFunction,
    validate_game,
)

__all__ = [
    "Numerics",
    "OutputSpec",
    "Scenario",
    "ScenarioError",
    "parse_scenario",
    "scenario_from_payload",
    "scenario_to_payload",
    "write_scenario",
]


class ScenarioError(ValueError):
    """Parse or validation failure, localized to named keys."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass(frozen=True)
class Numerics:
    grid_cells: int = 256
    path_count: int = 100_000
    seed: int = 2024
    quad_tol: float = 1e-6
    multiplier_tol: float = 1e-12


@dataclass(frozen=True)
class OutputSpec:
    directory: str = "out"
    formats: tuple[str, ...] = ("jsonl", "csv", "table", "png")


@dataclass(frozen=True)
class Scenario:
    game: GameSpec
    numerics: Numerics = field(default_factory=Numerics)
    outputs: OutputSpec = field(default_factory=OutputSpec)


_KNOWN_FORMATS = ("jsonl", "csv", "table", "png")


def _want(section: dict, key: str, kinds, where: str, problems: list, default=None, required=True):
    if key not in section:
        if required:
            problems.append(f"{where}.{key}: missing required field")
        return default
    value = section[key]
    if kinds is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            problems.append(f"{where}.{key}: expected a number, got {type(value).__name__}")
            return default
        return float(value)
    if kinds is int:
        if isinstance(value, bool) or not isinstance(value, int):
            problems.append(f"{where}.{key}: expected an integer, got {type(value).__name__}")
            return default
        return value
    if kinds is bool:
        if not isinstance(value, bool):
            problems.append(f"{where}.{key}: expected a boolean, got {type(value).__name__}")
            return default
        return value
    if not isinstance(value, kinds):
        problems.append(f"{where}.{key}: unexpected type {type(value).__name__}")
        return default
    return value


def _time_function(payload: Any, where: str, problems: list) -> TimeFunction | None:
    if not isinstance(payload, dict) or len(payload) != 1:
        problems.append(f"{where}: expected an object with exactly one of 'constant' or 'table'")
        return None
    if "constant" in payload:
        value = payload["constant"]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            problems.append(f"{where}.constant: expected a number")
            return None
        return TimeFunction(constant=float(value))
    if "table" in payload:
        rows = payload["table"]
        ok = isinstance(rows, list) and all(
            isinstance(r, list) and len(r) == 2
            and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in r)
            for r in rows
        )
        if not ok:
            problems.append(f"{where}.table: expected a list of [time, value] pairs")
            return None
        try:
            return TimeFunction.table(rows)
        except ValueError as exc:
            problems.append(f"{where}.table: {exc}")
            return None
    problems.append(f"{where}: unknown coefficient form {sorted(payload)!r}")
    return None


def scenario_from_payload(payload: Any) -> Scenario:
    """Build and validate a Scenario from parsed JSON."""
    problems: list[str] = []
    if not isinstance(payload, dict):
        raise ScenarioError(["document: expected a JSON object at the top level"])
    for key in payload:
        if key not in ("game", "players", "numerics", "outputs"):
            problems.append(f"{key}: unknown section")

    game_section = payload.get("game")
    if not isinstance(game_section, dict):
        problems.append("game: missing or not an object")
        game_section = {}
    players_section = payload.get("players")
    if not isinstance(players_section, list) or not players_section:
        problems.append("players: missing or empty array")
        players_section = []

    rate = _want(game_section, "r", float, "game", problems, default=0.0)
    drift = _want(game_section, "C", float, "game", problems, default=0.0)
    horizon = _want(game_section, "T", float, "game", problems, default=1.0)
    hurst = _want(game_section, "H", float, "game", problems, default=0.75)
    budget = _want(game_section, "x", float, "game", problems, default=1.0)
    gamma_prime = _want(game_section, "gamma_prime", float, "game", problems, default=0.5)
    terminal_only = _want(game_section, "terminal_only", bool, "game", problems, default=False, required=False)
    declared_n = _want(game_section, "N", int, "game", problems, default=None, required=False)
    if declared_n is not None and declared_n != len(players_section):
        problems.append(f"game.N: declares {declared_n} players but {len(players_section)} are given")

    players: list[PlayerSpec] = []
    for i, entry in enumerate(players_section):
        where = f"players[{i}]"
        if not isinstance(entry, dict):
            problems.append(f"{where}: expected an object")
            continue
        alpha = _time_function(entry.get("alpha"), f"{where}.alpha", problems)
        beta = _time_function(entry.get("beta"), f"{where}.beta", problems)
        c = _want(entry, "c", float, where, problems, default=1.0)
        b = _want(entry, "b", float, where, problems, default=1.0)
        gamma = _want(entry, "gamma", float, where, problems, default=0.5)
        if alpha is not None and beta is not None:
            players.append(
                PlayerSpec(
                    drift_gain=alpha,
                    noise_gain=beta,
                    running_weight=c,
                    terminal_weight=b,
                    risk_exponent=gamma,
                )
            )

    numerics_section = payload.get("numerics", {})
    if not isinstance(numerics_section, dict):
        problems.append("numerics: expected an object")
        numerics_section = {}
    defaults = Numerics()
    numerics = Numerics(
        grid_cells=_want(numerics_section, "grid", int, "numerics", problems,
                         default=defaults.grid_cells, required=False),
        path_count=_want(numerics_section, "paths", int, "numerics", problems,
                         default=defaults.path_count, required=False),
        seed=_want(numerics_section, "seed", int, "numerics", problems,
                   default=defaults.seed, required=False),
        quad_tol=_want(numerics_section, "quad_tol", float, "numerics", problems,
                       default=defaults.quad_tol, required=False),
        multiplier_tol=_want(numerics_section, "m_tol", float, "numerics", problems,
                             default=defaults.multiplier_tol, required=False),
    )
    if numerics.grid_cells < 2:
        problems.append(f"numerics.grid: need at least 2 cells; got {numerics.grid_cells}")
    if numerics.path_count < 1:
        problems.append(f"numerics.paths: need at least 1 path; got {numerics.path_count}")

    outputs_section = payload.get("outputs", {})
    if not isinstance(outputs_section, dict):
        problems.append("outputs: expected an object")
        outputs_section = {}
    out_defaults = OutputSpec()
    directory = _want(outputs_section, "directory", str, "outputs", problems,
                      default=out_defaults.directory, required=False)
    formats = outputs_section.get("formats", list(out_defaults.formats))
    if not isinstance(formats, list) or not all(isinstance(f, str) for f in formats):
        problems.append("outputs.formats: expected a list of strings")
        formats = list(out_defaults.formats)
    for f in formats:
        if f not in _KNOWN_FORMATS:
            problems.append(f"outputs.formats: unknown format {f!r} (known: {', '.join(_KNOWN_FORMATS)})")

    if problems:
        raise ScenarioError(problems)

    game = GameSpec(
        players=tuple(players),
        rate=rate,
        drift=drift,
        horizon=horizon,
        hurst=hurst,
        terminal_exponent=gamma_prime,
        initial_budget=budget,
        terminal_only=terminal_only,
    )
    try:
        validate_game(game)
    except GameValidationError as exc:
        raise ScenarioError(exc.problems) from exc
    return Scenario(game=game, numerics=numerics, outputs=OutputSpec(directory, tuple(formats)))


def parse_scenario(path: str) -> Scenario:
    """Read and validate a scenario file."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            payload = json.load(handle)
    except OSError as exc:
        raise ScenarioError([f"file: {exc}"]) from exc
    except json.JSONDecodeError as exc:
        raise ScenarioError([f"file: not valid JSON ({exc})"]) from exc
    return scenario_from_payload(payload)


def _coefficient_payload(fn: TimeFunction) -> dict:
    if fn.constant is not None:
        return {"constant": fn.constant}
    return {"table": [[t, v] for t, v in fn.knots]}


def scenario_to_payload(scenario: Scenario) -> dict:
    """Inverse of scenario_from_payload; round-trips all semantic fields."""
    game = scenario.game
    payload = {
        "game": {
            "N": game.count,
            "r": game.rate,
            "C": game.drift,
            "T": game.horizon,
            "H": float(game.hurst),
            "x": game.initial_budget,
            "gamma_prime": game.terminal_exponent,
            "terminal_only": game.terminal_only,
        },
        "players": [
            {
                "alpha": _coefficient_payload(p.drift_gain),
                "beta": _coefficient_payload(p.noise_gain),
                "c": p.running_weight,
                "b": p.terminal_weight,
                "gamma": p.risk_exponent,
            }
            for p in game.players
        ],
        "numerics": {
            "grid": scenario.numerics.grid_cells,
            "paths": scenario.numerics.path_count,
            "seed": scenario.numerics.seed,
            "quad_tol": scenario.numerics.quad_tol,
            "m_tol": scenario.numerics.multiplier_tol,
        },
        "outputs": {
            "directory": scenario.outputs.directory,
            "formats": list(scenario.outputs.formats),
        },
    }
    return payload


def write_scenario(scenario: Scenario, path: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(scenario_to_payload(scenario), handle, indent=2)
        handle.write("\n")
