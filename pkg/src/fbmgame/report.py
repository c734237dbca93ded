"""Report and trace emitters: JSON-lines, CSV, aligned tables.

Machine formats print every number with 17 significant digits so that
floats round-trip exactly and repeated runs under the same seed produce
byte-identical files.  JSON-lines records are assembled manually with a
fixed field order for the same reason.
"""

from __future__ import annotations

import json
import math
from typing import Iterable, Sequence

import numpy as np

from .equilibrium import EquilibriumSolution, StrategyTrace
from .fbm import FbmPath
from .girsanov import GirsanovKernel
from .verify import McReport

__all__ = [
    "fmt17",
    "reports_to_jsonl",
    "reports_from_jsonl",
    "reports_to_csv",
    "reports_to_table",
    "trace_to_csv",
    "path_to_csv",
    "paths_to_csv",
    "function_table_csv",
    "kernel_table_csv",
    "solution_summary_json",
]


def fmt17(value: float) -> str:
    """17-significant-digit decimal form; lossless for binary64."""
    v = float(value)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, ".17g")


_REPORT_FIELDS = ("name", "estimate", "target", "stderr", "allowance",
                  "passed", "samples", "grid_cells", "seed")


def reports_to_jsonl(reports: Sequence[McReport]) -> str:
    """One fixed-order JSON object per line."""
    lines = []
    for r in reports:
        parts = [
            f'"name": {json.dumps(r.name)}',
            f'"estimate": {fmt17(r.estimate)}',
            f'"target": {fmt17(r.target)}',
            f'"stderr": {fmt17(r.stderr)}',
            f'"allowance": {fmt17(r.allowance)}',
            f'"passed": {"true" if r.passed else "false"}',
            f'"samples": {r.samples}',
            f'"grid_cells": {r.grid_cells}',
            f'"seed": {r.seed}',
        ]
        lines.append("{" + ", ".join(parts) + "}")
    return "\n".join(lines) + ("\n" if lines else "")


def reports_from_jsonl(text: str) -> list[McReport]:
    """Inverse of reports_to_jsonl."""
    out = []
    for line in text.splitlines():
        if not line.strip():
            continue
        record = json.loads(line)
        out.append(
            McReport(
                name=record["name"],
                estimate=float(record["estimate"]),
                target=float(record["target"]),
                stderr=float(record["stderr"]),
                allowance=float(record["allowance"]),
                passed=bool(record["passed"]),
                samples=int(record["samples"]),
                grid_cells=int(record["grid_cells"]),
                seed=int(record["seed"]),
            )
        )
    return out


def reports_to_csv(reports: Sequence[McReport]) -> str:
    rows = [",".join(_REPORT_FIELDS)]
    for r in reports:
        rows.append(
            ",".join(
                [
                    r.name,
                    fmt17(r.estimate),
                    fmt17(r.target),
                    fmt17(r.stderr),
                    fmt17(r.allowance),
                    "true" if r.passed else "false",
                    str(r.samples),
                    str(r.grid_cells),
                    str(r.seed),
                ]
            )
        )
    return "\n".join(rows) + "\n"


def reports_to_table(reports: Sequence[McReport]) -> str:
    """Human-readable column-aligned summary."""
    header = ("status", "check", "estimate", "target", "4*stderr", "allowance")
    rows = [header]
    for r in reports:
        rows.append(
            (
                "PASS" if r.passed else "FAIL",
                r.name,
                f"{r.estimate:+.6g}",
                f"{r.target:+.6g}",
                f"{4.0 * r.stderr:.3g}",
                f"{r.allowance:.3g}",
            )
        )
    widths = [max(len(row[k]) for row in rows) for k in range(len(header))]
    lines = []
    for i, row in enumerate(rows):
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def trace_to_csv(trace: StrategyTrace) -> str:
    """Strategy trace as `t,u_1,...,u_N,aggregate_v,v_1,...,v_N`."""
    count = trace.drift_controls.shape[1]
    header = (
        ["t"]
        + [f"u_{i + 1}" for i in range(count)]
        + ["aggregate_v"]
        + [f"v_{i + 1}" for i in range(count)]
    )
    rows = [",".join(header)]
    for j, t in enumerate(trace.grid.points):
        cells = [fmt17(t)]
        cells += [fmt17(trace.drift_controls[j, i]) for i in range(count)]
        cells.append(fmt17(trace.discounted_aggregate[j]))
        cells += [fmt17(trace.noise_controls[j, i]) for i in range(count)]
        rows.append(",".join(cells))
    return "\n".join(rows) + "\n"


def path_to_csv(path: FbmPath) -> str:
    """One sampled path as `t,value` rows, one per grid point."""
    rows = ["t,value"]
    for t, v in zip(path.grid.points, path.values):
        rows.append(f"{fmt17(t)},{fmt17(v)}")
    return "\n".join(rows) + "\n"


def paths_to_csv(paths: Sequence[FbmPath]) -> str:
    """Sampled paths side by side as `t,path_1,...,path_k`."""
    if not paths:
        return "t\n"
    header = ["t"] + [f"path_{k + 1}" for k in range(len(paths))]
    rows = [",".join(header)]
    for j, t in enumerate(paths[0].grid.points):
        rows.append(",".join([fmt17(t)] + [fmt17(p.values[j]) for p in paths]))
    return "\n".join(rows) + "\n"


def function_table_csv(fn, points: Iterable[float]) -> str:
    """Tabulate a scalar function as `t,value` rows."""
    rows = ["t,value"]
    for t in points:
        rows.append(f"{fmt17(t)},{fmt17(float(fn(t)))}")
    return "\n".join(rows) + "\n"


def kernel_table_csv(kern: GirsanovKernel, points: Iterable[float]) -> str:
    """Kernel values, the half-horizon shrunk kernel, integral tails and
    truncated norms at interior grid times."""
    from .equilibrium import shrunk_norm_sq

    half = kern.shrink(kern.horizon / 2.0)
    header = "t,kernel,half_horizon_kernel,tail_integral,trunc_norm_sq,shrunk_norm_sq"
    rows = [header]
    for t in points:
        if not 0.0 < t < kern.horizon:
            continue
        inside = half(t) if (kern.drift != 0.0 and t < half.horizon) else 0.0
        rows.append(
            ",".join(
                fmt17(v)
                for v in (
                    t,
                    kern(t),
                    inside,
                    kern.tail_integral(t),
                    kern.trunc_norm_sq(t),
                    shrunk_norm_sq(kern, t),
                )
            )
        )
    return "\n".join(rows) + "\n"


def solution_summary_json(sol: EquilibriumSolution) -> str:
    """Solved-game summary with 17-digit numbers; stable key order."""
    summary = sol.summary()
    game = sol.game
    lines = [
        "{",
        f'  "multiplier": {fmt17(summary["multiplier"])},',
        f'  "budget_residual": {fmt17(summary["budget_residual"])},',
        f'  "kernel_norm_sq": {fmt17(summary["kernel_norm_sq"])},',
        f'  "terminal_budget_term": {fmt17(summary["terminal_budget_term"])},',
        '  "running_budget_terms": ['
        + ", ".join(fmt17(v) for v in summary["running_budget_terms"])
        + "],",
        f'  "expected_terminal_payout": {fmt17(summary["expected_terminal_payout"])},',
        f'  "players": {game.count},',
        f'  "terminal_only": {"true" if game.terminal_only else "false"}',
        "}",
    ]
    return "\n".join(lines) + "\n"
