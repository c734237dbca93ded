"""Figure rendering for the CLI report paths (headless matplotlib)."""

from __future__ import annotations

from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .equilibrium import StrategyTrace, shrunk_norm_sq
from .fbm import FbmPath
from .girsanov import GirsanovKernel
from .verify import McReport

__all__ = ["figure_paths", "figure_kernel", "figure_reports", "figure_traces", "save_figure"]


def save_figure(fig, path: str, dpi: int = 120) -> None:
    fig.savefig(path, dpi=dpi, bbox_inches="tight")
    plt.close(fig)


def figure_paths(paths: Sequence[FbmPath]) -> "plt.Figure":
    fig, ax = plt.subplots(figsize=(7, 4))
    for p in paths:
        ax.plot(p.grid.points, p.values, lw=0.8, alpha=0.8)
    ax.set_xlabel("time")
    ax.set_ylabel("path value")
    ax.set_title(f"fractional Brownian paths (H={paths[0].hurst:g})" if paths else "no paths")
    ax.grid(True, alpha=0.3)
    return fig


def figure_kernel(kern: GirsanovKernel, cells: int = 256) -> "plt.Figure":
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    interior = kern.horizon * np.linspace(0.0, 1.0, cells + 1)[1:-1]
    ax1.plot(interior, kern(interior), label="drift-removal kernel")
    half = kern.shrink(kern.horizon / 2.0)
    short = interior[interior < half.horizon]
    if kern.drift != 0.0 and short.size:
        ax1.plot(short, half(short), "--", label="half-horizon kernel")
    ax1.set_xlabel("time")
    ax1.set_ylabel("kernel value")
    ax1.legend()
    ax1.grid(True, alpha=0.3)
    full = kern.horizon * np.linspace(0.0, 1.0, 201)
    ax2.plot(full, [kern.trunc_norm_sq(t) for t in full], label="truncated norm (sq)")
    ax2.plot(full, shrunk_norm_sq(kern, full), "--", label="shrunk-horizon norm (sq)")
    ax2.set_xlabel("time")
    ax2.legend()
    ax2.grid(True, alpha=0.3)
    fig.suptitle("measure-change kernel and norm caches")
    return fig


def figure_reports(reports: Sequence[McReport]) -> "plt.Figure":
    fig, ax = plt.subplots(figsize=(8, 0.35 * max(len(reports), 4) + 1.5))
    names = [r.name for r in reports]
    deviation = [abs(r.estimate - r.target) for r in reports]
    budget = [4.0 * r.stderr + r.allowance for r in reports]
    y = np.arange(len(reports))
    floor = 1e-18
    ax.barh(y, np.maximum(budget, floor), color="#c8e6c9", label="tolerance (4·stderr + allowance)")
    colors = ["#2e7d32" if r.passed else "#c62828" for r in reports]
    ax.scatter(np.maximum(deviation, floor), y, color=colors, zorder=3, s=18, label="|estimate − target|")
    ax.set_yticks(y)
    ax.set_yticklabels(names, fontsize=7)
    ax.set_xscale("log")
    ax.invert_yaxis()
    ax.set_xlabel("absolute deviation (log scale)")
    ax.set_title("verification suite")
    ax.legend(loc="lower right", fontsize=7)
    ax.grid(True, axis="x", alpha=0.3)
    return fig


def figure_traces(traces: Sequence[StrategyTrace]) -> "plt.Figure":
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    for k, tr in enumerate(traces):
        pts = tr.grid.points
        for i in range(tr.drift_controls.shape[1]):
            ax1.plot(pts, tr.drift_controls[:, i], lw=0.9, label=f"path {k + 1}, player {i + 1}")
        ax2.plot(pts, tr.discounted_aggregate, lw=0.9, label=f"path {k + 1}")
    ax1.set_ylabel("drift controls")
    ax1.grid(True, alpha=0.3)
    if traces and traces[0].drift_controls.shape[1] * len(traces) <= 8:
        ax1.legend(fontsize=7)
    ax2.set_ylabel("discounted aggregate noise control")
    ax2.set_xlabel("time")
    ax2.grid(True, alpha=0.3)
    if len(traces) <= 8:
        ax2.legend(fontsize=7)
    fig.suptitle("equilibrium strategy traces")
    return fig
