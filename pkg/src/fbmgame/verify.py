"""Monte Carlo and oracle verification harness.

Every closed-form identity used by the solver is re-tested here by
simulation against exactly sampled paths.  Each check reports estimate,
target, Monte Carlo standard error, and a discretization allowance
measured from a coupled grid-refinement pair (the same Gaussian draws
generate the fine grid and, by pairwise summation, the coarse grid), and
passes iff |estimate - target| <= 4 * stderr + allowance.  Checks draw
from disjoint random streams derived from their names, so the suite is
deterministic and order-independent.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .equilibrium import (
    EquilibriumSolution,
    GameSpec,
    equilibrium_control,
    expected_terminal_payout,
    pointwise_objective,
    projected_running_power,
    projected_terminal_power,
    shrunk_norm_sq,
    solve_multiplier,
    terminal_payout,
)
from .fbm import (
    FbmPath,
    TimeGrid,
    autocov,
    coarsen_increments,
    generate_increment_matrix,
    increments,
)
from .girsanov import (
    GirsanovKernel,
    kernel_cell_averages,
    running_density,
    shrunk_cell_matrix,
    terminal_density,
)

__all__ = [
    "McReport",
    "VerifyConfig",
    "check_fbm_covariance",
    "check_wick_mean",
    "check_density_moments",
    "check_projection",
    "check_budget_slackness",
    "check_terminal_moment",
    "check_argmax",
    "check_endpoint_consistency",
    "check_brownian_limit",
    "run_suite",
    "CHECK_NAMES",
]


@dataclass(frozen=True)
class McReport:
    """One verification result; `passed` restates the tolerance rule."""

    name: str
    estimate: float
    target: float
    stderr: float
    allowance: float
    passed: bool
    samples: int
    grid_cells: int
    seed: int

    @staticmethod
    def build(name, estimate, target, stderr, allowance, samples, grid_cells, seed) -> "McReport":
        passed = abs(estimate - target) <= 4.0 * stderr + allowance
        return McReport(
            name=name,
            estimate=float(estimate),
            target=float(target),
            stderr=float(stderr),
            allowance=float(allowance),
            passed=bool(passed),
            samples=int(samples),
            grid_cells=int(grid_cells),
            seed=int(seed),
        )


@dataclass(frozen=True)
class VerifyConfig:
    """Suite-wide sampling parameters."""

    grid_cells: int = 256
    path_count: int = 100_000
    master_seed: int = 2024
    batch_size: int = 20_000
    method: str = "circulant"
    endpoint_paths: int = 1_000
    argmax_pairs: int = 100
    argmax_alternatives: int = 20


def _stream_base(name: str) -> int:
    """Disjoint 64-bit stream block per check name (stable across runs)."""
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return int.from_bytes(digest[:5], "big") << 20


class _Accumulator:
    """Streaming mean / standard-error over path batches."""

    def __init__(self) -> None:
        self.count = 0
        self.total = 0.0
        self.total_sq = 0.0

    def add(self, values: np.ndarray) -> None:
        self.count += values.size
        self.total += float(values.sum())
        self.total_sq += float((values * values).sum())

    @property
    def mean(self) -> float:
        return self.total / self.count

    @property
    def stderr(self) -> float:
        var = max(self.total_sq / self.count - self.mean**2, 0.0)
        return math.sqrt(var / self.count)


def _coupled_batches(cfg: VerifyConfig, name: str, hurst: float, horizon: float, count: int | None = None):
    """Yield (fine, coarse) increment matrices from one stream: the fine
    grid has twice the cells; pairwise sums give the coarse increments,
    so both resolutions see the same Brownian randomness."""
    fine_grid = TimeGrid(horizon, 2 * cfg.grid_cells)
    base = _stream_base(name)
    remaining = cfg.path_count if count is None else count
    j = 0
    while remaining > 0:
        take = min(cfg.batch_size, remaining)
        fine = generate_increment_matrix(
            fine_grid, hurst, take, seed=cfg.master_seed, base_stream=base + j, method=cfg.method
        )
        yield fine, coarsen_increments(fine)
        remaining -= take
        j += 1


def _paired_report(
    name: str,
    target: float,
    per_path: Callable[[np.ndarray, TimeGrid], np.ndarray],
    cfg: VerifyConfig,
    hurst: float,
    horizon: float,
) -> McReport:
    """Estimate a path functional at the working grid and at its
    refinement; allowance = 2x the paired difference (covers first-order
    Riemann bias)."""
    coarse_grid = TimeGrid(horizon, cfg.grid_cells)
    fine_grid = TimeGrid(horizon, 2 * cfg.grid_cells)
    acc_c, acc_f = _Accumulator(), _Accumulator()
    for fine, coarse in _coupled_batches(cfg, name, hurst, horizon):
        acc_c.add(per_path(coarse, coarse_grid))
        acc_f.add(per_path(fine, fine_grid))
    allowance = 2.0 * abs(acc_c.mean - acc_f.mean)
    return McReport.build(
        name, acc_c.mean, target, acc_c.stderr, allowance,
        acc_c.count, cfg.grid_cells, cfg.master_seed,
    )


# ------------------------------------------------------------------ #
# individual checks
# ------------------------------------------------------------------ #

_COV_PAIRS = ((0.25, 0.25), (0.5, 0.5), (1.0, 1.0), (0.25, 0.5), (0.25, 1.0), (0.5, 1.0))


def check_fbm_covariance(game: GameSpec, cfg: VerifyConfig) -> list[McReport]:
    """Sample covariance at fixed time pairs vs the two-parameter power
    law, at the game's Hurst exponent and at the Brownian value 1/2."""
    reports = []
    horizon = game.horizon
    pair_times = [(s * horizon, t * horizon) for s, t in _COV_PAIRS]

    def run(name: str, hurst: float, pairs) -> None:
        grid = TimeGrid(horizon, cfg.grid_cells)
        idx = [(grid.index_of(s), grid.index_of(t)) for s, t in pairs]
        accs = [_Accumulator() for _ in pairs]
        for fine, coarse in _coupled_batches(cfg, name, hurst, horizon):
            values = np.cumsum(coarse, axis=1)
            for acc, (i, j) in zip(accs, idx):
                acc.add(values[:, i - 1] * values[:, j - 1])
        for acc, (s, t) in zip(accs, pairs):
            target = autocov(s, t, hurst)
            reports.append(
                McReport.build(
                    f"{name}(s={s:g},t={t:g})", acc.mean, target, acc.stderr, 0.0,
                    acc.count, cfg.grid_cells, cfg.master_seed,
                )
            )

    run("fbm_covariance", float(game.hurst), pair_times)
    run("brownian_covariance", 0.5, [(0.5 * horizon, 1.0 * horizon)])
    return reports


def check_wick_mean(game: GameSpec, cfg: VerifyConfig) -> list[McReport]:
    """Renormalized exponentials of kernel integrals have unit mean."""
    kern = game.kernel()
    horizon = game.horizon
    hurst = float(game.hurst)
    cases: list[tuple[str, Callable[[TimeGrid], np.ndarray], float]] = [
        (
            "wick_mean(indicator)",
            lambda grid: np.ones(grid.cells),
            horizon ** (2.0 * hurst),
        ),
        (
            "wick_mean(drift_kernel)",
            lambda grid: kernel_cell_averages(kern, grid),
            kern.norm_sq,
        ),
        (
            "wick_mean(half_horizon_kernel)",
            lambda grid: kernel_cell_averages(kern.shrink(horizon / 2.0), grid),
            kern.shrink(horizon / 2.0).norm_sq,
        ),
    ]
    reports = []
    for name, avg_fn, norm_sq in cases:
        def per_path(incr: np.ndarray, grid: TimeGrid, avg_fn=avg_fn, norm_sq=norm_sq) -> np.ndarray:
            return np.exp(incr @ avg_fn(grid) - 0.5 * norm_sq)

        reports.append(_paired_report(name, 1.0, per_path, cfg, hurst, horizon))
    return reports


def check_density_moments(game: GameSpec, cfg: VerifyConfig) -> list[McReport]:
    """Negative powers of the terminal density against lognormal moments."""
    kern = game.kernel()
    gp = game.terminal_exponent
    reports = []
    for power in (1.0 / (gp - 1.0), gp / (gp - 1.0)):
        target = math.exp(0.5 * (power * power - power) * kern.norm_sq)
        name = f"density_moment(power={power:g})"

        def per_path(incr: np.ndarray, grid: TimeGrid, power=power) -> np.ndarray:
            avgs = kernel_cell_averages(kern, grid)
            eta = np.exp(-(incr @ avgs) - 0.5 * kern.norm_sq)
            return eta**power

        reports.append(_paired_report(name, target, per_path, cfg, float(game.hurst), game.horizon))
    return reports


def check_projection(game: GameSpec, cfg: VerifyConfig) -> list[McReport]:
    """Correlation of an early path value with the terminal and running
    densities equals minus drift times the early time."""
    kern = game.kernel()
    horizon = game.horizon
    t_mid, t_early = 0.5 * horizon, 0.25 * horizon
    target = -game.drift * t_early
    reports = []

    def against_terminal(incr: np.ndarray, grid: TimeGrid) -> np.ndarray:
        avgs = kernel_cell_averages(kern, grid)
        eta = np.exp(-(incr @ avgs) - 0.5 * kern.norm_sq)
        early = np.cumsum(incr, axis=1)[:, grid.index_of(t_early) - 1]
        return early * eta

    def against_running(incr: np.ndarray, grid: TimeGrid) -> np.ndarray:
        sub = kern.shrink(t_mid)
        m = grid.index_of(t_mid)
        avgs = kernel_cell_averages(sub, grid)[:m]
        rho = np.exp(-(incr[:, :m] @ avgs) - 0.5 * sub.norm_sq)
        early = np.cumsum(incr, axis=1)[:, grid.index_of(t_early) - 1]
        return early * rho

    reports.append(
        _paired_report("projection(noise_vs_terminal)", target, against_terminal, cfg, float(game.hurst), horizon)
    )
    reports.append(
        _paired_report("projection(noise_vs_running)", target, against_running, cfg, float(game.hurst), horizon)
    )
    return reports


def check_budget_slackness(sol: EquilibriumSolution, cfg: VerifyConfig) -> list[McReport]:
    """Importance-sampled budget: density-weighted terminal payout plus
    density-weighted running payments integrates to the initial budget."""
    game = sol.game
    kern = sol.kernel

    def per_path(incr: np.ndarray, grid: TimeGrid) -> np.ndarray:
        pts = grid.points
        rho = np.exp(
            -(incr @ shrunk_cell_matrix(kern, grid).T)
            - 0.5 * shrunk_norm_sq(kern, pts)[None, :]
        )
        eta = rho[:, -1]
        q_prime = game.terminal_exponent / (game.terminal_exponent - 1.0)
        total = (
            sol.multiplier ** game.terminal_power
            * math.exp(-game.rate * game.horizon * q_prime)
            * eta**q_prime
        )
        if not game.terminal_only:
            for i, p in enumerate(game.players):
                coef = sol.running_coefficient(i, pts)
                total = total + np.trapezoid(coef[None, :] * rho ** p.running_power, dx=grid.delta, axis=1)
        return total

    report = _paired_report(
        "budget_slackness", game.initial_budget, per_path, cfg, float(game.hurst), game.horizon
    )
    return [report]


def check_terminal_moment(sol: EquilibriumSolution, cfg: VerifyConfig) -> list[McReport]:
    """Sample mean of the terminal payout vs its closed form."""
    game = sol.game
    kern = sol.kernel
    target = expected_terminal_payout(sol)

    def per_path(incr: np.ndarray, grid: TimeGrid) -> np.ndarray:
        avgs = kernel_cell_averages(kern, grid)
        eta = np.exp(-(incr @ avgs) - 0.5 * kern.norm_sq)
        return sol.terminal_scale() * eta**game.terminal_power

    return [_paired_report("terminal_payout_mean", target, per_path, cfg, float(game.hurst), game.horizon)]


def _sample_paths(cfg: VerifyConfig, name: str, game: GameSpec, count: int) -> list[FbmPath]:
    grid = TimeGrid(game.horizon, cfg.grid_cells)
    incr = generate_increment_matrix(
        grid, float(game.hurst), count, seed=cfg.master_seed,
        base_stream=_stream_base(name), method=cfg.method,
    )
    values = np.concatenate([np.zeros((count, 1)), np.cumsum(incr, axis=1)], axis=1)
    return [
        FbmPath(grid=grid, hurst=float(game.hurst), values=values[k], seed=cfg.master_seed, stream=k)
        for k in range(count)
    ]


def check_argmax(sol: EquilibriumSolution, cfg: VerifyConfig) -> list[McReport]:
    """The closed-form maximizers dominate log-spaced alternatives and
    satisfy their first-order conditions to near machine precision."""
    game = sol.game
    n_pairs = cfg.argmax_pairs
    n_paths = max(1, n_pairs // 10)
    paths = _sample_paths(cfg, "argmax", game, n_paths)
    grid = paths[0].grid
    t_indices = np.unique(
        np.round(np.linspace(0.1 * grid.cells, 0.9 * grid.cells, n_pairs // n_paths)).astype(int)
    )
    factors = np.logspace(-1.0, 1.0, cfg.argmax_alternatives)
    reports = []

    modes = ["terminal"] if game.terminal_only else ["running", "terminal"]
    for which in modes:
        violations = 0
        worst_foc = 0.0
        pairs = 0
        for path in paths:
            for idx in t_indices:
                t = grid.points[idx]
                pairs += 1
                for i, p in enumerate(game.players):
                    if which == "running":
                        star = equilibrium_control(sol, i, t, path)
                        rho = 1.0 if idx == 0 else running_density(sol.kernel, path, t)
                        foc = (
                            p.running_weight * star ** (p.risk_exponent - 1.0)
                            - sol.price_scale(i) * rho * math.exp(-game.rate * t) * p.drift_gain(t)
                        ) / (sol.price_scale(i) * rho * math.exp(-game.rate * t) * p.drift_gain(t))
                    else:
                        star = terminal_payout(sol, path)
                        eta = terminal_density(sol.kernel, path)
                        foc = (
                            p.terminal_weight * star ** (game.terminal_exponent - 1.0)
                            - sol.price_scale(i) * eta * math.exp(-game.rate * game.horizon)
                        ) / (sol.price_scale(i) * eta * math.exp(-game.rate * game.horizon))
                    worst_foc = max(worst_foc, abs(foc))
                    t_eval = game.horizon if which == "terminal" else t
                    best = pointwise_objective(sol, i, star, t_eval, path, which)
                    for f in factors:
                        if pointwise_objective(sol, i, f * star, t_eval, path, which) > best:
                            violations += 1
                    if pointwise_objective(sol, i, 1.0001 * star, t_eval, path, which) >= best:
                        violations += 1
        reports.append(
            McReport.build(
                f"argmax_dominance({which})", float(violations), 0.0, 0.0, 0.0,
                pairs * len(factors), cfg.grid_cells, cfg.master_seed,
            )
        )
        reports.append(
            McReport.build(
                f"first_order({which})", worst_foc, 0.0, 0.0, 1e-12,
                pairs, cfg.grid_cells, cfg.master_seed,
            )
        )
    return reports


def check_endpoint_consistency(sol: EquilibriumSolution, cfg: VerifyConfig) -> list[McReport]:
    """Projected density powers coincide with the density powers at the
    end of their horizons, path by path."""
    game = sol.game
    paths = _sample_paths(cfg, "endpoint", game, cfg.endpoint_paths)
    horizon = game.horizon
    u_mid = horizon / 2.0
    worst_terminal = 0.0
    worst_running = 0.0
    for path in paths:
        eta = terminal_density(sol.kernel, path)
        lhs = projected_terminal_power(sol, horizon, path)
        rhs = eta**game.terminal_power
        worst_terminal = max(worst_terminal, abs(lhs - rhs) / abs(rhs))
        rho = running_density(sol.kernel, path, u_mid)
        for i, p in enumerate(game.players):
            lhs = projected_running_power(sol, i, u_mid, u_mid, path)
            rhs = rho**p.inverse_power
            worst_running = max(worst_running, abs(lhs - rhs) / abs(rhs))
    return [
        McReport.build(
            "endpoint(terminal)", worst_terminal, 0.0, 0.0, 1e-12,
            len(paths), cfg.grid_cells, cfg.master_seed,
        ),
        McReport.build(
            "endpoint(running)", worst_running, 0.0, 0.0, 1e-12,
            len(paths), cfg.grid_cells, cfg.master_seed,
        ),
    ]


def check_brownian_limit(game: GameSpec, cfg: VerifyConfig) -> list[McReport]:
    """Just above the Brownian exponent the kernel flattens to the drift
    constant, its norm to drift^2 * horizon, and the covariance to the
    Brownian minimum."""
    horizon = game.horizon
    drift = game.drift
    near = GirsanovKernel(drift, horizon, 0.501)
    mid_value = near(horizon / 2.0) if drift != 0.0 else 0.0
    norm_target = drift * drift * horizon
    cov_est = autocov(0.25 * horizon, 0.75 * horizon, 0.501)
    cov_target = autocov(0.25 * horizon, 0.75 * horizon, 0.5)
    scale = horizon ** (2 * 0.501)
    return [
        McReport.build(
            "brownian_limit(kernel_value)", mid_value, drift, 0.0, 0.01 * max(abs(drift), 1e-300),
            1, cfg.grid_cells, cfg.master_seed,
        ),
        McReport.build(
            "brownian_limit(kernel_norm)", near.norm_sq, norm_target, 0.0, 0.02 * max(norm_target, 1e-300),
            1, cfg.grid_cells, cfg.master_seed,
        ),
        McReport.build(
            "brownian_limit(autocovariance)", cov_est, cov_target, 0.0, 0.01 * scale,
            1, cfg.grid_cells, cfg.master_seed,
        ),
    ]


CHECK_NAMES = (
    "fbm_covariance",
    "wick_mean",
    "density_moments",
    "projection",
    "budget_slackness",
    "terminal_moment",
    "argmax",
    "endpoint_consistency",
    "brownian_limit",
)


def run_suite(
    game: GameSpec, cfg: VerifyConfig, checks: Sequence[str] | None = None
) -> list[McReport]:
    """Run the requested checks (all by default) in a fixed order under a
    single master seed; output is fully deterministic."""
    wanted = CHECK_NAMES if checks is None else tuple(checks)
    unknown = [c for c in wanted if c not in CHECK_NAMES]
    if unknown:
        raise ValueError(f"unknown checks: {', '.join(unknown)}")
    sol = None

    def solution() -> EquilibriumSolution:
        nonlocal sol
        if sol is None:
            sol = solve_multiplier(game)
        return sol

    reports: list[McReport] = []
    for name in CHECK_NAMES:
        if name not in wanted:
            continue
        if name == "fbm_covariance":
            reports.extend(check_fbm_covariance(game, cfg))
        elif name == "wick_mean":
            reports.extend(check_wick_mean(game, cfg))
        elif name == "density_moments":
            reports.extend(check_density_moments(game, cfg))
        elif name == "projection":
            reports.extend(check_projection(game, cfg))
        elif name == "budget_slackness":
            reports.extend(check_budget_slackness(solution(), cfg))
        elif name == "terminal_moment":
            reports.extend(check_terminal_moment(solution(), cfg))
        elif name == "argmax":
            reports.extend(check_argmax(solution(), cfg))
        elif name == "endpoint_consistency":
            reports.extend(check_endpoint_consistency(solution(), cfg))
        elif name == "brownian_limit":
            reports.extend(check_brownian_limit(game, cfg))
    return reports
