"""Nash-equilibrium solver for the long-memory linear-state game.

Players steer a common wealth-like state with drift controls (paid for by
running power payoffs) and noise controls (pinned only in aggregate by a
martingale-representation constraint), sharing a common terminal power
payoff.  Because every payoff is of power type, the equilibrium reduces
to one scalar unknown: a budget multiplier found by bisection on a
strictly decreasing closed-form budget curve.  Controls, projected
density powers, the representation integrand, and simulated state paths
are all evaluated from that multiplier and the drift-removal kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.special import betainc as _betainc

from .fbm import FbmPath, HurstExponent, TimeGrid, increments
from .girsanov import GirsanovKernel, _trunc_profile, kernel_cell_averages, shrunk_cell_matrix
from .singular_calculus import _panel as _jacobi_panel

__all__ = [
    "TimeFunction",
    "PlayerSpec",
    "GameSpec",
    "GameValidationError",
    "SolverError",
    "validate_game",
    "budget_requirement",
    "solve_multiplier",
    "EquilibriumSolution",
    "equilibrium_control",
    "control_trace",
    "density_trace",
    "projected_terminal_power",
    "projected_running_power",
    "representation_integrand",
    "aggregate_noise_control",
    "allocate_noise_control",
    "terminal_payout",
    "expected_terminal_payout",
    "pointwise_objective",
    "StrategyTrace",
    "strategy_trace",
    "simulate_wealth",
]


# ------------------------------------------------------------------ #
# time-varying coefficients
# ------------------------------------------------------------------ #

@dataclass(frozen=True)
class TimeFunction:
    """Deterministic coefficient of time: a constant or a linearly
    interpolated table.  Evaluation outside the table range clamps to the
    nearest endpoint value."""

    constant: float | None = None
    knots: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self) -> None:
        if (self.constant is None) == (self.knots is None):
            raise ValueError("provide exactly one of constant or knots")
        if self.knots is not None:
            times = [t for t, _ in self.knots]
            if len(times) < 2:
                raise ValueError("table needs at least two rows")
            if any(b <= a for a, b in zip(times, times[1:])):
                raise ValueError("table times must be strictly increasing")

    @classmethod
    def table(cls, rows: Sequence[Sequence[float]]) -> "TimeFunction":
        return cls(knots=tuple((float(t), float(v)) for t, v in rows))

    def __call__(self, t):
        if self.constant is not None:
            return np.full_like(np.asarray(t, dtype=float), self.constant) \
                if np.ndim(t) else float(self.constant)
        times = np.array([k[0] for k in self.knots])
        vals = np.array([k[1] for k in self.knots])
        out = np.interp(np.asarray(t, dtype=float), times, vals)
        return out if np.ndim(t) else float(out)

    def minimum(self) -> float:
        """Lower bound of the coefficient (exact: piecewise linear)."""
        if self.constant is not None:
            return float(self.constant)
        return min(v for _, v in self.knots)

    def breakpoints(self) -> tuple[float, ...]:
        if self.constant is not None:
            return ()
        return tuple(t for t, _ in self.knots)


# ------------------------------------------------------------------ #
# game description
# ------------------------------------------------------------------ #

@dataclass(frozen=True)
class PlayerSpec:
    """One player's coefficients and preferences."""

    drift_gain: TimeFunction          # multiplies the drift control in the state
    noise_gain: TimeFunction          # multiplies the noise control in the state
    running_weight: float             # weight on the running power payoff
    terminal_weight: float            # weight on the shared terminal payoff
    risk_exponent: float              # running power exponent, in (0, 1)

    @property
    def running_power(self) -> float:
        """Exponent g/(g-1) < 0 attached to discount, gain and density."""
        g = self.risk_exponent
        return g / (g - 1.0)

    @property
    def inverse_power(self) -> float:
        """Exponent 1/(g-1) < 0 of the pointwise maximizer."""
        return 1.0 / (self.risk_exponent - 1.0)


@dataclass(frozen=True)
class GameSpec:
    """Full description of one game instance."""

    players: tuple[PlayerSpec, ...]
    rate: float                       # riskless rate, 1/time
    drift: float                      # market price-of-risk constant
    horizon: float
    hurst: float
    terminal_exponent: float          # common terminal power exponent, in (0, 1)
    initial_budget: float
    terminal_only: bool = False       # drop running payoffs administratively

    @property
    def count(self) -> int:
        return len(self.players)

    @property
    def terminal_power(self) -> float:
        """Exponent 1/(g'-1) < 0 of the terminal maximizer."""
        return 1.0 / (self.terminal_exponent - 1.0)

    def kernel(self) -> GirsanovKernel:
        return GirsanovKernel(self.drift, self.horizon, HurstExponent(self.hurst))


class GameValidationError(ValueError):
    """All invariant violations of a game description, each one named."""

    def __init__(self, problems: Sequence[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class SolverError(RuntimeError):
    """Root bracketing or quadrature failure inside the solver."""


def validate_game(game: GameSpec) -> GameSpec:
    """Check every structural invariant, collecting all violations."""
    bad: list[str] = []
    if not game.players:
        bad.append("players: at least one player is required")
    if not 0.5 < game.hurst < 1.0:
        bad.append(f"game.H: Hurst parameter must lie in the open interval (0.5, 1); got {game.hurst!r}")
    if not game.horizon > 0.0:
        bad.append(f"game.T: horizon must be positive; got {game.horizon!r}")
    if not 0.0 < game.terminal_exponent < 1.0:
        bad.append(f"game.gamma_prime: CRRA exponent must lie in (0,1); got {game.terminal_exponent!r}")
    if not game.initial_budget > 0.0:
        bad.append(f"game.x: initial budget must be positive; got {game.initial_budget!r}")
    if not math.isfinite(game.rate):
        bad.append(f"game.r: rate must be finite; got {game.rate!r}")
    if not math.isfinite(game.drift):
        bad.append(f"game.C: drift constant must be finite; got {game.drift!r}")
    for i, p in enumerate(game.players):
        if not 0.0 < p.risk_exponent < 1.0:
            bad.append(f"players[{i}].gamma: CRRA exponent must lie in (0,1); got {p.risk_exponent!r}")
        if not p.running_weight > 0.0:
            bad.append(f"players[{i}].c: running weight must be positive; got {p.running_weight!r}")
        if not p.terminal_weight > 0.0:
            bad.append(f"players[{i}].b: terminal weight must be positive; got {p.terminal_weight!r}")
        if not game.terminal_only and not p.drift_gain.minimum() > 0.0:
            bad.append(
                f"players[{i}].alpha: drift gain must be bounded away from zero "
                f"(minimum {p.drift_gain.minimum()!r}); the running maximizer "
                "raises it to a negative power"
            )
    if bad:
        raise GameValidationError(bad)
    return game


# ------------------------------------------------------------------ #
# budget curve and multiplier
# ------------------------------------------------------------------ #

def _gauss_legendre_panels(edges: np.ndarray, nodes: int = 12):
    """Nodes and weights of composite Gauss-Legendre over given panels."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    lo = edges[:-1, None]
    hi = edges[1:, None]
    half = 0.5 * (hi - lo)
    pts = lo + half * (x[None, :] + 1.0)
    wts = half * w[None, :]
    return pts.ravel(), wts.ravel()


def _graded_edges(game: GameSpec, extra: tuple[float, ...]) -> np.ndarray:
    """Panel edges graded quadratically toward 0, where the shrunk-kernel
    norm has unbounded slope, merged with coefficient breakpoints."""
    base = game.horizon * np.linspace(0.0, 1.0, 33) ** 2
    knots = [t for t in extra if 0.0 < t < game.horizon]
    return np.unique(np.concatenate([base, np.asarray(knots, dtype=float)]))


def shrunk_norm_sq(kern: GirsanovKernel, t) -> np.ndarray:
    """Closed-form squared norm of the kernel shrunk to horizon t,
    vectorized; scales like t^(2-2H)."""
    frac = np.clip(np.asarray(t, dtype=float) / kern.horizon, 0.0, None)
    out = kern.norm_sq * frac ** (2.0 - 2.0 * float(kern.hurst))
    return out if np.ndim(t) else float(out)


@lru_cache(maxsize=64)
def _running_budget_integrals(game: GameSpec) -> tuple[float, ...]:
    """Per-player t-integral of the budget curve (independent of the
    multiplier): integral of gain^q * exp(-r t q) * moment factor, where
    q is the player's running power and the moment factor is the
    closed-form power moment of the running density."""
    if game.terminal_only:
        return tuple(0.0 for _ in game.players)
    kern = game.kernel()
    out = []
    for p in game.players:
        q = p.running_power
        coef = p.risk_exponent / (2.0 * (1.0 - p.risk_exponent) ** 2)
        pts, wts = _gauss_legendre_panels(_graded_edges(game, p.drift_gain.breakpoints()))
        vals = (
            p.drift_gain(pts) ** q
            * np.exp(-game.rate * pts * q)
            * np.exp(coef * shrunk_norm_sq(kern, pts))
        )
        out.append(float(np.dot(vals, wts)))
    return tuple(out)


def _terminal_budget_coef(game: GameSpec) -> float:
    """Multiplier-free factor of the terminal budget term."""
    kern = game.kernel()
    gp = game.terminal_exponent
    q = gp / (gp - 1.0)
    return math.exp(-game.rate * game.horizon * q) * math.exp(
        gp * kern.norm_sq / (2.0 * (1.0 - gp) ** 2)
    )


def budget_requirement(game: GameSpec, multiplier: float) -> float:
    """Budget curve value at the given multiplier.

    Strictly decreasing, tending to infinity at 0+ and to 0 at infinity:
    every term carries a negative power of the multiplier.
    """
    if not multiplier > 0.0:
        raise ValueError("multiplier must be positive")
    integrals = _running_budget_integrals(game)
    total = multiplier ** game.terminal_power * _terminal_budget_coef(game)
    for p, integral in zip(game.players, integrals):
        scale = (multiplier * p.terminal_weight / p.running_weight) ** p.inverse_power
        total += scale * integral
    return total


@dataclass(frozen=True)
class EquilibriumSolution:
    """Immutable solved game: multiplier, kernel, and cached coefficients."""

    game: GameSpec
    kernel: GirsanovKernel
    multiplier: float
    residual: float
    running_integrals: tuple[float, ...]
    terminal_coef: float

    def price_scale(self, i: int) -> float:
        """Per-player shadow price m* times the terminal weight."""
        return self.multiplier * self.game.players[i].terminal_weight

    def running_coefficient(self, i: int, u) -> np.ndarray:
        """Deterministic factor of player i's running budget integrand."""
        p = self.game.players[i]
        q = p.running_power
        base = (self.multiplier * p.terminal_weight / p.running_weight) ** p.inverse_power
        return base * p.drift_gain(u) ** q * np.exp(-self.game.rate * np.asarray(u, dtype=float) * q)

    def terminal_scale(self) -> float:
        """Deterministic factor of the terminal payout."""
        return self.multiplier ** self.game.terminal_power * math.exp(
            -self.game.rate * self.game.horizon * self.game.terminal_power
        )

    def summary(self) -> dict:
        game = self.game
        return {
            "multiplier": self.multiplier,
            "budget_residual": self.residual,
            "kernel_norm_sq": self.kernel.norm_sq,
            "terminal_budget_term": self.multiplier ** game.terminal_power * self.terminal_coef,
            "running_budget_terms": [
                (self.multiplier * p.terminal_weight / p.running_weight) ** p.inverse_power * integral
                for p, integral in zip(game.players, self.running_integrals)
            ],
            "expected_terminal_payout": expected_terminal_payout(self),
        }


def solve_multiplier(game: GameSpec, tol: float = 1e-12) -> EquilibriumSolution:
    """Find the multiplier matching the budget curve to the initial budget.

    Brackets by repeated scaling, then bisects in log space; the curve is
    strictly decreasing so the root is unique.
    """
    validate_game(game)
    target = game.initial_budget
    if not 0.0 < tol < 1.0:
        raise ValueError("tol must lie in (0, 1)")

    lo = hi = 1.0
    for _ in range(200):
        if budget_requirement(game, lo) >= target:
            break
        lo *= 0.25
    else:
        raise SolverError(f"bracket expansion exhausted: budget({lo:g}) < target")
    for _ in range(200):
        if budget_requirement(game, hi) <= target:
            break
        hi *= 4.0
    else:
        raise SolverError(f"bracket expansion exhausted: budget({hi:g}) > target")

    loglo, loghi = math.log(lo), math.log(hi)
    mid = 0.5 * (loglo + loghi)
    for _ in range(400):
        mid = 0.5 * (loglo + loghi)
        value = budget_requirement(game, math.exp(mid))
        if abs(value - target) <= tol * target:
            break
        if value > target:
            loglo = mid
        else:
            loghi = mid
    m_star = math.exp(mid)
    residual = budget_requirement(game, m_star) - target
    if abs(residual) > tol * target:
        raise SolverError(f"bisection stalled: residual {residual:g} at multiplier {m_star:g}")
    return EquilibriumSolution(
        game=game,
        kernel=game.kernel(),
        multiplier=m_star,
        residual=residual,
        running_integrals=_running_budget_integrals(game),
        terminal_coef=_terminal_budget_coef(game),
    )


# ------------------------------------------------------------------ #
# densities and controls along a path
# ------------------------------------------------------------------ #

def density_trace(sol: EquilibriumSolution, path: FbmPath) -> np.ndarray:
    """Running density at every grid point (1 at time zero)."""
    grid = path.grid
    sums = shrunk_cell_matrix(sol.kernel, grid) @ increments(path)
    return np.exp(-sums - 0.5 * shrunk_norm_sq(sol.kernel, grid.points))


def equilibrium_control(sol: EquilibriumSolution, i: int, t: float, path: FbmPath) -> float:
    """Player i's drift control at grid time t: the pointwise maximizer
    of the running objective, strictly positive and path-dependent
    through the running density."""
    grid = path.grid
    idx = grid.index_of(t)
    if idx == 0:
        rho = 1.0
    else:
        sub = sol.kernel.shrink(grid.points[idx])
        avgs = kernel_cell_averages(sub, grid)[:idx]
        rho = math.exp(-float(np.dot(avgs, increments(path)[:idx])) - 0.5 * sub.norm_sq)
    p = sol.game.players[i]
    base = (
        sol.price_scale(i) * p.drift_gain(t) * math.exp(-sol.game.rate * t) * rho
        / p.running_weight
    )
    return base ** p.inverse_power


def control_trace(sol: EquilibriumSolution, path: FbmPath) -> np.ndarray:
    """Matrix of drift controls, shape (grid points, players).

    Zero columns in terminal-only games, where running payoffs (and with
    them the drift controls) are administratively absent.
    """
    grid = path.grid
    n_pts = grid.cells + 1
    game = sol.game
    if game.terminal_only:
        return np.zeros((n_pts, game.count))
    rho = density_trace(sol, path)
    out = np.empty((n_pts, game.count))
    pts = grid.points
    for i, p in enumerate(game.players):
        base = (
            sol.price_scale(i) * p.drift_gain(pts) * np.exp(-game.rate * pts) * rho
            / p.running_weight
        )
        out[:, i] = base ** p.inverse_power
    return out


# ------------------------------------------------------------------ #
# projected density powers (Clark-Ocone factors)
# ------------------------------------------------------------------ #

def projected_terminal_power(sol: EquilibriumSolution, t: float, path: FbmPath) -> float:
    """Projection at time t of the terminal density raised to 1/(g'-1).

    Deterministic at t=0; at t=T it reproduces the terminal density power
    exactly (same cell sums), which pins the exponential's coefficients.
    """
    a = -sol.game.terminal_power          # a = 1/(1-g') > 0
    return _projected_power(sol.kernel, a, t, path)


def projected_running_power(sol: EquilibriumSolution, i: int, u: float, t: float, path: FbmPath) -> float:
    """Projection at time t <= u of the running density at u raised to
    1/(g_i - 1); consistent with the density power at t = u."""
    if t > u:
        raise ValueError(f"projection time {t!r} exceeds density horizon {u!r}")
    b = -sol.game.players[i].inverse_power
    return _projected_power(sol.kernel.shrink(u), b, t, path)


def _projected_power(kern: GirsanovKernel, a: float, t: float, path: FbmPath) -> float:
    grid = path.grid
    m = grid.index_of(t)
    avgs = kernel_cell_averages(kern, grid)[:m]
    head = float(np.dot(avgs, increments(path)[:m]))
    tail = kern.drift * kern.tail_integral(t)
    return math.exp(
        a * head - a * tail
        + 0.5 * (a * a + a) * kern.norm_sq
        - 0.5 * a * a * kern.trunc_norm_sq(t)
    )


# ------------------------------------------------------------------ #
# representation integrand and noise controls
# ------------------------------------------------------------------ #

def _running_projection_batch(
    sol: EquilibriumSolution, i: int, us: np.ndarray, t: float, path: FbmPath
) -> np.ndarray:
    """projected_running_power for a whole vector of horizons u >= t."""
    kern = sol.kernel
    grid = path.grid
    m = grid.index_of(t)
    b = -sol.game.players[i].inverse_power
    a_exp = 1.5 - float(kern.hurst)
    totals = kern.scale * kern.sym_beta * us ** (2.0 - 2.0 * float(kern.hurst))
    norms = shrunk_norm_sq(kern, us)
    if m > 0:
        edges = grid.points[: m + 1][None, :] / us[:, None]
        cells = np.diff(_betainc(a_exp, a_exp, np.clip(edges, 0.0, 1.0)), axis=1)
        head = (totals[:, None] * cells / grid.delta) @ increments(path)[:m]
        head_integral = totals * _betainc(a_exp, a_exp, np.clip(t / us, 0.0, 1.0))
        trunc = norms * _trunc_profile(float(kern.hurst))(np.clip(t / us, 0.0, 1.0))
    else:
        head = np.zeros(len(us))
        head_integral = np.zeros(len(us))
        trunc = np.zeros(len(us))
    tail = kern.drift * (totals - head_integral)
    return np.exp(b * head - b * tail + 0.5 * (b * b + b) * norms - 0.5 * b * b * trunc)


def representation_integrand(
    sol: EquilibriumSolution, t: float, path: FbmPath, rel_tol: float = 1e-6
) -> float:
    """Integrand of the martingale representation of the static payoff.

    Terminal piece minus the remaining-horizon integral of the running
    pieces; the integrable endpoint singularity of the shrunk kernel at
    horizon-equals-time is absorbed into a Jacobi weight.
    """
    game = sol.game
    kern = sol.kernel
    if not 0.0 < t < game.horizon:
        raise ValueError("representation integrand is defined on the open horizon")
    gp = game.terminal_exponent
    terminal = (
        sol.multiplier ** game.terminal_power
        * math.exp(-game.rate * game.horizon * gp / (gp - 1.0))
        * kern(t) / (1.0 - gp)
        * projected_terminal_power(sol, t, path)
    )
    if game.terminal_only:
        return terminal

    shape = 0.5 - float(kern.hurst)
    prefactor = kern.scale * t**shape

    def smooth_part(us: np.ndarray) -> np.ndarray:
        total = np.zeros_like(us)
        for i, p in enumerate(game.players):
            total += (
                sol.running_coefficient(i, us)
                / (1.0 - p.risk_exponent)
                * _running_projection_batch(sol, i, us, t, path)
            )
        return prefactor * total

    previous = None
    nodes = 24
    for _ in range(5):
        us, wts = _jacobi_panel(t, game.horizon, nodes, 0.0, shape)
        estimate = float(np.dot(smooth_part(us), wts))
        if previous is not None:
            scale = abs(terminal) + abs(estimate) + 1e-300
            if abs(estimate - previous) <= rel_tol * scale:
                break
        previous = estimate
        nodes *= 2
    return terminal - estimate


def aggregate_noise_control(sol: EquilibriumSolution, t: float, path: FbmPath) -> float:
    """Undiscounted aggregate of gain-weighted noise controls at time t."""
    return math.exp(sol.game.rate * t) * representation_integrand(sol, t, path)


def allocate_noise_control(
    game: GameSpec,
    points: np.ndarray,
    aggregate: np.ndarray,
    policy: str = "proportional",
    player: int | None = None,
) -> np.ndarray:
    """Split the aggregate noise control across players.

    Policies: "proportional" (by squared noise gain), "equal" (identical
    controls), "single" (one player carries everything; needs `player`).
    Gain-weighted re-summation reproduces the aggregate at every grid
    point up to rounding.
    """
    gains = np.column_stack([p.noise_gain(points) for p in game.players])
    out = np.zeros_like(gains)
    finite = np.isfinite(aggregate)
    if policy == "proportional":
        denom = (gains**2).sum(axis=1)
        if np.any(denom[finite] == 0.0):
            raise ZeroDivisionError("all noise gains vanish at a grid point under the proportional policy")
        out = gains * (aggregate / denom)[:, None]
    elif policy == "equal":
        denom = gains.sum(axis=1)
        if np.any(denom[finite] == 0.0):
            raise ZeroDivisionError("noise gains sum to zero at a grid point under the equal policy")
        out = np.repeat((aggregate / denom)[:, None], game.count, axis=1)
    elif policy == "single":
        if player is None or not 0 <= player < game.count:
            raise ValueError("the single-player policy needs a valid player index")
        col = gains[:, player]
        if np.any(col[finite] == 0.0):
            raise ZeroDivisionError(f"noise gain of player {player} vanishes at a grid point")
        out[:, player] = aggregate / col
    else:
        raise ValueError(f"unknown allocation policy {policy!r}")
    return out


# ------------------------------------------------------------------ #
# terminal payout and objectives
# ------------------------------------------------------------------ #

def terminal_payout(sol: EquilibriumSolution, path: FbmPath) -> float:
    """Equilibrium terminal state: lognormal across paths."""
    from .girsanov import terminal_density

    eta = terminal_density(sol.kernel, path)
    return sol.terminal_scale() * eta ** sol.game.terminal_power


def expected_terminal_payout(sol: EquilibriumSolution) -> float:
    """Closed-form mean of the terminal payout."""
    gp = sol.game.terminal_exponent
    return sol.multiplier ** sol.game.terminal_power * math.exp(
        (2.0 - gp) * sol.kernel.norm_sq / (2.0 * (1.0 - gp) ** 2)
        - sol.game.rate * sol.game.horizon / (gp - 1.0)
    )


def pointwise_objective(
    sol: EquilibriumSolution,
    i: int,
    value: float,
    t: float,
    path: FbmPath,
    which: str,
) -> float:
    """Scalar objective a single player maximizes pointwise.

    "running": power payoff of the drift control minus its shadow cost at
    the running density; "terminal": power payoff of the terminal state
    minus its shadow cost at the terminal density.
    """
    if not value > 0.0:
        raise ValueError("objective argument must be positive")
    game = sol.game
    p = game.players[i]
    lam = sol.price_scale(i)
    if which == "running":
        from .girsanov import running_density

        idx = path.grid.index_of(t)
        rho = 1.0 if idx == 0 else running_density(sol.kernel, path, path.grid.points[idx])
        g = p.risk_exponent
        return (
            p.running_weight * value**g / g
            - lam * rho * math.exp(-game.rate * t) * p.drift_gain(t) * value
        )
    if which == "terminal":
        from .girsanov import terminal_density

        eta = terminal_density(sol.kernel, path)
        gp = game.terminal_exponent
        return (
            p.terminal_weight * value**gp / gp
            - lam * eta * math.exp(-game.rate * game.horizon) * value
        )
    raise ValueError(f"unknown objective {which!r}")


# ------------------------------------------------------------------ #
# strategy traces and state simulation
# ------------------------------------------------------------------ #

@dataclass(frozen=True)
class StrategyTrace:
    """Equilibrium controls evaluated along one path.

    Noise-control columns are NaN at the horizon endpoints, where the
    representation integrand is undefined; drift controls cover the whole
    grid.  `discounted_aggregate` is the discount-weighted, gain-weighted
    sum of the noise controls and coincides with the representation
    integrand at interior grid points.
    """

    grid: TimeGrid
    drift_controls: np.ndarray        # (points, players)
    discounted_aggregate: np.ndarray  # (points,)
    noise_controls: np.ndarray        # (points, players)
    terminal_value: float


def strategy_trace(
    sol: EquilibriumSolution,
    path: FbmPath,
    policy: str = "proportional",
    player: int | None = None,
    rel_tol: float = 1e-6,
) -> StrategyTrace:
    grid = path.grid
    pts = grid.points
    psi = np.full(grid.cells + 1, np.nan)
    for j in range(1, grid.cells):
        psi[j] = representation_integrand(sol, pts[j], path, rel_tol=rel_tol)
    aggregate = np.exp(sol.game.rate * pts) * psi
    noise = allocate_noise_control(sol.game, pts, aggregate, policy, player)
    gains = np.column_stack([p.noise_gain(pts) for p in sol.game.players])
    rebuilt = np.exp(-sol.game.rate * pts) * (gains * noise).sum(axis=1)
    return StrategyTrace(
        grid=grid,
        drift_controls=control_trace(sol, path),
        discounted_aggregate=rebuilt,
        noise_controls=noise,
        terminal_value=terminal_payout(sol, path),
    )


def simulate_wealth(sol: EquilibriumSolution, trace: StrategyTrace, path: FbmPath) -> np.ndarray:
    """Forward-discretized state along the path.

    Discounted increments accumulate gain-weighted drift controls against
    time and gain-weighted noise controls against the drift-adjusted
    noise increments.  The first cell borrows the noise-control value at
    the first interior grid point, where the representation integrand
    first exists.  For random integrands the forward Riemann sum carries
    a renormalization bias relative to the distribution-level integral,
    so this trace supports qualitative output and moment checks only.
    """
    grid = path.grid
    if trace.grid != grid:
        raise ValueError("trace and path grids differ")
    game = sol.game
    pts = grid.points
    disc = np.exp(-game.rate * pts)
    gains_u = np.column_stack([p.drift_gain(pts) for p in game.players])
    drift_part = disc * (gains_u * trace.drift_controls).sum(axis=1)

    noise_part = trace.discounted_aggregate.copy()
    if grid.cells >= 2:
        noise_part[0] = noise_part[1]
    noise_part[-1] = 0.0

    steps = increments(path) + game.drift * grid.delta
    discounted = np.empty(grid.cells + 1)
    discounted[0] = game.initial_budget
    flows = drift_part[:-1] * grid.delta + noise_part[:-1] * steps
    discounted[1:] = game.initial_budget + np.cumsum(flows)
    return discounted / disc
