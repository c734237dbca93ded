"""Change-of-measure kernels and exponential densities for drifted fBm.

The kernel that removes a constant drift from long-memory fractional noise
is an explicit beta-shaped density with integrable singularities at both
ends of the horizon.  Restricting the horizon to an interior time u yields
the kernel that conditions on the path up to u; it is the same object with
a shorter horizon, which this module exploits throughout.

All horizon integrals and grid-cell averages of these kernels reduce to
regularized incomplete beta functions and are computed exactly; the
weighted squared norm truncated to [0, t] is cached as a normalized
profile so that the full-horizon value matches the closed form bit for
bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import betainc, gamma as _gamma

from .fbm import FbmPath, HurstExponent, TimeGrid, increments
from .singular_calculus import QuadratureConfig, RealFunction, memory_inner_product

__all__ = [
    "GirsanovKernel",
    "DensityPair",
    "drift_removal_factor",
    "terminal_density",
    "running_density",
    "terminal_density_batch",
    "running_density_batch",
    "density_pair",
    "apply_drift",
    "kernel_cell_averages",
    "shrunk_cell_matrix",
]


def drift_removal_factor(hurst: float) -> float:
    """Normalizing constant 2H(2H-1) Gamma(2-2H) Gamma(2H-1) cos(pi(H-1/2)).

    Strictly positive on (1/2, 1) and tends to 1 as H drops to 1/2.
    """
    h = HurstExponent(hurst)
    return float(
        2.0 * h * (2.0 * h - 1.0)
        * _gamma(2.0 - 2.0 * h) * _gamma(2.0 * h - 1.0)
        * math.cos(math.pi * (h - 0.5))
    )


@lru_cache(maxsize=8)
def _trunc_profile(hurst: float) -> PchipInterpolator:
    """Monotone profile P(theta) = |k 1_[0,theta]|^2 / |k|^2 on [0, 1].

    Computed once per Hurst exponent for the unit-horizon, unit-drift
    kernel; every truncated norm rescales onto it.  P(0) = 0 and
    P(1) = 1 exactly, so truncation at the full horizon reproduces the
    closed-form norm without quadrature noise.
    """
    h = float(hurst)
    e = 0.5 - h
    j = np.arange(1, 41)
    thetas = np.sin(0.5 * math.pi * j / 41.0) ** 2
    thetas = np.append(thetas, 1.0)
    cfg = QuadratureConfig(nodes=48, tol=1e-7, max_refine=5)
    vals = []
    for theta in thetas:
        fun = RealFunction(
            fn=lambda y: y**e * (1.0 - y) ** e,
            a=0.0,
            b=float(theta),
            p=e,
            q=e if theta == 1.0 else 0.0,
        )
        vals.append(memory_inner_product(fun, hurst=h, cfg=cfg))
    vals = np.asarray(vals) / vals[-1]
    thetas = np.concatenate([[0.0], thetas])
    vals = np.concatenate([[0.0], vals])
    vals[-1] = 1.0
    return PchipInterpolator(thetas, vals)


@dataclass(frozen=True)
class GirsanovKernel:
    """Kernel removing drift `drift` from fBm over horizon [0, horizon]."""

    drift: float
    horizon: float
    hurst: HurstExponent

    def __post_init__(self) -> None:
        object.__setattr__(self, "hurst", HurstExponent(self.hurst))
        if not self.horizon > 0.0:
            raise ValueError("horizon must be positive")

    # -- scalar caches --------------------------------------------- #

    @property
    def shape(self) -> float:
        """Common endpoint exponent 1/2 - H, in (-1/2, 0)."""
        return 0.5 - self.hurst

    @property
    def sym_beta(self) -> float:
        a = 1.5 - self.hurst
        return float(_gamma(a) ** 2 / _gamma(2.0 * a))

    @property
    def norm_sq(self) -> float:
        """Closed-form weighted squared norm of the kernel."""
        return (
            self.drift**2 / drift_removal_factor(self.hurst)
            * self.sym_beta * self.horizon ** (2.0 - 2.0 * self.hurst)
        )

    @property
    def scale(self) -> float:
        """Prefactor drift / normalizing constant."""
        return self.drift / drift_removal_factor(self.hurst)

    def shrink(self, u: float) -> "GirsanovKernel":
        """Same kernel family on the shorter horizon [0, u]: conditioning
        on the path up to u uses exactly this object."""
        if not 0.0 < u <= self.horizon:
            raise ValueError(f"shrunk horizon must lie in (0, horizon]; got {u!r}")
        return GirsanovKernel(self.drift, float(u), self.hurst)

    # -- pointwise evaluation -------------------------------------- #

    def __call__(self, t):
        """Kernel values; zero outside (0, horizon), diverges at the ends."""
        t = np.asarray(t, dtype=float)
        inside = (t > 0.0) & (t < self.horizon)
        out = np.zeros_like(t)
        if self.drift != 0.0 and np.any(inside):
            ti = t[inside]
            out[inside] = self.scale * ti**self.shape * (self.horizon - ti) ** self.shape
        if np.any((t == 0.0) | (t == self.horizon)) and self.drift != 0.0:
            raise ValueError("kernel diverges at t = 0 and t = horizon")
        return out if out.ndim else float(out)

    def as_realfunction(self) -> RealFunction:
        return RealFunction(
            fn=lambda t: self.scale
            * t**self.shape * (self.horizon - t) ** self.shape,
            a=0.0,
            b=self.horizon,
            p=self.shape,
            q=self.shape,
            cell_integral=self.range_integral,
            label=f"drift-removal kernel (horizon {self.horizon:g})",
        )

    # -- exact integrals ------------------------------------------- #

    def _reg_inc(self, t) -> np.ndarray:
        a = 1.5 - self.hurst
        x = np.clip(np.asarray(t, dtype=float) / self.horizon, 0.0, 1.0)
        return betainc(a, a, x)

    def range_integral(self, lo: float, hi: float) -> float:
        """Exact integral of the kernel over [lo, hi] within the horizon."""
        if self.drift == 0.0:
            return 0.0
        total = self.scale * self.sym_beta * self.horizon ** (2.0 - 2.0 * self.hurst)
        return float(total * (self._reg_inc(hi) - self._reg_inc(lo)))

    def tail_integral(self, t: float) -> float:
        """Exact integral of the kernel over [t, horizon]."""
        return self.range_integral(t, self.horizon)

    def trunc_norm_sq(self, t: float) -> float:
        """Weighted squared norm of the kernel truncated to [0, t].

        Nondecreasing in t, zero at 0, exactly norm_sq at the horizon.
        """
        if t <= 0.0 or self.drift == 0.0:
            return 0.0
        if t >= self.horizon:
            return self.norm_sq
        prof = _trunc_profile(float(self.hurst))
        return float(self.norm_sq * prof(t / self.horizon))


@dataclass(frozen=True)
class DensityPair:
    """Terminal and running change-of-measure densities along one path."""

    terminal: float
    running: Callable[[float], float]


# ------------------------------------------------------------------ #
# grid-cell caches
# ------------------------------------------------------------------ #

@lru_cache(maxsize=512)
def kernel_cell_averages(kern: GirsanovKernel, grid: TimeGrid) -> np.ndarray:
    """Exact cell averages of the kernel over the grid cells inside its
    horizon; cells beyond the horizon average to zero."""
    pts = grid.points
    edges = np.clip(pts, 0.0, kern.horizon)
    if kern.drift == 0.0:
        return np.zeros(grid.cells)
    total = kern.scale * kern.sym_beta * kern.horizon ** (2.0 - 2.0 * kern.hurst)
    inc = kern._reg_inc(edges)
    return total * np.diff(inc) / grid.delta


@lru_cache(maxsize=64)
def shrunk_cell_matrix(kern: GirsanovKernel, grid: TimeGrid) -> np.ndarray:
    """Row i: cell averages of the kernel shrunk to horizon t_i (i >= 1).

    Lower-triangular (row i uses the first i cells); shape (n+1, n).
    Row n equals the full-horizon cell averages exactly.
    """
    n = grid.cells
    out = np.zeros((n + 1, n))
    for i in range(1, n + 1):
        sub = kern.shrink(grid.points[i])
        out[i, :i] = kernel_cell_averages(sub, grid)[:i]
    return out


# ------------------------------------------------------------------ #
# densities
# ------------------------------------------------------------------ #

def terminal_density(kern: GirsanovKernel, path: FbmPath, upto: float | None = None) -> float:
    """Wick exponential exp(-int k dB - |k|^2/2) along the path.

    `upto` defaults to the kernel horizon and must be a grid point; the
    kernel is integrated with exact cell averages so the sum is the
    Riemann-Wiener discretization of the stochastic integral.
    """
    grid = path.grid
    t = kern.horizon if upto is None else upto
    m = grid.index_of(t)
    avgs = kernel_cell_averages(kern, grid)[:m]
    s = float(np.dot(avgs, increments(path)[:m]))
    return math.exp(-s - 0.5 * kern.norm_sq)


def running_density(kern: GirsanovKernel, path: FbmPath, t: float) -> float:
    """Density conditioning on the path up to grid time t in (0, horizon]."""
    return terminal_density(kern.shrink(t), path, upto=t)


def terminal_density_batch(kern: GirsanovKernel, grid: TimeGrid, incr: np.ndarray) -> np.ndarray:
    """Vectorized terminal density over an increment matrix (count, cells)."""
    avgs = kernel_cell_averages(kern, grid)
    return np.exp(-(incr @ avgs) - 0.5 * kern.norm_sq)


def running_density_batch(
    kern: GirsanovKernel, grid: TimeGrid, incr: np.ndarray, index: int
) -> np.ndarray:
    """Vectorized running density at grid point index >= 1."""
    sub = kern.shrink(grid.points[index])
    avgs = kernel_cell_averages(sub, grid)[:index]
    return np.exp(-(incr[:, :index] @ avgs) - 0.5 * sub.norm_sq)


def density_pair(kern: GirsanovKernel, path: FbmPath) -> DensityPair:
    return DensityPair(
        terminal=terminal_density(kern, path),
        running=lambda t: running_density(kern, path, t),
    )


def apply_drift(kern: GirsanovKernel, path: FbmPath) -> FbmPath:
    """Add the linear drift `drift * t` to the path values."""
    return FbmPath(
        grid=path.grid,
        hurst=path.hurst,
        values=path.values + kern.drift * path.grid.points,
        seed=path.seed,
        stream=path.stream,
        drift=path.drift + kern.drift,
    )
