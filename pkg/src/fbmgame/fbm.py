"""Exact synthesis of fractional Brownian motion on a uniform grid.

Two samplers are provided: dense Cholesky factorization of the increment
covariance (exact for any grid size) and circulant embedding of the
stationary increment sequence (exact and O(n log n)).  Both consume a
counter-based generator keyed by (seed, stream) so that any path can be
regenerated independently of evaluation order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import toeplitz

__all__ = [
    "HurstExponent",
    "TimeGrid",
    "FbmPath",
    "CovarianceSpec",
    "EmbeddingError",
    "autocov",
    "memory_kernel",
    "generate_paths",
    "generate_increment_matrix",
    "coarsen_increments",
    "increments",
    "generate_from_covariance",
]


class EmbeddingError(RuntimeError):
    """Circulant embedding produced a materially negative eigenvalue."""


class HurstExponent(float):
    """Long-memory Hurst exponent, restricted to the open interval (1/2, 1).

    The singular-kernel calculus in this package (two-point memory kernel,
    weighted inner products, change-of-measure kernels) is only defined on
    this range.  Plain floats outside it are still accepted by the raw
    covariance helpers, which are valid for every H in (0, 1).
    """

    def __new__(cls, value: float) -> "HurstExponent":
        v = float(value)
        if not 0.5 < v < 1.0:
            raise ValueError(
                f"Hurst exponent must lie strictly inside (0.5, 1); got {v!r}"
            )
        return super().__new__(cls, v)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid 0 = t_0 < t_1 < ... < t_n = horizon."""

    horizon: float
    cells: int

    def __post_init__(self) -> None:
        if not self.horizon > 0.0:
            raise ValueError(f"horizon must be positive; got {self.horizon!r}")
        if self.cells < 1:
            raise ValueError(f"cells must be >= 1; got {self.cells!r}")

    @property
    def delta(self) -> float:
        return self.horizon / self.cells

    @property
    def points(self) -> np.ndarray:
        # horizon * (k / n) keeps both endpoints exact.
        return self.horizon * (np.arange(self.cells + 1) / self.cells)

    def index_of(self, t: float, tol: float = 1e-9) -> int:
        """Index k with t_k == t, snapping within tol * horizon."""
        k = int(round(t / self.horizon * self.cells))
        k = min(max(k, 0), self.cells)
        if abs(t - self.horizon * k / self.cells) > tol * self.horizon:
            raise ValueError(f"t={t!r} is not a grid point of {self}")
        return k

    def refine(self) -> "TimeGrid":
        return TimeGrid(self.horizon, 2 * self.cells)


@dataclass(frozen=True)
class FbmPath:
    """One sampled path: values on the grid points, values[0] == 0."""

    grid: TimeGrid
    hurst: float
    values: np.ndarray
    seed: int
    stream: int
    drift: float = 0.0  # linear drift already baked into values

    def __post_init__(self) -> None:
        if self.values.shape != (self.grid.cells + 1,):
            raise ValueError("values shape does not match the grid")


@dataclass(frozen=True)
class CovarianceSpec:
    """A general two-point covariance function R(s, t) with a label."""

    fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
    label: str = "custom"


# ------------------------------------------------------------------ #
# covariance primitives
# ------------------------------------------------------------------ #

def autocov(s, t, hurst: float):
    """Fractional Brownian covariance (|s|^2H + |t|^2H - |t-s|^2H) / 2.

    Valid for every hurst in (0, 1); reduces to min(s, t) at hurst = 1/2
    for non-negative arguments.
    """
    h2 = 2.0 * float(hurst)
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    out = 0.5 * (np.abs(s) ** h2 + np.abs(t) ** h2 - np.abs(t - s) ** h2)
    return out if out.ndim else float(out)


def memory_kernel(s, t, hurst: float):
    """Two-point long-memory density H(2H-1)|s-t|^(2H-2), H in (1/2, 1).

    Diverges on the diagonal; evaluation at s == t raises.
    """
    h = HurstExponent(hurst)
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    gap = np.abs(s - t)
    if np.any(gap == 0.0):
        raise ValueError("memory kernel is singular on the diagonal s == t")
    out = h * (2.0 * h - 1.0) * gap ** (2.0 * h - 2.0)
    return out if out.ndim else float(out)


def _fgn_unit_cov(n: int, hurst: float) -> np.ndarray:
    """Autocovariance gamma(0..n-1) of unit-step fractional Gaussian noise."""
    k = np.arange(n, dtype=float)
    h2 = 2.0 * hurst
    return 0.5 * ((k + 1.0) ** h2 - 2.0 * k ** h2 + np.abs(k - 1.0) ** h2)


@lru_cache(maxsize=16)
def _chol_factor(n: int, hurst: float) -> np.ndarray:
    return np.linalg.cholesky(toeplitz(_fgn_unit_cov(n, hurst)))


@lru_cache(maxsize=16)
def _embedding_eigs(m: int, hurst: float) -> np.ndarray:
    """Eigenvalues of the size-2m circulant embedding of unit fGn."""
    g = _fgn_unit_cov(m + 1, hurst)
    row = np.concatenate([g, g[m - 1:0:-1]])
    lam = np.fft.fft(row).real
    worst = lam.min()
    if worst < -1e-12 * lam.max():
        raise EmbeddingError(
            f"circulant embedding not nonnegative definite: "
            f"min eigenvalue {worst:.3e} (size {2 * m}, hurst {hurst})"
        )
    return np.clip(lam, 0.0, None)


def _generator(seed: int, stream: int) -> np.random.Generator:
    key = np.array([seed, stream], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _draw_rows(seed: int, streams: Sequence[int], width: int) -> np.ndarray:
    out = np.empty((len(streams), width))
    for row, stream in enumerate(streams):
        out[row] = _generator(seed, stream).standard_normal(width)
    return out


def generate_increment_matrix(
    grid: TimeGrid,
    hurst: float,
    count: int,
    seed: int,
    base_stream: int = 0,
    method: str = "circulant",
) -> np.ndarray:
    """Increments of `count` independent paths, shape (count, cells).

    Row j is fully determined by (seed, base_stream + j) regardless of
    batch composition or evaluation order.
    """
    if not 0.0 < hurst < 1.0:
        raise ValueError(f"hurst must lie in (0, 1) for synthesis; got {hurst!r}")
    n = grid.cells
    scale = grid.delta ** hurst
    streams = [base_stream + j for j in range(count)]
    if method == "cholesky":
        z = _draw_rows(seed, streams, n)
        lfac = _chol_factor(n, hurst)
        return scale * (z @ lfac.T)
    if method == "circulant":
        m = 1 << max(0, (n - 1).bit_length())  # first power of two >= n
        big = 2 * m
        lam = _embedding_eigs(m, hurst)
        z = _draw_rows(seed, streams, big)
        spec = np.empty((count, big), dtype=complex)
        spec[:, 0] = np.sqrt(lam[0]) * z[:, 0]
        spec[:, m] = np.sqrt(lam[m]) * z[:, 1]
        amp = np.sqrt(0.5 * lam[1:m])
        head = amp * (z[:, 2:m + 1] + 1j * z[:, m + 1:big])
        spec[:, 1:m] = head
        spec[:, m + 1:] = np.conj(head[:, ::-1])
        samples = np.fft.fft(spec, axis=1).real / np.sqrt(big)
        return scale * samples[:, :n]
    raise ValueError(f"unknown method {method!r}; use 'cholesky' or 'circulant'")


def generate_paths(
    grid: TimeGrid,
    hurst: float,
    count: int,
    seed: int,
    base_stream: int = 0,
    method: str = "circulant",
) -> list[FbmPath]:
    """Sample `count` fBm paths on the grid; values[0] == 0 for each."""
    incr = generate_increment_matrix(grid, hurst, count, seed, base_stream, method)
    values = np.concatenate(
        [np.zeros((count, 1)), np.cumsum(incr, axis=1)], axis=1
    )
    return [
        FbmPath(grid, float(hurst), values[j], seed, base_stream + j)
        for j in range(count)
    ]


def coarsen_increments(fine: np.ndarray) -> np.ndarray:
    """Sum adjacent increment pairs: a 2n-grid batch becomes the coupled
    n-grid batch of the same underlying sample paths."""
    count, two_n = fine.shape
    if two_n % 2:
        raise ValueError("fine increment matrix must have an even cell count")
    return fine.reshape(count, two_n // 2, 2).sum(axis=2)


def increments(path: FbmPath) -> np.ndarray:
    """Cellwise increments values[k+1] - values[k]."""
    return np.diff(path.values)


def generate_from_covariance(
    spec: CovarianceSpec,
    grid: TimeGrid,
    count: int,
    seed: int,
    base_stream: int = 0,
    eig_tol: float = 1e-10,
) -> list[FbmPath]:
    """Sample a centered Gaussian process with covariance spec.fn on the grid.

    The Gram matrix over the interior grid points is factored by symmetric
    eigendecomposition; materially negative eigenvalues are rejected with
    the most negative one reported.
    """
    pts = grid.points[1:]
    gram = np.asarray(spec.fn(pts[:, None], pts[None, :]), dtype=float)
    gram = 0.5 * (gram + gram.T)
    lam, vec = np.linalg.eigh(gram)
    floor = -eig_tol * max(lam.max(), 1.0)
    if lam.min() < floor:
        raise ValueError(
            f"covariance {spec.label!r} is not positive semidefinite: "
            f"most negative eigenvalue {lam.min():.3e}"
        )
    factor = vec * np.sqrt(np.clip(lam, 0.0, None))
    paths = []
    for j in range(count):
        z = _generator(seed, base_stream + j).standard_normal(grid.cells)
        vals = np.concatenate([[0.0], factor @ z])
        paths.append(FbmPath(grid, float("nan"), vals, seed, base_stream + j))
    return paths
