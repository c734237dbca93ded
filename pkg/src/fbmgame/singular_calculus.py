"""Quadrature calculus for the long-memory inner product.

Everything here revolves around the weighted inner product

    <f, g> = integral integral f(s) g(t) H(2H-1)|s-t|^(2H-2) ds dt

whose kernel is integrably singular on the diagonal, and around functions
that themselves carry integrable power singularities at the ends of their
support.  Diagonal and endpoint singularities are absorbed into
Gauss-Jacobi weights; smooth remainders are integrated spectrally, with
node-doubling refinement until a relative tolerance is met.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy.special import beta as _sp_beta, gamma as _sp_gamma, roots_jacobi

from .fbm import FbmPath, HurstExponent, increments

__all__ = [
    "QuadratureError",
    "QuadratureConfig",
    "RealFunction",
    "indicator",
    "beta_fn",
    "memory_inner_product",
    "wiener_integral",
    "l2_isometry",
    "isometry_scale",
    "riesz_potential",
    "riesz_scale",
    "FirstKindSolution",
    "solve_first_kind",
    "explicit_inverse",
]


class QuadratureError(RuntimeError):
    """Refinement failed to converge; carries the last two estimates."""

    def __init__(self, message: str, last_two: tuple[float, float] | None = None):
        super().__init__(message)
        self.last_two = last_two


@dataclass(frozen=True)
class QuadratureConfig:
    """Node count per panel, refinement depth and relative target."""

    nodes: int = 48
    tol: float = 1e-6
    max_refine: int = 5

    def __post_init__(self) -> None:
        if not 0.0 < self.tol <= 1e-2:
            raise ValueError(f"tol must lie in (0, 1e-2]; got {self.tol!r}")
        if self.nodes < 2:
            raise ValueError("need at least 2 nodes per panel")


@dataclass(frozen=True)
class RealFunction:
    """Function on [a, b], extended by zero outside.

    `p` and `q` declare integrable power behavior f ~ (t-a)^p (b-t)^q near
    the endpoints; both must sit in (-1/2, 0].  `fn` must accept numpy
    arrays.  `cell_integral`, when given, returns the exact integral of f
    over a subinterval and is preferred by the Wiener-sum machinery.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    a: float
    b: float
    p: float = 0.0
    q: float = 0.0
    cell_integral: Optional[Callable[[float, float], float]] = None
    label: str = ""

    def __post_init__(self) -> None:
        if not self.b > self.a:
            raise ValueError("need b > a")
        for name, e in (("p", self.p), ("q", self.q)):
            if not -0.5 < e <= 0.0:
                raise ValueError(f"exponent {name} must lie in (-1/2, 0]; got {e!r}")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        inside = (t >= self.a) & (t <= self.b)
        out = np.zeros_like(t)
        if np.any(inside):
            out[inside] = self.fn(t[inside])
        return out if out.ndim else float(out)


def indicator(a: float, b: float, label: str = "") -> RealFunction:
    """Indicator of [a, b]."""
    return RealFunction(
        fn=lambda t: np.ones_like(t),
        a=a,
        b=b,
        cell_integral=lambda lo, hi: max(0.0, min(hi, b) - max(lo, a)),
        label=label or f"1_[{a},{b}]",
    )


def beta_fn(x: float, y: float) -> float:
    """Euler beta integral B(x, y) for positive arguments."""
    if x <= 0.0 or y <= 0.0:
        raise ValueError(f"beta_fn needs positive arguments; got {x!r}, {y!r}")
    return float(_sp_beta(x, y))


# ------------------------------------------------------------------ #
# Gauss-Jacobi panels
# ------------------------------------------------------------------ #

@lru_cache(maxsize=256)
def _jacobi_rule(n: int, alpha: float, beta: float) -> tuple[np.ndarray, np.ndarray]:
    """Nodes/weights for weight (1-x)^alpha (1+x)^beta on [-1, 1]."""
    if alpha == 0.0 and beta == 0.0:
        from scipy.special import roots_legendre

        x, w = roots_legendre(n)
    else:
        x, w = roots_jacobi(n, alpha, beta)
    return x, w


def _panel(
    lo: float, hi: float, n: int, alpha: float, beta: float
) -> tuple[np.ndarray, np.ndarray]:
    """Map the Jacobi rule to [lo, hi].

    Returns nodes t_i and weights v_i such that for smooth psi

        integral_lo^hi (hi-t)^alpha (t-lo)^beta psi(t) dt ~= sum v_i psi(t_i).
    """
    x, w = _jacobi_rule(n, alpha, beta)
    half = 0.5 * (hi - lo)
    t = 0.5 * (lo + hi) + half * x
    v = w * half ** (1.0 + alpha + beta)
    return t, v


def _eval_smooth(f: RealFunction, t: np.ndarray, strip_p: bool, strip_q: bool):
    """f with its declared endpoint factors divided out where requested."""
    vals = np.asarray(f.fn(t), dtype=float)
    if strip_p and f.p != 0.0:
        vals = vals * (t - f.a) ** (-f.p)
    if strip_q and f.q != 0.0:
        vals = vals * (f.b - t) ** (-f.q)
    return vals


# ------------------------------------------------------------------ #
# inner product against the memory kernel
# ------------------------------------------------------------------ #

def _smoothed_kernel_column(
    g: RealFunction, s: np.ndarray, hurst: float, n: int
) -> np.ndarray:
    """integral over g's support of g(t) |s_i - t|^(2H-2) dt, vectorized in s.

    For evaluation points inside the support the domain is split at t = s_i
    and the diagonal exponent 2H-2 is absorbed into a Jacobi weight on each
    side; outside the support the kernel factor is smooth and only g's own
    endpoint exponents are absorbed.
    """
    a, b = g.a, g.b
    diag = 2.0 * hurst - 2.0
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)

    inside = (s > a) & (s < b)
    if np.any(inside):
        si = s[inside][:, None]
        # left side [a, s]: weight (s-t)^diag at the split, (t-a)^p at a
        x, w = _jacobi_rule(n, diag, g.p)
        half = 0.5 * (si - a)
        t = a + half * (1.0 + x[None, :])
        v = w[None, :] * half ** (1.0 + diag + g.p)
        psi = _eval_smooth(g, t, strip_p=True, strip_q=False)
        acc = (v * psi).sum(axis=1)
        # right side [s, b]: weight (t-s)^diag at the split, (b-t)^q at b
        x, w = _jacobi_rule(n, g.q, diag)
        half = 0.5 * (b - si)
        t = si + half * (1.0 + x[None, :])
        v = w[None, :] * half ** (1.0 + g.q + diag)
        psi = _eval_smooth(g, t, strip_p=False, strip_q=True)
        out[inside] = acc + (v * psi).sum(axis=1)

    outside = (s < a) | (s > b)
    if np.any(outside):
        t, v = _panel(a, b, n, g.q, g.p)
        psi = _eval_smooth(g, t, strip_p=True, strip_q=True)
        gap = np.abs(s[outside][:, None] - t[None, :])
        out[outside] = (v[None, :] * psi[None, :] * gap**diag).sum(axis=1)

    for edge, is_left in ((a, True), (b, False)):
        hit = s == edge
        if not np.any(hit):
            continue
        own = g.p if is_left else g.q
        combined = own + diag
        if combined <= -1.0:
            raise QuadratureError(
                f"kernel integral diverges: evaluation point coincides with "
                f"a support endpoint carrying exponent {own:g}"
            )
        if is_left:
            t, v = _panel(a, b, n, g.q, combined)
        else:
            t, v = _panel(a, b, n, combined, g.p)
        psi = _eval_smooth(g, t, strip_p=True, strip_q=True)
        out[hit] = float(np.dot(v, psi))
    return out


def _inner_once(f: RealFunction, g: RealFunction, hurst: float, n: int) -> float:
    h = float(hurst)
    s, v = _panel(f.a, f.b, n, f.q, f.p)
    psi = _eval_smooth(f, s, strip_p=True, strip_q=True)
    kern = _smoothed_kernel_column(g, s, h, n)
    return float(h * (2.0 * h - 1.0) * np.dot(v, psi * kern))


def memory_inner_product(
    f: RealFunction,
    g: RealFunction | None = None,
    hurst: float = 0.75,
    cfg: QuadratureConfig = QuadratureConfig(),
) -> float:
    """<f, g> against the kernel H(2H-1)|s-t|^(2H-2), refined adaptively."""
    h = HurstExponent(hurst)
    if g is None:
        g = f
    est = _inner_once(f, g, h, cfg.nodes)
    n = cfg.nodes
    for _ in range(cfg.max_refine):
        n *= 2
        new = _inner_once(f, g, h, n)
        if abs(new - est) <= cfg.tol * max(abs(new), 1e-300):
            return new
        est = new
    raise QuadratureError(
        f"inner product did not converge to rel tol {cfg.tol:g}; "
        f"last two estimates {est!r}, {new!r}",
        last_two=(est, new),
    )


# ------------------------------------------------------------------ #
# Wiener integrals along a sampled path
# ------------------------------------------------------------------ #

def _cell_average(f: RealFunction, lo: float, hi: float, nodes: int = 12) -> float:
    """Average of the zero-extended f over [lo, hi]."""
    width = hi - lo
    olo, ohi = max(lo, f.a), min(hi, f.b)
    if ohi <= olo:
        return 0.0
    if f.cell_integral is not None:
        return f.cell_integral(olo, ohi) / width
    beta_exp = f.p if olo <= f.a else 0.0
    alpha_exp = f.q if ohi >= f.b else 0.0
    t, v = _panel(olo, ohi, nodes, alpha_exp, beta_exp)
    psi = _eval_smooth(f, t, strip_p=beta_exp != 0.0, strip_q=alpha_exp != 0.0)
    return float(np.dot(v, psi)) / width


def cell_average_vector(f: RealFunction, grid, upto_index: int | None = None) -> np.ndarray:
    """Cell averages of f over the first `upto_index` grid cells."""
    n = grid.cells if upto_index is None else upto_index
    pts = grid.points
    singular = f.p != 0.0 or f.q != 0.0 or f.cell_integral is not None
    if not singular:
        mids = 0.5 * (pts[:n] + pts[1:n + 1])
        return np.asarray(f(mids), dtype=float)
    return np.array([_cell_average(f, pts[k], pts[k + 1]) for k in range(n)])


def wiener_integral(f: RealFunction, path: FbmPath, upto: float | None = None) -> float:
    """Riemann-Wiener sum sum_k avg(f; cell k) * (B_{k+1} - B_k).

    `upto` truncates the sum at a grid point (defaults to the horizon).
    With the cell-average convention the sum reproduces B_t exactly for
    indicator integrands whose edges are grid points.
    """
    grid = path.grid
    m = grid.cells if upto is None else grid.index_of(upto)
    avgs = cell_average_vector(f, grid, m)
    dB = increments(path)[:m]
    return float(np.dot(avgs, dB))


# ------------------------------------------------------------------ #
# inner-product preserving map into plain L2
# ------------------------------------------------------------------ #

def isometry_scale(hurst: float) -> float:
    """Normalizing constant of the fractional-integral isometry."""
    h = HurstExponent(hurst)
    return math.sqrt(
        h * (2.0 * h - 1.0) * _sp_gamma(1.5 - h)
        / (_sp_gamma(h - 0.5) * _sp_gamma(2.0 - 2.0 * h))
    )


def l2_isometry(
    f: RealFunction,
    points,
    hurst: float,
    cfg: QuadratureConfig = QuadratureConfig(),
) -> np.ndarray:
    """Evaluate c_H * integral_u^inf (t-u)^(H-3/2) f(t) dt at the points.

    Maps compactly supported functions into ordinary L2 while preserving
    the memory inner product.
    """
    h = HurstExponent(hurst)
    c = isometry_scale(h)
    frac = h - 1.5
    out = np.empty(len(points))
    for i, u in enumerate(np.asarray(points, dtype=float)):
        if u >= f.b:
            out[i] = 0.0
            continue
        if u > f.a:
            # panel [u, b]: the kernel exponent sits at the left end; f's
            # own left factor is smooth on this panel and stays inside psi.
            def one(n: int, u=u) -> float:
                t, v = _panel(u, f.b, n, f.q, frac)
                psi = _eval_smooth(f, t, strip_p=False, strip_q=True)
                return float(np.dot(v, psi))

        elif u == f.a:
            combined = frac + f.p
            if combined <= -1.0:
                raise QuadratureError(
                    f"divergent isometry integral at u={u!r}: combined "
                    f"endpoint exponent {combined:g} <= -1"
                )

            def one(n: int, combined=combined) -> float:
                t, v = _panel(f.a, f.b, n, f.q, combined)
                psi = _eval_smooth(f, t, strip_p=True, strip_q=True)
                return float(np.dot(v, psi))

        else:
            # u strictly left of the support; kernel factor is smooth there.
            def one(n: int, u=u) -> float:
                t, v = _panel(f.a, f.b, n, f.q, f.p)
                psi = _eval_smooth(f, t, strip_p=True, strip_q=True)
                return float(np.dot(v, psi * (t - u) ** frac))

        est = one(cfg.nodes)
        n = cfg.nodes
        for _ in range(cfg.max_refine):
            n *= 2
            new = one(n)
            converged = abs(new - est) <= cfg.tol * max(abs(new), 1e-300)
            est = new
            if converged:
                break
        out[i] = c * est
    return out


# ------------------------------------------------------------------ #
# Riesz potential
# ------------------------------------------------------------------ #

def riesz_scale(hurst: float) -> float:
    h = HurstExponent(hurst)
    return 1.0 / (2.0 * _sp_gamma(2.0 * h - 1.0) * math.cos(math.pi * (h - 0.5)))


def riesz_potential(
    f: RealFunction,
    points,
    hurst: float,
    cfg: QuadratureConfig = QuadratureConfig(),
) -> np.ndarray:
    """Fractional negative-Laplacian power: scale * int |x-t|^(2H-2) f(t) dt."""
    h = HurstExponent(hurst)
    scale = riesz_scale(h)
    pts = np.asarray(points, dtype=float)

    def once(n: int) -> np.ndarray:
        return _smoothed_kernel_column(f, pts, h, n)

    est = once(cfg.nodes)
    n = cfg.nodes
    for _ in range(cfg.max_refine):
        n *= 2
        new = once(n)
        if np.all(np.abs(new - est) <= cfg.tol * np.maximum(np.abs(new), 1e-300)):
            return scale * new
        est = new
    raise QuadratureError("riesz potential did not converge", None)


# ------------------------------------------------------------------ #
# first-kind integral equation with the memory kernel
# ------------------------------------------------------------------ #

@dataclass(frozen=True)
class FirstKindSolution:
    """Piecewise-linear collocation solution of int f(s) k(s,t) ds = target."""

    nodes: np.ndarray
    values: np.ndarray
    residual: float

    def as_function(self) -> RealFunction:
        nodes, values = self.nodes, self.values
        return RealFunction(
            fn=lambda t: np.interp(t, nodes, values),
            a=float(nodes[0]),
            b=float(nodes[-1]),
            label="first-kind solution",
        )


def _graded_mesh(tau: float, n: int, strength: float = 2.0) -> np.ndarray:
    """Symmetric mesh on [0, tau], clustered at both ends."""
    y = np.linspace(0.0, 1.0, n + 1)
    g = y**strength / (y**strength + (1.0 - y) ** strength)
    return tau * g


def solve_first_kind(
    target: Callable[[np.ndarray], np.ndarray] | float,
    tau: float,
    hurst: float,
    n: int = 192,
) -> FirstKindSolution:
    """Solve integral_0^tau f(s) H(2H-1)|s-t|^(2H-2) ds = target(t) on [0, tau].

    Product-integration collocation: f is piecewise linear on a graded
    mesh and the kernel factor is integrated exactly against each hat
    function, so the only discretization error is in representing f.
    """
    h = HurstExponent(hurst)
    if callable(target):
        tfun = target
    else:
        const = float(target)
        tfun = lambda t: np.full_like(np.asarray(t, dtype=float), const)
    nodes = _graded_mesh(tau, n)
    coll = nodes  # collocate at the mesh nodes
    e1 = 2.0 * h - 1.0
    e2 = 2.0 * h

    lo = nodes[:-1][None, :]     # cells, broadcast over collocation rows
    hi = nodes[1:][None, :]
    width = hi - lo
    t = coll[:, None]

    def signed_pow(x: np.ndarray, e: float) -> np.ndarray:
        return np.sign(x) * np.abs(x) ** e

    m0 = (signed_pow(hi - t, e1) - signed_pow(lo - t, e1)) / e1
    m1 = (np.abs(hi - t) ** e2 - np.abs(lo - t) ** e2) / e2

    amat = np.zeros((n + 1, n + 1))
    # hat centred at the left cell node: value (hi - s)/width, slope -1/width
    amat[:, :-1] += ((hi - t) * m0 - m1) / width
    # hat centred at the right cell node: value (s - lo)/width, slope 1/width
    amat[:, 1:] += ((t - lo) * m0 + m1) / width
    amat *= h * e1

    rhs = np.asarray(tfun(coll), dtype=float)
    sol = np.linalg.solve(amat, rhs)
    residual = float(np.max(np.abs(amat @ sol - rhs)))
    return FirstKindSolution(nodes=nodes, values=sol, residual=residual)


# ------------------------------------------------------------------ #
# explicit inversion by iterated fractional smoothing
# ------------------------------------------------------------------ #

def _inversion_scale(hurst: float) -> float:
    h = float(hurst)
    return (
        2.0 * h * (2.0 * h - 1.0)
        * _sp_gamma(1.5 - h) ** 2
        * _sp_gamma(2.0 * h - 1.0)
        * math.cos(math.pi * (h - 0.5))
    )


def explicit_inverse(
    target: Callable[[np.ndarray], np.ndarray],
    tau: float,
    hurst: float,
    nodes: int = 48,
) -> Callable[[float], float]:
    """Closed-form inversion of the first-kind equation for smooth targets.

    Evaluates the nested smooth-differentiate-smooth-differentiate formula
    numerically: the inner fractional average is reduced by scaling to a
    fixed Jacobi rule whose derivative is taken by central differences;
    the outer weighted integral is differentiated the same way.
    """
    h = HurstExponent(hurst)
    e = 0.5 - h
    y, wy = _jacobi_rule(nodes, e, e)  # weight (1-x)^e (1+x)^e on [-1,1]
    y01 = 0.5 * (1.0 + y)
    wy01 = wy * 0.5 ** (1.0 + 2.0 * e)

    def unit_avg(w: float) -> float:
        # J(w) = integral_0^1 y^e (1-y)^e target(w y) dy
        return float(np.dot(wy01, np.asarray(target(w * y01), dtype=float)))

    def smooth_outer_factor(w: np.ndarray) -> np.ndarray:
        # w^(2H-1) * d/dw [ w^(2-2H) J(w) ] = (2-2H) J(w) + w J'(w)
        out = np.empty_like(w)
        for i, wi in enumerate(w):
            hstep = 1e-5 * tau + 1e-7 * wi
            hstep = min(hstep, 0.49 * wi) if wi > 0 else hstep
            jc = unit_avg(wi)
            jp = (unit_avg(wi + hstep) - unit_avg(wi - hstep)) / (2.0 * hstep)
            out[i] = (2.0 - 2.0 * h) * jc + wi * jp
        return out

    def outer(t: float, n: int = nodes) -> float:
        w, v = _panel(t, tau, n, 0.0, e)
        return float(np.dot(v, smooth_outer_factor(w)))

    scale = _inversion_scale(h)

    def inverse(t: float) -> float:
        t = float(t)
        if not 0.0 < t < tau:
            raise ValueError(f"inverse evaluated outside (0, tau): t={t!r}")
        hstep = min(1e-4 * tau, 0.25 * min(t, tau - t))
        d_outer = (outer(t + hstep) - outer(t - hstep)) / (2.0 * hstep)
        return -(t**e) * d_outer / scale

    return inverse
