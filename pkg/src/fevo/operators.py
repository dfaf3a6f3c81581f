"""Generators of the evolution on uniform 1-d grids.

Fourier convention: ``F_j = sum_k f_k exp(-i xi_j (x_k - a))`` with the DFT
frequencies ``xi_j = 2 pi fftfreq(N, dx)``.  A multiplier ``m(x, xi)`` acts
by

    (m f)(x_i) = (1/N) sum_j F_j exp(i xi_j (x_i - a)) m(x_i, xi_j),

which for ``m = -q`` is the generator and for ``m = exp(-h q)`` the one-step
averaging operator.  When no coefficient depends on ``x`` the sum is a
single inverse FFT; otherwise each row is summed in fixed order by the
``synthesize`` kernel.  The Nyquist column uses ``(m(xi_N) + m(-xi_N)) / 2``
so real input stays real.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline

from . import kernels
from .rng import RngStream, WindowDraws
from .sampler import increments_from_draws
from .symbol import LevySymbol

__all__ = [
    "GridError",
    "FunctionGrid",
    "Grid2D",
    "PMPResult",
    "ProbeResult",
    "apply_multiplier",
    "apply_generator",
    "apply_spacetime_generator",
    "probe_generator",
    "check_positive_maximum",
    "s_derivative",
]

log = logging.getLogger(__name__)

SUPPORT_WARN = 1e-8
SUPPORT_ERROR = 1e-4
_ROW_CHUNK = 128


class GridError(ValueError):
    pass


def _check_size(N: int):
    if N < 8 or N & (N - 1):
        raise GridError(f"grid size must be a power of two >= 8, got {N}")


@dataclass
class FunctionGrid:
    """Samples ``values[k] = f(a + k (b - a) / N)``, ``k = 0..N-1``."""

    a: float
    b: float
    values: np.ndarray
    periodic: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values)
        _check_size(self.values.shape[0])
        if not self.b > self.a:
            raise GridError("need b > a")
        if not np.all(np.isfinite(self.values)):
            raise GridError("grid values must be finite")

    @property
    def N(self) -> int:
        return self.values.shape[0]

    @property
    def dx(self) -> float:
        return (self.b - self.a) / self.N

    @property
    def x(self) -> np.ndarray:
        return self.a + self.dx * np.arange(self.N)

    @property
    def frequencies(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.N, self.dx)

    @classmethod
    def sample(cls, func: Callable, a: float, b: float, N: int, periodic: bool = False):
        _check_size(N)
        x = a + (b - a) / N * np.arange(N)
        return cls(a, b, np.asarray(func(x), dtype=float), periodic)

    def like(self, values) -> "FunctionGrid":
        return FunctionGrid(self.a, self.b, values, self.periodic)

    def interpolator(self) -> Callable:
        """Cubic spline through the samples (and ``b``); zero outside ``[a, b]``."""
        xs = np.append(self.x, self.b)
        ys = np.append(self.values, self.values[0] if self.periodic else 0.0)
        spline = CubicSpline(xs, ys, bc_type="periodic" if self.periodic else "not-a-knot")
        a, b, periodic = self.a, self.b, self.periodic

        def f(y):
            y = np.asarray(y, dtype=float)
            if periodic:
                return spline(a + np.mod(y - a, b - a))
            inside = (y >= a) & (y <= b)
            return np.where(inside, spline(np.clip(y, a, b)), 0.0)

        return f


@dataclass
class Grid2D:
    """Samples ``values[i, k] = f(s_i, x_k)`` on a product of uniform grids."""

    s_a: float
    s_b: float
    x_a: float
    x_b: float
    values: np.ndarray
    periodic: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise GridError("Grid2D values must be 2-d")
        _check_size(self.values.shape[0])
        _check_size(self.values.shape[1])

    @property
    def s(self) -> np.ndarray:
        n = self.values.shape[0]
        return self.s_a + (self.s_b - self.s_a) / n * np.arange(n)

    @property
    def x(self) -> np.ndarray:
        n = self.values.shape[1]
        return self.x_a + (self.x_b - self.x_a) / n * np.arange(n)

    @property
    def ds(self) -> float:
        return (self.s_b - self.s_a) / self.values.shape[0]

    @classmethod
    def sample(cls, func, s_a, s_b, Ns, x_a, x_b, Nx, periodic=False):
        _check_size(Ns)
        _check_size(Nx)
        s = s_a + (s_b - s_a) / Ns * np.arange(Ns)
        x = x_a + (x_b - x_a) / Nx * np.arange(Nx)
        return cls(s_a, s_b, x_a, x_b, func(s[:, None], x[None, :]), periodic)

    def row(self, i: int) -> FunctionGrid:
        return FunctionGrid(self.x_a, self.x_b, self.values[i], self.periodic)


def _check_support(f: FunctionGrid):
    if f.periodic:
        return
    scale = float(np.max(np.abs(f.values)))
    if scale == 0.0:
        return
    edge = max(abs(f.values[0]), abs(f.values[-1])) / scale
    if edge > SUPPORT_ERROR:
        raise GridError(
            f"function not supported inside the grid: boundary/max = {edge:.3g} > {SUPPORT_ERROR}"
        )
    if edge > SUPPORT_WARN:
        log.warning("boundary values %.3g of max; periodic wraparound may matter", edge)


def _twiddle(N: int) -> np.ndarray:
    return np.exp(2j * np.pi * np.arange(N) / N)


def apply_multiplier(
    f: FunctionGrid, multiplier: Callable, x_dependent: bool, complex_output: bool = False
):
    """Apply ``m(x, xi)`` to ``f`` (see module docstring).

    ``multiplier(x, xi)`` receives ``x`` of shape ``(P, 1)`` (or ``None`` when
    ``x_dependent`` is false) and ``xi`` of shape ``(1, N)`` / ``(N,)`` and
    returns the broadcast multiplier.
    """
    N = f.N
    F = np.fft.fft(f.values)
    xi = f.frequencies
    nyq = N // 2
    if not x_dependent:
        m = np.asarray(multiplier(None, xi), dtype=complex)
        m = np.broadcast_to(m, (N,)).copy()
        m[nyq] = 0.5 * (m[nyq] + np.asarray(multiplier(None, -xi[nyq : nyq + 1]))[0])
        out = np.fft.ifft(F * m)
    else:
        x = f.x
        tw = _twiddle(N)
        out = np.empty(N, dtype=complex)
        for lo in range(0, N, _ROW_CHUNK):
            hi = min(lo + _ROW_CHUNK, N)
            xr = x[lo:hi, None]
            m = np.broadcast_to(multiplier(xr, xi[None, :]), (hi - lo, N)).astype(complex)
            m[:, nyq] = 0.5 * (m[:, nyq] + multiplier(xr, -xi[None, nyq : nyq + 1])[:, 0])
            out[lo:hi] = kernels.synthesize(F, m, np.arange(lo, hi), tw)
    return out if complex_output else out.real


def _symbol_multiplier(sym: LevySymbol, s: float, transform: Callable):
    def m(x, xi):
        xi_d = np.asarray(xi)[..., None]
        if x is None:
            coef = sym.coefficients(np.asarray(float(s)), np.zeros((1,)))
            return transform(sym.exponent(coef, xi_d))
        coef = sym.coefficients(np.asarray(float(s)), np.asarray(x)[..., None])
        return transform(sym.exponent(coef, xi_d))

    return m


def _require_1d(sym: LevySymbol):
    if sym.dimension != 1:
        raise GridError("operator calculus supports dimension 1 only")


def apply_generator(sym: LevySymbol, s: float, f: FunctionGrid, complex_output=False):
    """Right generator ``A_s f`` by Fourier quadrature of ``-q(s, x, D) f``."""
    _require_1d(sym)
    _check_support(f)
    out = apply_multiplier(
        f, _symbol_multiplier(sym, s, lambda q: -q), sym.depends_on_x, complex_output
    )
    return out if complex_output else f.like(out)


def s_derivative(values: np.ndarray, ds: float) -> np.ndarray:
    """Fourth-order finite difference along axis 0 (one-sided at the edges)."""
    v = np.asarray(values, dtype=float)
    n = v.shape[0]
    if n < 5:
        raise GridError("need at least 5 points along s")
    d = np.empty_like(v)
    d[2:-2] = (v[:-4] - 8.0 * v[1:-3] + 8.0 * v[3:-1] - v[4:]) / (12.0 * ds)
    d[0] = (-25.0 * v[0] + 48.0 * v[1] - 36.0 * v[2] + 16.0 * v[3] - 3.0 * v[4]) / (12.0 * ds)
    d[1] = (-3.0 * v[0] - 10.0 * v[1] + 18.0 * v[2] - 6.0 * v[3] + v[4]) / (12.0 * ds)
    d[-1] = (25.0 * v[-1] - 48.0 * v[-2] + 36.0 * v[-3] - 16.0 * v[-4] + 3.0 * v[-5]) / (12.0 * ds)
    d[-2] = (3.0 * v[-1] + 10.0 * v[-2] - 18.0 * v[-3] + 6.0 * v[-4] - v[-5]) / (12.0 * ds)
    return d


def apply_spacetime_generator(sym: LevySymbol, f: Grid2D) -> Grid2D:
    """``L f(s, x) = d/ds f(s, x) + (A_s f(s, .))(x)``."""
    _require_1d(sym)
    dfs = s_derivative(f.values, f.ds)
    Af = np.stack([apply_generator(sym, s, f.row(i)).values for i, s in enumerate(f.s)])
    return Grid2D(f.s_a, f.s_b, f.x_a, f.x_b, dfs + Af, f.periodic)


@dataclass
class ProbeResult:
    x: np.ndarray  # evaluation points
    values: np.ndarray  # difference quotient at x
    stderr: np.ndarray  # Monte Carlo standard error per point
    outside: int  # samples that left [a, b] (evaluated as 0)
    side: str
    s: float
    h: float
    M: int
    source: FunctionGrid

    def as_grid(self) -> FunctionGrid:
        if len(self.values) != self.source.N:
            raise GridError("probe was evaluated on a subset of the grid")
        return self.source.like(self.values)


def probe_generator(
    sym: LevySymbol,
    side: str,
    s: float,
    f: FunctionGrid,
    h: float,
    M: int,
    rng: RngStream,
    points: Optional[np.ndarray] = None,
) -> ProbeResult:
    """Monte Carlo difference quotient of the evolution over one step.

    ``right``: ``(U(s, s+h) f - f) / h``; ``left``: ``(U(s-h, s) f - f) / h``.
    ``U`` over one step is the average of ``f`` over ``M`` frozen-symbol
    transitions started at ``(s, x)`` resp. ``(s - h, x)``.  ``f`` is
    evaluated off-grid through a cubic spline and as zero outside
    ``[a, b]``.  All start points share the same ``M`` windows of ``rng``
    (common random numbers); ``rng`` is advanced by ``M`` windows.
    ``points`` restricts evaluation to a subset of grid indices.
    """
    if side not in ("right", "left"):
        raise ValueError("side must be 'right' or 'left'")
    _require_1d(sym)
    if not h > 0:
        raise ValueError("h must be positive")
    start = float(s) if side == "right" else float(s) - h
    fi = f.interpolator()
    idx = np.arange(f.N) if points is None else np.asarray(points, dtype=np.int64)
    xs = f.x[idx]
    draws = WindowDraws(rng.seed, rng.stream, rng.take_windows(int(M)))
    est = np.empty(len(idx))
    err = np.empty(len(idx))
    outside = 0
    for p, x in enumerate(xs):
        coef = sym.coefficients(np.array([start]), np.array([[x]]))
        y = x + increments_from_draws(sym, coef, h, draws)[:, 0]
        if not f.periodic:
            outside += int(np.count_nonzero((y < f.a) | (y > f.b)))
        quot = (fi(y) - f.values[idx[p]]) / h
        est[p] = quot.mean()
        err[p] = quot.std(ddof=1) / np.sqrt(M) if M > 1 else np.inf
    return ProbeResult(xs, est, err, outside, side, float(s), float(h), int(M), f)


@dataclass
class PMPResult:
    passed: bool
    location: Optional[float] = None
    value: Optional[float] = None
    tolerance: float = 0.0
    checked: list = field(default_factory=list)

    def __bool__(self):
        return self.passed


def check_positive_maximum(f: FunctionGrid, Af: FunctionGrid) -> PMPResult:
    """Positive maximum principle on the grid.

    At every interior grid point where ``f`` attains a strictly positive
    maximum, ``Af <= tol`` with ``tol = 1e-6 (1 + max |Af|)``.
    """
    vals = np.asarray(f.values, dtype=float)
    A = np.asarray(Af.values, dtype=float)
    tol = 1e-6 * (1.0 + float(np.max(np.abs(A))))
    top = vals.max()
    if top <= 0:
        return PMPResult(True, tolerance=tol)
    where = np.flatnonzero(vals == top)
    interior = where[(where > 0) & (where < len(vals) - 1)]
    checked = [float(f.x[i]) for i in interior]
    for i in interior:
        if A[i] > tol:
            return PMPResult(False, float(f.x[i]), float(A[i]), tol, checked)
    return PMPResult(True, tolerance=tol, checked=checked)
