"""Exact draws from the frozen-symbol increment law.

One increment at ``(s, x)`` with step ``h`` is

    delta = h b + G + J + S,

``G ~ N(0, h Q)``, ``J`` a sum of ``Poisson(h lam)`` jumps, and
``S = c h^(1/alpha) X`` with ``X`` coordinatewise standard symmetric
alpha-stable.  Its characteristic function is ``exp(-h q(s, x, xi))``.

Uniform slots inside a draw's window::

    [0, d)           Gaussian coordinates (inverse normal CDF)
    [d, 2d)          stable angles
    [2d, 3d)         stable exponential variates
    3d               Poisson count (CDF inversion)
    3d + 1 + j*u + c jump j, component c (u uniforms per jump)

Every component always reads its own slots, so a draw is a pure function
of its window whatever the symbol's Poisson count was.
"""

from __future__ import annotations

from typing import Optional

import numpy as np
from scipy import special

from .rng import SLOTS_PER_WINDOW, RngStream, WindowDraws
from .symbol import Coefficients, LevySymbol, ldl_factor

__all__ = [
    "SamplerError",
    "sample_increment",
    "sample_increments",
    "sample_symmetric_stable",
    "increment_cf",
    "recipe_cf",
    "poisson_inverse",
    "increments_from_draws",
]


class SamplerError(ValueError):
    pass


def poisson_inverse(u, mu):
    """Smallest ``k`` with ``P(N <= k) >= u`` for ``N ~ Poisson(mu)``."""
    u = np.asarray(u, dtype=float)
    mu = np.broadcast_to(np.asarray(mu, dtype=float), u.shape)
    out = np.zeros(u.shape)
    pos = mu > 0
    if np.any(pos):
        up, mp = u[pos], mu[pos]
        k = np.ceil(special.pdtrik(up, mp))
        k = np.where(np.isfinite(k), np.maximum(k, 0.0), 0.0)
        below = np.maximum(k - 1.0, 0.0)
        k = np.where(special.pdtr(below, mp) >= up, below, k)
        # pdtrik can land one short at extreme quantiles
        short = special.pdtr(k, mp) < up
        while np.any(short):
            k = np.where(short, k + 1.0, k)
            short = special.pdtr(k, mp) < up
        out[pos] = k
    return out.astype(np.int64)


def _stable_from_uniforms(alpha: float, u_angle, u_exp):
    """Chambers-Mallows-Stuck transform, symmetric case; CF ``exp(-|xi|^alpha)``."""
    phi = np.pi * (u_angle - 0.5)
    if alpha == 1.0:
        return np.tan(phi)
    w = -np.log(u_exp)
    return (
        np.sin(alpha * phi)
        / np.cos(phi) ** (1.0 / alpha)
        * (np.cos((1.0 - alpha) * phi) / w) ** ((1.0 - alpha) / alpha)
    )


def sample_symmetric_stable(alpha: float, rng: RngStream, size: Optional[int] = None):
    """Standard symmetric alpha-stable variates (CF ``exp(-|xi|^alpha)``).

    Consumes two uniforms per variate.
    """
    if not 0.0 < alpha < 2.0:
        raise ValueError(f"alpha must lie in (0, 2), got {alpha}")
    n = 1 if size is None else int(size)
    u = rng.uniforms(2 * n).reshape(n, 2)
    x = _stable_from_uniforms(float(alpha), u[:, 0], u[:, 1])
    return float(x[0]) if size is None else x


def increments_from_draws(
    sym: LevySymbol, coef: Coefficients, h: float, draws: WindowDraws
) -> np.ndarray:
    """Increments for every row of ``draws``; coefficients broadcast over rows.

    Coefficient arrays have leading shape ``(rows,)`` or ``(1,)``.  Returns
    ``(rows, d)``.
    """
    d = sym.dimension
    R = draws.rows
    h = float(h)
    delta = h * coef.drift
    if delta.shape != (R, d):
        delta = np.broadcast_to(delta, (R, d)).copy()
    if coef.factor is not None:
        z = special.ndtri(draws.slots(0, d))
        F = np.broadcast_to(coef.factor, (R, d, d))
        g = F[:, :, 0] * z[:, 0:1]
        for k in range(1, d):
            g = g + F[:, :, k] * z[:, k : k + 1]
        delta = delta + np.sqrt(h) * g
    if coef.intensity is not None:
        jump = sym.cpp.jump
        mu = np.broadcast_to(h * coef.intensity, (R,))
        counts = poisson_inverse(draws.slots(3 * d, 3 * d + 1)[:, 0], mu)
        per = jump.uniforms_per_jump
        capacity = (SLOTS_PER_WINDOW - 3 * d - 1) // max(per, 1)
        if counts.max(initial=0) > capacity:
            raise SamplerError(f"jump count {counts.max()} exceeds window capacity {capacity}")
        jsum = np.zeros((R, d))
        total = int(counts.sum())
        if total:
            rows = np.repeat(np.arange(R), counts)
            starts = np.cumsum(counts) - counts
            jidx = np.arange(total) - np.repeat(starts, counts)
            if jump.kind == "point":
                vals = np.broadcast_to(np.asarray(jump.a), (total, d))
            elif jump.kind == "two-point":
                u = draws.pick(rows, 3 * d + 1 + jidx)
                vals = np.where(u < 0.5, -1.0, 1.0)[:, None] * np.asarray(jump.a)
            else:
                cov = np.asarray(jump.cov)
                Fj = ldl_factor(cov[None])[0]
                z = np.stack(
                    [special.ndtri(draws.pick(rows, 3 * d + 1 + jidx * d + c)) for c in range(d)],
                    axis=-1,
                )
                vals = np.asarray(jump.mean) + z @ Fj.T
            np.add.at(jsum, rows, vals)
        delta = delta + jsum
    if coef.scale is not None:
        alpha = sym.stable.alpha
        x = _stable_from_uniforms(alpha, draws.slots(d, 2 * d), draws.slots(2 * d, 3 * d))
        c = np.broadcast_to(coef.scale, (R,))
        delta = delta + (c * h ** (1.0 / alpha))[:, None] * x
    return delta


def _check_step(h):
    if not h > 0:
        raise SamplerError(f"time step must be positive, got {h}")


def sample_increments(
    sym: LevySymbol, s: float, x, h: float, rng: RngStream, size: int
) -> np.ndarray:
    """``size`` independent increments from a single frozen point ``(s, x)``.

    Draw ``m`` reads window ``m`` of ``rng``; entry ``m`` equals what the
    ``m``-th successive :func:`sample_increment` call would return.
    Returns ``(size, d)``.
    """
    _check_step(h)
    x = np.asarray(x, dtype=float).reshape(1, sym.dimension)
    coef = sym.coefficients(np.array([float(s)]), x)
    draws = WindowDraws(rng.seed, rng.stream, rng.take_windows(int(size)))
    return increments_from_draws(sym, coef, h, draws)


def sample_increment(sym: LevySymbol, s: float, x, h: float, rng: RngStream) -> np.ndarray:
    """One increment ``delta``; the new chain state is ``x + delta``."""
    return sample_increments(sym, s, x, h, rng, 1)[0]


def increment_cf(sym: LevySymbol, s: float, x, h: float, xi) -> complex:
    """``exp(i x.xi - h q(s, x, xi))``, the CF of the post-step state."""
    x = np.asarray(x, dtype=float).reshape(sym.dimension)
    xi = np.asarray(xi, dtype=float)
    q = sym.evaluate(float(s), x, xi)
    val = np.exp(1j * (xi @ x) - float(h) * q)
    return complex(val) if val.ndim == 0 else val


def recipe_cf(sym: LevySymbol, s: float, x, h: float, xi):
    """CF of ``x + delta`` assembled from the sampling recipe's components.

    Product of the component laws actually drawn by
    :func:`increments_from_draws`: point mass ``x + h b``, ``N(0, hQ)``,
    compound Poisson with rate ``h lam`` and ``c h^(1/alpha)``-scaled stable
    coordinates.  Independent of :meth:`LevySymbol.exponent`.
    """
    x = np.asarray(x, dtype=float).reshape(1, sym.dimension)
    coef = sym.coefficients(np.array([float(s)]), x)
    xi = np.asarray(xi, dtype=float)
    h = float(h)
    loc = x[0] + h * coef.drift[0]
    out = np.exp(1j * (xi @ loc))
    if coef.factor is not None:
        F = coef.factor[0]
        v = xi @ F  # xi.F F^T xi = |F^T xi|^2
        out = out * np.exp(-0.5 * h * np.sum(v * v, axis=-1))
    if coef.intensity is not None:
        out = out * np.exp(h * coef.intensity[0] * (sym.cpp.jump.cf(xi) - 1.0))
    if coef.scale is not None:
        alpha = sym.stable.alpha
        width = coef.scale[0] * h ** (1.0 / alpha)
        for k in range(sym.dimension):
            out = out * np.exp(-np.abs(width * xi[..., k]) ** alpha)
    return complex(out) if np.ndim(out) == 0 else out
