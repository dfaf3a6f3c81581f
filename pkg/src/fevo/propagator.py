"""Evolution operators as products of one-step averaging operators.

``V(s, h) g(x) = E g(x + delta)`` for the frozen-symbol increment at
``(s, x)``, computed by Fourier quadrature with multiplier
``exp(-h q(s, x, xi))``.  The propagator over ``[s, s + t]`` is

    U(s, s+t) g = V(s, h) V(s+h, h) ... V(s+(n-1)h, h) g,   h = t/n,

applied right to left: the latest step acts on ``g`` first, as required
by ``U(s, t) = U(s, r) U(r, t)`` for operators on terminal functions::

    g --V(s+(n-1)h)--> ... --V(s+h)--> --V(s)--> U(s, s+t) g
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .chain import time_lattice
from .operators import (
    FunctionGrid,
    GridError,
    _check_support,
    _require_1d,
    _symbol_multiplier,
    apply_generator,
    apply_multiplier,
)
from .symbol import LevySymbol

__all__ = [
    "PropagatorResult",
    "apply_step",
    "compose_evolution",
    "propagate",
    "evolution_property_residual",
    "evolution_equation_residual",
]


@dataclass
class PropagatorResult:
    grid: FunctionGrid
    s: float
    t: float  # duration
    n: int
    leakage: list = field(default_factory=list)  # per step, boundary mass / max

    @property
    def values(self) -> np.ndarray:
        return self.grid.values


def apply_step(sym: LevySymbol, s: float, h: float, g: FunctionGrid) -> FunctionGrid:
    """``V(s, h) g``; ``h = 0`` returns ``g`` unchanged."""
    _require_1d(sym)
    if h < 0:
        raise ValueError("step must be non-negative")
    if h == 0:
        return g
    _check_support(g)
    out = apply_multiplier(g, _symbol_multiplier(sym, s, lambda q: np.exp(-h * q)), sym.depends_on_x)
    return g.like(out)


def _leak(g: FunctionGrid) -> float:
    scale = float(np.max(np.abs(g.values)))
    if g.periodic or scale == 0.0:
        return 0.0
    return max(abs(g.values[0]), abs(g.values[-1])) / scale


def _compose_on(sym, times, h, g: FunctionGrid):
    leakage = []
    for k in range(len(times) - 1, -1, -1):
        try:
            g = apply_step(sym, float(times[k]), h, g)
        except GridError as exc:
            raise GridError(f"step {k}: {exc}") from exc
        leakage.append(_leak(g))
    return g, leakage[::-1]


def compose_evolution(
    sym: LevySymbol, s: float, t: float, n: int, g: FunctionGrid
) -> PropagatorResult:
    """``U(s, s + t) g`` from ``n`` steps of size ``t / n`` (start ``s``, duration ``t``).

    Step times are the repeated-addition lattice ``s, s+h, ...`` shared with
    the chain simulator.
    """
    if t < 0:
        raise ValueError("duration must be non-negative")
    if n < 1:
        raise ValueError("n must be >= 1")
    if t == 0:
        return PropagatorResult(g, float(s), 0.0, n, [0.0] * n)
    h = t / n
    times = time_lattice(s, h, n - 1)
    out, leak = _compose_on(sym, times, h, g)
    return PropagatorResult(out, float(s), float(t), n, leak)


def propagate(sym: LevySymbol, s: float, t: float, n: int, g: FunctionGrid) -> PropagatorResult:
    """``U(s, t) g`` in absolute times ``s <= t``."""
    if t < s:
        raise ValueError("need s <= t")
    return compose_evolution(sym, s, t - s, n, g)


def evolution_property_residual(
    sym: LevySymbol, s: float, r: float, t: float, n: int, g: FunctionGrid
) -> float:
    """``sup |U(s,t) g - U(s,r) U(r,t) g|`` on the lattice ``s + k (t - s)/n``.

    ``r`` must be a lattice point; both sides reuse the same step times and
    step size.
    """
    if not s <= r <= t:
        raise ValueError("need s <= r <= t")
    if t == s:
        return 0.0
    h = (t - s) / n
    m_real = (r - s) / h
    m = int(round(m_real))
    if abs(m_real - m) > 1e-9:
        raise ValueError(f"r = {r} is not on the lattice of step {h}")
    times = time_lattice(s, h, n - 1)
    whole, _ = _compose_on(sym, times, h, g)
    inner, _ = _compose_on(sym, times[m:], h, g) if m < n else (g, None)
    outer, _ = _compose_on(sym, times[:m], h, inner) if m > 0 else (inner, None)
    return float(np.max(np.abs(whole.values - outer.values)))


def evolution_equation_residual(
    sym: LevySymbol,
    which: str,
    s: float,
    t: float,
    n: int,
    g: FunctionGrid,
    delta: float = 1e-3,
) -> float:
    """Residual of the forward or backward evolution equation.

    forward:  ``[U(s, t+delta) g - U(s, t) g] / delta - U(s, t) A_t g`` with
    ``U(s, t+delta) = U(s, t) V(t, delta)``;
    backward: ``[U(s+delta, t) g - U(s, t) g] / delta + A_s U(s+delta, t) g``
    with ``U(s, t) = V(s, delta) U(s+delta, t)``.

    ``U`` between absolute times uses ``n`` steps; ``t = s`` makes it the
    identity.  Returns the sup norm.
    """
    if which not in ("forward", "backward"):
        raise ValueError("which must be 'forward' or 'backward'")
    if t < s:
        raise ValueError("need s <= t")
    if which == "forward":
        Ut = lambda v: compose_evolution(sym, s, t - s, n, v).grid  # noqa: E731
        ahead = Ut(apply_step(sym, t, delta, g))
        here = Ut(g)
        drift = Ut(apply_generator(sym, t, g))
        res = (ahead.values - here.values) / delta - drift.values
    else:
        if t - s < delta:
            raise ValueError("backward residual needs t - s >= delta")
        later = compose_evolution(sym, s + delta, t - s - delta, n, g).grid
        full = apply_step(sym, s, delta, later)
        res = (later.values - full.values) / delta + apply_generator(sym, s, later).values
    return float(np.max(np.abs(res)))
