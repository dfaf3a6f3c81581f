"""Approximating Markov chain with frozen-symbol Levy increments.

Step ``k`` freezes the symbol at the left endpoint ``t_k`` of
``[t_k, t_k + 1/n]`` and the current state, then adds one exact increment.
The time lattice is built by repeated left-to-right addition of ``h = 1/n``
(``t_{k+1} = t_k + h``), shared by the plain chain and its space-time lift,
so both see bit-identical symbol arguments.  States are accumulated with
Neumaier compensated summation.

Path ``i`` of an ensemble uses stream ``(seed, i)`` and window ``k`` of
that stream for step ``k``; paths are simulated in lockstep chunks of fixed
size, so results never depend on the number of workers.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .field import FieldError
from .rng import WINDOW, RngStream, WindowDraws
from .sampler import increments_from_draws
from .symbol import LevySymbol

__all__ = [
    "ChainError",
    "EnsembleError",
    "ChainPath",
    "SpaceTimePath",
    "Ensemble",
    "time_lattice",
    "run_chain",
    "run_spacetime_chain",
    "simulate_ensemble",
    "run_ensemble",
]

CHUNK = 512


class ChainError(RuntimeError):
    def __init__(self, step: int, message: str):
        self.step = step
        super().__init__(f"step {step}: {message}")


class EnsembleError(RuntimeError):
    def __init__(self, failures: dict[int, str]):
        self.failures = failures
        first = sorted(failures.items())[:5]
        super().__init__(
            f"{len(failures)} path(s) failed: " + "; ".join(f"path {i}: {m}" for i, m in first)
        )


@dataclass
class ChainPath:
    t0: float
    h: float
    times: np.ndarray  # (K+1,)
    states: np.ndarray  # (K+1, d)
    seed: int
    stream: int

    @property
    def steps(self) -> int:
        return len(self.times) - 1

    @property
    def horizon(self) -> float:
        """Realized terminal time (on the 1/n lattice)."""
        return float(self.times[-1])


@dataclass
class SpaceTimePath:
    """States ``(s, x1..xd)`` of the space-time chain, time coordinate first."""

    h: float
    states: np.ndarray  # (K+1, d+1)
    seed: int
    stream: int

    @property
    def spatial(self) -> np.ndarray:
        return self.states[:, 1:]

    @property
    def elapsed(self) -> np.ndarray:
        """Process time ``t`` of state ``k``: ``k`` repeated additions of ``h``."""
        return time_lattice(0.0, self.h, len(self.states) - 1)


@dataclass
class Ensemble:
    times: np.ndarray
    terminal: np.ndarray  # (M, d)
    states: Optional[np.ndarray]  # (M, K+1, d) or None in terminal-only mode
    seed: int
    config: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    @property
    def paths(self) -> int:
        return self.terminal.shape[0]

    def path(self, i: int) -> ChainPath:
        if self.states is None:
            raise ValueError("ensemble was run in terminal-only mode")
        h = float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0
        return ChainPath(float(self.times[0]), h, self.times, self.states[i], self.seed, i)


def time_lattice(t0: float, h: float, K: int) -> np.ndarray:
    """``t_0, t_0 + h, (t_0 + h) + h, ...``: left-to-right repeated addition."""
    out = np.empty(K + 1)
    t = float(t0)
    out[0] = t
    for k in range(1, K + 1):
        t = t + h
        out[k] = t
    return out


def _step_count(t0: float, T: float, n: int) -> int:
    if not T > t0:
        raise ValueError(f"need T > t0, got t0={t0}, T={T}")
    if n < 1:
        raise ValueError("n must be >= 1")
    return int(round((T - t0) * n))


def _simulate(sym: LevySymbol, x0, times, h, seed, streams, bases, keep=True):
    """Lockstep chain over rows.

    ``x0`` is ``(R, d)``; ``streams`` is ``(R,)``; ``bases[k]`` is the window
    counter used by step ``k`` (scalar or ``(R,)``).  Returns the stacked
    states ``(K+1, R, d)`` or, with ``keep=False``, the terminal ``(R, d)``.
    """
    S = np.array(x0, dtype=float)
    C = np.zeros_like(S)
    K = len(times) - 1
    R = S.shape[0]
    streams = np.broadcast_to(np.asarray(streams, dtype=np.uint64), (R,))
    hist = np.empty((K + 1,) + S.shape) if keep else None
    if keep:
        hist[0] = S
    for k in range(K):
        Z = S + C
        try:
            coef = sym.coefficients(np.full(R, times[k]), Z)
            draws = WindowDraws(seed, streams, np.full(R, bases[k], dtype=np.uint64))
            inc = increments_from_draws(sym, coef, h, draws)
        except (FieldError, ValueError) as exc:
            raise ChainError(k, str(exc)) from exc
        t = S + inc
        C = C + np.where(np.abs(S) >= np.abs(inc), (S - t) + inc, (inc - t) + S)
        S = t
        if keep:
            hist[k + 1] = S + C
    return hist if keep else S + C


def run_chain(
    sym: LevySymbol, x0, t0: float, T: float, n: int, rng: RngStream
) -> ChainPath:
    """One path of the chain from ``x0`` at ``t0`` to the lattice point nearest ``T``.

    Step ``k`` consumes window ``k`` counted from the stream's current
    position; ``rng`` is advanced past the path.
    """
    K = _step_count(t0, T, n)
    h = 1.0 / n
    times = time_lattice(t0, h, K)
    x0 = np.asarray(x0, dtype=float).reshape(1, sym.dimension)
    bases = rng.take_windows(K)
    states = _simulate(sym, x0, times, h, rng.seed, np.array([rng.stream]), bases)
    return ChainPath(float(t0), h, times, states[:, 0, :], rng.seed, rng.stream)


def run_spacetime_chain(
    sym: LevySymbol, x0, s0: float, T: float, n: int, rng: RngStream
) -> SpaceTimePath:
    """Chain on ``R x R^d`` with kernel ``delta_{s+1/n} x nu_{s,x,1/n}``.

    The time coordinate moves deterministically by ``1/n``; the spatial part
    is driven exactly as :func:`run_chain`, so with the same stream state the
    spatial coordinates agree bit for bit.
    """
    path = run_chain(sym, x0, s0, T, n, rng)
    states = np.concatenate([path.times[:, None], path.states], axis=1)
    return SpaceTimePath(path.h, states, path.seed, path.stream)


def _run_chunk(args):
    sym, x0, times, h, seed, lo, hi, keep = args
    R = hi - lo
    streams = np.arange(lo, hi, dtype=np.uint64)
    bases = np.uint64(WINDOW) * np.arange(len(times) - 1, dtype=np.uint64)
    X0 = np.broadcast_to(x0, (R, sym.dimension))
    try:
        out = _simulate(sym, X0, times, h, seed, streams, bases, keep)
        return lo, out, {}
    except ChainError:
        pass
    # isolate the failing paths
    failures = {}
    parts = []
    for i in range(lo, hi):
        try:
            parts.append(
                _simulate(sym, X0[:1], times, h, seed, np.array([i], dtype=np.uint64), bases, keep)
            )
        except ChainError as exc:
            failures[i] = str(exc)
    if failures:
        return lo, None, failures
    return lo, np.concatenate(parts, axis=-2), {}


def simulate_ensemble(
    sym: LevySymbol,
    x0,
    t0: float,
    T: float,
    n: int,
    paths: int,
    seed: int,
    workers: int = 1,
    retain: str = "full",
) -> Ensemble:
    """``paths`` independent chains; path ``i`` draws from stream ``(seed, i)``."""
    if retain not in ("full", "terminal"):
        raise ValueError("retain must be 'full' or 'terminal'")
    if paths < 1:
        raise ValueError("paths must be >= 1")
    K = _step_count(t0, T, n)
    h = 1.0 / n
    times = time_lattice(t0, h, K)
    x0 = np.asarray(x0, dtype=float).reshape(sym.dimension)
    keep = retain == "full"
    jobs = [
        (sym, x0, times, h, int(seed), lo, min(lo + CHUNK, paths), keep)
        for lo in range(0, paths, CHUNK)
    ]
    started = time.perf_counter()
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_chunk, jobs))
    else:
        results = [_run_chunk(job) for job in jobs]
    failures = {}
    for _, _, f in results:
        failures.update(f)
    if failures:
        raise EnsembleError(failures)
    results.sort(key=lambda r: r[0])
    if keep:
        states = np.concatenate([np.swapaxes(r[1], 0, 1) for r in results], axis=0)
        terminal = states[:, -1, :]
    else:
        states = None
        terminal = np.concatenate([r[1] for r in results], axis=0)
    meta = {
        "steps": K,
        "h": h,
        "realized_horizon": float(times[-1]),
        "requested_horizon": float(T),
        "workers": workers,
        "wall_seconds": time.perf_counter() - started,
    }
    return Ensemble(times, terminal, states, int(seed), metadata=meta)


def run_ensemble(cfg, workers: Optional[int] = None) -> Ensemble:
    """Ensemble described by a :class:`fevo.config.SimConfig`."""
    run = cfg.run
    ens = simulate_ensemble(
        cfg.symbol,
        run.x0,
        run.t0,
        run.T,
        run.n,
        run.paths,
        run.seed,
        workers=run.workers if workers is None else workers,
        retain=run.retain,
    )
    ens.config = cfg.echo() if hasattr(cfg, "echo") else {}
    return ens
