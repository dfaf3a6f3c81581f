"""Deterministic CSV and key-value writers.

Numbers are written with ``repr``, the shortest decimal string that reads
back to the same double, so files are stable across runs and platforms.
Every file starts with one comment line::

    # fevo <version> command=<cmd> config_sha256=<hex> seed=<u64>
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from . import __version__

__all__ = [
    "fmt",
    "header_line",
    "write_table",
    "write_ensemble",
    "write_spacetime",
    "write_grid",
    "write_grid2d",
    "write_chernoff",
    "write_keyvalue",
]


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def header_line(command: str, digest: str, seed: Optional[int]) -> str:
    seed_s = "none" if seed is None else str(int(seed))
    return f"# fevo {__version__} command={command} config_sha256={digest} seed={seed_s}\n"


def write_table(path, header: str, columns: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    with open(path, "w", newline="\n") as fh:
        fh.write(header)
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")
    return path


def _xnames(d: int) -> list[str]:
    return [f"x{i + 1}" for i in range(d)]


def write_ensemble(path, header: str, times, states=None, terminal=None) -> Path:
    """Full paths ``path,k,t,x1..`` or, with ``terminal``, ``path,t,x1..``."""
    times = np.asarray(times)
    if states is not None:
        states = np.asarray(states)
        M, K1, d = states.shape

        def rows():
            for i in range(M):
                for k in range(K1):
                    yield (i, k, times[k], *states[i, k])

        return write_table(path, header, ["path", "k", "t", *_xnames(d)], rows())
    terminal = np.asarray(terminal)
    T = times[-1]
    return write_table(
        path, header, ["path", "t", *_xnames(terminal.shape[1])],
        ((i, T, *terminal[i]) for i in range(terminal.shape[0])),
    )


def write_spacetime(path, header: str, elapsed, states) -> Path:
    """Space-time paths ``path,k,t,s,x1..``; ``states`` is ``(M, K+1, d+1)``."""
    states = np.asarray(states)
    M, K1, d1 = states.shape

    def rows():
        for i in range(M):
            for k in range(K1):
                yield (i, k, elapsed[k], *states[i, k])

    return write_table(path, header, ["path", "k", "t", "s", *_xnames(d1 - 1)], rows())


def write_grid(path, header: str, x, f, Af, extra: Optional[dict] = None) -> Path:
    cols = ["x", "f", "Af"]
    data = [np.asarray(x), np.asarray(f), np.asarray(Af)]
    for name, vals in (extra or {}).items():
        cols.append(name)
        data.append(np.asarray(vals))
    return write_table(path, header, cols, zip(*data))


def write_grid2d(path, header: str, s, x, f, Lf) -> Path:
    """Row-major (``s`` outer) dump of a space-time grid."""
    s, x = np.asarray(s), np.asarray(x)
    f, Lf = np.asarray(f), np.asarray(Lf)

    def rows():
        for i in range(len(s)):
            for j in range(len(x)):
                yield (s[i], x[j], f[i, j], Lf[i, j])

    return write_table(path, header, ["s", "x", "f", "Lf"], rows())


def write_chernoff(path, header: str, x, g, Ug) -> Path:
    return write_table(path, header, ["x", "g", "Ug"], zip(x, g, Ug))


def _value(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if np.isfinite(v) else repr(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.ndarray):
        return [_value(u) for u in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_value(u) for u in v]
    return v


def write_keyvalue(path, header: str, data: dict) -> Path:
    """One ``key = <json value>`` line per entry, keys in insertion order."""
    path = Path(path)
    with open(path, "w", newline="\n") as fh:
        fh.write(header)
        for k, v in data.items():
            fh.write(f"{k} = {json.dumps(_value(v))}\n")
    return path
