"""Strict TOML configuration for the command-line front end.

A configuration has a ``[symbol]`` section (with optional ``[symbol.jump]``
and ``[symbol.stable]`` tables), a ``[run]`` section and optional
``[grid]``, ``[probe]``, ``[generator]``, ``[chernoff]`` and ``[check]``
sections.  Unknown keys anywhere are errors; expression strings are parsed
at load time and syntax errors carry the file line and column.

Example (the piecewise drift scenario)::

    [symbol]
    dimension = 1
    drift = "1 + 1*step(s-0.5)"

    [run]
    t0 = 0.0
    T = 1.0
    n = 10
    x0 = 0.0
    paths = 1
    seed = 2024
"""

from __future__ import annotations

import hashlib
import json
import re
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .field import FieldError, FieldExpr, FieldNameError, FieldSyntaxError, parse_field
from .symbol import AS_GIVEN, FROZEN_AT_ZERO, JumpDist, LevySymbol, make_symbol

__all__ = [
    "ConfigError",
    "SimConfig",
    "RunSection",
    "GridSection",
    "ProbeSection",
    "GeneratorSection",
    "ChernoffSection",
    "CheckSection",
    "parse_config",
    "load_config",
]

_REQUIRED = object()


class ConfigError(ValueError):
    def __init__(self, message: str, section: Optional[str] = None, key: Optional[str] = None,
                 location: Optional[str] = None):
        self.section = section
        self.key = key
        self.location = location
        where = ""
        if section is not None:
            where = f"[{section}]" + (f" {key}" if key is not None else "")
        prefix = f"{location}: " if location else ""
        super().__init__(f"{prefix}{where + ': ' if where else ''}{message}")


# -- typed sections ---------------------------------------------------------


@dataclass(frozen=True)
class RunSection:
    t0: float = 0.0
    T: float = 1.0
    n: int = 10
    x0: tuple = (0.0,)
    paths: int = 1
    seed: int = 0
    workers: int = 1
    retain: str = "full"


@dataclass(frozen=True)
class GridSection:
    a: float = -16.0
    b: float = 16.0
    N: int = 512
    periodic: bool = False
    s_a: float = 0.0
    s_b: float = 1.0
    Ns: int = 64


@dataclass(frozen=True)
class ProbeSection:
    s: float = 0.0
    x: tuple = (0.0,)
    h: float = 0.01
    M: int = 100_000
    xi: tuple = ()  # tuple of d-tuples; empty means -5..5 along the first axis


@dataclass(frozen=True)
class GeneratorSection:
    s: float = 0.0
    f: Optional[FieldExpr] = None
    spacetime: bool = False
    probe: bool = False
    h: float = 1e-3
    M: int = 10_000
    points: int = 0  # 0 = every grid point


@dataclass(frozen=True)
class ChernoffSection:
    s: float = 0.0
    t: float = 1.0
    n: int = 16
    g: Optional[FieldExpr] = None
    r: Optional[float] = None
    delta: float = 1e-3
    property_tol: float = 1e-8
    equation_tol: float = 0.05


@dataclass(frozen=True)
class CheckSection:
    s: float = 0.0
    expect: str = "coincide"
    expect_continuous: bool = True
    h_seq: tuple = (4e-3, 2e-3, 1e-3)
    M: int = 10_000
    f: Optional[FieldExpr] = None
    xi_max: float = 10.0
    s_lo: float = 0.0
    s_hi: float = 1.0
    x_lo: float = -2.0
    x_hi: float = 2.0
    bumps: int = 10
    drift_oracle: Optional[dict] = None  # {alpha, beta, s0}


_SECTIONS: dict[str, dict[str, Any]] = {
    "symbol": {
        "dimension": 1,
        "drift": None,
        "diffusion": None,
        "negative_time": AS_GIVEN,
        "jump": None,
        "stable": None,
    },
    "symbol.jump": {"intensity": _REQUIRED, "kind": _REQUIRED, "a": None, "mean": None, "cov": None},
    "symbol.stable": {"alpha": _REQUIRED, "scale": "1"},
    "run": {f.name: f.default for f in RunSection.__dataclass_fields__.values()},
    "grid": {f.name: f.default for f in GridSection.__dataclass_fields__.values()},
    "probe": {f.name: f.default for f in ProbeSection.__dataclass_fields__.values()},
    "generator": {f.name: f.default for f in GeneratorSection.__dataclass_fields__.values()},
    "chernoff": {f.name: f.default for f in ChernoffSection.__dataclass_fields__.values()},
    "check": {f.name: f.default for f in CheckSection.__dataclass_fields__.values()},
    "check.drift_oracle": {"alpha": _REQUIRED, "beta": _REQUIRED, "s0": _REQUIRED},
}
_TABLE_KEYS = {("symbol", "jump"), ("symbol", "stable"), ("check", "drift_oracle")}


@dataclass(frozen=True)
class SimConfig:
    symbol: LevySymbol
    run: RunSection
    grid: GridSection
    probe: ProbeSection
    generator: GeneratorSection
    chernoff: ChernoffSection
    check: CheckSection
    raw: dict = field(default_factory=dict, compare=False, repr=False)
    path: Optional[str] = None

    @property
    def dimension(self) -> int:
        return self.symbol.dimension

    def with_overrides(self, seed=None, paths=None, n=None, workers=None) -> "SimConfig":
        """Command-line flags replace the corresponding ``[run]`` keys."""
        run = self.run
        raw = json.loads(json.dumps(self.raw))
        raw.setdefault("run", {})
        for key, val in (("seed", seed), ("paths", paths), ("n", n), ("workers", workers)):
            if val is None:
                continue
            if key == "seed":
                val = _u64(val, "run", key)
            elif val < 1:
                raise ConfigError("must be >= 1", "run", key)
            run = replace(run, **{key: int(val)})
            raw["run"][key] = int(val)
        return replace(self, run=run, raw=raw)

    def echo(self) -> dict:
        """Normalised effective configuration (plain data)."""
        return json.loads(json.dumps(self.raw, sort_keys=True))

    def digest(self) -> str:
        """sha256 of the canonical effective configuration.

        ``run.workers`` is excluded: it changes scheduling, never results.
        """
        data = self.echo()
        if "run" in data:
            data["run"].pop("workers", None)
            if not data["run"]:
                del data["run"]
        text = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


# -- helpers ----------------------------------------------------------------


def _u64(val, section, key) -> int:
    if isinstance(val, bool) or not isinstance(val, int) or not 0 <= val < 2**64:
        raise ConfigError(f"expected an unsigned 64-bit integer, got {val!r}", section, key)
    return int(val)


def _locate(text: str, section: str, key: str) -> tuple[int, int] | None:
    """Line and column (1-based) of the value of ``key`` inside ``[section]``."""
    current = ""
    head = re.compile(r"^\s*\[\s*([A-Za-z0-9_.\-]+)\s*\]")
    assign = re.compile(r"^(\s*" + re.escape(key) + r"\s*=\s*)")
    for i, line in enumerate(text.splitlines(), start=1):
        m = head.match(line)
        if m:
            current = m.group(1)
            continue
        if current == section:
            m = assign.match(line)
            if m:
                return i, len(m.group(1)) + 1
    return None


class _Loader:
    def __init__(self, data: dict, text: str, path: str):
        self.data = data
        self.text = text
        self.path = path

    def table(self, name: str, required: bool = False) -> dict:
        node: Any = self.data
        for part in name.split("."):
            if not isinstance(node, dict) or part not in node:
                if required:
                    raise ConfigError("missing section", name)
                node = {}
                break
            node = node[part]
        if not isinstance(node, dict):
            raise ConfigError("expected a table", name)
        schema = _SECTIONS[name]
        for key in node:
            if key not in schema:
                known = ", ".join(sorted(schema))
                raise ConfigError(f"unknown key {key!r} (known keys: {known})", name, key,
                                  self.where(name, key))
        out = {}
        for key, default in schema.items():
            if key in node:
                out[key] = node[key]
            elif default is _REQUIRED:
                raise ConfigError("missing key", name, key)
            else:
                out[key] = default
        for parent, child in _TABLE_KEYS:
            if parent == name and child in node and not isinstance(node[child], dict):
                raise ConfigError("expected a table", name, child)
        return out

    def where(self, section, key) -> str:
        loc = _locate(self.text, section, key)
        return f"{self.path}:{loc[0]}" if loc else self.path

    def expr(self, section: str, key: str, value, d: int) -> FieldExpr:
        if isinstance(value, bool) or not isinstance(value, (str, int, float)):
            raise ConfigError(f"expected an expression string, got {value!r}", section, key,
                              self.where(section, key))
        try:
            return parse_field(str(value), d)
        except FieldError as exc:
            loc = _locate(self.text, section, key)
            where = self.path
            if loc is not None:
                col = loc[1]
                if isinstance(value, str) and isinstance(exc, (FieldSyntaxError, FieldNameError)):
                    col += exc.position  # column of the quote plus the offset
                where = f"{self.path}:{loc[0]}:{col}"
            raise ConfigError(f"expression error: {exc}", section, key, where) from exc


def _num(val, section, key, kind=float):
    if isinstance(val, bool):
        raise ConfigError(f"expected a number, got {val!r}", section, key)
    if kind is int:
        if not isinstance(val, int):
            raise ConfigError(f"expected an integer, got {val!r}", section, key)
        return int(val)
    if not isinstance(val, (int, float)):
        raise ConfigError(f"expected a number, got {val!r}", section, key)
    return float(val)


def _vector(val, d, section, key) -> tuple:
    if isinstance(val, (int, float)) and not isinstance(val, bool):
        val = [val]
    if not isinstance(val, list) or len(val) != d:
        raise ConfigError(f"expected a list of {d} numbers, got {val!r}", section, key)
    return tuple(_num(v, section, key) for v in val)


def _matrix(val, d, section, key) -> tuple:
    if isinstance(val, (int, float)) and not isinstance(val, bool) and d == 1:
        val = [[val]]
    if not isinstance(val, list) or len(val) != d:
        raise ConfigError(f"expected a {d}x{d} matrix", section, key)
    return tuple(_vector(row, d, section, key) for row in val)


def _bool(val, section, key) -> bool:
    if not isinstance(val, bool):
        raise ConfigError(f"expected true or false, got {val!r}", section, key)
    return val


def _power_of_two(N, section, key):
    if N < 8 or N & (N - 1):
        raise ConfigError(f"must be a power of two >= 8, got {N}", section, key)


# -- sections ---------------------------------------------------------------


def _symbol(ld: _Loader) -> LevySymbol:
    sec = ld.table("symbol", required=True)
    d = _num(sec["dimension"], "symbol", "dimension", int)
    if d < 1:
        raise ConfigError("must be >= 1", "symbol", "dimension")

    drift = None
    if sec["drift"] is not None:
        vals = sec["drift"] if isinstance(sec["drift"], list) else [sec["drift"]]
        if len(vals) != d:
            raise ConfigError(f"expected {d} expression(s)", "symbol", "drift")
        drift = [ld.expr("symbol", "drift", v, d) for v in vals]

    diffusion = None
    if sec["diffusion"] is not None:
        rows = sec["diffusion"]
        if not isinstance(rows, list):
            rows = [[rows]]
        if len(rows) != d or any(not isinstance(r, list) or len(r) != d for r in rows):
            raise ConfigError(f"expected a {d}x{d} matrix of expressions", "symbol", "diffusion")
        diffusion = [[ld.expr("symbol", "diffusion", v, d) for v in r] for r in rows]

    mode = sec["negative_time"]
    if mode not in (AS_GIVEN, FROZEN_AT_ZERO):
        raise ConfigError(f"must be {AS_GIVEN!r} or {FROZEN_AT_ZERO!r}, got {mode!r}",
                          "symbol", "negative_time")

    intensity = jump = None
    if sec["jump"] is not None:
        jt = ld.table("symbol.jump")
        intensity = ld.expr("symbol.jump", "intensity", jt["intensity"], d)
        kind = jt["kind"]
        try:
            if kind == "point":
                jump = JumpDist.point(_vector(jt["a"], d, "symbol.jump", "a"))
            elif kind == "two-point":
                jump = JumpDist.two_point(_vector(jt["a"], d, "symbol.jump", "a"))
            elif kind == "gaussian":
                jump = JumpDist.gaussian(
                    _vector(jt["mean"], d, "symbol.jump", "mean"),
                    _matrix(jt["cov"], d, "symbol.jump", "cov"),
                )
            else:
                raise ConfigError(
                    f"must be 'point', 'two-point' or 'gaussian', got {kind!r}", "symbol.jump", "kind"
                )
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc), "symbol.jump") from exc

    alpha = scale = None
    if sec["stable"] is not None:
        st = ld.table("symbol.stable")
        alpha = _num(st["alpha"], "symbol.stable", "alpha")
        if not 0.0 < alpha < 2.0:
            hint = "; alpha = 2 is Gaussian: use the diffusion matrix Q instead" if alpha == 2.0 else ""
            raise ConfigError(f"must lie in (0, 2), got {alpha}{hint}", "symbol.stable", "alpha",
                              ld.where("symbol.stable", "alpha"))
        scale = ld.expr("symbol.stable", "scale", st["scale"], d)

    try:
        return make_symbol(d, drift, diffusion, intensity, jump, alpha, scale, mode)
    except ValueError as exc:
        raise ConfigError(str(exc), "symbol") from exc


def _default_origin(val, d):
    # schema defaults are tuples (TOML yields lists): use the origin of R^d
    return [0.0] * d if isinstance(val, tuple) else val


def _run(ld: _Loader, d: int) -> RunSection:
    sec = ld.table("run")
    run = RunSection(
        t0=_num(sec["t0"], "run", "t0"),
        T=_num(sec["T"], "run", "T"),
        n=_num(sec["n"], "run", "n", int),
        x0=_vector(_default_origin(sec["x0"], d), d, "run", "x0"),
        paths=_num(sec["paths"], "run", "paths", int),
        seed=_u64(sec["seed"], "run", "seed"),
        workers=_num(sec["workers"], "run", "workers", int),
        retain=sec["retain"],
    )
    if run.n < 1:
        raise ConfigError("must be >= 1", "run", "n")
    if run.paths < 1:
        raise ConfigError("must be >= 1", "run", "paths")
    if run.workers < 1:
        raise ConfigError("must be >= 1", "run", "workers")
    if not run.T > run.t0:
        raise ConfigError(f"T must exceed t0 (t0={run.t0}, T={run.T})", "run", "T")
    if run.retain not in ("full", "terminal"):
        raise ConfigError("must be 'full' or 'terminal'", "run", "retain")
    return run


def _grid(ld: _Loader) -> GridSection:
    sec = ld.table("grid")
    g = GridSection(
        a=_num(sec["a"], "grid", "a"),
        b=_num(sec["b"], "grid", "b"),
        N=_num(sec["N"], "grid", "N", int),
        periodic=_bool(sec["periodic"], "grid", "periodic"),
        s_a=_num(sec["s_a"], "grid", "s_a"),
        s_b=_num(sec["s_b"], "grid", "s_b"),
        Ns=_num(sec["Ns"], "grid", "Ns", int),
    )
    if not g.b > g.a:
        raise ConfigError("need b > a", "grid", "b")
    if not g.s_b > g.s_a:
        raise ConfigError("need s_b > s_a", "grid", "s_b")
    _power_of_two(g.N, "grid", "N")
    _power_of_two(g.Ns, "grid", "Ns")
    return g


def _probe(ld: _Loader, d: int) -> ProbeSection:
    sec = ld.table("probe")
    xi = sec["xi"]
    if isinstance(xi, tuple):
        xi = list(xi)
    if not isinstance(xi, list):
        raise ConfigError("expected a list of frequencies", "probe", "xi")
    pts = tuple(_vector(v, d, "probe", "xi") for v in xi)
    p = ProbeSection(
        s=_num(sec["s"], "probe", "s"),
        x=_vector(_default_origin(sec["x"], d), d, "probe", "x"),
        h=_num(sec["h"], "probe", "h"),
        M=_num(sec["M"], "probe", "M", int),
        xi=pts,
    )
    if not p.h > 0:
        raise ConfigError("must be positive", "probe", "h")
    if p.M < 10_000:
        raise ConfigError("must be >= 10000", "probe", "M")
    return p


def _opt_expr(ld, section, key, value):
    return None if value is None else ld.expr(section, key, value, 1)


def _generator(ld: _Loader) -> GeneratorSection:
    sec = ld.table("generator")
    g = GeneratorSection(
        s=_num(sec["s"], "generator", "s"),
        f=_opt_expr(ld, "generator", "f", sec["f"]),
        spacetime=_bool(sec["spacetime"], "generator", "spacetime"),
        probe=_bool(sec["probe"], "generator", "probe"),
        h=_num(sec["h"], "generator", "h"),
        M=_num(sec["M"], "generator", "M", int),
        points=_num(sec["points"], "generator", "points", int),
    )
    if not g.h > 0:
        raise ConfigError("must be positive", "generator", "h")
    return g


def _chernoff(ld: _Loader) -> ChernoffSection:
    sec = ld.table("chernoff")
    c = ChernoffSection(
        s=_num(sec["s"], "chernoff", "s"),
        t=_num(sec["t"], "chernoff", "t"),
        n=_num(sec["n"], "chernoff", "n", int),
        g=_opt_expr(ld, "chernoff", "g", sec["g"]),
        r=None if sec["r"] is None else _num(sec["r"], "chernoff", "r"),
        delta=_num(sec["delta"], "chernoff", "delta"),
        property_tol=_num(sec["property_tol"], "chernoff", "property_tol"),
        equation_tol=_num(sec["equation_tol"], "chernoff", "equation_tol"),
    )
    if c.n < 1:
        raise ConfigError("must be >= 1", "chernoff", "n")
    if c.t < 0:
        raise ConfigError("must be non-negative", "chernoff", "t")
    return c


def _check(ld: _Loader) -> CheckSection:
    sec = ld.table("check")
    if sec["expect"] not in ("coincide", "split"):
        raise ConfigError("must be 'coincide' or 'split'", "check", "expect")
    h_seq = sec["h_seq"]
    if not isinstance(h_seq, (list, tuple)) or len(h_seq) < 2:
        raise ConfigError("expected a list of at least two step sizes", "check", "h_seq")
    oracle = None
    if sec["drift_oracle"] is not None:
        o = ld.table("check.drift_oracle")
        oracle = {k: _num(o[k], "check.drift_oracle", k) for k in ("alpha", "beta", "s0")}
    c = CheckSection(
        s=_num(sec["s"], "check", "s"),
        expect=sec["expect"],
        expect_continuous=_bool(sec["expect_continuous"], "check", "expect_continuous"),
        h_seq=tuple(_num(h, "check", "h_seq") for h in h_seq),
        M=_num(sec["M"], "check", "M", int),
        f=_opt_expr(ld, "check", "f", sec["f"]),
        xi_max=_num(sec["xi_max"], "check", "xi_max"),
        s_lo=_num(sec["s_lo"], "check", "s_lo"),
        s_hi=_num(sec["s_hi"], "check", "s_hi"),
        x_lo=_num(sec["x_lo"], "check", "x_lo"),
        x_hi=_num(sec["x_hi"], "check", "x_hi"),
        bumps=_num(sec["bumps"], "check", "bumps", int),
        drift_oracle=oracle,
    )
    if any(b >= a for a, b in zip(c.h_seq, c.h_seq[1:])):
        raise ConfigError("must be strictly decreasing", "check", "h_seq")
    if c.M < 10_000:
        raise ConfigError("must be >= 10000", "check", "M")
    return c


def _plain(data):
    if isinstance(data, dict):
        return {k: _plain(v) for k, v in data.items()}
    if isinstance(data, (list, tuple)):
        return [_plain(v) for v in data]
    return data


def parse_config(path) -> SimConfig:
    """Load and fully validate a configuration file."""
    path = str(path)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration: {exc}", location=path) from exc
    return loads_config(text, path)


load_config = parse_config


def loads_config(text: str, path: str = "<string>") -> SimConfig:
    """Like :func:`parse_config` for configuration text."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}", location=path) from exc
    for name in data:
        if name not in _SECTIONS:
            raise ConfigError(
                f"unknown section {name!r} (known: {', '.join(s for s in _SECTIONS if '.' not in s)})",
                location=path,
            )
    ld = _Loader(data, text, path)
    sym = _symbol(ld)
    d = sym.dimension
    return SimConfig(
        symbol=sym,
        run=_run(ld, d),
        grid=_grid(ld),
        probe=_probe(ld, d),
        generator=_generator(ld),
        chernoff=_chernoff(ld),
        check=_check(ld),
        raw=_plain(data),
        path=path,
    )
