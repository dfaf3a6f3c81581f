"""Coefficient-field expressions over time ``s`` and space ``x1..xd``.

Grammar (lowest to highest precedence)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | '+' unary | power
    power  := atom ('^' unary)?
    atom   := NUMBER | 'pi' | NAME | NAME '(' expr (',' expr)* ')' | '(' expr ')'

``^`` binds tighter than unary minus (``-2^2 == -4``) and is right
associative.  Evaluation is vectorised: every variable may be a numpy array
and the result broadcasts.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import qmc

__all__ = [
    "FieldError",
    "FieldSyntaxError",
    "FieldNameError",
    "FieldEvalError",
    "FieldExpr",
    "parse_field",
    "eval_field",
    "field_bounds",
]


class FieldError(ValueError):
    """Base class for expression errors."""


class FieldSyntaxError(FieldError):
    def __init__(self, text: str, position: int, expected: str):
        self.text = text
        self.position = position  # 1-based
        self.expected = expected
        super().__init__(f"syntax error at offset {position}: expected {expected} in {text!r}")


class FieldNameError(FieldError):
    """Unknown identifier, wrong arity or a variable outside the dimension."""

    def __init__(self, message: str, position: int):
        self.position = position
        super().__init__(f"{message} (offset {position})")


class FieldEvalError(FieldError):
    def __init__(self, message: str, point: dict | None = None):
        self.point = point
        suffix = "" if point is None else f" at {point}"
        super().__init__(message + suffix)


# --------------------------------------------------------------------------
# Tree nodes


@dataclass(frozen=True)
class Num:
    value: float

    def source(self) -> str:
        if self.value == math.pi:
            return "pi"
        return repr(self.value) if self.value >= 0 else f"({self.value!r})"


@dataclass(frozen=True)
class Var:
    name: str  # "s" or "x<i>"
    index: int  # -1 for s, else coordinate index

    def source(self) -> str:
        return self.name


@dataclass(frozen=True)
class Neg:
    operand: object

    def source(self) -> str:
        return f"(-{self.operand.source()})"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object

    def source(self) -> str:
        return f"({self.left.source()} {self.op} {self.right.source()})"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple

    def source(self) -> str:
        return f"{self.name}({', '.join(a.source() for a in self.args)})"


_ARITY = {
    "sin": 1,
    "cos": 1,
    "exp": 1,
    "tanh": 1,
    "abs": 1,
    "sqrt": 1,
    "step": 1,
    "min": 2,
    "max": 2,
}

# --------------------------------------------------------------------------
# Tokenizer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


@dataclass
class _Tok:
    kind: str  # num, name, op, end
    text: str
    pos: int  # 1-based


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    i = 0
    while i < len(text):
        m = _TOKEN_RE.match(text, i)
        if m is None:
            raise FieldSyntaxError(text, i + 1, "number, name, operator or parenthesis")
        kind = m.lastgroup
        if kind != "ws":
            toks.append(_Tok(kind, m.group(), i + 1))
        i = m.end()
    toks.append(_Tok("end", "", len(text) + 1))
    return toks


class _Parser:
    def __init__(self, text: str, dimension: int):
        self.text = text
        self.dimension = dimension
        self.toks = _tokenize(text)
        self.i = 0
        self.free: set[str] = set()

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def _fail(self, expected: str):
        raise FieldSyntaxError(self.text, self.tok.pos, expected)

    def _accept(self, op: str) -> bool:
        if self.tok.kind == "op" and self.tok.text == op:
            self.i += 1
            return True
        return False

    def parse(self):
        node = self.expr()
        if self.tok.kind != "end":
            self._fail("operator or end of input")
        return node

    def expr(self):
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.tok.text
            self.i += 1
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.tok.text
            self.i += 1
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self._accept("-"):
            return Neg(self.unary())
        if self._accept("+"):
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self._accept("^"):
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        tok = self.tok
        if tok.kind == "num":
            self.i += 1
            return Num(float(tok.text))
        if tok.kind == "name":
            self.i += 1
            return self._name(tok)
        if self._accept("("):
            node = self.expr()
            if not self._accept(")"):
                self._fail("')'")
            return node
        self._fail("number, name or '('")

    def _name(self, tok: _Tok):
        name = tok.text
        if self.tok.kind == "op" and self.tok.text == "(":
            if name not in _ARITY:
                raise FieldNameError(f"unknown function {name!r}", tok.pos)
            self.i += 1
            args = [self.expr()]
            while self._accept(","):
                args.append(self.expr())
            if not self._accept(")"):
                self._fail("',' or ')'")
            if len(args) != _ARITY[name]:
                raise FieldNameError(
                    f"{name} takes {_ARITY[name]} argument(s), got {len(args)}", tok.pos
                )
            return Call(name, tuple(args))
        if name == "pi":
            return Num(math.pi)
        if name == "s":
            self.free.add("s")
            return Var("s", -1)
        m = re.fullmatch(r"x([1-9]\d*)", name)
        if m:
            k = int(m.group(1))
            if k > self.dimension:
                raise FieldNameError(
                    f"variable {name} exceeds dimension {self.dimension}", tok.pos
                )
            self.free.add(name)
            return Var(name, k - 1)
        if name in _ARITY:
            raise FieldNameError(f"function {name!r} requires arguments", tok.pos)
        raise FieldNameError(f"unknown identifier {name!r}", tok.pos)


# --------------------------------------------------------------------------
# Evaluation


def _bad_point(mask, s, x, dimension):
    """First offending (s, x) location for an error message."""
    mask = np.asarray(mask)
    idx = np.unravel_index(int(np.argmax(mask)), mask.shape) if mask.ndim else ()
    s_arr = np.broadcast_to(s, mask.shape) if mask.ndim else s
    point = {"s": float(np.asarray(s_arr)[idx])}
    for k in range(dimension):
        xs = np.broadcast_to(x[..., k], mask.shape) if mask.ndim else x[..., k]
        point[f"x{k + 1}"] = float(np.asarray(xs)[idx])
    return point


def _fail(message, mask, s, x, dimension):
    raise FieldEvalError(message, _bad_point(mask, s, x, dimension))


def _compile(node, dim):
    """Closure ``(s, x) -> value`` for a tree; domain errors carry the point."""
    t = type(node)
    if t is Num:
        v = node.value
        return lambda s, x: v
    if t is Var:
        if node.index < 0:
            return lambda s, x: s
        i = node.index
        return lambda s, x: x[..., i]
    if t is Neg:
        f = _compile(node.operand, dim)
        return lambda s, x: -f(s, x)
    if t is BinOp:
        fa = _compile(node.left, dim)
        fb = _compile(node.right, dim)
        op = node.op
        if op == "+":
            return lambda s, x: fa(s, x) + fb(s, x)
        if op == "-":
            return lambda s, x: fa(s, x) - fb(s, x)
        if op == "*":
            return lambda s, x: fa(s, x) * fb(s, x)
        if op == "/":
            def div(s, x):
                a, b = fa(s, x), fb(s, x)
                zero = np.equal(b, 0.0)
                if np.any(zero):
                    _fail("division by zero", np.broadcast_to(zero, np.broadcast(a, b).shape),
                          s, x, dim)
                return a / b
            return div

        def power(s, x):
            a, b = fa(s, x), fb(s, x)
            shape = np.broadcast(a, b).shape
            bad = np.logical_and(np.less(a, 0.0), np.not_equal(np.floor(b), b))
            if np.any(bad):
                _fail("negative base with non-integer exponent", np.broadcast_to(bad, shape),
                      s, x, dim)
            zero = np.logical_and(np.equal(a, 0.0), np.less(b, 0.0))
            if np.any(zero):
                _fail("division by zero (zero to a negative power)", np.broadcast_to(zero, shape),
                      s, x, dim)
            return np.power(a, b)
        return power

    args = [_compile(a, dim) for a in node.args]
    name = node.name
    fu = args[0]
    if name == "sqrt":
        def sqrt(s, x):
            u = fu(s, x)
            neg = np.less(u, 0.0)
            if np.any(neg):
                _fail("sqrt of negative", neg, s, x, dim)
            return np.sqrt(u)
        return sqrt
    if name == "step":
        return lambda s, x: np.where(np.greater_equal(fu(s, x), 0.0), 1.0, 0.0)
    if name in ("min", "max"):
        fv = args[1]
        g = np.minimum if name == "min" else np.maximum
        return lambda s, x: g(fu(s, x), fv(s, x))
    g = _UNARY[name]
    return lambda s, x: g(fu(s, x))


_UNARY = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "tanh": np.tanh, "abs": np.abs}


@dataclass(frozen=True)
class FieldExpr:
    """Immutable parsed expression; call with ``(s, x)``."""

    root: object
    dimension: int
    text: str
    free_variables: frozenset = field(default_factory=frozenset)

    @property
    def depends_on_s(self) -> bool:
        return "s" in self.free_variables

    @property
    def depends_on_x(self) -> bool:
        return any(v != "s" for v in self.free_variables)

    @property
    def is_constant(self) -> bool:
        return not self.free_variables

    def __post_init__(self):
        object.__setattr__(self, "_fn", _compile(self.root, self.dimension))

    def __reduce__(self):
        # the compiled closure is rebuilt on unpickling
        return (FieldExpr, (self.root, self.dimension, self.text, self.free_variables))

    def to_source(self) -> str:
        """Fully parenthesised source that re-parses to an equal tree."""
        return self.root.source()

    def evaluate(self, s, x):
        """Vectorised evaluation.

        ``x`` has trailing axis of length ``dimension``; ``s`` broadcasts
        against ``x[..., 0]``.  Returns an ndarray of the broadcast shape.
        """
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.dimension,):
            raise FieldEvalError(
                f"expected x with trailing dimension {self.dimension}, got shape {x.shape}"
            )
        s = np.asarray(s, dtype=float)
        shape = s.shape if s.shape == x.shape[:-1] else np.broadcast_shapes(s.shape, x.shape[:-1])
        with np.errstate(all="ignore"):
            out = np.asarray(self._fn(s, x), dtype=float)
        if out.shape != shape:
            out = np.broadcast_to(out, shape)
        finite = np.isfinite(out)
        if not finite.all():
            raise FieldEvalError("result not finite", _bad_point(~finite, s, x, self.dimension))
        return out

    def __call__(self, s: float, x: Sequence[float]) -> float:
        return eval_field(self, s, x)

    def __str__(self) -> str:
        return self.text


def parse_field(text: str, dimension: int) -> FieldExpr:
    """Parse ``text`` into a :class:`FieldExpr` over ``s, x1..x<dimension>``."""
    if dimension < 1:
        raise ValueError("dimension must be >= 1")
    if not text or not text.strip():
        raise FieldSyntaxError(text, 1, "expression")
    parser = _Parser(text, dimension)
    root = parser.parse()
    return FieldExpr(root, dimension, text, frozenset(parser.free))


def eval_field(expr: FieldExpr, s: float, x: Sequence[float]) -> float:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != expr.dimension:
        raise FieldEvalError(f"expected {expr.dimension} coordinates, got {x.shape[0]}")
    return float(expr.evaluate(float(s), x))


def field_bounds(expr: FieldExpr, box, nsamples: int = 1024) -> tuple[float, float]:
    """Estimated (min, max) of ``expr`` over a box in ``(s, x1..xd)``.

    ``box`` is a sequence of ``(low, high)`` pairs, one for ``s`` followed by
    one per space coordinate.  The estimate uses an unscrambled Halton sample
    plus every corner of the box; it is not a certified enclosure.
    """
    if nsamples < 2:
        raise ValueError("nsamples must be >= 2")
    box = np.asarray(box, dtype=float)
    if box.shape != (expr.dimension + 1, 2):
        raise ValueError(f"box must have shape ({expr.dimension + 1}, 2)")
    lo, hi = box[:, 0], box[:, 1]
    k = box.shape[0]
    unit = qmc.Halton(d=k, scramble=False).random(nsamples)
    corners = np.array(np.meshgrid(*[[0.0, 1.0]] * k, indexing="ij")).reshape(k, -1).T
    pts = lo + np.vstack([corners, unit]) * (hi - lo)
    vals = expr.evaluate(pts[:, 0], pts[:, 1:])
    return float(vals.min()), float(vals.max())
