import pickle
import zlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dsl_cases import GOLDEN, MALFORMED
from fevo import field as fieldmod
from fevo.field import (
    FieldEvalError,
    FieldNameError,
    FieldSyntaxError,
    eval_field,
    field_bounds,
    parse_field,
)


@pytest.mark.parametrize("text,s,x1,value", GOLDEN)
def test_golden_values(text, s, x1, value):
    assert eval_field(parse_field(text, 1), s, [x1]) == value


def test_golden_suite_size():
    assert len(GOLDEN) >= 30
    assert len(MALFORMED) >= 10


@pytest.mark.parametrize("text,d,pos,kind", MALFORMED)
def test_error_positions(text, d, pos, kind):
    with pytest.raises(getattr(fieldmod, kind)) as exc:
        parse_field(text, d)
    assert exc.value.position == pos


def test_syntax_error_describes_expectation():
    with pytest.raises(FieldSyntaxError) as exc:
        parse_field("1 + * s", 1)
    assert exc.value.expected
    assert "offset 5" in str(exc.value)


def test_pythagorean_identity():
    f = parse_field("sin(x1)^2 + cos(x1)^2", 1)
    assert abs(eval_field(f, 0.0, [0.3]) - 1.0) <= 1e-12


def test_step_right_continuous():
    f = parse_field("step(x1)", 1)
    assert eval_field(f, 0.0, [0.0]) == 1.0
    for eps in (1e-300, 1e-12, 0.5, 7.0):
        assert eval_field(f, 0.0, [-eps]) == 0.0


def test_variables_in_higher_dimension():
    f = parse_field("x1 + 10*x2 + 100*x3 - s", 3)
    assert eval_field(f, 1.0, [1.0, 2.0, 3.0]) == 320.0
    assert f.free_variables == {"s", "x1", "x2", "x3"}
    with pytest.raises(FieldNameError):
        parse_field("x4", 3)


def test_dependency_flags():
    assert parse_field("2*pi", 1).is_constant
    f = parse_field("s + 1", 1)
    assert f.depends_on_s and not f.depends_on_x
    g = parse_field("x1", 1)
    assert g.depends_on_x and not g.depends_on_s


@pytest.mark.parametrize(
    "text,point",
    [
        ("1/x1", [0.0]),
        ("sqrt(x1)", [-1.0]),
        ("x1^0.5", [-4.0]),
        ("x1^-1", [0.0]),
        ("exp(x1)", [1000.0]),
    ],
)
def test_evaluation_errors(text, point):
    with pytest.raises(FieldEvalError):
        eval_field(parse_field(text, 1), 0.0, point)


def test_negative_base_integer_exponent_allowed():
    assert eval_field(parse_field("x1^3", 1), 0.0, [-2.0]) == -8.0


def test_wrong_coordinate_count():
    with pytest.raises(FieldEvalError):
        eval_field(parse_field("x1", 1), 0.0, [1.0, 2.0])


def test_vectorised_matches_pointwise():
    f = parse_field("sin(x1)*s + max(x1, s)^2", 1)
    s = np.linspace(-1, 1, 7)
    x = np.linspace(-2, 2, 7)[:, None]
    vec = f.evaluate(s, x)
    pts = [eval_field(f, a, [b]) for a, b in zip(s, x[:, 0])]
    assert np.array_equal(vec, pts)


def test_pickle_roundtrip():
    f = parse_field("1 + 1*step(s-0.5) + x1^2", 1)
    g = pickle.loads(pickle.dumps(f))
    assert g.text == f.text
    assert eval_field(g, 0.7, [3.0]) == eval_field(f, 0.7, [3.0])


def test_field_bounds_examples():
    assert field_bounds(parse_field("2", 1), [(0, 1), (-5, 5)]) == (2.0, 2.0)
    assert field_bounds(parse_field("x1", 1), [(0, 1), (-1, 3)], 16) == (-1.0, 3.0)
    lo, hi = field_bounds(parse_field("sin(s)", 1), [(0, 10), (0, 1)], 1000)
    # dense-sampling oracle
    dense = np.sin(np.linspace(0, 10, 100001))
    assert lo >= dense.min() - 1e-12 and hi <= 1.0
    assert hi >= 0.99


def test_field_bounds_error_carries_point():
    with pytest.raises(FieldEvalError) as exc:
        field_bounds(parse_field("1/x1", 1), [(0, 1), (0, 1)], 8)
    assert exc.value.point is not None


# -- parse / print / parse -------------------------------------------------

_leaf = st.one_of(
    st.sampled_from(["s", "x1", "x2", "pi"]),
    st.floats(min_value=0, max_value=50, allow_nan=False).map(repr),
    st.integers(min_value=0, max_value=9).map(str),
)


def _extend(children):
    binary = st.tuples(children, st.sampled_from(["+", "-", "*", "/", "^"]), children).map(
        lambda t: f"{t[0]} {t[1]} {t[2]}"
    )
    unary = st.tuples(
        st.sampled_from(["sin", "cos", "exp", "tanh", "abs", "sqrt", "step", "-", "+", ""]),
        children,
    ).map(lambda t: f"{t[0]}({t[1]})")
    two = st.tuples(st.sampled_from(["min", "max"]), children, children).map(
        lambda t: f"{t[0]}({t[1]}, {t[2]})"
    )
    return st.one_of(binary, unary, two)


expressions = st.recursive(_leaf, _extend, max_leaves=12)


def _values(f, pts):
    out = []
    for s, x1, x2 in pts:
        try:
            out.append(eval_field(f, s, [x1, x2]))
        except FieldEvalError:
            out.append("error")
    return out


@settings(max_examples=150, deadline=None)
@given(expressions)
def test_print_parse_idempotent(text):
    f = parse_field(text, 2)
    g = parse_field(f.to_source(), 2)
    assert g.to_source() == f.to_source()
    pts = np.random.default_rng(zlib.crc32(text.encode())).uniform(-3, 3, size=(100, 3))
    assert _values(f, pts) == _values(g, pts)
