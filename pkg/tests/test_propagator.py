import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fevo.operators import FunctionGrid, GridError
from fevo.propagator import (
    apply_step,
    compose_evolution,
    evolution_equation_residual,
    evolution_property_residual,
    propagate,
)
from fevo.symbol import JumpDist, make_symbol


def gauss(x):
    return np.exp(-0.5 * x**2)


def heat(x, t):
    return (1 + t) ** -0.5 * np.exp(-(x**2) / (2 * (1 + t)))


def g_grid(N=512, a=-16.0, b=16.0, func=gauss):
    return FunctionGrid.sample(func, a, b, N)


def test_zero_step_is_identity(brownian):
    g = g_grid()
    assert apply_step(brownian, 0.3, 0.0, g) is g
    with pytest.raises(ValueError):
        apply_step(brownian, 0.3, -0.1, g)


def test_drift_step_is_shift():
    g = g_grid()
    out = apply_step(make_symbol(drift="1"), 0.0, 0.25, g)
    assert np.max(np.abs(out.values - gauss(g.x + 0.25))) <= 1e-6


def test_brownian_step_closed_form(brownian):
    g = g_grid()
    out = apply_step(brownian, 0.0, 1.0, g)
    assert abs(out.values[256] - 2**-0.5) <= 1e-6
    assert np.max(np.abs(out.values - heat(g.x, 1.0))) <= 1e-6


def test_translation_semigroup():
    g = g_grid()
    for n in (1, 3, 10):
        out = compose_evolution(make_symbol(drift="1"), 0.0, 1.0, n, g)
        assert np.max(np.abs(out.values - gauss(g.x + 1))) <= 1e-6


def test_example3_composition(example3):
    g = g_grid()
    out = compose_evolution(example3, 0.0, 1.0, 10, g)
    assert np.max(np.abs(out.values - gauss(g.x + 1.5))) <= 1e-6
    assert len(out.leakage) == 10


def test_right_factor_first():
    # two non-commuting steps: V(0) applied last, V(0.5) acts on g first
    sym = make_symbol(drift="(1 - step(s - 0.5))*sin(x1) + step(s - 0.5)*cos(x1)")
    g = g_grid(N=128)
    h = 0.5
    expected = apply_step(sym, 0.0, h, apply_step(sym, 0.5, h, g)).values
    reversed_ = apply_step(sym, 0.5, h, apply_step(sym, 0.0, h, g)).values
    got = compose_evolution(sym, 0.0, 1.0, 2, g).values
    assert np.array_equal(got, expected)
    assert np.max(np.abs(got - reversed_)) > 1e-3


def test_brownian_chernoff(brownian):
    g = g_grid(N=1024)
    res = compose_evolution(brownian, 0.0, 1.0, 64, g)
    assert abs(res.values[512] - 2**-0.5) <= 1e-3
    errs = []
    for n in (4, 8, 16, 32, 64):
        errs.append(np.max(np.abs(compose_evolution(brownian, 0.0, 1.0, n, g).values - heat(g.x, 1))))
    assert errs[-1] <= 1e-3
    assert all(b <= a + 1e-9 for a, b in zip(errs, errs[1:]))


def test_propagate_absolute_times(example3):
    g = g_grid()
    a = propagate(example3, 0.2, 0.9, 7, g)
    b = compose_evolution(example3, 0.2, 0.7, 7, g)
    assert np.array_equal(a.values, b.values)
    with pytest.raises(ValueError):
        propagate(example3, 1.0, 0.5, 4, g)


def test_zero_duration():
    g = g_grid()
    assert compose_evolution(make_symbol(diffusion="1"), 0.0, 0.0, 5, g).grid is g


def test_property_residual(brownian):
    g = g_grid()
    assert evolution_property_residual(brownian, 0.0, 0.5, 1.0, 64, g) <= 1e-8
    assert evolution_property_residual(brownian, 0.0, 0.0, 1.0, 16, g) <= 1e-12
    assert evolution_property_residual(brownian, 0.0, 1.0, 1.0, 16, g) <= 1e-12
    assert evolution_property_residual(make_symbol(drift="1 + s"), 0, 0.25, 1, 8, g) <= 1e-10
    with pytest.raises(ValueError):
        evolution_property_residual(brownian, 0.0, 0.3, 1.0, 4, g)


def test_equation_residuals(brownian):
    g = g_grid()
    zero = make_symbol(drift="0")
    for which in ("forward", "backward"):
        assert evolution_equation_residual(zero, which, 0.0, 0.5, 4, g) <= 1e-12
    assert evolution_equation_residual(brownian, "forward", 0.3, 0.3, 4, g, 1e-3) <= 0.02
    # drift: translation Taylor remainder delta/2 sup|g''| with sup|g''| = 1
    r = evolution_equation_residual(make_symbol(drift="1"), "forward", 0.0, 0.5, 4, g, 1e-3)
    assert r <= 1e-3 * 0.5 * 1.0 + 1e-9
    rb = evolution_equation_residual(brownian, "backward", 0.0, 1.0, 32, g, 1e-3)
    assert rb <= 1e-3


def test_backward_sign_convention(example3):
    from fevo.operators import apply_generator

    sym = make_symbol(drift="2")
    g = g_grid()
    delta = 1e-4
    r = evolution_equation_residual(sym, "backward", 0.0, 1.0, 8, g, delta)
    assert r <= 1e-3
    # the numerator taken the other way round leaves 2 A U g instead of O(delta)
    later = compose_evolution(sym, delta, 1.0 - delta, 8, g).grid
    full = apply_step(sym, 0.0, delta, later)
    AU = apply_generator(sym, 0.0, later).values
    flipped = np.max(np.abs((full.values - later.values) / delta + AU))
    assert abs(flipped - 2 * np.max(np.abs(AU))) <= 0.01 * flipped
    with pytest.raises(ValueError):
        evolution_equation_residual(example3, "backward", 0.0, 1e-4, 4, g, 1e-3)


def test_support_error_carries_step():
    sym = make_symbol(drift="6")
    with pytest.raises(GridError, match="step"):
        compose_evolution(sym, 0.0, 3.0, 4, g_grid())


# -- contraction, positivity, constants -------------------------------------------

SUITE = [
    make_symbol(diffusion="1"),
    make_symbol(drift="sin(x1)", diffusion="1 + 0.5*cos(x1)"),
    make_symbol(intensity="2", jump=JumpDist.two_point([1.5])),
    make_symbol(alpha=0.8, scale="0.6"),
    make_symbol(alpha=1.5, scale="0.5 + 0.25*tanh(x1)", intensity="1", jump=JumpDist.point([-1])),
]


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(range(len(SUITE))), st.floats(0.01, 1.0), st.floats(-2, 2), st.floats(0.5, 2))
def test_contraction_and_positivity(k, h, c, w):
    sym = SUITE[k]
    # periodic: heavy-tailed kernels reach the edge of any finite window,
    # the support policy itself is tested elsewhere
    x = -16 + 32 / 256 * np.arange(256)
    g = FunctionGrid(-16, 16, np.exp(-0.5 * ((x - c) / w) ** 2), periodic=True)
    out = apply_step(sym, 0.0, h, g)
    assert np.max(np.abs(out.values)) <= np.max(np.abs(g.values)) + 1e-8
    assert out.values.min() >= -1e-8
    ev = compose_evolution(sym, 0.0, h, 4, g)
    assert ev.values.min() >= -1e-8
    assert np.max(np.abs(ev.values)) <= np.max(np.abs(g.values)) + 1e-8


@pytest.mark.parametrize("k", range(len(SUITE)))
def test_periodic_constants_preserved(k):
    ones = FunctionGrid(-np.pi, np.pi, np.ones(128), periodic=True)
    out = apply_step(SUITE[k], 0.2, 0.5, ones)
    assert np.max(np.abs(out.values - 1)) <= 1e-10
