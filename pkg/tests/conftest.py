import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from fevo.symbol import JumpDist, make_symbol  # noqa: E402


@pytest.fixture
def brownian():
    return make_symbol(diffusion="1")


@pytest.fixture
def example3():
    return make_symbol(drift="1 + 1*step(s-0.5)")


def symbol_families():
    """One symbol per built-in family (1-d), keyed by name."""
    return {
        "drift": make_symbol(drift="0.7"),
        "gaussian": make_symbol(diffusion="1.3"),
        "cpp-point": make_symbol(intensity="1.5", jump=JumpDist.point([0.8])),
        "cpp-gaussian": make_symbol(intensity="2", jump=JumpDist.gaussian([0.2], [[0.25]])),
        "cpp-two-point": make_symbol(intensity="1", jump=JumpDist.two_point([0.6])),
        "stable-0.7": make_symbol(alpha=0.7, scale="0.5"),
        "stable-1": make_symbol(alpha=1.0, scale="0.5"),
        "stable-1.5": make_symbol(alpha=1.5, scale="0.5"),
    }


def state_dependent_families():
    """Families with (s, x)-dependent coefficients."""
    return {
        "drift-x": make_symbol(drift="sin(x1) + s"),
        "diffusion-x": make_symbol(diffusion="1 + 0.5*cos(x1)"),
        "cpp-x": make_symbol(intensity="1 + x1^2/(1 + x1^2)", jump=JumpDist.point([0.5])),
        "stable-x": make_symbol(alpha=1.2, scale="0.5 + 0.25*tanh(x1)"),
        "example3": make_symbol(drift="1 + 1*step(s-0.5)"),
    }


@pytest.fixture
def rng_np():
    return np.random.default_rng(20240611)
