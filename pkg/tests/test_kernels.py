import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fevo import _pykernels, kernels

try:
    from fevo import _ckernels
except ImportError:  # extension not built
    _ckernels = None

needs_ext = pytest.mark.skipif(_ckernels is None, reason="compiled extension not built")


@needs_ext
def test_compiled_backend_selected():
    assert kernels.BACKEND == "cython"


@needs_ext
@settings(max_examples=40, deadline=None)
@given(
    st.integers(0, 2**64 - 1),
    st.lists(st.integers(0, 2**64 - 1), min_size=1, max_size=50),
)
def test_philox_parity(seed, counters):
    ctr = np.array(counters, dtype=np.uint64)
    streams = np.arange(len(ctr), dtype=np.uint64) * np.uint64(977)
    a = _ckernels.philox4x64(np.uint64(seed), streams, ctr)
    b = _pykernels.philox4x64(np.uint64(seed), streams, ctr)
    assert a.dtype == np.uint64 and a.shape == (len(ctr), 4)
    assert np.array_equal(a, b)


@needs_ext
def test_philox_readonly_inputs():
    ctr = np.arange(8, dtype=np.uint64)
    ctr.setflags(write=False)
    key = np.broadcast_to(np.uint64(3), (8,))
    assert np.array_equal(
        _ckernels.philox4x64(np.uint64(1), key, ctr), _pykernels.philox4x64(np.uint64(1), key, ctr)
    )


def _synthesis_case(N, P, seed):
    rng = np.random.default_rng(seed)
    F = rng.normal(size=N) + 1j * rng.normal(size=N)
    mult = rng.normal(size=(P, N)) + 1j * rng.normal(size=(P, N))
    rows = rng.integers(0, N, size=P)
    tw = np.exp(2j * np.pi * np.arange(N) / N)
    return F, mult, rows, tw


def test_synthesize_matches_direct_sum():
    N, P = 16, 5
    F, mult, rows, tw = _synthesis_case(N, P, 0)
    got = _pykernels.synthesize(F, mult, rows, tw)
    for p in range(P):
        ref = sum(
            F[j] * np.exp(2j * np.pi * rows[p] * j / N) * mult[p, j] for j in range(N)
        ) / N
        assert abs(got[p] - ref) < 1e-12


def test_synthesize_unit_multiplier_is_ifft():
    N = 64
    F, _, _, tw = _synthesis_case(N, 1, 1)
    mult = np.ones((N, N), dtype=complex)
    got = kernels.synthesize(F, mult, np.arange(N), tw)
    assert np.max(np.abs(got - np.fft.ifft(F))) < 1e-13


@needs_ext
@pytest.mark.parametrize("N,P", [(8, 8), (64, 17), (256, 128)])
def test_synthesize_parity(N, P):
    F, mult, rows, tw = _synthesis_case(N, P, N + P)
    a = _ckernels.synthesize(F, mult, rows, tw)
    b = _pykernels.synthesize(F, mult, rows, tw)
    scale = np.abs(F).sum() * np.abs(mult).max() / N
    assert np.max(np.abs(a - b)) <= 1e-13 * scale


def test_pure_python_fallback_selected():
    env = dict(os.environ, FEVO_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "from fevo import kernels; print(kernels.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"


def test_backends_give_identical_chain():
    code = (
        "import numpy as np;"
        "from fevo.symbol import make_symbol;"
        "from fevo.chain import simulate_ensemble;"
        "e = simulate_ensemble(make_symbol(diffusion='1', drift='sin(x1)'), [0.0], 0, 1, 16, 40, 5);"
        "print(e.terminal[:, 0].tobytes().hex())"
    )
    runs = []
    for flag in ("1", "0"):
        env = dict(os.environ, FEVO_PURE_PYTHON=flag)
        runs.append(
            subprocess.run(
                [sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True
            ).stdout
        )
    assert runs[0] == runs[1]
