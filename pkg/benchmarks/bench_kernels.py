"""Compiled versus numpy kernels.

Times the two hot kernels directly, then two end-to-end workloads with each
backend in a fresh interpreter (the backend is fixed at import).

    python3 benchmarks/bench_kernels.py [--repeat R]
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from fevo import _pykernels

try:
    from fevo import _ckernels
except ImportError:
    _ckernels = None

END_TO_END = {
    "ensemble: 20000 jump-diffusion paths, n=64": """
from fevo.chain import simulate_ensemble
from fevo.symbol import JumpDist, make_symbol
sym = make_symbol(drift="sin(x1)", diffusion="1", intensity="2", jump=JumpDist.gaussian([0.0], [[0.25]]))
run = lambda: simulate_ensemble(sym, [0.0], 0.0, 1.0, 64, 20000, seed=1, retain="terminal")
""",
    "generator: state-dependent stable, N=1024": """
import numpy as np
from fevo.operators import FunctionGrid, apply_generator
from fevo.symbol import make_symbol
sym = make_symbol(alpha=1.3, scale="0.5 + 0.25*tanh(x1)", drift="sin(x1)")
f = FunctionGrid.sample(lambda x: np.exp(-x**2 / 2), -16, 16, 1024)
run = lambda: apply_generator(sym, 0.0, f)
""",
}


def best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def kernel_cases(rng):
    n = 200_000
    k0 = rng.integers(0, 2**63, n, dtype=np.uint64)
    c0 = np.arange(n, dtype=np.uint64)
    yield "philox4x64: 2e5 blocks", (k0, np.uint64(7), c0), "philox4x64"
    N = 1024
    F = rng.standard_normal(N) + 1j * rng.standard_normal(N)
    mult = rng.standard_normal((256, N)) + 1j * rng.standard_normal((256, N))
    tw = np.exp(2j * np.pi * np.arange(N) / N)
    yield "synthesize: 256 rows, N=1024", (F, mult, np.arange(256), tw), "synthesize"


def end_to_end(setup, backend, repeat):
    env = dict(os.environ, FEVO_PURE_PYTHON="1" if backend == "python" else "0")
    code = setup + f"\nimport timeit\nrun()\nprint(min(timeit.repeat(run, number=1, repeat={repeat})))\n"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    return float(out.stdout.strip().splitlines()[-1])


def row(name, t_py, t_c):
    c = f"{t_c * 1e3:10.2f}" if t_c is not None else "       n/a"
    speed = f"{t_py / t_c:7.1f}x" if t_c else "     n/a"
    print(f"{name:46s} {t_py * 1e3:10.2f} {c} {speed}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'workload':46s} {'python ms':>10s} {'cython ms':>10s} {'speedup':>8s}")
    for name, inputs, attr in kernel_cases(rng):
        t_py = best(lambda: getattr(_pykernels, attr)(*inputs), args.repeat)
        t_c = best(lambda: getattr(_ckernels, attr)(*inputs), args.repeat) if _ckernels else None
        row(name, t_py, t_c)
    for name, setup in END_TO_END.items():
        t_py = end_to_end(setup, "python", args.repeat)
        t_c = end_to_end(setup, "cython", args.repeat) if _ckernels else None
        row(name, t_py, t_c)


if __name__ == "__main__":
    main()
