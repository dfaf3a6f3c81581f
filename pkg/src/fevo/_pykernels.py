"""Pure numpy implementations of the hot kernels.

Same signatures and results as the compiled ``_ckernels`` module; the
Philox output is bitwise identical, the synthesis sum agrees to rounding.
"""

import numpy as np

_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = np.uint64(0x9E3779B97F4A7C15)
_W1 = np.uint64(0xBB67AE8584CAA73B)
_LO32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)


def _mulhilo(a, m):
    a_lo = a & _LO32
    a_hi = a >> _S32
    m_lo = m & _LO32
    m_hi = m >> _S32
    p0 = a_lo * m_lo
    p1 = a_lo * m_hi
    p2 = a_hi * m_lo
    p3 = a_hi * m_hi
    mid = (p0 >> _S32) + (p1 & _LO32) + (p2 & _LO32)
    hi = p3 + (p1 >> _S32) + (p2 >> _S32) + (mid >> _S32)
    return hi, a * m


def philox4x64(key0, key1, ctr0):
    """Philox4x64-10 blocks with counter ``(ctr0, 0, 0, 0)``.

    All arguments are broadcast uint64 arrays; returns shape ``(n, 4)``.
    """
    key0, key1, ctr0 = np.broadcast_arrays(
        np.asarray(key0, dtype=np.uint64),
        np.asarray(key1, dtype=np.uint64),
        np.asarray(ctr0, dtype=np.uint64),
    )
    k0 = key0.ravel().copy()
    k1 = key1.ravel().copy()
    c0 = ctr0.ravel().copy()
    c1 = np.zeros_like(c0)
    c2 = np.zeros_like(c0)
    c3 = np.zeros_like(c0)
    with np.errstate(over="ignore"):
        for r in range(10):
            if r:
                k0 = k0 + _W0
                k1 = k1 + _W1
            hi0, lo0 = _mulhilo(c0, _M0)
            hi1, lo1 = _mulhilo(c2, _M1)
            c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return np.stack([c0, c1, c2, c3], axis=-1)


def synthesize(F, mult, rows, twiddle):
    """out[p] = (1/N) * sum_j F[j] * twiddle[(rows[p]*j) % N] * mult[p, j]."""
    N = F.shape[0]
    j = np.arange(N, dtype=np.int64)
    idx = (np.asarray(rows, dtype=np.int64)[:, None] * j[None, :]) % N
    return (twiddle[idx] * (mult * F[None, :])).sum(axis=1) / N
