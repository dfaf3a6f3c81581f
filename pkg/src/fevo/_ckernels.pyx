# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: Philox4x64-10 blocks and fixed-order Fourier synthesis."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t

cnp.import_array()

cdef extern from *:
    """
    static inline uint64_t fevo_mulhilo(uint64_t a, uint64_t b, uint64_t *lo) {
        unsigned __int128 p = (unsigned __int128)a * (unsigned __int128)b;
        *lo = (uint64_t)p;
        return (uint64_t)(p >> 64);
    }
    #define FEVO_M0 0xD2E7470EE14C6C93ULL
    #define FEVO_M1 0xCA5A826395121157ULL
    #define FEVO_W0 0x9E3779B97F4A7C15ULL
    #define FEVO_W1 0xBB67AE8584CAA73BULL
    """
    uint64_t fevo_mulhilo(uint64_t a, uint64_t b, uint64_t *lo) nogil
    const uint64_t M0 "FEVO_M0"
    const uint64_t M1 "FEVO_M1"
    const uint64_t W0 "FEVO_W0"
    const uint64_t W1 "FEVO_W1"


def philox4x64(key0, key1, ctr0):
    """Philox4x64-10 blocks with counter ``(ctr0, 0, 0, 0)``; shape ``(n, 4)``."""
    a, b, c = np.broadcast_arrays(
        np.asarray(key0, dtype=np.uint64),
        np.asarray(key1, dtype=np.uint64),
        np.asarray(ctr0, dtype=np.uint64),
    )
    cdef const uint64_t[::1] k0v = np.ascontiguousarray(a.ravel())
    cdef const uint64_t[::1] k1v = np.ascontiguousarray(b.ravel())
    cdef const uint64_t[::1] cv = np.ascontiguousarray(c.ravel())
    cdef Py_ssize_t n = cv.shape[0]
    out = np.empty((n, 4), dtype=np.uint64)
    cdef uint64_t[:, ::1] o = out
    cdef Py_ssize_t i
    cdef int r
    cdef uint64_t x0, x1, x2, x3, k0, k1, hi0, lo0, hi1, lo1
    with nogil:
        for i in range(n):
            x0 = cv[i]
            x1 = 0
            x2 = 0
            x3 = 0
            k0 = k0v[i]
            k1 = k1v[i]
            for r in range(10):
                if r:
                    k0 = k0 + W0
                    k1 = k1 + W1
                hi0 = fevo_mulhilo(M0, x0, &lo0)
                hi1 = fevo_mulhilo(M1, x2, &lo1)
                x0, x1, x2, x3 = hi1 ^ x1 ^ k0, lo1, hi0 ^ x3 ^ k1, lo0
            o[i, 0] = x0
            o[i, 1] = x1
            o[i, 2] = x2
            o[i, 3] = x3
    return out


def synthesize(F, mult, rows, twiddle):
    """out[p] = (1/N) * sum_j F[j] * twiddle[(rows[p]*j) % N] * mult[p, j].

    Summation runs sequentially in j, so results do not depend on threading.
    """
    cdef const double complex[::1] Fv = np.ascontiguousarray(F, dtype=np.complex128)
    cdef const double complex[:, ::1] Mv = np.ascontiguousarray(mult, dtype=np.complex128)
    cdef const int64_t[::1] Rv = np.ascontiguousarray(rows, dtype=np.int64)
    cdef const double complex[::1] Tv = np.ascontiguousarray(twiddle, dtype=np.complex128)
    cdef Py_ssize_t N = Fv.shape[0]
    cdef Py_ssize_t P = Rv.shape[0]
    out = np.empty(P, dtype=np.complex128)
    cdef double complex[::1] ov = out
    cdef Py_ssize_t p, j
    cdef int64_t ri, idx
    cdef double complex acc
    with nogil:
        for p in range(P):
            ri = Rv[p] % N
            idx = 0
            acc = 0
            for j in range(N):
                acc = acc + Tv[idx] * (Mv[p, j] * Fv[j])
                idx = idx + ri
                if idx >= N:
                    idx = idx - N
            ov[p] = acc / N
    return out
