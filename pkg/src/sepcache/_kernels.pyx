# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: counter-based Gaussian RNG and radix-2 FFT.

The arithmetic mirrors ``sepcache._pure`` operation for operation, so the
two backends emit bit-identical streams (see test_backends).
"""
from libc.math cimport M_PI, cos, log, sin, sqrt

import numpy as np

ctypedef unsigned long long u64

cdef u64 GAMMA = 0x9E3779B97F4A7C15ULL
cdef u64 MIX1 = 0xBF58476D1CE4E5B9ULL
cdef u64 MIX2 = 0x94D049BB133111EBULL
cdef double TWO_NEG_53 = 2.0 ** -53
cdef double TAU = 2.0 * M_PI


cdef inline u64 _mix64(u64 z) noexcept nogil:
    z = (z ^ (z >> 30)) * MIX1
    z = (z ^ (z >> 27)) * MIX2
    return z ^ (z >> 31)


def mix64(z):
    return int(_mix64(<u64> (z & 0xFFFFFFFFFFFFFFFF)))


def derive_key(seed, stream):
    cdef u64 k = _mix64((<u64> (seed & 0xFFFFFFFFFFFFFFFF)) + GAMMA)
    cdef u64 salt = GAMMA + GAMMA
    return int(_mix64(k ^ _mix64((<u64> (stream & 0xFFFFFFFFFFFFFFFF)) + salt)))


def gaussian_block(key, counter, n):
    """Standard normals for counters [counter, counter + 2*ceil(n/2))."""
    cdef Py_ssize_t npairs = (n + 1) // 2
    out = np.empty(2 * npairs, dtype=np.float64)
    cdef double[::1] o = out
    cdef u64 k = <u64> key
    cdef u64 c = <u64> counter
    cdef u64 a, b
    cdef double u1, u2, r, th
    cdef Py_ssize_t p
    with nogil:
        for p in range(npairs):
            a = _mix64(k + (c + 2 * p + 1) * GAMMA)
            b = _mix64(k + (c + 2 * p + 2) * GAMMA)
            u1 = <double> ((a >> 11) + 1) * TWO_NEG_53
            u2 = <double> (b >> 11) * TWO_NEG_53
            r = sqrt(-2.0 * log(u1))
            th = TAU * u2
            o[2 * p] = r * cos(th)
            o[2 * p + 1] = r * sin(th)
    return out[:n]


cdef void _fft_batch(double[:, :, ::1] d, double sign) noexcept nogil:
    cdef Py_ssize_t B = d.shape[0]
    cdef Py_ssize_t n = d.shape[1]
    cdef Py_ssize_t b, i, j, k, m, half, bit
    cdef double ang, wr, wi, hr, hi, tr, ti, lr, li
    for b in range(B):
        j = 0
        for i in range(1, n):
            bit = n >> 1
            while j & bit:
                j ^= bit
                bit >>= 1
            j |= bit
            if i < j:
                tr = d[b, i, 0]; ti = d[b, i, 1]
                d[b, i, 0] = d[b, j, 0]; d[b, i, 1] = d[b, j, 1]
                d[b, j, 0] = tr; d[b, j, 1] = ti
    m = 2
    while m <= n:
        half = m >> 1
        for j in range(half):
            ang = sign * TAU * <double> j / <double> m
            wr = cos(ang)
            wi = sin(ang)
            for b in range(B):
                k = j
                while k < n:
                    hr = d[b, k + half, 0]; hi = d[b, k + half, 1]
                    tr = wr * hr - wi * hi
                    ti = wr * hi + wi * hr
                    lr = d[b, k, 0]; li = d[b, k, 1]
                    d[b, k, 0] = lr + tr
                    d[b, k, 1] = li + ti
                    d[b, k + half, 0] = lr - tr
                    d[b, k + half, 1] = li - ti
                    k += m
        m <<= 1


def fft1d_batch(a, inverse):
    """In-place, unnormalized radix-2 transform along axis 1 of (B, n)."""
    cdef double[:, :, ::1] d = a.view(np.float64).reshape(a.shape[0], a.shape[1], 2)
    _fft_batch(d, 1.0 if inverse else -1.0)
