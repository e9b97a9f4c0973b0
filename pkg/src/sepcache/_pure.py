"""NumPy fallback for the compiled kernels in ``sepcache._kernels``.

Both backends must produce bit-identical output: the integer mixing is
exact uint64 arithmetic either way, and every transcendental goes through
libm (``math`` here, ``libc.math`` in the extension).  ``np.log`` is
deliberately not used; its SIMD path strays from libm by one ulp.
"""
from __future__ import annotations

import math

import numpy as np

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_STREAM_SALT = (2 * _GAMMA) & _MASK
_TWO_NEG_53 = 2.0**-53


def mix64(z: int) -> int:
    """SplitMix64 finalizer on a Python int, mod 2**64."""
    z &= _MASK
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return z ^ (z >> 31)


def derive_key(seed: int, stream: int) -> int:
    """Collapse (seed, stream) into the 64-bit counter key."""
    k = mix64(((seed & _MASK) + _GAMMA) & _MASK)
    return mix64(k ^ mix64(((stream & _MASK) + _STREAM_SALT) & _MASK))


def _u64_block(key: int, counter: int, n: int) -> np.ndarray:
    with np.errstate(over="ignore"):
        idx = np.arange(counter + 1, counter + n + 1, dtype=np.uint64)
        z = np.uint64(key) + idx * np.uint64(_GAMMA)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        return z ^ (z >> np.uint64(31))


def gaussian_block(key: int, counter: int, n: int) -> np.ndarray:
    """Standard normals for counters [counter, counter + 2*ceil(n/2)).

    Box-Muller on pairs of counter words: pair p consumes counters at
    offsets 2p and 2p+1 and yields draws 2p and 2p+1.
    """
    npairs = (n + 1) // 2
    u = _u64_block(key, counter, 2 * npairs)
    u1 = ((u[0::2] >> np.uint64(11)) + np.uint64(1)).astype(np.float64) * _TWO_NEG_53
    u2 = (u[1::2] >> np.uint64(11)).astype(np.float64) * _TWO_NEG_53
    logs = np.fromiter((math.log(v) for v in u1), dtype=np.float64, count=npairs)
    r = np.sqrt(-2.0 * logs)
    theta = math.tau * u2
    z = np.empty(2 * npairs)
    z[0::2] = r * np.cos(theta)
    z[1::2] = r * np.sin(theta)
    return z[:n]


def _bit_reverse_indices(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros_like(idx)
    for b in range(bits):
        rev = (rev << 1) | ((idx >> b) & 1)
    return rev


def fft1d_batch(a: np.ndarray, inverse: bool) -> None:
    """In-place, unnormalized radix-2 transform along axis 1 of (B, n).

    n must be a power of two; the caller checks.  Butterflies run on
    separate re/im planes: NumPy's fused complex multiply contracts to
    FMA, which would round differently from the compiled kernel.
    """
    n = a.shape[1]
    a[:] = a[:, _bit_reverse_indices(n)]
    d = a.view(np.float64).reshape(a.shape[0], n, 2)
    re, im = d[..., 0], d[..., 1]
    sign = 1.0 if inverse else -1.0
    m = 2
    while m <= n:
        half = m >> 1
        for j in range(half):
            ang = sign * math.tau * j / m
            wr, wi = math.cos(ang), math.sin(ang)
            hr = re[:, j + half :: m].copy()
            hi = im[:, j + half :: m].copy()
            tr = wr * hr - wi * hi
            ti = wr * hi + wi * hr
            lr = re[:, j::m].copy()
            li = im[:, j::m].copy()
            re[:, j::m] = lr + tr
            im[:, j::m] = li + ti
            re[:, j + half :: m] = lr - tr
            im[:, j + half :: m] = li - ti
        m <<= 1
