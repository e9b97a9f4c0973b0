"""Deterministic array math: seeded RNG, 2-D FFT, softmax, grid helpers.

A Grid is a plain float64/complex128 ndarray of shape (H, W, C).  FFT
paths require H and W to be powers of two.
"""
from __future__ import annotations

import math

import numpy as np

from . import _backend

Grid = np.ndarray


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def as_grid(a, *, allow_complex: bool = False) -> Grid:
    """Validate and return a (H, W, C) grid with finite entries."""
    arr = np.asarray(a)
    if arr.ndim != 3:
        raise ValueError(f"grid must be 3-D (H, W, C), got shape {arr.shape}")
    if any(d < 1 for d in arr.shape):
        raise ValueError(f"grid dims must be >= 1, got shape {arr.shape}")
    if np.iscomplexobj(arr):
        if not allow_complex:
            raise ValueError("complex grid not allowed here")
        arr = arr.astype(np.complex128)
    else:
        arr = arr.astype(np.float64)
    if not np.all(np.isfinite(arr.view(np.float64) if np.iscomplexobj(arr) else arr)):
        raise ValueError("grid contains non-finite values")
    return arr


def l2(a) -> float:
    """Global L2 norm over all elements of the flattened array."""
    arr = np.asarray(a)
    return float(np.sqrt(np.sum(np.abs(arr) ** 2)))


class SeededRng:
    """Splittable counter-based generator.

    Draws are indexed by a 64-bit counter under a key mixed from
    (seed, stream); identical (seed, stream) replays the identical
    sequence, distinct streams are independent.  Instances are
    single-owner: never share one across concurrent trajectories.
    """

    __slots__ = ("seed", "stream", "_key", "_counter")

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed)
        self.stream = int(stream)
        self._key = _backend.derive_key(self.seed, self.stream)
        self._counter = 0

    @property
    def counter(self) -> int:
        return self._counter

    def normal(self, shape) -> np.ndarray:
        """i.i.d. standard normals of the given shape; advances the counter."""
        if isinstance(shape, int):
            shape = (shape,)
        shape = tuple(int(d) for d in shape)
        if len(shape) == 0 or any(d < 1 for d in shape):
            raise ValueError(f"shape dims must be >= 1, got {shape}")
        n = math.prod(shape)
        vals = _backend.gaussian_block(self._key, self._counter, n)
        self._counter += 2 * ((n + 1) // 2)
        return np.asarray(vals, dtype=np.float64).reshape(shape)


def gaussian_sample(rng: SeededRng, shape) -> Grid:
    """Draw a grid of i.i.d. standard normals from rng."""
    return rng.normal(shape)


def fft2d(field: Grid, inverse: bool = False) -> Grid:
    """Per-channel 2-D radix-2 FFT on a (H, W, C) grid.

    Forward is unnormalized; inverse divides by H*W.  H and W must be
    powers of two.
    """
    f = np.asarray(field)
    if f.ndim != 3:
        raise ValueError(f"fft2d expects (H, W, C), got shape {f.shape}")
    H, W, C = f.shape
    if not (is_power_of_two(H) and is_power_of_two(W)):
        raise ValueError(f"fft2d needs power-of-two H, W, got ({H}, {W})")
    out = np.empty((H, W, C), dtype=np.complex128)
    for c in range(C):
        # explicit copy: the kernel transforms in place and the channel
        # slice may alias the caller's buffer
        ch = np.array(f[:, :, c], dtype=np.complex128, order="C")
        _backend.fft1d_batch(ch, inverse)
        cht = np.ascontiguousarray(ch.T)
        _backend.fft1d_batch(cht, inverse)
        out[:, :, c] = cht.T
    if inverse:
        # H*W is a power of two, so the reciprocal is exact
        out *= 1.0 / (H * W)
    return out


def softmax(v) -> np.ndarray:
    """Stable softmax of a 1-D vector (max subtraction)."""
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("softmax expects a non-empty 1-D vector")
    if not np.all(np.isfinite(arr)):
        raise ValueError("softmax inputs must be finite")
    e = np.exp(arr - arr.max())
    return e / e.sum()
