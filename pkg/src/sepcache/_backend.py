"""Kernel backend selection: compiled extension if available, else NumPy.

Set SEPCACHE_BACKEND=pure to force the fallback (used by the benchmark
and the backend-equivalence tests).
"""
from __future__ import annotations

import os

from . import _pure

if os.environ.get("SEPCACHE_BACKEND", "").lower() == "pure":
    _impl = _pure
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _pure

BACKEND: str = "compiled" if _impl is not _pure else "pure"

mix64 = _impl.mix64
derive_key = _impl.derive_key
gaussian_block = _impl.gaussian_block
fft1d_batch = _impl.fft1d_batch
