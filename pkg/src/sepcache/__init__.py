"""Separated attention/MLP feature caching for toy diffusion transformers.

Implements interval and table-driven component caching over DDPM/DDIM
sampling, adaptive noise scaling, greedy cache-table generation, and an
exposure-bias analytics suite (variance accumulation, band energies,
SNR curves, compute accounting).
"""
from ._backend import BACKEND

__all__ = ["BACKEND"]
__version__ = "0.1.0"
