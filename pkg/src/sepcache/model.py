"""Noise predictors: a toy diffusion transformer with cacheable Attn/MLP
sublayers, and a closed-form Gaussian-mixture denoiser used as an oracle.

Both expose the same surface: ``predict(x_t, t, tag, cache)``,
``new_cache()``, ``cost(tag)`` and ``grid_shape``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import numpy as np

from .cache import CacheMissError, CacheTag
from .numerics import Grid, SeededRng
from .schedule import NoiseSchedule


@dataclass(frozen=True)
class ComputeCost:
    """Multiply-accumulate counts for one predictor call."""

    attn_macs: int
    mlp_macs: int
    overhead_macs: int

    @property
    def total(self) -> int:
        return self.attn_macs + self.mlp_macs + self.overhead_macs


class NoisePredictor(Protocol):
    grid_shape: tuple[int, int, int]

    def predict(self, x_t: Grid, t: int, tag: CacheTag, cache) -> Grid: ...

    def new_cache(self): ...

    def cost(self, tag: CacheTag) -> ComputeCost: ...


@dataclass(frozen=True)
class ToyDiTConfig:
    grid: tuple[int, int, int] = (8, 8, 1)
    patch: int = 2
    d_model: int = 32
    n_heads: int = 4
    n_blocks: int = 2
    seed: int = 0

    def __post_init__(self):
        H, W, C = self.grid
        if H % self.patch or W % self.patch:
            raise ValueError(f"grid {self.grid} not divisible by patch {self.patch}")
        if self.d_model % self.n_heads:
            raise ValueError(f"d_model {self.d_model} not divisible by n_heads {self.n_heads}")

    @property
    def n_tokens(self) -> int:
        H, W, _ = self.grid
        return (H // self.patch) * (W // self.patch)

    @property
    def patch_dim(self) -> int:
        return self.patch * self.patch * self.grid[2]


@dataclass
class _BlockSlot:
    attn: np.ndarray | None = None
    mlp: np.ndarray | None = None
    attn_step: int | None = None
    mlp_step: int | None = None


class CacheState:
    """Per-block cached sublayer deltas; flags start invalid."""

    def __init__(self, n_blocks: int):
        self.slots = [_BlockSlot() for _ in range(n_blocks)]

    def clone(self) -> "CacheState":
        # deltas are never mutated in place, so sharing refs is safe
        out = CacheState(len(self.slots))
        for dst, src in zip(out.slots, self.slots):
            dst.attn, dst.mlp = src.attn, src.mlp
            dst.attn_step, dst.mlp_step = src.attn_step, src.mlp_step
        return out


def compute_cost(config: ToyDiTConfig, tag: CacheTag) -> ComputeCost:
    """Closed-form MAC counts for one forward pass under a cache tag.

    Attn per block: QKV + output projections (4*L*d^2) plus score and
    value matmuls (2*L^2*d).  MLP per block: two dense layers at
    expansion 4 (8*L*d^2).  Overhead: patch embed, timestep linear and
    the output projection.  Reused components cost zero.
    """
    L, d = config.n_tokens, config.d_model
    pd = config.patch_dim
    attn = 0 if tag.reuses_attn else (4 * L * d * d + 2 * L * L * d) * config.n_blocks
    mlp = 0 if tag.reuses_mlp else (8 * L * d * d) * config.n_blocks
    overhead = L * pd * d + d * d + L * d * pd
    return ComputeCost(attn_macs=attn, mlp_macs=mlp, overhead_macs=overhead)


def _layer_norm(x: np.ndarray) -> np.ndarray:
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mu) / np.sqrt(var + 1e-6)


def _gelu(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 + np.tanh(math.sqrt(2.0 / math.pi) * (x + 0.044715 * x**3)))


def _softmax_rows(s: np.ndarray) -> np.ndarray:
    m = s.max(axis=-1, keepdims=True)
    e = np.exp(s - m)
    return e / e.sum(axis=-1, keepdims=True)


class ToyDiT:
    """Pre-norm transformer over patch tokens, unconditional, untrained.

    Each block adds an Attn delta then an MLP delta to the residual
    stream; a cache tag swaps either fresh computation for the delta
    stored by an earlier step.
    """

    def __init__(self, config: ToyDiTConfig):
        self.config = config
        self.grid_shape = config.grid
        rng = SeededRng(config.seed, stream=0)
        d, pd = config.d_model, config.patch_dim
        self.params: dict[str, np.ndarray] = {}

        def dense(name: str, fan_in: int, fan_out: int) -> None:
            self.params[name] = rng.normal((fan_in, fan_out)) / math.sqrt(fan_in)

        dense("patch_embed.w", pd, d)
        dense("time_embed.w", d, d)
        for b in range(config.n_blocks):
            for leaf in ("wq", "wk", "wv", "wo"):
                dense(f"blocks.{b}.attn.{leaf}", d, d)
            dense(f"blocks.{b}.mlp.w1", d, 4 * d)
            dense(f"blocks.{b}.mlp.w2", 4 * d, d)
        dense("out.w", d, pd)

    def new_cache(self) -> CacheState:
        return CacheState(self.config.n_blocks)

    def cost(self, tag: CacheTag) -> ComputeCost:
        return compute_cost(self.config, tag)

    def _patchify(self, x: Grid) -> np.ndarray:
        H, W, C = self.config.grid
        p = self.config.patch
        t = x.reshape(H // p, p, W // p, p, C).transpose(0, 2, 1, 3, 4)
        return t.reshape(self.config.n_tokens, self.config.patch_dim)

    def _unpatchify(self, tokens: np.ndarray) -> Grid:
        H, W, C = self.config.grid
        p = self.config.patch
        t = tokens.reshape(H // p, W // p, p, p, C).transpose(0, 2, 1, 3, 4)
        return t.reshape(H, W, C)

    def _time_embedding(self, t: int) -> np.ndarray:
        d = self.config.d_model
        half = d // 2
        freqs = np.exp(-math.log(10000.0) * np.arange(half) / half)
        ang = t * freqs
        emb = np.concatenate([np.sin(ang), np.cos(ang)])
        return emb @ self.params["time_embed.w"]

    def _attn_delta(self, h: np.ndarray, b: int) -> np.ndarray:
        cfg = self.config
        L, d, nh = cfg.n_tokens, cfg.d_model, cfg.n_heads
        dh = d // nh
        a = _layer_norm(h)
        q = (a @ self.params[f"blocks.{b}.attn.wq"]).reshape(L, nh, dh).transpose(1, 0, 2)
        k = (a @ self.params[f"blocks.{b}.attn.wk"]).reshape(L, nh, dh).transpose(1, 0, 2)
        v = (a @ self.params[f"blocks.{b}.attn.wv"]).reshape(L, nh, dh).transpose(1, 0, 2)
        w = _softmax_rows(q @ k.transpose(0, 2, 1) / math.sqrt(dh))
        out = (w @ v).transpose(1, 0, 2).reshape(L, d)
        return out @ self.params[f"blocks.{b}.attn.wo"]

    def _mlp_delta(self, h: np.ndarray, b: int) -> np.ndarray:
        a = _layer_norm(h)
        return _gelu(a @ self.params[f"blocks.{b}.mlp.w1"]) @ self.params[f"blocks.{b}.mlp.w2"]

    def predict(self, x_t: Grid, t: int, tag: CacheTag, cache: CacheState) -> Grid:
        x_t = np.asarray(x_t, dtype=np.float64)
        if x_t.shape != self.config.grid:
            raise ValueError(f"state shape {x_t.shape} != model grid {self.config.grid}")
        if t < 1:
            raise ValueError(f"step t must be >= 1, got {t}")
        h = self._patchify(x_t) @ self.params["patch_embed.w"]
        h = h + self._time_embedding(t)
        for b in range(self.config.n_blocks):
            slot = cache.slots[b]
            if tag.reuses_attn:
                if slot.attn is None:
                    raise CacheMissError(f"block {b}: attn reuse before any computation", step=t)
                attn = slot.attn
            else:
                attn = self._attn_delta(h, b)
                slot.attn, slot.attn_step = attn, t
            h = h + attn
            if tag.reuses_mlp:
                if slot.mlp is None:
                    raise CacheMissError(f"block {b}: mlp reuse before any computation", step=t)
                mlp = slot.mlp
            else:
                mlp = self._mlp_delta(h, b)
                slot.mlp, slot.mlp_step = mlp, t
            h = h + mlp
        return self._unpatchify(h @ self.params["out.w"])

    def save_weights(self, path: str | Path) -> None:
        save_tensors(self.params, path)

    def load_weights(self, path: str | Path) -> None:
        loaded = load_tensors(path)
        for name, arr in self.params.items():
            if name not in loaded:
                raise ValueError(f"weight file is missing tensor {name}")
            if loaded[name].shape != arr.shape:
                raise ValueError(
                    f"tensor {name} has shape {loaded[name].shape}, expected {arr.shape}"
                )
        self.params = loaded


def save_tensors(tensors: dict[str, np.ndarray], path: str | Path) -> None:
    """Flat little-endian float64 blob plus a JSON sidecar of names/shapes."""
    path = Path(path)
    sidecar = [{"name": k, "shape": list(v.shape)} for k, v in tensors.items()]
    blob = np.concatenate([np.asarray(v, dtype="<f8").ravel() for v in tensors.values()])
    path.write_bytes(blob.tobytes())
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(sidecar, indent=1))


def load_tensors(path: str | Path) -> dict[str, np.ndarray]:
    path = Path(path)
    sidecar = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    raw = np.frombuffer(path.read_bytes(), dtype="<f8")
    expected = sum(math.prod(e["shape"]) for e in sidecar)
    if len(raw) != expected:
        raise ValueError(f"weight blob holds {len(raw)} values, sidecar expects {expected}")
    out: dict[str, np.ndarray] = {}
    offset = 0
    for e in sidecar:
        n = math.prod(e["shape"])
        out[e["name"]] = raw[offset : offset + n].reshape(e["shape"]).copy()
        offset += n
    return out


@dataclass(frozen=True)
class GaussianMixturePrior:
    """Isotropic Gaussian mixture over x0; a point mass is var == 0."""

    weights: tuple[float, ...]
    means: tuple[Grid, ...] = field(repr=False)
    variances: tuple[float, ...]

    def __post_init__(self):
        if not self.weights:
            raise ValueError("mixture needs at least one component")
        if len(self.weights) != len(self.means) or len(self.weights) != len(self.variances):
            raise ValueError("weights, means and variances must align")
        if any(w <= 0 for w in self.weights):
            raise ValueError("mixture weights must be positive")
        if abs(sum(self.weights) - 1.0) > 1e-12:
            raise ValueError(f"mixture weights sum to {sum(self.weights)}, not 1")
        if any(v < 0 for v in self.variances):
            raise ValueError("component variances must be >= 0")
        shapes = {m.shape for m in self.means}
        if len(shapes) != 1:
            raise ValueError(f"component means disagree on shape: {shapes}")

    @property
    def grid_shape(self) -> tuple[int, int, int]:
        return self.means[0].shape

    @classmethod
    def standard_normal(cls, shape: tuple[int, int, int]) -> "GaussianMixturePrior":
        return cls(weights=(1.0,), means=(np.zeros(shape),), variances=(1.0,))

    @classmethod
    def point_mass(cls, mean: Grid) -> "GaussianMixturePrior":
        return cls(weights=(1.0,), means=(np.asarray(mean, dtype=np.float64),), variances=(0.0,))


def analytic_eps(x_t: Grid, t: int, prior: GaussianMixturePrior, s: NoiseSchedule) -> Grid:
    """Exact posterior-mean noise prediction under a Gaussian-mixture prior.

    Component responsibilities use log-sum-exp over the full grid; the
    per-component posterior mean is the usual conjugate blend of x_t and
    the component mean.
    """
    x_t = np.asarray(x_t, dtype=np.float64)
    if x_t.shape != prior.grid_shape:
        raise ValueError(f"state shape {x_t.shape} != prior shape {prior.grid_shape}")
    abar = s.alpha_bar_at(t)
    if 1.0 - abar == 0.0:
        raise ValueError(f"step t={t} has alpha_bar == 1; noise prediction undefined")
    root = math.sqrt(abar)
    D = x_t.size
    logr = np.empty(len(prior.weights))
    post_means = []
    for k, (w, mu, v0) in enumerate(zip(prior.weights, prior.means, prior.variances)):
        v = abar * v0 + (1.0 - abar)
        resid = x_t - root * mu
        logr[k] = math.log(w) - 0.5 * (D * math.log(2.0 * math.pi * v) + float(np.sum(resid**2)) / v)
        post_means.append((root * v0 * x_t + (1.0 - abar) * mu) / v)
    logr -= logr.max()
    r = np.exp(logr)
    r /= r.sum()
    e_x0 = sum(rk * pm for rk, pm in zip(r, post_means))
    return (x_t - root * e_x0) / math.sqrt(1.0 - abar)


class _AnalyticCache:
    def __init__(self):
        self.eps: np.ndarray | None = None
        self.step: int | None = None

    def clone(self) -> "_AnalyticCache":
        out = _AnalyticCache()
        out.eps, out.step = self.eps, self.step
        return out


class AnalyticDenoiser:
    """Oracle predictor; caching reuses the whole previous prediction.

    The oracle has no Attn/MLP split, so partial tags are rejected:
    only NONE (fresh) and BOTH (replay last fresh prediction) apply.
    """

    def __init__(self, prior: GaussianMixturePrior, s: NoiseSchedule):
        self.prior = prior
        self.schedule = s
        self.grid_shape = prior.grid_shape

    def new_cache(self) -> _AnalyticCache:
        return _AnalyticCache()

    def cost(self, tag: CacheTag) -> ComputeCost:
        return ComputeCost(0, 0, 0)

    def predict(self, x_t: Grid, t: int, tag: CacheTag, cache: _AnalyticCache) -> Grid:
        if tag is CacheTag.NONE:
            eps = analytic_eps(x_t, t, self.prior, self.schedule)
            cache.eps, cache.step = eps, t
            return eps
        if tag is CacheTag.BOTH:
            if cache.eps is None:
                raise CacheMissError("analytic cache reuse before any computation", step=t)
            return cache.eps
        raise ValueError(f"analytic denoiser caches its whole prediction; tag {tag} unsupported")
