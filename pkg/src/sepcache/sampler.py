"""Reverse-process execution with noise scaling and cache-plan-driven
prediction; records a full per-step trace."""
from __future__ import annotations

import hashlib
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cache import CacheMissError, CachePolicy, CacheTable, CacheTag, resolve_plan
from .model import NoisePredictor
from .numerics import Grid, SeededRng, l2
from .schedule import NoiseSchedule, ScalingSchedule, posterior_moments, scaling_factor


@dataclass(frozen=True)
class StepRecord:
    t: int
    tag: CacheTag
    b: float
    eps_norm: float
    macs: int


@dataclass
class Trace:
    """Everything one trajectory produced, keyed for pairing and replay."""

    seed: int
    sampler_kind: str
    T: int
    steps: list[StepRecord]
    final_x0: Grid
    grid_shape: tuple[int, int, int]
    schedule_fp: str
    config_hash: str
    wall_time: float
    snapshots: dict[int, tuple[Grid, Grid]] = field(default_factory=dict)

    @property
    def total_macs(self) -> int:
        return sum(s.macs for s in self.steps)

    def pair_key(self) -> str:
        """Identity of the noise draws: equal keys mean comparable runs."""
        return json.dumps(
            {
                "seed": self.seed,
                "sampler": self.sampler_kind,
                "T": self.T,
                "steps": len(self.steps),
                "grid": list(self.grid_shape),
                "schedule": self.schedule_fp,
            },
            sort_keys=True,
        )

    def save(self, out_dir: str | Path) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        lines = [f"# config={self.config_hash} seed={self.seed}"]
        lines.append("t,tag,b,eps_norm,cost")
        for s in self.steps:
            lines.append(f"{s.t},{s.tag.value},{s.b!r},{s.eps_norm!r},{s.macs}")
        (out / "trace.csv").write_text("\n".join(lines) + "\n")

        snap_steps = sorted(self.snapshots, reverse=True)
        blob_parts = []
        for t in snap_steps:
            x, eps = self.snapshots[t]
            blob_parts.append(np.asarray(x, dtype="<f8").ravel())
            blob_parts.append(np.asarray(eps, dtype="<f8").ravel())
        blob_parts.append(np.asarray(self.final_x0, dtype="<f8").ravel())
        (out / "snapshots.bin").write_bytes(np.concatenate(blob_parts).tobytes())

        meta = {
            "config_hash": self.config_hash,
            "seed": self.seed,
            "sampler_kind": self.sampler_kind,
            "T": self.T,
            "grid_shape": list(self.grid_shape),
            "schedule_fp": self.schedule_fp,
            "snapshot_steps": snap_steps,
        }
        (out / "meta.json").write_text(json.dumps(meta, indent=1))
        # wall clock is the one non-reproducible datum; it lives apart so
        # every other file is byte-stable across reruns
        (out / "timing.json").write_text(json.dumps({"wall_time": self.wall_time}))

    @classmethod
    def load(cls, in_dir: str | Path) -> "Trace":
        src = Path(in_dir)
        meta = json.loads((src / "meta.json").read_text())
        timing = json.loads((src / "timing.json").read_text())
        steps = []
        for line in (src / "trace.csv").read_text().splitlines():
            if line.startswith("#") or line.startswith("t,"):
                continue
            t, tag, b, eps_norm, macs = line.split(",")
            steps.append(
                StepRecord(int(t), CacheTag(tag), float(b), float(eps_norm), int(macs))
            )
        shape = tuple(meta["grid_shape"])
        n = math.prod(shape)
        raw = np.frombuffer((src / "snapshots.bin").read_bytes(), dtype="<f8")
        snap_steps = meta["snapshot_steps"]
        if len(raw) != n * (2 * len(snap_steps) + 1):
            raise ValueError("snapshot blob length disagrees with meta.json")
        snapshots = {}
        for i, t in enumerate(snap_steps):
            x = raw[2 * i * n : (2 * i + 1) * n].reshape(shape).copy()
            eps = raw[(2 * i + 1) * n : (2 * i + 2) * n].reshape(shape).copy()
            snapshots[t] = (x, eps)
        final_x0 = raw[-n:].reshape(shape).copy()
        return cls(
            seed=meta["seed"],
            sampler_kind=meta["sampler_kind"],
            T=meta["T"],
            steps=steps,
            final_x0=final_x0,
            grid_shape=shape,
            schedule_fp=meta["schedule_fp"],
            config_hash=meta["config_hash"],
            wall_time=timing["wall_time"],
            snapshots=snapshots,
        )


def ddpm_step(
    x_t: Grid, t: int, eps_hat: Grid, b: float, s: NoiseSchedule, rng: SeededRng
) -> Grid:
    """One ancestral step; the scale b multiplies the predicted noise.

    t == 1 is the data step: returns x0_hat with no added noise.
    """
    x_t = np.asarray(x_t, dtype=np.float64)
    eps_hat = np.asarray(eps_hat, dtype=np.float64)
    if x_t.shape != eps_hat.shape:
        raise ValueError(f"shape mismatch: x_t {x_t.shape} vs eps_hat {eps_hat.shape}")
    abar = s.alpha_bar_at(t)
    x0_hat = (x_t - math.sqrt(1.0 - abar) * b * eps_hat) / math.sqrt(abar)
    if t == 1:
        return x0_hat
    mu, var = posterior_moments(x_t, x0_hat, t, s)
    return mu + math.sqrt(var) * rng.normal(mu.shape)


def ddim_step(
    x_t: Grid, t: int, t_prev: int, eps_hat: Grid, b: float, s: NoiseSchedule
) -> Grid:
    """Deterministic DDIM hop from step t to t_prev < t (eta = 0)."""
    if t_prev >= t:
        raise ValueError(f"ddim needs t_prev < t, got t_prev={t_prev}, t={t}")
    x_t = np.asarray(x_t, dtype=np.float64)
    eps_hat = np.asarray(eps_hat, dtype=np.float64)
    if x_t.shape != eps_hat.shape:
        raise ValueError(f"shape mismatch: x_t {x_t.shape} vs eps_hat {eps_hat.shape}")
    abar = s.alpha_bar_at(t)
    abar_prev = s.alpha_bar_at(t_prev)
    x0_hat = (x_t - math.sqrt(1.0 - abar) * b * eps_hat) / math.sqrt(abar)
    return math.sqrt(abar_prev) * x0_hat + math.sqrt(1.0 - abar_prev) * b * eps_hat


def ddim_timesteps(T: int, steps: int) -> list[int]:
    """Evenly spaced decreasing subsequence of [1, T], starting at T."""
    if not 2 <= steps <= T:
        raise ValueError(f"ddim needs 2 <= steps <= T, got steps={steps}, T={T}")
    ts = np.unique(np.linspace(1, T, steps).round().astype(int))[::-1]
    return [int(t) for t in ts]


def run_trajectory(
    predictor: NoisePredictor,
    policy: CachePolicy,
    scaling: ScalingSchedule | None,
    T: int,
    seed: int,
    s: NoiseSchedule,
    sampler_kind: str = "ddpm",
    ddim_steps: int | None = None,
    snapshot_stride: int | None = None,
    stream: int = 0,
    plan: CacheTable | None = None,
) -> Trace:
    """Execute one seeded trajectory under a cache plan and noise scaling.

    Identical inputs produce bit-identical traces.  snapshot_stride=0
    disables snapshots; None keeps every step for T <= 100, else 10.
    """
    if sampler_kind not in ("ddpm", "ddim"):
        raise ValueError(f"unknown sampler kind {sampler_kind!r}")
    if T != s.T:
        raise ValueError(f"T={T} disagrees with schedule T={s.T}")
    timesteps = list(range(T, 0, -1)) if sampler_kind == "ddpm" else ddim_timesteps(T, ddim_steps)
    if plan is None:
        plan = resolve_plan(policy, len(timesteps))
    if snapshot_stride is None:
        snapshot_stride = 1 if len(timesteps) <= 100 else 10

    cfg = {
        "policy": repr(policy),
        "scaling": repr(scaling),
        "T": T,
        "seed": seed,
        "sampler": sampler_kind,
        "ddim_steps": ddim_steps,
        "schedule": s.fingerprint(),
        "grid": list(predictor.grid_shape),
    }
    config_hash = hashlib.sha256(
        json.dumps(cfg, sort_keys=True).encode()
    ).hexdigest()[:16]

    rng = SeededRng(seed, stream=stream)
    cache = predictor.new_cache()
    x = rng.normal(predictor.grid_shape)
    records: list[StepRecord] = []
    snapshots: dict[int, tuple[Grid, Grid]] = {}
    t0 = time.perf_counter()
    for i, t in enumerate(timesteps):
        tag = plan.tags[i]
        b = scaling_factor(t / T, scaling) if scaling is not None else 1.0
        try:
            eps = predictor.predict(x, t, tag, cache)
        except CacheMissError as exc:
            raise CacheMissError(f"step t={t} (index {i}): {exc}", step=t) from exc
        records.append(StepRecord(t=t, tag=tag, b=b, eps_norm=l2(eps), macs=predictor.cost(tag).total))
        if snapshot_stride and i % snapshot_stride == 0:
            snapshots[t] = (x.copy(), eps.copy())
        if sampler_kind == "ddpm":
            x = ddpm_step(x, t, eps, b, s, rng)
        else:
            t_prev = timesteps[i + 1] if i + 1 < len(timesteps) else 0
            x = ddim_step(x, t, t_prev, eps, b, s)
    wall = time.perf_counter() - t0
    return Trace(
        seed=seed,
        sampler_kind=sampler_kind,
        T=T,
        steps=records,
        final_x0=x,
        grid_shape=tuple(predictor.grid_shape),
        schedule_fp=s.fingerprint(),
        config_hash=config_hash,
        wall_time=wall,
        snapshots=snapshots,
    )
