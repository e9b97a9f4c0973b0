"""Trace analytics: frequency-band energy split, SNR curves, paired
feature error, and compute/latency accounting."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bias import reconstruct_x0
from .numerics import Grid, fft2d, l2
from .sampler import Trace
from .schedule import NoiseSchedule

SNR_CAP = 1e6


def _radial_mask(H: int, W: int, cutoff_radius: float) -> np.ndarray:
    """Low-band mask on the centered spectrum: normalized radius <= cutoff."""
    ky = np.fft.fftfreq(H) * 2.0  # per-axis frequency as a fraction of Nyquist
    kx = np.fft.fftfreq(W) * 2.0
    r = np.sqrt(ky[:, None] ** 2 + kx[None, :] ** 2)
    return r <= cutoff_radius


def band_energy(field: Grid, cutoff_radius: float = 0.25) -> tuple[float, float]:
    """Split a grid's energy at a radial frequency cutoff.

    Returns spatial-domain L2 norms (low, high); every frequency bin
    lands in exactly one band, so low^2 + high^2 == total^2 (Parseval).
    """
    if not 0.0 < cutoff_radius < 1.0:
        raise ValueError(f"cutoff_radius must be in (0, 1), got {cutoff_radius}")
    f = np.asarray(field)
    if f.ndim != 3:
        raise ValueError(f"band_energy expects (H, W, C), got shape {f.shape}")
    H, W, _ = f.shape
    mask = _radial_mask(H, W, cutoff_radius)
    spec = fft2d(f.astype(np.complex128))
    power = np.abs(spec) ** 2
    low2 = float(power[mask].sum()) / (H * W)
    high2 = float(power[~mask].sum()) / (H * W)
    return math.sqrt(low2), math.sqrt(high2)


def band_energy_curve(trace: Trace, cutoff_radius: float = 0.25) -> list[tuple[int, float, float]]:
    """(t, low_l2, high_l2) for every snapshotted state, t descending."""
    if not trace.snapshots:
        raise ValueError("trace stores no snapshots")
    out = []
    for t in sorted(trace.snapshots, reverse=True):
        x, _ = trace.snapshots[t]
        low, high = band_energy(x, cutoff_radius)
        out.append((t, low, high))
    return out


def snr_curve(trace: Trace, s: NoiseSchedule, cap: float = SNR_CAP) -> list[tuple[int, float]]:
    """Per-step signal-to-noise of the reconstructed state.

    SNR_t = (abar * |x0_hat|^2) / ((1 - abar) * |b * eps_hat|^2), capped
    when the noise estimate underflows.
    """
    if not trace.snapshots:
        raise ValueError("trace stores no snapshots")
    out = []
    for t in sorted(trace.snapshots, reverse=True):
        rec = next(r for r in trace.steps if r.t == t)
        _, eps = trace.snapshots[t]
        abar = s.alpha_bar_at(t)
        x0_hat = reconstruct_x0(trace, t, s)
        num = abar * l2(x0_hat) ** 2
        den = (1.0 - abar) * l2(rec.b * eps) ** 2
        out.append((t, min(num / den, cap) if den > 0 else (0.0 if num == 0 else cap)))
    return out


def paired_feature_error(trace_a: Trace, trace_b: Trace, step: int) -> tuple[Grid, float, float]:
    """Elementwise |x_a - x_b| at one step for two same-noise trajectories.

    Both traces must share the pair key (seed, shape, schedule, sampler);
    anything else compares different noise draws and is rejected.
    """
    if trace_a.pair_key() != trace_b.pair_key():
        raise ValueError("traces are not pairable: seed/shape/schedule/sampler differ")
    if step not in trace_a.snapshots or step not in trace_b.snapshots:
        raise ValueError(f"both traces must snapshot step {step}")
    xa, _ = trace_a.snapshots[step]
    xb, _ = trace_b.snapshots[step]
    err = np.abs(xa - xb)
    return err, float(err.sum()), l2(err)


@dataclass(frozen=True)
class SpeedupRow:
    label: str
    total_macs: int
    wall_time: float
    speedup: float
    mac_ratio: float


def speedup_report(
    traces: list[Trace], baseline: Trace, labels: list[str] | None = None
) -> list[SpeedupRow]:
    """Wall-clock speedup and MAC ratio of each trace against a baseline.

    mac_ratio is trace MACs over baseline MACs (< 1 means cheaper).
    """
    if labels is None:
        labels = [f"trace{i}" for i in range(len(traces))]
    for tr in traces:
        if tr.grid_shape != baseline.grid_shape or tr.schedule_fp != baseline.schedule_fp:
            raise ValueError("speedup_report needs traces from one model/schedule config")
    rows = []
    for label, tr in zip(labels, traces):
        rows.append(
            SpeedupRow(
                label=label,
                total_macs=tr.total_macs,
                wall_time=tr.wall_time,
                speedup=baseline.wall_time / tr.wall_time if tr.wall_time > 0 else math.inf,
                mac_ratio=tr.total_macs / baseline.total_macs if baseline.total_macs else math.nan,
            )
        )
    return rows
