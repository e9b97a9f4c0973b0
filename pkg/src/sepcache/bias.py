"""Exposure-bias mathematics: correlated-error accumulation in closed form,
Monte-Carlo verification, and per-step prediction-error estimation from
traces."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .numerics import Grid, SeededRng
from .sampler import Trace
from .schedule import NoiseSchedule


def _check_rho_n(rho: float, N: int) -> None:
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho must be in [0, 1], got {rho}")
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")


def covariance_sum(rho: float, N: int) -> float:
    """Sum of lagged covariances for N unit-variance AR(1) errors:
    sum_{d=1}^{N-1} (N - d) * rho^d."""
    _check_rho_n(rho, N)
    return float(sum((N - d) * rho**d for d in range(1, N)))


def accumulated_variance(rho: float, N: int) -> float:
    """Variance of the sum of N correlated unit errors: N + 2 * cov sum."""
    _check_rho_n(rho, N)
    return N + 2.0 * covariance_sum(rho, N)


@dataclass(frozen=True)
class BiasReport:
    rho: float
    N: int
    covariance_sum: float
    total_var: float
    std: float
    amplification_ratio: float
    empirical_var: float | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def bias_report(rho: float, N: int, empirical_var: float | None = None) -> BiasReport:
    cov = covariance_sum(rho, N)
    var = N + 2.0 * cov
    return BiasReport(
        rho=rho,
        N=N,
        covariance_sum=cov,
        total_var=var,
        std=math.sqrt(var),
        amplification_ratio=var / N,
        empirical_var=empirical_var,
    )


def exposure_bias_term(s: NoiseSchedule, t: int, e: float) -> float:
    """Squared bias contribution to Var(x_{t-1}) from prediction error e."""
    if not 2 <= t <= s.T:
        raise ValueError(f"t must be in [2, {s.T}], got {t}")
    if e < 0:
        raise ValueError(f"error scale e must be >= 0, got {e}")
    abar_prev = s.alpha_bar_at(t - 1)
    coef = math.sqrt(abar_prev) * s.beta_at(t) / (1.0 - s.alpha_bar_at(t))
    return (coef * e) ** 2


def var_xhat(s: NoiseSchedule, t: int, N: int, e: float) -> float:
    """Variance of the state after N cached steps ending at t - N:
    N^2 * bias term at t - N + 1, plus the schedule variance 1 - abar."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    if t - N < 1:
        raise ValueError(f"need t - N >= 1, got t={t}, N={N}")
    abar_tn = s.alpha_bar_at(t - N)
    coef = math.sqrt(abar_tn) * s.beta_at(t - N + 1) / (1.0 - s.alpha_bar_at(t - N + 1))
    return (N * coef * e) ** 2 + (1.0 - abar_tn)


def simulate_correlated_errors(rho: float, N: int, trials: int, rng: SeededRng) -> float:
    """Empirical variance of the summed AR(1) error chain over trials.

    The chain keeps unit marginal variance: the first term is a fresh
    draw, each later term mixes the previous with sqrt(1 - rho^2) fresh
    noise.
    """
    _check_rho_n(rho, N)
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    cur = rng.normal((trials,))
    total = cur.copy()
    c = math.sqrt(1.0 - rho * rho)
    for _ in range(1, N):
        cur = rho * cur + c * rng.normal((trials,))
        total += cur
    return float(total.var())


def reconstruct_x0(trace: Trace, t: int, s: NoiseSchedule) -> Grid:
    """x0_hat implied by the stored (x_t, eps_hat, b) at step t."""
    if t not in trace.snapshots:
        raise ValueError(f"trace has no snapshot at step {t}")
    rec = next(r for r in trace.steps if r.t == t)
    x_t, eps = trace.snapshots[t]
    abar = s.alpha_bar_at(t)
    return (x_t - math.sqrt(1.0 - abar) * rec.b * eps) / math.sqrt(abar)


def estimate_e(trace: Trace, x0_ref: Grid, s: NoiseSchedule) -> dict[int, float]:
    """Per-step prediction-error scale: std of (x0_hat - x0_ref) elements."""
    if not trace.snapshots:
        raise ValueError("trace stores no snapshots; rerun with snapshots enabled")
    x0_ref = np.asarray(x0_ref, dtype=np.float64)
    out: dict[int, float] = {}
    for t in sorted(trace.snapshots, reverse=True):
        diff = reconstruct_x0(trace, t, s) - x0_ref
        out[t] = float(np.sqrt(np.mean(diff**2)))
    return out


def estimate_e_pooled(traces: list[Trace], x0_ref: Grid, s: NoiseSchedule) -> dict[int, float]:
    """estimate_e with errors pooled elementwise across seeds per step."""
    if not traces:
        raise ValueError("need at least one trace")
    x0_ref = np.asarray(x0_ref, dtype=np.float64)
    steps = set(traces[0].snapshots)
    for tr in traces[1:]:
        steps &= set(tr.snapshots)
    if not steps:
        raise ValueError("traces share no snapshot steps")
    out: dict[int, float] = {}
    for t in sorted(steps, reverse=True):
        sq = [np.mean((reconstruct_x0(tr, t, s) - x0_ref) ** 2) for tr in traces]
        out[t] = float(np.sqrt(np.mean(sq)))
    return out
