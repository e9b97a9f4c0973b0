"""Noise schedules, posterior coefficients, noise scaling and cache thresholds."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numerics import Grid, SeededRng


@dataclass(frozen=True)
class NoiseSchedule:
    """Per-step diffusion tables, 1-based step index t in [1, T].

    beta[t-1] is the step-t variance increment; alpha_bar is the running
    product of (1 - beta); beta_tilde is the posterior variance, zero at
    t=1 by convention.
    """

    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray
    beta_tilde: np.ndarray

    @property
    def T(self) -> int:
        return len(self.beta)

    def _check_t(self, t: int, low: int = 1) -> None:
        if not low <= t <= self.T:
            raise ValueError(f"step t={t} outside [{low}, {self.T}]")

    def beta_at(self, t: int) -> float:
        self._check_t(t)
        return float(self.beta[t - 1])

    def alpha_at(self, t: int) -> float:
        self._check_t(t)
        return float(self.alpha[t - 1])

    def alpha_bar_at(self, t: int) -> float:
        # alpha_bar(0) == 1 closes the t=1 posterior and DDIM's final hop
        if t == 0:
            return 1.0
        self._check_t(t)
        return float(self.alpha_bar[t - 1])

    def beta_tilde_at(self, t: int) -> float:
        self._check_t(t)
        return float(self.beta_tilde[t - 1])

    def fingerprint(self) -> str:
        return f"linear:T={self.T}:b1={self.beta[0]:.12g}:bT={self.beta[-1]:.12g}"


def build_linear_schedule(T: int, beta_start: float, beta_end: float) -> NoiseSchedule:
    """Linear beta schedule with derived alpha/alpha_bar/beta_tilde tables."""
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ValueError(f"need 0 < beta_start <= beta_end < 1, got ({beta_start}, {beta_end})")
    beta = np.linspace(beta_start, beta_end, T)
    alpha = 1.0 - beta
    alpha_bar = np.cumprod(alpha)
    prev_bar = np.concatenate(([1.0], alpha_bar[:-1]))
    beta_tilde = (1.0 - prev_bar) / (1.0 - alpha_bar) * beta
    return NoiseSchedule(beta=beta, alpha=alpha, alpha_bar=alpha_bar, beta_tilde=beta_tilde)


def q_sample(x0: Grid, t: int, eps: Grid, s: NoiseSchedule) -> Grid:
    """Forward-noise x0 to step t: sqrt(abar)*x0 + sqrt(1-abar)*eps."""
    x0 = np.asarray(x0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if x0.shape != eps.shape:
        raise ValueError(f"shape mismatch: x0 {x0.shape} vs eps {eps.shape}")
    abar = s.alpha_bar_at(t)
    return math.sqrt(abar) * x0 + math.sqrt(1.0 - abar) * eps


def posterior_moments(x_t: Grid, x0_hat: Grid, t: int, s: NoiseSchedule) -> tuple[Grid, float]:
    """Mean and variance of the reverse-step posterior given (x_t, x0_hat).

    Only defined for t >= 2; the t=1 step is the data step and is handled
    by the sampler directly.
    """
    if t < 2:
        raise ValueError(f"posterior_moments needs t >= 2, got t={t}")
    x_t = np.asarray(x_t, dtype=np.float64)
    x0_hat = np.asarray(x0_hat, dtype=np.float64)
    if x_t.shape != x0_hat.shape:
        raise ValueError(f"shape mismatch: x_t {x_t.shape} vs x0_hat {x0_hat.shape}")
    beta_t = s.beta_at(t)
    alpha_t = s.alpha_at(t)
    abar_t = s.alpha_bar_at(t)
    abar_prev = s.alpha_bar_at(t - 1)
    c_xt = math.sqrt(alpha_t) * (1.0 - abar_prev) / (1.0 - abar_t)
    c_x0 = math.sqrt(abar_prev) * beta_t / (1.0 - abar_t)
    mu = c_xt * x_t + c_x0 * x0_hat
    return mu, s.beta_tilde_at(t)


@dataclass(frozen=True)
class ScalingSchedule:
    """Two-stage noise scaling: base b_h above the threshold, b_l below."""

    b_h: float = 0.98
    b_l: float = 0.96
    t_thre: float = 0.4

    def __post_init__(self):
        if not (0.0 < self.b_l <= self.b_h <= 1.0):
            raise ValueError(f"need 0 < b_l <= b_h <= 1, got b_l={self.b_l}, b_h={self.b_h}")
        if not (0.0 < self.t_thre < 1.0):
            raise ValueError(f"t_thre must be in (0, 1), got {self.t_thre}")


def scaling_factor(t_norm: float, sch: ScalingSchedule) -> float:
    """Noise scale at normalized denoising time t_norm = t/T.

    High-noise branch (t_norm >= t_thre) relaxes from b_h toward 1 at
    t_norm = 1; low-noise branch rises from b_l toward b_h.
    """
    if not 0.0 <= t_norm <= 1.0:
        raise ValueError(f"t_norm must be in [0, 1], got {t_norm}")
    span = 1.0 - sch.t_thre
    if t_norm >= sch.t_thre:
        return sch.b_h + (1.0 - sch.b_h) * math.exp(-5.0 * (1.0 - t_norm) / span)
    return sch.b_l + (sch.b_h - sch.b_l) * math.exp(5.0 * (t_norm - sch.t_thre) / span)


@dataclass(frozen=True)
class ThresholdSchedule:
    """Linear cache-error threshold delta(t) = a + b * t/T."""

    a: float = 0.05
    b: float = 0.15

    def __post_init__(self):
        if self.a < 0:
            raise ValueError(f"intercept a must be >= 0, got {self.a}")


def threshold(t: int, T: int, th: ThresholdSchedule) -> float:
    """Evaluate the error threshold at step t, valid for 0 <= t < T."""
    if not 0 <= t < T:
        raise ValueError(f"threshold needs 0 <= t < T, got t={t}, T={T}")
    return th.a + th.b * t / T


def posterior_sample(x_t: Grid, x0_hat: Grid, t: int, s: NoiseSchedule, rng: SeededRng) -> Grid:
    """Draw x_{t-1} from the posterior (t >= 2)."""
    mu, var = posterior_moments(x_t, x0_hat, t, s)
    return mu + math.sqrt(var) * rng.normal(mu.shape)
