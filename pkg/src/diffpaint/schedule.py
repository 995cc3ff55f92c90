"""Variance schedules and the forward (noising) process.

A schedule fixes the per-step noise variances beta_t for t = 1..T. From them
we precompute alpha_t = 1 - beta_t and the cumulative products
abar_t = prod_{s<=t} alpha_s, which give the collapsed one-shot noising law

    x_t = sqrt(abar_t) x_0 + sqrt(1 - abar_t) eps,   eps ~ N(0, I).

Time is 1-based at this API: t = 0 means clean data (abar_0 = 1), t = T is
the noisiest level. All arrays are float64 and immutable after construction;
lookups are pure and safe to share across sampling workers.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

DEFAULT_BETA_START = 1e-4
DEFAULT_BETA_END = 0.02
REFERENCE_STEPS = 1000
MAX_COSINE_BETA = 0.999


class ScheduleKind(enum.Enum):
    LINEAR = "linear"
    COSINE = "cosine"


@dataclass(frozen=True)
class NoiseSchedule:
    """Precomputed beta_t / alpha_t / abar_t arrays, index t-1 holds step t."""

    betas: np.ndarray
    alphas: np.ndarray
    alpha_bars: np.ndarray
    kind: ScheduleKind

    def __post_init__(self):
        for name in ("betas", "alphas", "alpha_bars"):
            arr = getattr(self, name)
            object.__setattr__(self, name, np.ascontiguousarray(arr, dtype=np.float64))
            getattr(self, name).setflags(write=False)
        if self.betas.ndim != 1 or self.betas.size < 1:
            raise ValueError("schedule needs at least one step")
        if np.any(self.betas <= 0.0) or np.any(self.betas >= 1.0):
            raise ValueError("betas must lie strictly inside (0, 1)")
        if np.any(np.diff(self.alpha_bars) >= 0.0):
            raise ValueError("alpha_bars must be strictly decreasing")

    @property
    def steps(self) -> int:
        return int(self.betas.size)

    def _check_t(self, t: int, lo: int) -> int:
        t = int(t)
        if not lo <= t <= self.steps:
            raise ValueError(f"t={t} outside [{lo}, {self.steps}]")
        return t

    def beta(self, t: int) -> float:
        return float(self.betas[self._check_t(t, 1) - 1])

    def alpha(self, t: int) -> float:
        return float(self.alphas[self._check_t(t, 1) - 1])

    def alpha_bar(self, t: int) -> float:
        """Cumulative product abar_t; abar_0 = 1 by the empty-product rule."""
        t = self._check_t(t, 0)
        return 1.0 if t == 0 else float(self.alpha_bars[t - 1])


def _finish(betas: np.ndarray, kind: ScheduleKind) -> NoiseSchedule:
    alphas = 1.0 - betas
    return NoiseSchedule(betas=betas, alphas=alphas, alpha_bars=np.cumprod(alphas), kind=kind)


def build_linear_schedule(
    steps: int,
    beta_start: float = DEFAULT_BETA_START,
    beta_end: float = DEFAULT_BETA_END,
    scale_betas: bool = True,
) -> NoiseSchedule:
    """Linearly spaced betas, endpoints inclusive.

    The endpoints are conventionally quoted for a 1000-step schedule; with
    `scale_betas` they are multiplied by 1000/steps so that the total noise
    injected stays roughly constant when the step count changes.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    scale = REFERENCE_STEPS / steps if scale_betas else 1.0
    lo, hi = beta_start * scale, beta_end * scale
    if not 0.0 < lo <= hi < 1.0:
        raise ValueError(
            f"beta endpoints ({lo:.6g}, {hi:.6g}) outside (0, 1) after scaling"
        )
    return _finish(np.linspace(lo, hi, steps, dtype=np.float64), ScheduleKind.LINEAR)


def build_cosine_schedule(steps: int) -> NoiseSchedule:
    """Betas chosen so abar_t follows the squared-cosine profile.

    abar(u) ~ cos((u + 0.008) / 1.008 * pi/2)^2 for u in [0, 1]; each beta is
    1 - abar(t/T)/abar((t-1)/T), clipped to 0.999 to avoid a singular last step.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")

    def abar(u: float) -> float:
        return math.cos((u + 0.008) / 1.008 * math.pi / 2.0) ** 2

    betas = np.empty(steps, dtype=np.float64)
    for i in range(steps):
        betas[i] = min(1.0 - abar((i + 1) / steps) / abar(i / steps), MAX_COSINE_BETA)
    return _finish(betas, ScheduleKind.COSINE)


def build_schedule(kind: ScheduleKind, steps: int, beta_start: float = DEFAULT_BETA_START,
                   beta_end: float = DEFAULT_BETA_END, scale_betas: bool = True) -> NoiseSchedule:
    if kind is ScheduleKind.LINEAR:
        return build_linear_schedule(steps, beta_start, beta_end, scale_betas)
    return build_cosine_schedule(steps)


def _check_same_shape(x: np.ndarray, noise: np.ndarray) -> None:
    if x.shape != noise.shape:
        raise ValueError(f"noise shape {noise.shape} != sample shape {x.shape}")


def forward_step(x_prev: np.ndarray, t: int, noise: np.ndarray, sched: NoiseSchedule) -> np.ndarray:
    """One noising transition to level t: sqrt(1-beta_t) x_{t-1} + sqrt(beta_t) eps."""
    x_prev = np.asarray(x_prev, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    _check_same_shape(x_prev, noise)
    b = sched.beta(t)
    return np.sqrt(1.0 - b) * x_prev + np.sqrt(b) * noise


def forward_sample(x0: np.ndarray, t: int, noise: np.ndarray, sched: NoiseSchedule) -> np.ndarray:
    """Collapsed noising to level t: sqrt(abar_t) x_0 + sqrt(1-abar_t) eps.

    t = 0 returns x0 itself (abar_0 = 1).
    """
    x0 = np.asarray(x0, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    _check_same_shape(x0, noise)
    ab = sched.alpha_bar(t)
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * noise
