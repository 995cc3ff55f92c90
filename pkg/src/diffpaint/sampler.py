"""Reverse diffusion driven by a TimeSchedule, with known-region conditioning.

Walking a schedule: at a down transition from list value v the denoiser runs
at level t = v + 1 and produces the latent one level below; at an up
transition the combined latent is re-noised one level with the beta of the
destination. Inpainting overwrites the known coordinates of every reverse
output with a fresh collapsed-noising draw of the ground truth at the
destination level, per

    x_{t-1} = m * known_draw(t-1) + (1 - m) * reverse_output,

mask value 1 marking known coordinates.

RNG discipline (the determinism contract): per down transition the sampler
draws, in order, the reverse-step noise z (only for t > 1) and then the
known-region noise (only for t > 1, conditioned runs only); per up transition
a single noise draw. Identical seeds, inputs and config produce bit-identical
outputs.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .denoiser import DenoiserModel, posterior_mean
from .schedule import NoiseSchedule, forward_sample, forward_step
from .timetravel import SdeditPlan, TimeSchedule


class NonFiniteLatentError(FloatingPointError):
    """The chain produced NaN/inf values; message carries the offending level."""


class SigmaMode(enum.Enum):
    # beta_tilde: (1 - abar_{t-1}) / (1 - abar_t) * beta_t, the posterior
    # variance for a deterministic clean sample; beta: plain beta_t.
    BETA_TILDE = "beta_tilde"
    BETA = "beta"


@dataclass(frozen=True)
class SamplerConfig:
    sigma_mode: SigmaMode = SigmaMode.BETA_TILDE
    paste_final_known: bool = True
    record_trace: bool = False

    def __post_init__(self):
        if not isinstance(self.sigma_mode, SigmaMode):
            raise ValueError(f"sigma_mode must be a SigmaMode, got {self.sigma_mode!r}")


@dataclass
class SampleTrace:
    """(list time, latent copy) snapshots, exactly one per schedule position."""

    entries: list[tuple[int, np.ndarray]] = field(default_factory=list)

    def add(self, t: int, latent: np.ndarray) -> None:
        self.entries.append((t, latent.copy()))

    @property
    def times(self) -> list[int]:
        return [t for t, _ in self.entries]


@dataclass
class SampleResult:
    sample: np.ndarray
    nfe: int
    trace: SampleTrace | None = None


def sigma_t(t: int, sched: NoiseSchedule, mode: SigmaMode) -> float:
    """Reverse-step noise scale; zero at t = 1 under beta_tilde (abar_0 = 1)."""
    b = sched.beta(t)
    if mode is SigmaMode.BETA:
        return float(np.sqrt(b))
    ab_prev = sched.alpha_bar(t - 1)
    ab = sched.alpha_bar(t)
    return float(np.sqrt((1.0 - ab_prev) / (1.0 - ab) * b))


def _require_finite(x: np.ndarray, t: int, what: str) -> None:
    if not np.all(np.isfinite(x)):
        raise NonFiniteLatentError(f"non-finite {what} at t={t}")


def reverse_step(model: DenoiserModel, x_t: np.ndarray, t: int, sched: NoiseSchedule,
                 cfg: SamplerConfig, rng: np.random.Generator) -> np.ndarray:
    """One stochastic reverse transition x_t -> x_{t-1}; deterministic at t = 1."""
    x_t = np.asarray(x_t, dtype=np.float64)
    _require_finite(x_t, t, "input latent")
    eps_hat = model.predict_eps(x_t, t, sched)
    mean = posterior_mean(eps_hat, x_t, t, sched)
    if t > 1:
        out = mean + sigma_t(t, sched, cfg.sigma_mode) * rng.standard_normal(x_t.shape)
    else:
        out = mean
    _require_finite(out, t, "latent")
    return out


def _check_binary_mask(mask: np.ndarray) -> np.ndarray:
    mask = np.asarray(mask, dtype=np.float64)
    if not np.all((mask == 0.0) | (mask == 1.0)):
        raise ValueError("mask must be strictly binary (0 = unknown, 1 = known)")
    return mask


def condition_step(x_known_clean: np.ndarray, x_unknown_next: np.ndarray,
                   mask: np.ndarray, t: int, sched: NoiseSchedule,
                   rng: np.random.Generator) -> np.ndarray:
    """Combine a fresh known-region draw at level t-1 with the reverse output.

    The known coordinates receive a collapsed-noising sample of the ground
    truth at the destination level t-1; at t = 1 that is the clean data
    itself and no noise is drawn.
    """
    x_known_clean = np.asarray(x_known_clean, dtype=np.float64)
    x_unknown_next = np.asarray(x_unknown_next, dtype=np.float64)
    if x_known_clean.shape != x_unknown_next.shape:
        raise ValueError(
            f"shape mismatch: known {x_known_clean.shape} vs reverse output {x_unknown_next.shape}"
        )
    mask = _check_binary_mask(mask)
    if t > 1:
        noise = rng.standard_normal(x_known_clean.shape)
    else:
        noise = np.zeros_like(x_known_clean)
    known = forward_sample(x_known_clean, t - 1, noise, sched)
    return mask * known + (1.0 - mask) * x_unknown_next


def forward_jump_step(x_prev: np.ndarray, t: int, sched: NoiseSchedule,
                      rng: np.random.Generator) -> np.ndarray:
    """Re-noise the full combined latent one level up, to level t."""
    x_prev = np.asarray(x_prev, dtype=np.float64)
    return forward_step(x_prev, t, rng.standard_normal(x_prev.shape), sched)


def _walk(model, sched, times, x, x0_known, mask, cfg, rng, trace):
    """Shared transition loop; x0_known None means unconditional."""
    nfe = 0
    for v_src, v_dst in zip(times[:-1], times[1:]):
        if v_dst < v_src:
            t = v_src + 1
            x = reverse_step(model, x, t, sched, cfg, rng)
            nfe += 1
            if x0_known is not None:
                x = condition_step(x0_known, x, mask, t, sched, rng)
        else:
            x = forward_jump_step(x, v_dst + 1, sched, rng)
        if trace is not None:
            trace.add(v_dst, x)
    return x, nfe


def repaint_inpaint(model: DenoiserModel, sched: NoiseSchedule, tsched: TimeSchedule,
                    x0_known: np.ndarray, mask: np.ndarray, cfg: SamplerConfig,
                    rng: np.random.Generator) -> SampleResult:
    """Mask-conditioned sampling along a (possibly resampling) time schedule.

    `x0_known` carries the ground truth on mask==1 coordinates; its values on
    unknown coordinates are ignored. Leading axes of x0_known are treated as
    independent chains sharing the mask. With paste_final_known the returned
    known coordinates are the ground truth bit-for-bit.
    """
    if tsched.total_steps != sched.steps:
        raise ValueError(
            f"time schedule built for T={tsched.total_steps} but noise schedule has {sched.steps}"
        )
    x0_known = np.asarray(x0_known, dtype=np.float64)
    mask = _check_binary_mask(mask)
    np.broadcast_shapes(mask.shape, x0_known.shape)

    trace = SampleTrace() if cfg.record_trace else None
    x = rng.standard_normal(x0_known.shape)
    if trace is not None:
        trace.add(tsched.times[0], x)
    x, nfe = _walk(model, sched, tsched.times, x, x0_known, mask, cfg, rng, trace)
    if cfg.paste_final_known:
        x = np.where(mask == 1.0, np.broadcast_to(x0_known, x.shape), x)
    return SampleResult(sample=x, nfe=nfe, trace=trace)


def unconditional_sample(model: DenoiserModel, sched: NoiseSchedule, tsched: TimeSchedule,
                         shape: tuple[int, ...], cfg: SamplerConfig,
                         rng: np.random.Generator) -> SampleResult:
    """Plain (or resampling) reverse chain from pure noise, no mask logic."""
    if tsched.total_steps != sched.steps:
        raise ValueError(
            f"time schedule built for T={tsched.total_steps} but noise schedule has {sched.steps}"
        )
    trace = SampleTrace() if cfg.record_trace else None
    x = rng.standard_normal(shape)
    if trace is not None:
        trace.add(tsched.times[0], x)
    x, nfe = _walk(model, sched, tsched.times, x, None, None, cfg, rng, trace)
    return SampleResult(sample=x, nfe=nfe, trace=trace)


def sdedit_inpaint(model: DenoiserModel, sched: NoiseSchedule, plan: SdeditPlan,
                   x0_known: np.ndarray, mask: np.ndarray, cfg: SamplerConfig,
                   rng: np.random.Generator) -> SampleResult:
    """Restart-style baseline: conditioned descents with one-shot renoising between.

    Each segment is walked exactly like repaint_inpaint's down transitions;
    between segments the current clean output is re-noised to the plan's
    renoise level with the collapsed forward law.
    """
    if plan.total_steps != sched.steps:
        raise ValueError(
            f"plan built for T={plan.total_steps} but noise schedule has {sched.steps}"
        )
    x0_known = np.asarray(x0_known, dtype=np.float64)
    mask = _check_binary_mask(mask)

    trace = SampleTrace() if cfg.record_trace else None
    x = rng.standard_normal(x0_known.shape)
    if trace is not None:
        trace.add(plan.segments[0][0], x)
    nfe = 0
    for i, seg in enumerate(plan.segments):
        if i > 0:
            x = forward_sample(x, plan.renoise_time, rng.standard_normal(x.shape), sched)
            if trace is not None:
                trace.add(seg[0], x)
        x, n = _walk(model, sched, seg, x, x0_known, mask, cfg, rng, trace)
        nfe += n
    if cfg.paste_final_known:
        x = np.where(mask == 1.0, np.broadcast_to(x0_known, x.shape), x)
    return SampleResult(sample=x, nfe=nfe, trace=trace)
