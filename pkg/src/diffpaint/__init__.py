"""Mask-conditioned DDPM inpainting engine with resampling time schedules.

The package is built around four pieces:

* variance schedules and the forward (noising) process (`schedule`),
* diffusion-time walks including resampling jumps (`timetravel`),
* noise predictors, both an exact Gaussian-mixture oracle and a small
  trainable MLP (`denoiser`),
* the reverse-process sampler with known-region conditioning (`sampler`).

`masks`, `evals`, `config`, `tensorio` and `cli` supply the mask families,
ablation harnesses and the file/CLI surface around the core.
"""

from .schedule import (
    NoiseSchedule,
    ScheduleKind,
    build_cosine_schedule,
    build_linear_schedule,
    forward_sample,
    forward_step,
)
from .timetravel import (
    SdeditPlan,
    SlowdownPlan,
    TimeSchedule,
    generate_jump_schedule,
    generate_sdedit_schedule,
    generate_slowdown_schedule,
)
from .denoiser import (
    DenoiserModel,
    GaussianMixtureDenoiser,
    GaussianMixturePrior,
    MlpDenoiser,
    gm_predict_eps,
    load_checkpoint,
    loss_simple,
    mlp_forward,
    posterior_mean,
    save_checkpoint,
    train_step,
)
from .sampler import (
    SampleResult,
    SampleTrace,
    SamplerConfig,
    SigmaMode,
    condition_step,
    forward_jump_step,
    repaint_inpaint,
    reverse_step,
    sdedit_inpaint,
    unconditional_sample,
)
from .masks import (
    BrushKind,
    BrushParams,
    Mask,
    load_mask_png,
    mask_alternating_lines,
    mask_brush,
    mask_expand,
    mask_half,
    mask_super_resolution,
    save_mask_png,
)
from .evals import (
    AblationReport,
    conditional_moment_error,
    diversity_score,
    masked_mse,
    run_jump_grid,
    run_resample_vs_slowdown,
    run_sdedit_comparison,
)
from .config import ConfigError, RunConfig, parse_config
from .tensorio import load_tensor, save_image_grid, save_tensor

__version__ = "0.1.0"

__all__ = [
    "NoiseSchedule", "ScheduleKind", "build_linear_schedule", "build_cosine_schedule",
    "forward_step", "forward_sample",
    "TimeSchedule", "SlowdownPlan", "SdeditPlan",
    "generate_jump_schedule", "generate_slowdown_schedule", "generate_sdedit_schedule",
    "DenoiserModel", "GaussianMixturePrior", "GaussianMixtureDenoiser", "MlpDenoiser",
    "gm_predict_eps", "mlp_forward", "loss_simple", "train_step", "posterior_mean",
    "save_checkpoint", "load_checkpoint",
    "SamplerConfig", "SigmaMode", "SampleTrace", "SampleResult",
    "reverse_step", "condition_step", "forward_jump_step",
    "repaint_inpaint", "unconditional_sample", "sdedit_inpaint",
    "Mask", "BrushKind", "BrushParams",
    "mask_half", "mask_expand", "mask_alternating_lines", "mask_super_resolution",
    "mask_brush", "save_mask_png", "load_mask_png",
    "AblationReport", "masked_mse", "conditional_moment_error", "diversity_score",
    "run_resample_vs_slowdown", "run_jump_grid", "run_sdedit_comparison",
    "RunConfig", "ConfigError", "parse_config",
    "save_tensor", "load_tensor", "save_image_grid",
]
