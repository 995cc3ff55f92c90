"""Run configuration: flat `key = value` files with [section] headers.

Every key has a default, so the empty file is a valid config. Unknown keys,
type mismatches and constraint violations are rejected with the offending
line number. Values never nest; lists are comma-separated.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from .denoiser import GaussianMixtureDenoiser, GaussianMixturePrior, load_checkpoint
from .masks import BrushKind, Mask, load_mask_png, mask_alternating_lines, mask_brush, \
    mask_expand, mask_half, mask_super_resolution
from .sampler import SamplerConfig, SigmaMode
from .schedule import NoiseSchedule, ScheduleKind, build_schedule
from .timetravel import generate_jump_schedule, generate_sdedit_schedule, \
    generate_slowdown_schedule


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        where = "command line" if line == 0 else f"line {line}" if line else "config"
        super().__init__(f"{where}: {message}")


@dataclass
class ScheduleSection:
    kind: str = "linear"
    steps: int = 250
    beta_start: float = 1e-4
    beta_end: float = 0.02
    scale_betas: bool = True


@dataclass
class TimetravelSection:
    strategy: str = "jump"  # jump | slowdown | sdedit
    jump_len: int = 10
    n_resample: int = 10
    slowdown_factor: int = 1
    sdedit_repeats: int = 2


@dataclass
class SamplerSection:
    sigma_mode: str = "beta_tilde"
    paste_final_known: bool = True
    record_trace: bool = False


@dataclass
class DenoiserSection:
    kind: str = "oracle"  # oracle | mlp
    checkpoint: str = ""
    prior: str = "blob8"  # blob8 | corr2d | bimodal2d | std1d | custom
    prior_mean: tuple[float, ...] = ()
    prior_cov: tuple[float, ...] = ()


@dataclass
class MaskSection:
    family: str = "half"
    height: int = 8
    width: int = 8
    crop: int = 4
    stride: int = 2
    seed: int = 0
    path: str = ""


@dataclass
class TrainSection:
    steps: int = 2000
    batch_size: int = 128
    lr: float = 5e-4
    momentum: float = 0.9
    hidden: tuple[int, ...] = (64, 64)
    n_data: int = 4096
    data: str = "prior"  # prior | two_moons


@dataclass
class RunSection:
    seed: int = 0
    output_dir: str = "out"
    n_samples: int = 4
    data_range: tuple[float, ...] = (-1.5, 1.5)
    ground_truth: str = "sample"  # sample | mean


@dataclass
class AblateSection:
    n_seeds: int = 20
    n_chains: int = 2000
    x_known: float = 1.5


@dataclass
class RunConfig:
    schedule: ScheduleSection = field(default_factory=ScheduleSection)
    timetravel: TimetravelSection = field(default_factory=TimetravelSection)
    sampler: SamplerSection = field(default_factory=SamplerSection)
    denoiser: DenoiserSection = field(default_factory=DenoiserSection)
    mask: MaskSection = field(default_factory=MaskSection)
    train: TrainSection = field(default_factory=TrainSection)
    run: RunSection = field(default_factory=RunSection)
    ablate: AblateSection = field(default_factory=AblateSection)

    # -- builders -----------------------------------------------------------

    def build_schedule(self, steps: int | None = None) -> NoiseSchedule:
        s = self.schedule
        return build_schedule(ScheduleKind(s.kind), steps or s.steps,
                              s.beta_start, s.beta_end, s.scale_betas)

    def build_walk(self):
        tv, T = self.timetravel, self.schedule.steps
        if tv.strategy == "jump":
            return generate_jump_schedule(T, tv.jump_len, tv.n_resample)
        if tv.strategy == "slowdown":
            return generate_slowdown_schedule(T, tv.slowdown_factor)
        return generate_sdedit_schedule(T, tv.sdedit_repeats)

    def sampler_config(self) -> SamplerConfig:
        s = self.sampler
        return SamplerConfig(sigma_mode=SigmaMode(s.sigma_mode),
                             paste_final_known=s.paste_final_known,
                             record_trace=s.record_trace)

    def build_prior(self) -> GaussianMixturePrior:
        return make_prior(self.denoiser.prior, self.denoiser.prior_mean,
                          self.denoiser.prior_cov)

    def build_denoiser(self):
        d = self.denoiser
        if d.kind == "mlp":
            if not d.checkpoint:
                raise ConfigError("denoiser.kind = mlp requires denoiser.checkpoint")
            return load_checkpoint(d.checkpoint)
        return GaussianMixtureDenoiser(self.build_prior())

    def build_mask(self) -> Mask:
        m = self.mask
        if m.family == "half":
            return mask_half(m.height, m.width)
        if m.family == "expand":
            return mask_expand(m.height, m.width, m.crop)
        if m.family == "alternating_lines":
            return mask_alternating_lines(m.height, m.width)
        if m.family == "super_resolution":
            return mask_super_resolution(m.height, m.width, m.stride)
        if m.family == "wide":
            return mask_brush(m.height, m.width, BrushKind.WIDE, m.seed)
        if m.family == "narrow":
            return mask_brush(m.height, m.width, BrushKind.NARROW, m.seed)
        if m.family == "file":
            return load_mask_png(m.path)
        raise ConfigError(f"unknown mask family {m.family!r}")


# ---------------------------------------------------------------------------
# Prior presets


def _blob8_prior() -> GaussianMixturePrior:
    # 8x8 image prior: radial bright blob mean, smooth RBF covariance
    side = 8
    yy, xx = np.mgrid[0:side, 0:side].astype(np.float64)
    center = (side - 1) / 2.0
    r2 = (yy - center) ** 2 + (xx - center) ** 2
    mean = (2.0 * np.exp(-r2 / (2.0 * 2.0 ** 2)) - 1.0).ravel()
    pts = np.stack([yy.ravel(), xx.ravel()], axis=1)
    d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1)
    cov = 0.09 * np.exp(-d2 / (2.0 * 1.5 ** 2)) + 1e-6 * np.eye(side * side)
    return GaussianMixturePrior.single(mean, cov)


def make_prior(name: str, mean: tuple[float, ...] = (), cov: tuple[float, ...] = ()
               ) -> GaussianMixturePrior:
    if name == "corr2d":
        return GaussianMixturePrior.single([0.0, 0.0], [[1.0, 0.8], [0.8, 1.0]])
    if name == "bimodal2d":
        return GaussianMixturePrior(
            weights=[0.5, 0.5],
            means=[[-1.5, 0.0], [1.5, 0.0]],
            covariances=[0.09 * np.eye(2), 0.09 * np.eye(2)],
        )
    if name == "std1d":
        return GaussianMixturePrior.single([0.0], [[1.0]])
    if name == "blob8":
        return _blob8_prior()
    if name == "custom":
        if not mean or not cov:
            raise ConfigError("custom prior requires denoiser.prior_mean and denoiser.prior_cov")
        m = np.asarray(mean, dtype=np.float64)
        d = m.size
        c = np.asarray(cov, dtype=np.float64)
        if c.size != d * d:
            raise ConfigError(f"prior_cov needs {d * d} entries for a {d}-dim mean, got {c.size}")
        return GaussianMixturePrior.single(m, c.reshape(d, d))
    raise ConfigError(f"unknown prior preset {name!r}")


# ---------------------------------------------------------------------------
# Parsing


_CHOICES = {
    ("schedule", "kind"): {"linear", "cosine"},
    ("timetravel", "strategy"): {"jump", "slowdown", "sdedit"},
    ("sampler", "sigma_mode"): {"beta_tilde", "beta"},
    ("denoiser", "kind"): {"oracle", "mlp"},
    ("denoiser", "prior"): {"blob8", "corr2d", "bimodal2d", "std1d", "custom"},
    ("mask", "family"): {"half", "expand", "alternating_lines", "super_resolution",
                         "wide", "narrow", "file"},
    ("train", "data"): {"prior", "two_moons"},
    ("run", "ground_truth"): {"sample", "mean"},
}

FLOATS = "floats"  # comma-separated float tuple
INTS = "ints"      # comma-separated int tuple

_FIELD_TYPES = {
    "schedule": {"kind": str, "steps": int, "beta_start": float, "beta_end": float,
                 "scale_betas": bool},
    "timetravel": {"strategy": str, "jump_len": int, "n_resample": int,
                   "slowdown_factor": int, "sdedit_repeats": int},
    "sampler": {"sigma_mode": str, "paste_final_known": bool, "record_trace": bool},
    "denoiser": {"kind": str, "checkpoint": str, "prior": str,
                 "prior_mean": FLOATS, "prior_cov": FLOATS},
    "mask": {"family": str, "height": int, "width": int, "crop": int, "stride": int,
             "seed": int, "path": str},
    "train": {"steps": int, "batch_size": int, "lr": float, "momentum": float,
              "hidden": INTS, "n_data": int, "data": str},
    "run": {"seed": int, "output_dir": str, "n_samples": int,
            "data_range": FLOATS, "ground_truth": str},
    "ablate": {"n_seeds": int, "n_chains": int, "x_known": float},
}


def _coerce(raw: str, kind, line: int, key: str):
    raw = raw.strip()
    try:
        if kind is bool:
            low = raw.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is str:
            return raw
        if kind == FLOATS:
            return tuple(float(v) for v in raw.split(",") if v.strip()) if raw else ()
        if kind == INTS:
            return tuple(int(v) for v in raw.split(",") if v.strip()) if raw else ()
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}", line) from None
    raise ConfigError(f"{key}: unsupported value type", line)


def _parse_raw(text: str) -> dict[tuple[str, str], tuple[str, int]]:
    entries: dict[tuple[str, str], tuple[str, int]] = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            section = stripped[1:-1].strip()
            if section not in _FIELD_TYPES:
                raise ConfigError(f"unknown section [{section}]", lineno)
            continue
        if "=" not in stripped:
            raise ConfigError(f"expected 'key = value', got {stripped!r}", lineno)
        if section is None:
            raise ConfigError("key outside any [section]", lineno)
        key, _, value = stripped.partition("=")
        entries[(section, key.strip())] = (value.strip(), lineno)
    return entries


def _validate(cfg: RunConfig, lines: dict[tuple[str, str], int]) -> None:
    def fail(section: str, key: str, msg: str):
        raise ConfigError(msg, lines.get((section, key)))

    s = cfg.schedule
    if s.steps < 1:
        fail("schedule", "steps", "schedule.steps must be >= 1")
    if not 0.0 < s.beta_start <= s.beta_end < 1.0:
        fail("schedule", "beta_start", "require 0 < beta_start <= beta_end < 1")
    tv = cfg.timetravel
    if tv.jump_len < 1 or tv.n_resample < 1 or tv.slowdown_factor < 1 or tv.sdedit_repeats < 1:
        fail("timetravel", "jump_len", "timetravel counts must be >= 1")
    if tv.strategy == "jump" and tv.jump_len >= s.steps:
        fail("timetravel", "jump_len",
             f"jump_len {tv.jump_len} must be < schedule.steps {s.steps}")
    if tv.strategy == "sdedit" and s.steps % 2 != 0:
        fail("timetravel", "strategy", "sdedit strategy requires an even step count")
    m = cfg.mask
    if m.height < 1 or m.width < 1:
        fail("mask", "height", "mask size must be positive")
    if m.family == "expand" and m.crop > min(m.height, m.width):
        fail("mask", "crop", f"crop {m.crop} exceeds mask size {m.height}x{m.width}")
    if m.family == "super_resolution" and m.stride < 2:
        fail("mask", "stride", "stride must be >= 2")
    if m.family == "file" and not m.path:
        fail("mask", "path", "mask.family = file requires mask.path")
    r = cfg.run
    if len(r.data_range) != 2 or not r.data_range[0] < r.data_range[1]:
        fail("run", "data_range", "data_range must be 'lo,hi' with lo < hi")
    if cfg.train.batch_size < 1 or cfg.train.steps < 1:
        fail("train", "steps", "train.steps and train.batch_size must be >= 1")
    if cfg.ablate.n_seeds < 1 or cfg.ablate.n_chains < 1000:
        fail("ablate", "n_chains", "ablate needs n_seeds >= 1 and n_chains >= 1000")


def parse_config(text: str, overrides: tuple[str, ...] = ()) -> RunConfig:
    """Parse config text, then apply 'section.key=value' overrides (last wins)."""
    entries = _parse_raw(text)
    for ov in overrides:
        head, eq, value = ov.partition("=")
        if not eq or "." not in head:
            raise ConfigError(f"override must look like section.key=value, got {ov!r}", 0)
        section, _, key = head.partition(".")
        entries[(section.strip(), key.strip())] = (value.strip(), 0)

    cfg = RunConfig()
    sections = {f.name: getattr(cfg, f.name) for f in fields(cfg)}

    lines: dict[tuple[str, str], int] = {}
    for (section, key), (raw, lineno) in entries.items():
        if section not in sections:
            raise ConfigError(f"unknown section [{section}]", lineno)
        if key not in _FIELD_TYPES[section]:
            raise ConfigError(f"unknown key {section}.{key}", lineno)
        value = _coerce(raw, _FIELD_TYPES[section][key], lineno, f"{section}.{key}")
        allowed = _CHOICES.get((section, key))
        if allowed is not None and value not in allowed:
            raise ConfigError(
                f"{section}.{key} must be one of {sorted(allowed)}, got {value!r}", lineno)
        setattr(sections[section], key, value)
        lines[(section, key)] = lineno

    _validate(cfg, lines)
    return cfg


PAPER_PRESET = """\
# Final-approach settings: 250 steps with 10x resampling at jump length 10.
[schedule]
kind = linear
steps = 250

[timetravel]
strategy = jump
jump_len = 10
n_resample = 10
"""
