"""Metrics and ablation harnesses for the conditional-sampling benchmarks.

The quality oracle throughout is exact Gaussian conditioning: for a
single-Gaussian prior with a subset of coordinates clamped, the conditional
law of the rest is closed-form, so the sampler's empirical conditional
moments can be scored without any learned reference. Ablation outcomes are
reported as per-seed rows; the scalar comparison score is
mean_err + cov_err (both relative), which penalizes biased means and
collapsed/inflated spreads alike.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np

from .denoiser import GaussianMixtureDenoiser, GaussianMixturePrior
from .sampler import SamplerConfig, repaint_inpaint, sdedit_inpaint
from .schedule import NoiseSchedule, build_linear_schedule
from .timetravel import (
    SdeditPlan,
    TimeSchedule,
    generate_jump_schedule,
    generate_sdedit_schedule,
    generate_slowdown_schedule,
    jump_schedule_nfe,
    sdedit_nfe,
)


def masked_mse(output: np.ndarray, reference: np.ndarray, mask: np.ndarray) -> float:
    """Mean squared error over unknown (mask == 0) coordinates only."""
    output = np.asarray(output, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    if output.shape != reference.shape:
        raise ValueError(f"shape mismatch {output.shape} vs {reference.shape}")
    mask = np.asarray(mask, dtype=np.float64)
    weights = np.broadcast_to(1.0 - mask, output.shape)
    total = float(weights.sum())
    if total == 0.0:
        raise ValueError("mask has no unknown coordinates")
    sq = (output - reference) ** 2
    return float((sq * weights).sum() / total)


def gaussian_conditional(prior: GaussianMixturePrior, x_known: np.ndarray,
                         mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form conditional mean/covariance of unknown coords given known ones."""
    if prior.n_components != 1:
        raise ValueError("conditional oracle requires a single-component prior")
    mask = np.asarray(mask, dtype=np.float64).ravel()
    x_known = np.asarray(x_known, dtype=np.float64).ravel()
    known = np.flatnonzero(mask == 1.0)
    unknown = np.flatnonzero(mask == 0.0)
    if known.size == 0 or unknown.size == 0:
        raise ValueError("need at least one known and one unknown coordinate")
    mu = prior.means[0]
    cov = prior.covariances[0]
    kk = cov[np.ix_(known, known)]
    if np.linalg.matrix_rank(kk) < kk.shape[0]:
        raise np.linalg.LinAlgError("known-block covariance is singular")
    uk = cov[np.ix_(unknown, known)]
    gain = uk @ np.linalg.inv(kk)
    cond_mean = mu[unknown] + gain @ (x_known[known] - mu[known])
    cond_cov = cov[np.ix_(unknown, unknown)] - gain @ uk.T
    return cond_mean, cond_cov


def conditional_moment_error(samples: np.ndarray, prior: GaussianMixturePrior,
                             x_known: np.ndarray, mask: np.ndarray) -> tuple[float, float]:
    """Relative errors of empirical conditional moments vs the exact conditional.

    Mean error is ||m_hat - m|| / ||m||, covariance error is Frobenius-relative;
    norms fall back to 1 when the exact value is zero.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 2:
        raise ValueError("samples must be (n, d)")
    if samples.shape[0] < 1000:
        raise ValueError("need at least 1000 samples for stable moment estimates")
    cond_mean, cond_cov = gaussian_conditional(prior, x_known, mask)
    unknown = np.flatnonzero(np.asarray(mask, dtype=np.float64).ravel() == 0.0)
    u = samples[:, unknown]
    emp_mean = u.mean(axis=0)
    centered = u - emp_mean
    emp_cov = centered.T @ centered / (u.shape[0] - 1)
    mean_scale = np.linalg.norm(cond_mean) or 1.0
    cov_scale = np.linalg.norm(cond_cov) or 1.0
    mean_err = float(np.linalg.norm(emp_mean - cond_mean) / mean_scale)
    cov_err = float(np.linalg.norm(emp_cov - cond_cov) / cov_scale)
    return mean_err, cov_err


def diversity_score(outputs) -> float:
    """Mean pairwise L2 distance across all unordered output pairs."""
    arrs = [np.asarray(o, dtype=np.float64).ravel() for o in outputs]
    if len(arrs) < 2:
        raise ValueError("diversity needs at least 2 outputs")
    dists = [float(np.linalg.norm(a - b)) for a, b in combinations(arrs, 2)]
    return float(np.mean(dists))


# ---------------------------------------------------------------------------
# Ablation harnesses


@dataclass(frozen=True)
class ReportRow:
    label: str
    total_steps: int
    jump_len: int
    n_resample: int
    nfe: int
    seed: int
    mean_err: float
    cov_err: float

    @property
    def score(self) -> float:
        return self.mean_err + self.cov_err


@dataclass
class AblationReport:
    rows: list[ReportRow] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def labels(self) -> list[str]:
        seen = []
        for r in self.rows:
            if r.label not in seen:
                seen.append(r.label)
        return seen

    def aggregate(self) -> dict[str, dict]:
        out = {}
        for label in self.labels():
            rows = [r for r in self.rows if r.label == label]
            out[label] = {
                "nfe": rows[0].nfe,
                "n_seeds": len(rows),
                "mean_err": float(np.mean([r.mean_err for r in rows])),
                "cov_err": float(np.mean([r.cov_err for r in rows])),
                "score": float(np.mean([r.score for r in rows])),
            }
        return out

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("label,total_steps,jump_len,n_resample,nfe,seed,mean_err,cov_err,score\n")
            for r in self.rows:
                fh.write(
                    f"{r.label},{r.total_steps},{r.jump_len},{r.n_resample},{r.nfe},"
                    f"{r.seed},{r.mean_err!r},{r.cov_err!r},{r.score!r}\n"
                )

    def summary_table(self) -> str:
        lines = [f"{'setting':<28} {'NFE':>6} {'seeds':>5} {'mean_err':>10} {'cov_err':>10} {'score':>10}"]
        for label, agg in self.aggregate().items():
            lines.append(
                f"{label:<28} {agg['nfe']:>6} {agg['n_seeds']:>5} "
                f"{agg['mean_err']:>10.4f} {agg['cov_err']:>10.4f} {agg['score']:>10.4f}"
            )
        return "\n".join(lines)


def _run_arm(prior: GaussianMixturePrior, sched: NoiseSchedule, walk,
             x_known: np.ndarray, mask: np.ndarray, cfg: SamplerConfig,
             rng: np.random.Generator, n_chains: int) -> tuple[np.ndarray, int]:
    model = GaussianMixtureDenoiser(prior)
    x0k = np.broadcast_to(np.asarray(x_known, dtype=np.float64), (n_chains, prior.dim))
    if isinstance(walk, TimeSchedule):
        res = repaint_inpaint(model, sched, walk, x0k, mask, cfg, rng)
    elif isinstance(walk, SdeditPlan):
        res = sdedit_inpaint(model, sched, walk, x0k, mask, cfg, rng)
    else:
        raise TypeError(f"unsupported walk object {type(walk)!r}")
    return res.sample, res.nfe


def run_conditional_benchmark(prior: GaussianMixturePrior, sched: NoiseSchedule, walk,
                              x_known: np.ndarray, mask: np.ndarray,
                              seeds: Sequence[int], n_chains: int = 2000,
                              cfg: SamplerConfig | None = None,
                              label: str = "") -> list[ReportRow]:
    """Run one schedule arm over several seeds; one ReportRow per seed.

    The per-seed stream depends on the seed alone, so arms compared at the
    same seeds share common random numbers and identical walks give
    identical rows.
    """
    cfg = cfg or SamplerConfig()
    total = sched.steps
    jl = walk.jump_len if isinstance(walk, TimeSchedule) else 0
    nr = walk.n_resample if isinstance(walk, TimeSchedule) else walk.n_repeats
    rows = []
    for seed in seeds:
        rng = np.random.default_rng([int(seed), 2718281828])
        samples, nfe = _run_arm(prior, sched, walk, x_known, mask, cfg, rng, n_chains)
        mean_err, cov_err = conditional_moment_error(samples, prior, x_known, mask)
        rows.append(ReportRow(label=label, total_steps=total, jump_len=jl, n_resample=nr,
                              nfe=nfe, seed=int(seed), mean_err=mean_err, cov_err=cov_err))
    return rows


def _default_seeds(n_seeds: int) -> list[int]:
    return list(range(n_seeds))


def run_resample_vs_slowdown(prior: GaussianMixturePrior, mask: np.ndarray,
                             x_known: np.ndarray, budget_settings: Sequence[tuple[int, int, int]],
                             seeds: Sequence[int] | None = None, n_chains: int = 2000,
                             n_seeds: int = 20, cfg: SamplerConfig | None = None) -> AblationReport:
    """Jump-schedule resampling vs an equal-NFE slow-down baseline.

    Each (T, j, r) setting fixes the budget at the jump schedule's reverse
    count; the slow-down arm is a plain descent over exactly that many steps
    with betas rebuilt at the finer count.
    """
    seeds = list(seeds) if seeds is not None else _default_seeds(n_seeds)
    report = AblationReport(metadata={
        "benchmark": "gaussian_conditional", "n_chains": n_chains, "seeds": seeds,
    })
    for total, jl, nr in budget_settings:
        sched = build_linear_schedule(total)
        walk = generate_jump_schedule(total, jl, nr)
        budget = walk.n_reverse
        report.rows += run_conditional_benchmark(
            prior, sched, walk, x_known, mask, seeds, n_chains, cfg,
            label=f"resample T={total} j={jl} r={nr}")

        slow = generate_slowdown_schedule(budget, 1)
        slow_sched = build_linear_schedule(slow.num_steps)
        report.rows += run_conditional_benchmark(
            prior, slow_sched, slow.time_schedule, x_known, mask, seeds, n_chains, cfg,
            label=f"slowdown steps={slow.num_steps}")
    return report


def run_jump_grid(prior: GaussianMixturePrior, mask: np.ndarray, x_known: np.ndarray,
                  j_values: Sequence[int], r_values: Sequence[int], total_steps: int = 50,
                  seeds: Sequence[int] | None = None, n_chains: int = 2000,
                  n_seeds: int = 20, cfg: SamplerConfig | None = None) -> AblationReport:
    """Grid over jump length and resampling count at a fixed base step count."""
    seeds = list(seeds) if seeds is not None else _default_seeds(n_seeds)
    report = AblationReport(metadata={
        "benchmark": "gaussian_conditional", "n_chains": n_chains,
        "total_steps": total_steps, "seeds": seeds,
    })
    sched = build_linear_schedule(total_steps)
    for jl in j_values:
        for nr in r_values:
            walk = generate_jump_schedule(total_steps, jl, nr)
            report.rows += run_conditional_benchmark(
                prior, sched, walk, x_known, mask, seeds, n_chains, cfg,
                label=f"j={jl} r={nr}")
    return report


def matching_resample_count(total_steps: int, jump_len: int, target_nfe: int) -> int:
    """Resampling count r making the jump schedule's NFE equal target_nfe."""
    markers = len(range(0, total_steps - jump_len, jump_len))
    extra = target_nfe - total_steps
    if markers == 0 or extra < 0 or extra % (markers * jump_len) != 0:
        raise ValueError(
            f"budget {target_nfe} unreachable with T={total_steps}, j={jump_len}"
        )
    return 1 + extra // (markers * jump_len)


def run_sdedit_comparison(prior: GaussianMixturePrior, mask: np.ndarray, x_known: np.ndarray,
                          total_steps: int, n_repeats: int, jump_len: int = 5,
                          seeds: Sequence[int] | None = None, n_chains: int = 2000,
                          n_seeds: int = 20, cfg: SamplerConfig | None = None) -> AblationReport:
    """Jump-schedule resampling vs the restart-style baseline at matched NFE."""
    seeds = list(seeds) if seeds is not None else _default_seeds(n_seeds)
    plan = generate_sdedit_schedule(total_steps, n_repeats)
    budget = sdedit_nfe(total_steps, n_repeats)
    nr = matching_resample_count(total_steps, jump_len, budget)
    walk = generate_jump_schedule(total_steps, jump_len, nr)
    assert walk.n_reverse == budget == plan.n_reverse

    sched = build_linear_schedule(total_steps)
    report = AblationReport(metadata={
        "benchmark": "gaussian_conditional", "n_chains": n_chains,
        "total_steps": total_steps, "seeds": seeds, "nfe": budget,
    })
    report.rows += run_conditional_benchmark(
        prior, sched, walk, x_known, mask, seeds, n_chains, cfg,
        label=f"resample j={jump_len} r={nr}")
    report.rows += run_conditional_benchmark(
        prior, sched, plan, x_known, mask, seeds, n_chains, cfg,
        label=f"sdedit repeats={n_repeats}")
    return report
