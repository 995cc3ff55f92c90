"""Command-line surface: train, sample, inpaint, gen-mask, dump-schedule, ablate.

Exit codes: 0 success, 1 usage/config error, 2 runtime failure. Flags override
config keys last-wins via repeated --set section.key=value.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, make_prior, parse_config
from .denoiser import MlpDenoiser, save_checkpoint, train_step, two_moons
from .evals import (
    diversity_score,
    masked_mse,
    run_jump_grid,
    run_resample_vs_slowdown,
    run_sdedit_comparison,
)
from .masks import save_mask_png
from .sampler import repaint_inpaint, sdedit_inpaint, unconditional_sample
from .tensorio import save_image_grid, save_tensor
from .timetravel import SdeditPlan, SlowdownPlan, TimeSchedule, dump_times


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems must exit 1, not argparse's 2
        raise UsageError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="diffpaint", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="command")

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", type=Path, default=None, help="config file path")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="SECTION.KEY=VALUE", help="override a config key (last wins)")
        p.add_argument("--out", type=Path, default=None, help="override run.output_dir")
        p.add_argument("--seed", type=int, default=None, help="override run.seed")
        return p

    add("train", "train the toy MLP denoiser and write a checkpoint")
    add("sample", "unconditional sampling along the configured schedule")
    add("inpaint", "mask-conditioned sampling from the configured prior")
    add("gen-mask", "generate the configured mask and write it as PNG")
    add("dump-schedule", "write the diffusion-time walk and its transition counts")
    p = add("ablate", "run an ablation harness on the 2-D conditional benchmark")
    p.add_argument("mode", choices=["resample-vs-slowdown", "jump-grid", "sdedit"])
    return parser


def _load_config(args) -> RunConfig:
    text = args.config.read_text(encoding="utf-8") if args.config else ""
    overrides = list(args.overrides)
    if args.out is not None:
        overrides.append(f"run.output_dir={args.out}")
    if args.seed is not None:
        overrides.append(f"run.seed={args.seed}")
    return parse_config(text, tuple(overrides))


def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.run.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _schedule_and_walk(cfg: RunConfig):
    """Resolve the (schedule, walk) pair; slowdown rebuilds betas at its step count."""
    walk = cfg.build_walk()
    if isinstance(walk, SlowdownPlan):
        return cfg.build_schedule(steps=walk.num_steps), walk.time_schedule
    return cfg.build_schedule(), walk


def _ground_truth(cfg: RunConfig, rng: np.random.Generator) -> np.ndarray:
    prior = cfg.build_prior()
    if cfg.run.ground_truth == "mean":
        return prior.means[0].copy()
    return prior.sample(1, rng)[0]


def _maybe_grid_png(samples: np.ndarray, cfg: RunConfig, path: Path) -> bool:
    h, w = cfg.mask.height, cfg.mask.width
    if samples.shape[-1] != h * w:
        return False
    imgs = samples.reshape(-1, h, w)
    save_image_grid(imgs, path, data_range=tuple(cfg.run.data_range))
    return True


def _dump_trace(trace, out: Path) -> None:
    tdir = out / "trace"
    tdir.mkdir(exist_ok=True)
    for idx, (t, latent) in enumerate(trace.entries):
        save_tensor(tdir / f"frame_{idx:05d}_t{t + 1:04d}.tnsr", latent)


def cmd_train(cfg: RunConfig) -> int:
    out = _outdir(cfg)
    rng = np.random.default_rng([cfg.run.seed, 1])
    prior = cfg.build_prior()
    if cfg.train.data == "two_moons":
        data = two_moons(cfg.train.n_data, rng)
    else:
        data = prior.sample(cfg.train.n_data, rng)
    sched = cfg.build_schedule()
    model = MlpDenoiser.create(data.shape[1], cfg.train.hidden, rng)

    losses = []
    for _ in range(cfg.train.steps):
        batch = data[rng.integers(0, data.shape[0], size=cfg.train.batch_size)]
        _, loss = train_step(model, batch, sched, cfg.train.lr, rng, cfg.train.momentum)
        losses.append(loss)

    ckpt = out / "denoiser.ckpt"
    save_checkpoint(model, ckpt)
    with open(out / "train_loss.csv", "w", encoding="utf-8") as fh:
        fh.write("step,loss\n")
        for i, loss in enumerate(losses):
            fh.write(f"{i},{loss!r}\n")
    tail = float(np.mean(losses[-50:]))
    print(f"trained {cfg.train.steps} steps; final(50-step avg) loss {tail:.4f}; "
          f"checkpoint {ckpt}")
    return 0


def cmd_sample(cfg: RunConfig) -> int:
    out = _outdir(cfg)
    sched, walk = _schedule_and_walk(cfg)
    if isinstance(walk, SdeditPlan):
        raise ValueError("unconditional sampling supports jump/slowdown strategies only")
    model = cfg.build_denoiser()
    dim = cfg.build_prior().dim if cfg.denoiser.kind == "oracle" else model.data_dim
    rng = np.random.default_rng([cfg.run.seed, 2])
    res = unconditional_sample(model, sched, walk, (cfg.run.n_samples, dim),
                               cfg.sampler_config(), rng)
    save_tensor(out / "samples.tnsr", res.sample)
    rendered = _maybe_grid_png(res.sample, cfg, out / "samples.png")
    if res.trace is not None:
        _dump_trace(res.trace, out)
    print(f"sampled {cfg.run.n_samples} chains, NFE {res.nfe}"
          + (f"; grid {out / 'samples.png'}" if rendered else ""))
    return 0


def cmd_inpaint(cfg: RunConfig) -> int:
    out = _outdir(cfg)
    sched, walk = _schedule_and_walk(cfg)
    model = cfg.build_denoiser()
    mask_obj = cfg.build_mask()
    rng = np.random.default_rng([cfg.run.seed, 3])
    x0 = _ground_truth(cfg, rng)
    if x0.shape[-1] != mask_obj.bitmap.size:
        raise ValueError(
            f"mask {mask_obj.shape} does not cover the {x0.shape[-1]}-dim prior")
    mask = mask_obj.flat()

    n = cfg.run.n_samples
    x0_batch = np.broadcast_to(x0, (n, x0.size))
    scfg = cfg.sampler_config()
    if isinstance(walk, SdeditPlan):
        res = sdedit_inpaint(model, sched, walk, x0_batch, mask, scfg, rng)
    else:
        res = repaint_inpaint(model, sched, walk, x0_batch, mask, scfg, rng)

    save_tensor(out / "inpainted.tnsr", res.sample)
    save_tensor(out / "ground_truth.tnsr", x0)
    masked_view = np.where(mask == 1.0, x0, cfg.run.data_range[0])
    panel = np.concatenate([x0[None], masked_view[None], res.sample], axis=0)
    rendered = _maybe_grid_png(panel, cfg, out / "inpaint.png")

    with open(out / "metrics.csv", "w", encoding="utf-8") as fh:
        fh.write("sample,masked_mse\n")
        for i in range(n):
            fh.write(f"{i},{masked_mse(res.sample[i], x0, mask)!r}\n")
        if n >= 2:
            fh.write(f"diversity,{diversity_score(list(res.sample))!r}\n")
    if res.trace is not None:
        _dump_trace(res.trace, out)
    print(f"inpainted {n} chains, NFE {res.nfe}; metrics {out / 'metrics.csv'}"
          + (f"; grid {out / 'inpaint.png'}" if rendered else ""))
    return 0


def cmd_gen_mask(cfg: RunConfig) -> int:
    out = _outdir(cfg)
    mask = cfg.build_mask()
    path = out / "mask.png"
    save_mask_png(mask, path)
    print(f"{mask.family} mask {mask.shape[0]}x{mask.shape[1]}, "
          f"known fraction {mask.known_fraction:.3f}; wrote {path}")
    return 0


def cmd_dump_schedule(cfg: RunConfig) -> int:
    out = _outdir(cfg)
    walk = cfg.build_walk()
    path = out / "schedule.txt"
    if isinstance(walk, SdeditPlan):
        with open(path, "w", encoding="utf-8") as fh:
            for i, seg in enumerate(walk.segments):
                if i > 0:
                    fh.write(f"# renoise to {walk.renoise_time}\n")
                for v in seg:
                    fh.write(f"{v}\n")
        counts = {"n_reverse": walk.n_reverse, "n_renoise": walk.n_renoise}
    else:
        tsched = walk.time_schedule if isinstance(walk, SlowdownPlan) else walk
        dump_times(tsched, path)
        counts = tsched.summary()
    with open(out / "schedule_counts.csv", "w", encoding="utf-8") as fh:
        fh.write("key,value\n")
        for k, v in counts.items():
            fh.write(f"{k},{v}\n")
    print(f"wrote {path}; " + ", ".join(f"{k}={v}" for k, v in counts.items()))
    return 0


def cmd_ablate(cfg: RunConfig, mode: str) -> int:
    out = _outdir(cfg)
    prior = make_prior("corr2d")
    mask = np.array([1.0, 0.0])
    x_known = np.array([cfg.ablate.x_known, 0.0])
    seeds = list(range(cfg.run.seed, cfg.run.seed + cfg.ablate.n_seeds))
    kw = dict(seeds=seeds, n_chains=cfg.ablate.n_chains, cfg=cfg.sampler_config())

    if mode == "resample-vs-slowdown":
        settings = [(cfg.schedule.steps, cfg.timetravel.jump_len, cfg.timetravel.n_resample)]
        report = run_resample_vs_slowdown(prior, mask, x_known, settings, **kw)
    elif mode == "jump-grid":
        report = run_jump_grid(prior, mask, x_known, j_values=(1, 5, 10),
                               r_values=(2, 5, 10), total_steps=cfg.schedule.steps, **kw)
    else:
        report = run_sdedit_comparison(prior, mask, x_known, cfg.schedule.steps,
                                       cfg.timetravel.sdedit_repeats,
                                       jump_len=cfg.timetravel.jump_len, **kw)
    csv_path = out / f"ablate_{mode.replace('-', '_')}.csv"
    report.to_csv(csv_path)
    print(report.summary_table())
    print(f"wrote {csv_path}")
    return 0


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)

    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        cfg = _load_config(args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    try:
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "sample":
            return cmd_sample(cfg)
        if args.command == "inpaint":
            return cmd_inpaint(cfg)
        if args.command == "gen-mask":
            return cmd_gen_mask(cfg)
        if args.command == "dump-schedule":
            return cmd_dump_schedule(cfg)
        if args.command == "ablate":
            return cmd_ablate(cfg, args.mode)
        print(f"error: unknown command {args.command!r}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
