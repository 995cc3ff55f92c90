"""Diffusion-time walks: plain descents, resampling jumps, and baselines.

A `TimeSchedule` is the list of 0-based diffusion times the latent passes
through, starting at T-1 and ending at the sentinel -1, every consecutive pair
differing by exactly +-1. A step from v to v-1 is one reverse (denoising)
transition; v to v+1 is one forward (re-noising) transition. The latent held
at list value v is x_{v+1} in 1-based time, so the walk starts from
x_T ~ N(0, I) and the final -1 marks clean data. The sentinel is never passed
to a denoiser.

Resampling schedules place jump markers at every multiple of the jump length
j below T - j; each marker fires r - 1 times, and each firing inserts j
forward transitions (followed by the re-descent the outer loop produces).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class TimeSchedule:
    """Validated +-1 walk from T-1 down to the sentinel -1."""

    times: tuple[int, ...]
    total_steps: int
    jump_len: int = 1
    n_resample: int = 1
    degenerate: bool = False  # jump_len >= total_steps fell back to plain descent

    def __post_init__(self):
        ts = self.times
        if len(ts) < 2:
            raise ValueError("a time schedule needs at least one transition")
        if ts[0] != self.total_steps - 1:
            raise ValueError(f"schedule must start at T-1={self.total_steps - 1}, got {ts[0]}")
        if ts[-1] != -1:
            raise ValueError(f"schedule must end at -1, got {ts[-1]}")
        for a, b in zip(ts[:-1], ts[1:]):
            if abs(a - b) != 1:
                raise ValueError(f"non-unit transition {a}->{b}")
        inner = ts[1:-1]
        if inner and not all(0 <= v <= self.total_steps - 1 for v in inner):
            raise ValueError("intermediate times must stay in [0, T-1]")

    def __len__(self) -> int:
        return len(self.times)

    @property
    def n_reverse(self) -> int:
        """Count of reverse transitions; equals the run's denoiser-call budget."""
        return sum(1 for a, b in zip(self.times[:-1], self.times[1:]) if b < a)

    @property
    def n_forward(self) -> int:
        return len(self.times) - 1 - self.n_reverse

    def transitions(self):
        """Yield (source, destination) pairs in walk order."""
        return zip(self.times[:-1], self.times[1:])

    def summary(self) -> dict:
        return {
            "total_steps": self.total_steps,
            "jump_len": self.jump_len,
            "n_resample": self.n_resample,
            "length": len(self.times),
            "n_reverse": self.n_reverse,
            "n_forward": self.n_forward,
            "degenerate": self.degenerate,
        }


def _descending(total_steps: int) -> tuple[int, ...]:
    return tuple(range(total_steps - 1, -2, -1))


def generate_jump_schedule(total_steps: int, jump_len: int, n_resample: int) -> TimeSchedule:
    """Resampling walk with jump markers at multiples of jump_len.

    With n_resample = 1 no marker ever fires and the result is the plain
    descent. jump_len >= total_steps leaves no valid marker position; the
    plain descent is returned with `degenerate` set and a warning emitted.
    """
    if total_steps < 1 or jump_len < 1 or n_resample < 1:
        raise ValueError("total_steps, jump_len and n_resample must all be >= 1")

    degenerate = jump_len >= total_steps
    if degenerate:
        warnings.warn(
            f"jump_len={jump_len} >= total_steps={total_steps}: no jump positions, "
            "falling back to the plain descending schedule",
            stacklevel=2,
        )

    jumps = {}
    for pos in range(0, total_steps - jump_len, jump_len):
        jumps[pos] = n_resample - 1

    t = total_steps
    ts = []
    while t >= 1:
        t = t - 1
        ts.append(t)
        if jumps.get(t, 0) > 0:
            jumps[t] = jumps[t] - 1
            for _ in range(jump_len):
                t = t + 1
                ts.append(t)
    ts.append(-1)

    return TimeSchedule(
        times=tuple(ts),
        total_steps=total_steps,
        jump_len=jump_len,
        n_resample=n_resample,
        degenerate=degenerate,
    )


def jump_schedule_nfe(total_steps: int, jump_len: int, n_resample: int) -> int:
    """Closed-form reverse-transition count of generate_jump_schedule."""
    markers = len(range(0, total_steps - jump_len, jump_len))
    return total_steps + markers * (n_resample - 1) * jump_len


@dataclass(frozen=True)
class SlowdownPlan:
    """Plain descent over an enlarged step count.

    Spending budget on smaller steps means the betas must be rebuilt for
    `num_steps` total steps; `num_steps` records that request for the caller,
    schedules themselves are never carried here.
    """

    time_schedule: TimeSchedule
    num_steps: int


def generate_slowdown_schedule(total_steps: int, factor: int) -> SlowdownPlan:
    """Descending schedule over total_steps * factor steps (betas to be rebuilt)."""
    if total_steps < 1 or factor < 1:
        raise ValueError("total_steps and factor must be >= 1")
    n = total_steps * factor
    ts = TimeSchedule(times=_descending(n), total_steps=n)
    return SlowdownPlan(time_schedule=ts, num_steps=n)


@dataclass(frozen=True)
class SdeditPlan:
    """Restart-style baseline: full descent, then repeated half-range descents.

    The first segment runs T-1 down to -1. Before each later segment the
    clean latent is re-noised in ONE shot to level `renoise_time` (the
    collapsed forward law, not chained single steps), then the segment
    descends from renoise_time - 1 to -1 again. `n_repeats` counts the
    half-range reverse passes; n_repeats = 1 has no renoise at all.
    """

    total_steps: int
    n_repeats: int
    renoise_time: int
    segments: tuple[tuple[int, ...], ...] = field(repr=False)

    @property
    def n_reverse(self) -> int:
        return sum(len(seg) - 1 for seg in self.segments)

    @property
    def n_renoise(self) -> int:
        return len(self.segments) - 1


def generate_sdedit_schedule(total_steps: int, n_repeats: int) -> SdeditPlan:
    if total_steps < 2 or total_steps % 2 != 0:
        raise ValueError("total_steps must be even and >= 2")
    if n_repeats < 1:
        raise ValueError("n_repeats must be >= 1")
    half = total_steps // 2
    segments = [_descending(total_steps)]
    for _ in range(n_repeats - 1):
        segments.append(tuple(range(half - 1, -2, -1)))
    return SdeditPlan(
        total_steps=total_steps,
        n_repeats=n_repeats,
        renoise_time=half,
        segments=tuple(segments),
    )


def sdedit_nfe(total_steps: int, n_repeats: int) -> int:
    return total_steps + (n_repeats - 1) * (total_steps // 2)


def dump_times(tsched: TimeSchedule, path) -> None:
    """One integer per line, in walk order."""
    with open(path, "w", encoding="utf-8") as fh:
        for v in tsched.times:
            fh.write(f"{v}\n")


def load_times(path, total_steps: int, jump_len: int = 1, n_resample: int = 1) -> TimeSchedule:
    values = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                values.append(int(line))
    return TimeSchedule(tuple(values), total_steps, jump_len, n_resample)


def times_array(tsched: TimeSchedule) -> np.ndarray:
    """Times as an int array, handy for plotting the walk profile."""
    return np.asarray(tsched.times, dtype=np.int64)
