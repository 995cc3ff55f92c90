"""Binary known/unknown masks over pixel grids, seeded and reproducible.

Convention: bitmap value 1 = known pixel, 0 = pixel to synthesize. All
generators are pure functions of (parameters, seed); brush masks regenerate
with derived seeds until their coverage band is met.

PNG serialization is 1-bit: black (0) = unknown, white (255) = known.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass

import numpy as np
from PIL import Image


class BrushKind(enum.Enum):
    WIDE = "wide"
    NARROW = "narrow"


class MaskCoverageError(RuntimeError):
    """Brush coverage band could not be met within the attempt budget."""


@dataclass(frozen=True)
class BrushParams:
    """Random-polyline brush settings; coverage is the UNKNOWN-area fraction."""

    n_strokes_min: int
    n_strokes_max: int
    thickness_min: float  # fractions of min(h, w)
    thickness_max: float
    n_vertices_min: int
    n_vertices_max: int
    segment_len_min: float
    segment_len_max: float
    coverage_min: float
    coverage_max: float
    max_attempts: int = 100


WIDE_BRUSH = BrushParams(
    n_strokes_min=1, n_strokes_max=4,
    thickness_min=0.12, thickness_max=0.25,
    n_vertices_min=4, n_vertices_max=8,
    segment_len_min=0.15, segment_len_max=0.45,
    coverage_min=0.20, coverage_max=0.50,
)

NARROW_BRUSH = BrushParams(
    n_strokes_min=3, n_strokes_max=8,
    thickness_min=0.02, thickness_max=0.06,
    n_vertices_min=4, n_vertices_max=10,
    segment_len_min=0.10, segment_len_max=0.35,
    coverage_min=0.05, coverage_max=0.20,
)


@dataclass(frozen=True)
class Mask:
    bitmap: np.ndarray  # (h, w) uint8 in {0, 1}
    family: str
    seed: int | None = None
    params: tuple = ()

    def __post_init__(self):
        bm = np.ascontiguousarray(self.bitmap, dtype=np.uint8)
        if bm.ndim != 2:
            raise ValueError(f"bitmap must be 2-D, got shape {bm.shape}")
        if not np.all((bm == 0) | (bm == 1)):
            raise ValueError("bitmap values must be strictly 0/1")
        bm.setflags(write=False)
        object.__setattr__(self, "bitmap", bm)

    @property
    def shape(self) -> tuple[int, int]:
        return self.bitmap.shape

    @property
    def known_fraction(self) -> float:
        return float(self.bitmap.mean())

    def as_float(self, channels: int | None = None) -> np.ndarray:
        """Float 0/1 array; with channels, shaped (h, w, 1) to broadcast over them."""
        m = self.bitmap.astype(np.float64)
        return m[..., None] if channels else m

    def flat(self) -> np.ndarray:
        return self.bitmap.astype(np.float64).ravel()

    def digest(self) -> str:
        return hashlib.sha256(self.bitmap.tobytes()).hexdigest()


def _check_hw(h: int, w: int) -> None:
    if h < 1 or w < 1:
        raise ValueError(f"degenerate mask size {h}x{w}")


def mask_half(h: int, w: int) -> Mask:
    """Left half known: columns [0, w//2)."""
    _check_hw(h, w)
    if w < 2:
        raise ValueError("half mask needs width >= 2")
    bm = np.zeros((h, w), dtype=np.uint8)
    bm[:, : w // 2] = 1
    return Mask(bm, family="half")


def mask_expand(h: int, w: int, crop: int) -> Mask:
    """Only a centered crop x crop region known; offsets floor((dim-crop)/2)."""
    _check_hw(h, w)
    if crop < 1 or crop > min(h, w):
        raise ValueError(f"crop {crop} outside [1, {min(h, w)}]")
    bm = np.zeros((h, w), dtype=np.uint8)
    top, left = (h - crop) // 2, (w - crop) // 2
    bm[top:top + crop, left:left + crop] = 1
    return Mask(bm, family="expand", params=(crop,))


def mask_alternating_lines(h: int, w: int) -> Mask:
    """Even-indexed rows known (0-based), odd rows removed."""
    _check_hw(h, w)
    if h < 2:
        raise ValueError("alternating-lines mask needs height >= 2")
    bm = np.zeros((h, w), dtype=np.uint8)
    bm[0::2, :] = 1
    return Mask(bm, family="alternating_lines")


def mask_super_resolution(h: int, w: int, stride: int = 2) -> Mask:
    """Only pixels at (i*stride, j*stride) known."""
    _check_hw(h, w)
    if stride < 2:
        raise ValueError("stride must be >= 2")
    bm = np.zeros((h, w), dtype=np.uint8)
    bm[0::stride, 0::stride] = 1
    return Mask(bm, family="super_resolution", params=(stride,))


def _paint_stroke(canvas: np.ndarray, rng: np.random.Generator, p: BrushParams) -> None:
    h, w = canvas.shape
    scale = min(h, w)
    radius = max(rng.uniform(p.thickness_min, p.thickness_max) * scale / 2.0, 0.5)
    n_vertices = int(rng.integers(p.n_vertices_min, p.n_vertices_max + 1))
    pos = np.array([rng.uniform(0, h), rng.uniform(0, w)])
    yy, xx = np.mgrid[0:h, 0:w]
    for _ in range(n_vertices):
        angle = rng.uniform(0.0, 2.0 * np.pi)
        length = rng.uniform(p.segment_len_min, p.segment_len_max) * scale
        end = pos + length * np.array([np.sin(angle), np.cos(angle)])
        end[0] = np.clip(end[0], 0, h - 1)
        end[1] = np.clip(end[1], 0, w - 1)
        # stamp disks along the segment, spacing <= radius/2 keeps it solid
        n_stamps = max(int(np.ceil(np.linalg.norm(end - pos) / max(radius / 2.0, 0.5))) + 1, 2)
        for frac in np.linspace(0.0, 1.0, n_stamps):
            c = pos + frac * (end - pos)
            canvas[(yy - c[0]) ** 2 + (xx - c[1]) ** 2 <= radius ** 2] = 1
        pos = end


def mask_brush(h: int, w: int, kind: BrushKind, seed: int,
               params: BrushParams | None = None) -> Mask:
    """Seeded free-form stroke mask; strokes erase (become unknown).

    Draws N random polylines of kind-dependent thickness, then checks the
    unknown-area fraction against the coverage band. On a miss the mask is
    regenerated from a derived (seed, attempt) stream, failing after
    `max_attempts`.
    """
    _check_hw(h, w)
    if not isinstance(kind, BrushKind):
        raise ValueError(f"kind must be a BrushKind, got {kind!r}")
    p = params if params is not None else (WIDE_BRUSH if kind is BrushKind.WIDE else NARROW_BRUSH)
    for attempt in range(p.max_attempts):
        rng = np.random.default_rng([seed, attempt])
        unknown = np.zeros((h, w), dtype=np.uint8)
        n_strokes = int(rng.integers(p.n_strokes_min, p.n_strokes_max + 1))
        for _ in range(n_strokes):
            _paint_stroke(unknown, rng, p)
        coverage = float(unknown.mean())
        if p.coverage_min <= coverage <= p.coverage_max:
            return Mask(1 - unknown, family=f"brush_{kind.value}", seed=seed,
                        params=(h, w, kind.value))
    raise MaskCoverageError(
        f"no {kind.value} brush mask hit coverage [{p.coverage_min}, {p.coverage_max}] "
        f"for seed {seed} in {p.max_attempts} attempts"
    )


def save_mask_png(mask: Mask, path) -> None:
    img = Image.fromarray(mask.bitmap * np.uint8(255), mode="L")
    img.convert("1", dither=Image.Dither.NONE).save(path, format="PNG")


def load_mask_png(path, family: str = "file") -> Mask:
    img = Image.open(path).convert("L")
    arr = np.asarray(img)
    if not np.all((arr == 0) | (arr == 255)):
        raise ValueError(f"{path} is not a binary mask PNG")
    return Mask((arr == 255).astype(np.uint8), family=family)
