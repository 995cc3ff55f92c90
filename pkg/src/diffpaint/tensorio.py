"""Binary tensor files and PNG rendering.

Tensor container layout (all integers little-endian):

    magic   4 bytes  b"TNSR"
    version u32      1
    rank    u64
    shape   rank x u64
    data    float64, row-major

Round trips are bit-identical. Images are 8-bit PNGs with a linear value map
from a declared data range.
"""

from __future__ import annotations

import math
import struct

import numpy as np
from PIL import Image

TENSOR_MAGIC = b"TNSR"
TENSOR_VERSION = 1


class TensorFormatError(ValueError):
    """Raised when a tensor file is malformed or truncated."""


def write_tensor(fh, arr: np.ndarray) -> None:
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    fh.write(TENSOR_MAGIC)
    fh.write(struct.pack("<I", TENSOR_VERSION))
    fh.write(struct.pack("<Q", arr.ndim))
    fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
    fh.write(arr.astype("<f8", copy=False).tobytes(order="C"))


def _read_exact(fh, n: int, what: str) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise TensorFormatError(f"truncated tensor file: expected {n} bytes for {what}, got {len(buf)}")
    return buf


def read_tensor(fh) -> np.ndarray:
    magic = _read_exact(fh, 4, "magic")
    if magic != TENSOR_MAGIC:
        raise TensorFormatError(f"bad magic {magic!r}, expected {TENSOR_MAGIC!r}")
    (version,) = struct.unpack("<I", _read_exact(fh, 4, "version"))
    if version != TENSOR_VERSION:
        raise TensorFormatError(f"unsupported tensor format version {version}")
    (rank,) = struct.unpack("<Q", _read_exact(fh, 8, "rank"))
    if rank > 32:
        raise TensorFormatError(f"implausible rank {rank}")
    shape = struct.unpack(f"<{rank}Q", _read_exact(fh, 8 * rank, "shape"))
    count = math.prod(shape) if shape else 1
    data = _read_exact(fh, 8 * count, "data")
    return np.frombuffer(data, dtype="<f8").reshape(shape).astype(np.float64)


def save_tensor(path, arr: np.ndarray) -> None:
    with open(path, "wb") as fh:
        write_tensor(fh, arr)


def load_tensor(path) -> np.ndarray:
    with open(path, "rb") as fh:
        arr = read_tensor(fh)
        extra = fh.read(1)
        if extra:
            raise TensorFormatError("trailing bytes after tensor data")
    return arr


def to_uint8(values: np.ndarray, data_range: tuple[float, float]) -> np.ndarray:
    """Linear map data_range -> [0, 255], clipped, rounded half away from zero."""
    lo, hi = data_range
    if not hi > lo:
        raise ValueError(f"empty data range ({lo}, {hi})")
    scaled = (np.asarray(values, dtype=np.float64) - lo) / (hi - lo) * 255.0
    return np.clip(np.floor(scaled + 0.5), 0.0, 255.0).astype(np.uint8)


def save_image_grid(samples: np.ndarray, path, data_range: tuple[float, float] = (-1.0, 1.0),
                    pad: int = 1) -> None:
    """Render a batch of (h, w) or (h, w, 3) samples as one tiled 8-bit PNG.

    The grid is ceil(sqrt(n)) columns wide; missing cells stay at value 0
    (the bottom of the data range).
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim == 2:
        samples = samples[None, ...]
    if samples.ndim == 3:
        channels = 1
    elif samples.ndim == 4 and samples.shape[-1] in (1, 3):
        channels = samples.shape[-1]
    else:
        raise ValueError(f"expected (n, h, w) or (n, h, w, c in {{1,3}}), got {samples.shape}")

    n, h, w = samples.shape[:3]
    cols = math.ceil(math.sqrt(n))
    rows = math.ceil(n / cols)
    grid = np.zeros((rows * (h + pad) - pad, cols * (w + pad) - pad, channels), dtype=np.uint8)
    pixels = to_uint8(samples, data_range).reshape(n, h, w, channels)
    for i in range(n):
        r, c = divmod(i, cols)
        grid[r * (h + pad):r * (h + pad) + h, c * (w + pad):c * (w + pad) + w] = pixels[i]

    if channels == 1:
        img = Image.fromarray(grid[..., 0], mode="L")
    else:
        img = Image.fromarray(grid, mode="RGB")
    img.save(path, format="PNG")
