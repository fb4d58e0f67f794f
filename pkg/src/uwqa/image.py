"""Image decoding, color conversions, and block partitioning.

All pixel math is done in float64; 8-bit channel values are promoted on
read. Every function here is pure and safe to call concurrently.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DecodeError, InvalidPartition

# sRGB -> XYZ (D65, 2-degree observer). The white point is taken as the
# row sums of this matrix so that neutral pixels map to a == b == 0 exactly.
_SRGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_WHITE = _SRGB_TO_XYZ.sum(axis=1)

# BT.601 luma weights, shared with the sharpness channel combination.
GRAY_WEIGHTS = (0.299, 0.587, 0.114)


@dataclass(frozen=True)
class ImageBuffer:
    """Decoded 8-bit RGB raster. `pixels` has shape (height, width, 3)."""

    pixels: np.ndarray

    def __post_init__(self):
        p = self.pixels
        if p.ndim != 3 or p.shape[2] != 3 or p.dtype != np.uint8:
            raise ValueError("pixels must be a (h, w, 3) uint8 array")
        if p.shape[0] < 1 or p.shape[1] < 1:
            raise ValueError("image must be at least 1x1")
        p.setflags(write=False)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def channels(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """R, G, B planes promoted to float64."""
        p = self.pixels.astype(np.float64)
        return p[:, :, 0], p[:, :, 1], p[:, :, 2]


@dataclass(frozen=True)
class Plane:
    """Real-valued scalar field, one value per pixel, shape (height, width)."""

    values: np.ndarray

    def __post_init__(self):
        v = self.values
        if v.ndim != 2:
            raise ValueError("plane must be 2-D")
        if not np.all(np.isfinite(v)):
            raise ValueError("plane contains non-finite values")

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class LabImage:
    """CIELAB raster, shape (height, width, 3): L in [0, 100], a/b real."""

    lab: np.ndarray

    def __post_init__(self):
        v = self.lab
        if v.ndim != 3 or v.shape[2] != 3:
            raise ValueError("lab must be a (h, w, 3) array")
        L = v[:, :, 0]
        if L.min() < -1e-6 or L.max() > 100 + 1e-6:
            raise ValueError("L out of [0, 100]")

    @property
    def width(self) -> int:
        return self.lab.shape[1]

    @property
    def height(self) -> int:
        return self.lab.shape[0]

    @property
    def L(self) -> np.ndarray:
        return self.lab[:, :, 0]

    @property
    def a(self) -> np.ndarray:
        return self.lab[:, :, 1]

    @property
    def b(self) -> np.ndarray:
        return self.lab[:, :, 2]


def decode_image(data: bytes) -> ImageBuffer:
    """Decode a PNG or JPEG byte stream to an 8-bit RGB buffer.

    16-bit sources are truncated to their high byte; alpha is dropped.
    Raises DecodeError on malformed streams or other formats.
    """
    try:
        img = Image.open(io.BytesIO(data))
        fmt = img.format
        if fmt not in ("PNG", "JPEG"):
            raise DecodeError(f"unsupported format: {fmt}")
        img.load()
    except DecodeError:
        raise
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        raise DecodeError(f"cannot decode image: {exc}") from exc

    if img.mode in ("I;16", "I;16B", "I;16L", "I"):
        arr = np.asarray(img, dtype=np.uint32)
        arr = (arr >> 8).clip(0, 255).astype(np.uint8)
        rgb = np.stack([arr, arr, arr], axis=-1)
    else:
        if img.mode != "RGB":
            # convert() discards alpha rather than compositing it.
            img = img.convert("RGB")
        rgb = np.asarray(img, dtype=np.uint8)
    return ImageBuffer(pixels=rgb)


def encode_png(img: ImageBuffer) -> bytes:
    """Lossless PNG encoding of an ImageBuffer."""
    out = io.BytesIO()
    Image.fromarray(np.asarray(img.pixels)).save(out, format="PNG")
    return out.getvalue()


def to_grayscale(img: ImageBuffer) -> Plane:
    """BT.601 luma: 0.299 R + 0.587 G + 0.114 B, in [0, 255]."""
    r, g, b = img.channels()
    w = GRAY_WEIGHTS
    return Plane(values=w[0] * r + w[1] * g + w[2] * b)


def _srgb_linearize(c: np.ndarray) -> np.ndarray:
    # c in [0, 1]
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def _lab_f(t: np.ndarray) -> np.ndarray:
    # CIE threshold 216/24389 with linear segment slope 841/108.
    eps = 216.0 / 24389.0
    return np.where(t > eps, np.cbrt(t), (841.0 / 108.0) * t + 4.0 / 29.0)


def rgb_to_lab(img: ImageBuffer) -> LabImage:
    """sRGB -> linear RGB -> XYZ (D65) -> CIELAB, per pixel."""
    rgb = img.pixels.astype(np.float64) / 255.0
    lin = _srgb_linearize(rgb)
    xyz = lin @ _SRGB_TO_XYZ.T
    fxyz = _lab_f(xyz / _WHITE)
    fx, fy, fz = fxyz[:, :, 0], fxyz[:, :, 1], fxyz[:, :, 2]
    L = 116.0 * fy - 16.0
    a = 500.0 * (fx - fy)
    b = 200.0 * (fy - fz)
    return LabImage(lab=np.stack([L, a, b], axis=-1))


def partition_blocks(plane: Plane, k1: int, k2: int) -> list[np.ndarray]:
    """Tile a plane into k1 x k2 blocks (k1 along width, k2 along height).

    Trailing remainder pixels are dropped when the dimensions are not
    divisible by the block counts. Returns row-major views.
    """
    if k1 < 1 or k2 < 1:
        raise InvalidPartition("block counts must be >= 1")
    if k1 > plane.width or k2 > plane.height:
        raise InvalidPartition(
            f"grid {k1}x{k2} does not fit a {plane.width}x{plane.height} plane"
        )
    bw = plane.width // k1
    bh = plane.height // k2
    v = plane.values
    blocks = []
    for j in range(k2):
        for i in range(k1):
            blocks.append(v[j * bh:(j + 1) * bh, i * bw:(i + 1) * bw])
    return blocks


def block_min_max(values: np.ndarray, k1: int, k2: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-block min and max over the k1 x k2 grid (remainder dropped).

    Returns two (k2, k1) arrays. Vectorized equivalent of reducing each
    block from partition_blocks.
    """
    h, w = values.shape
    if k1 > w or k2 > h:
        raise InvalidPartition(f"grid {k1}x{k2} does not fit a {w}x{h} plane")
    bw, bh = w // k1, h // k2
    cropped = values[: bh * k2, : bw * k1]
    tiled = cropped.reshape(k2, bh, k1, bw)
    return tiled.min(axis=(1, 3)), tiled.max(axis=(1, 3))
