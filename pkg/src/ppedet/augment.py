"""Raster image augmentations with co-transformed annotations: grayscale,
vertical flip, 90-degree rotation, and additive Gaussian noise.

Images are 8-bit, row-major, channel-interleaved buffers with 1 or 3
channels, read and written as binary PGM (P5) / PPM (P6).  Geometric ops
transform the normalized annotation boxes alongside the pixels; photometric
ops leave them untouched.  Noise is seeded and therefore reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from .geometry import BBox, GroundTruthBox

# ITU-R 601 luma weights
_LUMA_WEIGHTS = (0.299, 0.587, 0.114)


@dataclass(frozen=True)
class ImageBuffer:
    """8-bit raster image; ``pixels`` is row-major and channel-interleaved."""

    width: int
    height: int
    channels: int
    pixels: bytes

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ValueError(f"image dimensions must be positive, got {self.width}x{self.height}")
        if self.channels not in (1, 3):
            raise ValueError(f"unsupported channel count {self.channels}: must be 1 or 3")
        expected = self.width * self.height * self.channels
        if len(self.pixels) != expected:
            raise ValueError(
                f"pixel buffer holds {len(self.pixels)} bytes, expected "
                f"{expected} for {self.width}x{self.height}x{self.channels}"
            )
        object.__setattr__(self, "pixels", bytes(self.pixels))

    def as_array(self) -> np.ndarray:
        """(height, width, channels) uint8 view of the pixel data."""
        return np.frombuffer(self.pixels, dtype=np.uint8).reshape(
            self.height, self.width, self.channels
        )

    @classmethod
    def from_array(cls, array: np.ndarray) -> "ImageBuffer":
        if array.ndim == 2:
            array = array[:, :, np.newaxis]
        if array.ndim != 3:
            raise ValueError(f"expected a 2-D or 3-D array, got {array.ndim}-D")
        if array.dtype != np.uint8:
            raise ValueError(f"expected uint8 pixels, got {array.dtype}")
        height, width, channels = array.shape
        return cls(width, height, channels, np.ascontiguousarray(array).tobytes())


class AugmentKind(str, Enum):
    GRAYSCALE = "grayscale"
    VERTICAL_FLIP = "vflip"
    ROTATE90 = "rot90"
    GAUSSIAN_NOISE = "noise"


@dataclass(frozen=True)
class AugmentOp:
    """One augmentation: the kind plus its parameters.

    ``sigma`` and ``seed`` matter only for Gaussian noise; ``clockwise``
    only for rotation.
    """

    kind: AugmentKind
    sigma: float = 0.0
    seed: int = 0
    clockwise: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", AugmentKind(self.kind))
        if not self.sigma >= 0.0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")


def _to_grayscale(image: ImageBuffer) -> ImageBuffer:
    if image.channels == 1:
        return image
    rgb = image.as_array().astype(np.float64)
    luma = (
        _LUMA_WEIGHTS[0] * rgb[:, :, 0]
        + _LUMA_WEIGHTS[1] * rgb[:, :, 1]
        + _LUMA_WEIGHTS[2] * rgb[:, :, 2]
    )
    # round half away from zero; values are non-negative so floor(x + 0.5)
    gray = np.clip(np.floor(luma + 0.5), 0.0, 255.0).astype(np.uint8)
    return ImageBuffer.from_array(gray)


def _add_noise(image: ImageBuffer, sigma: float, seed: int) -> ImageBuffer:
    array = image.as_array()
    rng = np.random.default_rng(seed)
    noisy = array.astype(np.float64) + rng.normal(0.0, sigma, size=array.shape)
    return ImageBuffer.from_array(np.clip(np.rint(noisy), 0.0, 255.0).astype(np.uint8))


def _flip_box(box: BBox) -> BBox:
    return BBox(box.x_center, 1.0 - box.y_center, box.width, box.height)


def _rotate_box(box: BBox, clockwise: bool) -> BBox:
    if clockwise:
        return BBox(1.0 - box.y_center, box.x_center, box.height, box.width)
    return BBox(box.y_center, 1.0 - box.x_center, box.height, box.width)


def apply_augment(
    image: ImageBuffer, boxes: Sequence[GroundTruthBox], op: AugmentOp
) -> tuple[ImageBuffer, list[GroundTruthBox]]:
    """Transform an image and its annotation boxes together."""
    if op.kind is AugmentKind.GRAYSCALE:
        return _to_grayscale(image), list(boxes)
    if op.kind is AugmentKind.GAUSSIAN_NOISE:
        return _add_noise(image, op.sigma, op.seed), list(boxes)
    if op.kind is AugmentKind.VERTICAL_FLIP:
        flipped = ImageBuffer.from_array(image.as_array()[::-1].copy())
        return flipped, [
            GroundTruthBox(b.class_id, _flip_box(b.bbox), b.image_id) for b in boxes
        ]
    # rotation: output dimensions swap
    k = -1 if op.clockwise else 1
    rotated = ImageBuffer.from_array(np.rot90(image.as_array(), k=k).copy())
    return rotated, [
        GroundTruthBox(b.class_id, _rotate_box(b.bbox, op.clockwise), b.image_id)
        for b in boxes
    ]


def _read_header_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    """First ``count`` whitespace-separated header tokens, honoring '#'
    comments, plus the offset just past the single byte after the last one."""
    tokens: list[bytes] = []
    i = 0
    while len(tokens) < count:
        if i >= len(data):
            raise ValueError("truncated image header")
        ch = data[i : i + 1]
        if ch.isspace():
            i += 1
        elif ch == b"#":
            while i < len(data) and data[i : i + 1] != b"\n":
                i += 1
        else:
            start = i
            while i < len(data) and not data[i : i + 1].isspace() and data[i : i + 1] != b"#":
                i += 1
            tokens.append(data[start:i])
    if i >= len(data) or not data[i : i + 1].isspace():
        raise ValueError("expected whitespace after the image header")
    return tokens, i + 1


def read_image(path: str | Path) -> ImageBuffer:
    """Binary PPM (P6, 3 channels) or PGM (P5, 1 channel), maxval 255."""
    data = Path(path).read_bytes()
    tokens, offset = _read_header_tokens(data, 4)
    magic = tokens[0]
    if magic == b"P6":
        channels = 3
    elif magic == b"P5":
        channels = 1
    else:
        raise ValueError(f"unsupported image magic {magic!r}: expected P5 or P6")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise ValueError(f"non-integer image header fields {tokens[1:]}") from None
    if maxval != 255:
        raise ValueError(f"unsupported maxval {maxval}: only 8-bit images are handled")
    payload = data[offset:]
    expected = width * height * channels
    if len(payload) != expected:
        raise ValueError(f"image payload holds {len(payload)} bytes, expected {expected}")
    return ImageBuffer(width, height, channels, payload)


def write_image(path: str | Path, image: ImageBuffer) -> None:
    magic = b"P6" if image.channels == 3 else b"P5"
    header = magic + b"\n" + f"{image.width} {image.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + image.pixels)
