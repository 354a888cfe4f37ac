"""Image loading and color-space plumbing.

Decodes PNG/JPEG files into 8-bit RGB rasters, converts them to the
hue-saturation-intensity (HSI) domain with the classical geometric
(arccos) formulas, and projects out the two scalar channels the rest of
the pipeline consumes: the normalized green channel and the HSI
intensity channel. All scalar fields are normalized to [0, 1] so every
downstream threshold is independent of resolution and bit depth.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import InputError

__all__ = [
    "RgbImage",
    "HsiImage",
    "ScalarField",
    "load_image",
    "rgb_to_hsi",
    "green_channel",
    "intensity_channel",
]


@dataclass(frozen=True)
class RgbImage:
    """8-bit RGB raster, shape (height, width, 3), dtype uint8."""

    width: int
    height: int
    pixels: np.ndarray

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise InputError(f"image dimensions must be positive, got {self.width}x{self.height}")
        if self.pixels.shape != (self.height, self.width, 3):
            raise InputError(
                f"pixel buffer shape {self.pixels.shape} does not match "
                f"{self.height}x{self.width}x3"
            )
        if self.pixels.dtype != np.uint8:
            raise InputError(f"pixel buffer must be uint8, got {self.pixels.dtype}")


@dataclass(frozen=True)
class HsiImage:
    """Per-pixel HSI planes: h in degrees [0, 360), s and i in [0, 1]."""

    width: int
    height: int
    h: np.ndarray
    s: np.ndarray
    i: np.ndarray

    def __post_init__(self):
        shape = (self.height, self.width)
        for name, plane in (("h", self.h), ("s", self.s), ("i", self.i)):
            if plane.shape != shape:
                raise InputError(f"{name} plane shape {plane.shape} does not match {shape}")


@dataclass(frozen=True)
class ScalarField:
    """A single [0, 1] channel, shape (height, width), dtype float64."""

    width: int
    height: int
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (self.height, self.width):
            raise InputError(
                f"field shape {self.values.shape} does not match {self.height}x{self.width}"
            )


def load_image(path) -> RgbImage:
    """Decode a PNG or JPEG file to an RgbImage; alpha is discarded."""
    p = Path(path)
    if not p.is_file():
        raise InputError(f"cannot read image: {p} is not a file")
    try:
        with Image.open(p) as im:
            if im.format not in ("PNG", "JPEG"):
                raise InputError(f"unsupported format {im.format!r} for {p}: expected PNG or JPEG")
            rgb = im.convert("RGB")
            arr = np.asarray(rgb, dtype=np.uint8)
    except UnidentifiedImageError as exc:
        raise InputError(f"unsupported or corrupt image file: {p}") from exc
    except OSError as exc:
        raise InputError(f"cannot decode image {p}: {exc}") from exc
    if arr.size == 0:
        raise InputError(f"image {p} has zero dimensions")
    h, w = arr.shape[:2]
    return RgbImage(width=w, height=h, pixels=arr)


def rgb_to_hsi(img: RgbImage) -> HsiImage:
    """Convert to HSI with the geometric (arccos) formulas.

    i = (r+g+b)/765, s = 1 - min/mean for nonblack pixels, and h is the
    chromatic angle measured from red. Achromatic pixels (s = 0 or an
    undefined angle) get h = 0 so the conversion is total.
    """
    rgb = img.pixels.astype(np.float64)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    total = r + g + b

    i = total / 765.0

    s = np.zeros_like(total)
    nonblack = total > 0
    np.divide(3.0 * np.minimum(np.minimum(r, g), b), total, out=s, where=nonblack)
    s = np.where(nonblack, 1.0 - s, 0.0)
    s = np.clip(s, 0.0, 1.0)

    num = 0.5 * ((r - g) + (r - b))
    den = np.sqrt((r - g) ** 2 + (r - b) * (g - b))
    chromatic = den > 0
    ratio = np.zeros_like(num)
    np.divide(num, den, out=ratio, where=chromatic)
    theta = np.degrees(np.arccos(np.clip(ratio, -1.0, 1.0)))
    h = np.where(b > g, 360.0 - theta, theta)
    h = np.where(chromatic & (s > 0), h, 0.0)
    h = np.where(h >= 360.0, 0.0, h)

    return HsiImage(width=img.width, height=img.height, h=h, s=s, i=i)


def green_channel(img: RgbImage) -> ScalarField:
    """Normalized green plane, g/255 per pixel."""
    values = img.pixels[..., 1].astype(np.float64) / 255.0
    return ScalarField(width=img.width, height=img.height, values=values)


def intensity_channel(img: HsiImage) -> ScalarField:
    """The i plane of an HSI image as a standalone field."""
    return ScalarField(width=img.width, height=img.height, values=img.i.copy())
