"""Synthetic QLF-like test images with known ground truth.

Real QLF scans are clinical data; these phantoms stand in for them in
calibration and tests. Each phantom is a dark background, a green
elliptical tooth with a mild vertical shading gradient, and a few red
biofilm blobs clipped to the tooth, all under additive Gaussian pixel
noise. The exact per-pixel class map and the resulting true coverage
fraction are returned alongside the rendered image.

The palette is chosen so the two pipeline channels behave like real QLF
material: on tooth enamel the green channel tracks overall intensity
closely, while biofilm is red-dominant, pushing the channels far apart.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .color_pipeline import RgbImage
from .divergence import ClassLabel
from .session import PALETTE

__all__ = ["Phantom", "generate_phantom", "truth_to_label_image", "TRUTH_CLASSES"]

TRUTH_CLASSES = (ClassLabel.BACKGROUND, ClassLabel.TOOTH, ClassLabel.BIOFILM)

_BACKGROUND_RGB = (10, 10, 14)
_TOOTH_RGB = (140, 175, 165)
_BIOFILM_RGB = (200, 50, 40)


@dataclass(frozen=True)
class Phantom:
    image: RgbImage
    truth: np.ndarray  # (H, W) uint8; 0 background, 1 tooth, 2 biofilm
    coverage: float  # biofilm area / (tooth + biofilm area)


def _ellipse_mask(
    width: int,
    height: int,
    cx: float,
    cy: float,
    ax: float,
    ay: float,
    angle: float,
) -> np.ndarray:
    ys, xs = np.mgrid[0:height, 0:width]
    dx, dy = xs - cx, ys - cy
    c, s = np.cos(angle), np.sin(angle)
    u = (dx * c + dy * s) / ax
    v = (-dx * s + dy * c) / ay
    return u * u + v * v <= 1.0


def generate_phantom(
    seed: int,
    width: int = 640,
    height: int = 480,
    noise_sigma: float = 0.03,
) -> Phantom:
    """Render one phantom; identical seeds produce identical phantoms."""
    rng = np.random.default_rng(seed)

    tooth = _ellipse_mask(
        width,
        height,
        cx=width * rng.uniform(0.45, 0.55),
        cy=height * rng.uniform(0.45, 0.55),
        ax=width * rng.uniform(0.28, 0.38),
        ay=height * rng.uniform(0.30, 0.42),
        angle=rng.uniform(-0.26, 0.26),
    )

    # patch radii scale with the frame so small phantoms keep visible tooth
    patch_scale = min(width, height)
    biofilm = np.zeros((height, width), dtype=bool)
    for _ in range(rng.integers(2, 6)):
        biofilm |= _ellipse_mask(
            width,
            height,
            cx=width * rng.uniform(0.30, 0.70),
            cy=height * rng.uniform(0.30, 0.70),
            ax=patch_scale * rng.uniform(0.03125, 0.125),
            ay=patch_scale * rng.uniform(0.03125, 0.125),
            angle=rng.uniform(0, np.pi),
        )
    biofilm &= tooth

    truth = np.zeros((height, width), dtype=np.uint8)
    truth[tooth] = 1
    truth[biofilm] = 2

    base = np.empty((height, width, 3))
    base[truth == 0] = _BACKGROUND_RGB
    base[truth == 1] = _TOOTH_RGB
    base[truth == 2] = _BIOFILM_RGB

    # mild vertical shading over the tooth, as from uneven illumination
    gain = 1.0 + 0.08 * np.linspace(-1.0, 1.0, height)[:, None]
    base[truth > 0] *= gain[np.nonzero(truth > 0)[0], 0][:, None]

    noisy = base + rng.normal(0.0, noise_sigma * 255.0, size=base.shape)
    pixels = np.clip(np.rint(noisy), 0, 255).astype(np.uint8)

    n_tooth = int((truth == 1).sum())
    n_biofilm = int((truth == 2).sum())
    coverage = n_biofilm / (n_tooth + n_biofilm) if n_tooth + n_biofilm else 0.0
    return Phantom(
        image=RgbImage(width=width, height=height, pixels=pixels),
        truth=truth,
        coverage=coverage,
    )


def truth_to_label_image(truth: np.ndarray) -> RgbImage:
    """Ground-truth class map rendered with the export palette."""
    lut = np.array([PALETTE[c] for c in TRUTH_CLASSES], dtype=np.uint8)
    pixels = lut[truth]
    h, w = truth.shape
    return RgbImage(width=w, height=h, pixels=pixels)
