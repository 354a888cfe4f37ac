"""Per-superpixel Gaussian random-field statistics.

Every superpixel is modeled as a realization of a Gaussian field whose
pixel dependence is limited to a fixed neighborhood stencil. The field
parameters are the sample mean and sample covariance of the
pixel-plus-neighbors vector [f(p), f(p+o1), ..., f(p+on)], taken over
the superpixel's pixels whose full stencil lies inside the image. A
small ridge added to the covariance diagonal keeps every estimate
positive definite, including the degenerate cases (constant regions,
border slivers with no valid samples).
"""
from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .color_pipeline import ScalarField
from .errors import InternalError, ParameterError
from .superpixel import SuperpixelMap

__all__ = [
    "FOUR_NEIGHBORHOOD",
    "EIGHT_NEIGHBORHOOD",
    "GmrfConfig",
    "GmrfFeature",
    "ChannelFeatureSet",
    "extract_samples",
    "estimate_gmrf",
    "estimate_all",
]

FOUR_NEIGHBORHOOD = ((1, 0), (-1, 0), (0, 1), (0, -1))
EIGHT_NEIGHBORHOOD = FOUR_NEIGHBORHOOD + ((1, 1), (1, -1), (-1, 1), (-1, -1))
DEFAULT_RIDGE = 1e-6


@dataclass(frozen=True)
class GmrfConfig:
    """Stencil offsets (dx, dy) and the covariance ridge."""

    neighborhood: tuple[tuple[int, int], ...] = FOUR_NEIGHBORHOOD
    ridge: float = DEFAULT_RIDGE

    def __post_init__(self):
        if not self.neighborhood:
            raise ParameterError("neighborhood stencil must not be empty")
        if len(set(self.neighborhood)) != len(self.neighborhood):
            raise ParameterError("neighborhood offsets must be distinct")
        if (0, 0) in self.neighborhood:
            raise ParameterError("neighborhood must not contain (0, 0)")
        if self.ridge <= 0:
            raise ParameterError(f"ridge must be > 0, got {self.ridge}")

    @property
    def dim(self) -> int:
        return 1 + len(self.neighborhood)


@dataclass(frozen=True)
class GmrfFeature:
    superpixel_id: int
    mean: np.ndarray  # (d,)
    cov: np.ndarray  # (d, d), symmetric positive definite
    n_samples: int

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @property
    def degenerate(self) -> bool:
        return self.n_samples == 0


@dataclass
class ChannelFeatureSet:
    channel: str  # "intensity" | "green"
    features: list[GmrfFeature] = dataclass_field(default_factory=list)


def extract_samples(
    field: ScalarField, spmap: SuperpixelMap, sp: int, cfg: GmrfConfig
) -> np.ndarray:
    """Sample matrix (n x d) for one superpixel.

    One row per pixel of the superpixel whose whole stencil stays inside
    the image; pixels with any offset out of bounds are skipped. Stencil
    pixels are read from the field regardless of which superpixel they
    fall in.
    """
    if sp < 0 or sp >= spmap.count:
        raise InternalError(f"superpixel id {sp} out of range [0, {spmap.count})")
    ys, xs = np.nonzero(spmap.labels == sp)
    return _samples_at(field.values, xs, ys, cfg)


def _samples_at(values: np.ndarray, xs: np.ndarray, ys: np.ndarray, cfg: GmrfConfig) -> np.ndarray:
    h, w = values.shape
    valid = np.ones(xs.shape, dtype=bool)
    for dx, dy in cfg.neighborhood:
        valid &= (xs + dx >= 0) & (xs + dx < w) & (ys + dy >= 0) & (ys + dy < h)
    xs, ys = xs[valid], ys[valid]
    cols = [values[ys, xs]]
    for dx, dy in cfg.neighborhood:
        cols.append(values[ys + dy, xs + dx])
    return np.column_stack(cols) if len(xs) else np.empty((0, cfg.dim))


def estimate_gmrf(samples: np.ndarray, cfg: GmrfConfig, sp: int) -> GmrfFeature:
    """Sample mean and ridge-regularized sample covariance of a matrix.

    With no samples the feature is the degenerate (zero mean, ridge-only
    covariance) placeholder; with one sample the covariance is likewise
    ridge-only.
    """
    if samples.ndim != 2 or samples.shape[1] != cfg.dim:
        raise InternalError(
            f"sample matrix has {samples.shape[1] if samples.ndim == 2 else '?'} columns, "
            f"expected {cfg.dim}"
        )
    n = samples.shape[0]
    d = cfg.dim
    if n == 0:
        mean = np.zeros(d)
        cov = cfg.ridge * np.eye(d)
    else:
        mean = samples.mean(axis=0)
        if n >= 2:
            cov = np.cov(samples, rowvar=False, ddof=1)
            cov = (cov + cov.T) / 2.0  # exact symmetry
        else:
            cov = np.zeros((d, d))
        cov = cov + cfg.ridge * np.eye(d)
    return GmrfFeature(superpixel_id=sp, mean=mean, cov=cov, n_samples=n)


def estimate_all(
    field: ScalarField, spmap: SuperpixelMap, cfg: GmrfConfig, channel: str
) -> ChannelFeatureSet:
    """One GmrfFeature per superpixel over the whole map.

    Equivalent to estimate_gmrf(extract_samples(...)) for every id, but
    the per-pixel stencil matrix is built once for the image and grouped
    by label, which keeps the cost linear in the pixel count.
    """
    if field.values.shape != spmap.labels.shape:
        raise InternalError(
            f"field shape {field.values.shape} does not match map {spmap.labels.shape}"
        )
    h, w = field.values.shape
    ys, xs = np.mgrid[0:h, 0:w]
    xs, ys = xs.ravel(), ys.ravel()
    valid = np.ones(xs.shape, dtype=bool)
    for dx, dy in cfg.neighborhood:
        valid &= (xs + dx >= 0) & (xs + dx < w) & (ys + dy >= 0) & (ys + dy < h)
    xs, ys = xs[valid], ys[valid]
    matrix = _samples_at(field.values, xs, ys, cfg)
    labels = spmap.labels[ys, xs]

    order = np.argsort(labels, kind="stable")
    matrix = matrix[order]
    labels = labels[order]
    boundaries = np.searchsorted(labels, np.arange(spmap.count + 1))

    features = []
    for sp in range(spmap.count):
        rows = matrix[boundaries[sp] : boundaries[sp + 1]]
        features.append(estimate_gmrf(rows, cfg, sp))
    return ChannelFeatureSet(channel=channel, features=features)
