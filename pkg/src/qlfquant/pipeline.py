"""End-to-end segmentation of a single image.

Wires the stages together: decode -> HSI -> superpixels on the
intensity channel -> per-superpixel Gaussian field estimates on both
channels -> divergence scores -> three-class labels -> coverage report.
"""
from __future__ import annotations

from .color_pipeline import RgbImage, green_channel, intensity_channel, rgb_to_hsi
from .divergence import Thresholds, classify, score_superpixels
from .gmrf import GmrfConfig, estimate_all
from .quantify import compute_bqi, superpixel_areas
from .session import SegmentationResult
from .superpixel import SlicParams, slic_segment

__all__ = ["segment_image"]


def segment_image(
    img: RgbImage,
    slic_params: SlicParams | None = None,
    gmrf_config: GmrfConfig | None = None,
    thresholds: Thresholds | None = None,
    image_id: str = "",
) -> SegmentationResult:
    """Run the full pipeline on a decoded image."""
    slic_params = slic_params or SlicParams()
    gmrf_config = gmrf_config or GmrfConfig()
    thresholds = thresholds or Thresholds()

    hsi = rgb_to_hsi(img)
    ifield = intensity_channel(hsi)
    gfield = green_channel(img)

    spmap = slic_segment(ifield, slic_params)
    intensity_features = estimate_all(ifield, spmap, gmrf_config, "intensity")
    green_features = estimate_all(gfield, spmap, gmrf_config, "green")

    scores = score_superpixels(green_features, intensity_features, spmap, ifield, gfield)
    labels = classify(scores, thresholds)
    stats = superpixel_areas(spmap)
    report = compute_bqi(labels, stats, thresholds, image_id)
    return SegmentationResult(
        map=spmap,
        scores=scores,
        labels=labels,
        stats=stats,
        report=report,
        source_image_id=image_id,
    )
