"""Biofilm coverage quantification and longitudinal aggregation.

The coverage index is the biofilm area divided by the whole tooth area
(substratum plus the biofilm sitting on it), so it is a fraction in
[0, 1]; background never enters the ratio. Longitudinal reports collect
the index per subject over time and summarize it with the unweighted
arithmetic mean.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field
from datetime import datetime

import numpy as np

from .divergence import ClassLabel, Thresholds
from .errors import InputError, InternalError
from .superpixel import SuperpixelMap

__all__ = [
    "SuperpixelStats",
    "QuantReport",
    "LongitudinalReport",
    "superpixel_areas",
    "compute_bqi",
    "longitudinal_summary",
]


@dataclass(frozen=True)
class SuperpixelStats:
    """Pixel count per superpixel id; counts sum to the image area."""

    areas: np.ndarray  # (K,) int64

    @property
    def count(self) -> int:
        return self.areas.shape[0]


@dataclass(frozen=True)
class QuantReport:
    bqi: float
    area_background: int
    area_tooth: int
    area_biofilm: int
    k_actual: int
    thresholds: Thresholds
    image_id: str
    no_tooth: bool = False

    def to_json_dict(self, revision: int = 0) -> dict:
        return {
            "image": self.image_id,
            "k_actual": self.k_actual,
            "bqi": self.bqi,
            "areas": {
                "background": self.area_background,
                "tooth": self.area_tooth,
                "biofilm": self.area_biofilm,
            },
            "thresholds": self.thresholds.to_json_dict(),
            "no_tooth": self.no_tooth,
            "revision": revision,
        }


@dataclass(frozen=True)
class LongitudinalReport:
    subject_id: str
    series: tuple  # of (datetime, float) sorted ascending by time
    mean_bqi: float

    def to_json_dict(self) -> dict:
        return {
            "subject_id": self.subject_id,
            "series": [
                {"timestamp": ts.isoformat(), "bqi": bqi} for ts, bqi in self.series
            ],
            "mean_bqi": self.mean_bqi,
        }


def superpixel_areas(spmap: SuperpixelMap) -> SuperpixelStats:
    """Exact pixel count of every superpixel."""
    areas = np.bincount(spmap.labels.ravel(), minlength=spmap.count).astype(np.int64)
    return SuperpixelStats(areas=areas)


def compute_bqi(
    labels: list[ClassLabel],
    stats: SuperpixelStats,
    thresholds: Thresholds,
    image_id: str = "",
) -> QuantReport:
    """Coverage report from per-superpixel labels and areas.

    bqi = biofilm area / (biofilm + tooth area); an image without any
    tooth or biofilm gets bqi = 0 with the no_tooth flag set instead of
    an error, so batch runs survive empty frames.
    """
    if len(labels) != stats.count:
        raise InternalError(
            f"{len(labels)} labels for {stats.count} superpixels"
        )
    areas = stats.areas
    lab = np.array([CLASS_INDEX[l] for l in labels], dtype=np.int64)
    area_bg = int(areas[lab == 0].sum())
    area_tooth = int(areas[lab == 1].sum())
    area_biofilm = int(areas[lab == 2].sum())
    denom = area_tooth + area_biofilm
    if denom > 0:
        bqi = area_biofilm / denom
        no_tooth = False
    else:
        bqi = 0.0
        no_tooth = True
    return QuantReport(
        bqi=bqi,
        area_background=area_bg,
        area_tooth=area_tooth,
        area_biofilm=area_biofilm,
        k_actual=stats.count,
        thresholds=thresholds,
        image_id=image_id,
        no_tooth=no_tooth,
    )


CLASS_INDEX = {ClassLabel.BACKGROUND: 0, ClassLabel.TOOTH: 1, ClassLabel.BIOFILM: 2}


def longitudinal_summary(
    entries: list[tuple[datetime, QuantReport]], subject_id: str
) -> LongitudinalReport:
    """Time-sorted bqi series and its arithmetic mean for one subject."""
    if not entries:
        raise InputError(f"no entries for subject {subject_id!r}")
    stamps = [ts for ts, _ in entries]
    if len(set(stamps)) != len(stamps):
        raise InputError(f"duplicate timestamps for subject {subject_id!r}")
    ordered = sorted(entries, key=lambda e: e[0])
    series = tuple((ts, report.bqi) for ts, report in ordered)
    mean_bqi = float(np.mean([b for _, b in series]))
    return LongitudinalReport(subject_id=subject_id, series=series, mean_bqi=mean_bqi)
