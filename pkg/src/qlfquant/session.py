"""Interactive review sessions over a segmentation result.

A session wraps one image's segmentation and applies single-click label
switches: a bare click cycles tooth -> biofilm -> background -> tooth,
an explicit set picks the target class directly. Every edit is appended
to a log and the coverage report is recomputed, so the session state is
always replayable from the initial labels and auditable edit by edit.
Mutations on one session are serialized by a lock; distinct sessions
are independent.
"""
from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .color_pipeline import RgbImage
from .divergence import ClassLabel, SuperpixelScores
from .errors import IntegrityError, InputError, InternalError
from .quantify import QuantReport, SuperpixelStats, compute_bqi
from .superpixel import SuperpixelMap

__all__ = [
    "PALETTE",
    "SegmentationResult",
    "Session",
    "create_session",
    "locate_superpixel",
    "toggle_label",
    "set_label",
    "undo_last_edit",
    "export_result",
    "render_label_image",
]

# Fixed export palette: background black, tooth green, biofilm red.
PALETTE = {
    ClassLabel.BACKGROUND: (0, 0, 0),
    ClassLabel.TOOTH: (0, 255, 0),
    ClassLabel.BIOFILM: (255, 0, 0),
}

_TOGGLE_NEXT = {
    ClassLabel.TOOTH: ClassLabel.BIOFILM,
    ClassLabel.BIOFILM: ClassLabel.BACKGROUND,
    ClassLabel.BACKGROUND: ClassLabel.TOOTH,
}


@dataclass
class SegmentationResult:
    """Everything the pipeline produced for one image."""

    map: SuperpixelMap
    scores: SuperpixelScores
    labels: list[ClassLabel]
    stats: SuperpixelStats
    report: QuantReport
    source_image_id: str

    def verify(self) -> None:
        k = self.map.count
        if len(self.labels) != k or self.scores.count != k or self.stats.count != k:
            raise IntegrityError(
                f"labels/scores/stats sized {len(self.labels)}/{self.scores.count}/"
                f"{self.stats.count} for a map of {k} superpixels"
            )
        recomputed = compute_bqi(
            self.labels, self.stats, self.report.thresholds, self.report.image_id
        )
        if recomputed != self.report:
            raise IntegrityError("report does not match labels and areas")


@dataclass
class Session:
    id: str
    result: SegmentationResult
    initial_labels: tuple
    edit_log: list = dataclass_field(default_factory=list)
    lock: threading.Lock = dataclass_field(default_factory=threading.Lock, repr=False)

    @property
    def revision(self) -> int:
        return len(self.edit_log)


def create_session(result: SegmentationResult) -> Session:
    """Open a revision-0 session after checking the result's consistency."""
    result.verify()
    return Session(
        id=uuid.uuid4().hex,
        result=result,
        initial_labels=tuple(result.labels),
    )


def locate_superpixel(s: Session, x: int, y: int) -> int:
    """Superpixel id under an image coordinate."""
    spmap = s.result.map
    if not (0 <= x < spmap.width and 0 <= y < spmap.height):
        raise InputError(
            f"click ({x}, {y}) outside image bounds {spmap.width}x{spmap.height}"
        )
    return int(spmap.labels[y, x])


def _apply_edit(s: Session, sp: int, new_label: ClassLabel) -> tuple[ClassLabel, float, int]:
    old = s.result.labels[sp]
    s.result.labels[sp] = new_label
    s.edit_log.append((sp, old, new_label))
    s.result.report = compute_bqi(
        s.result.labels,
        s.result.stats,
        s.result.report.thresholds,
        s.result.report.image_id,
    )
    return old, s.result.report.bqi, s.revision


def toggle_label(s: Session, x: int, y: int) -> tuple[int, ClassLabel, ClassLabel, float, int]:
    """Cycle the clicked superpixel's label.

    Returns (id, old label, new label, bqi, revision).
    """
    with s.lock:
        sp = locate_superpixel(s, x, y)
        new_label = _TOGGLE_NEXT[s.result.labels[sp]]
        old, bqi, revision = _apply_edit(s, sp, new_label)
        return sp, old, new_label, bqi, revision


def set_label(s: Session, sp: int, label: ClassLabel) -> tuple[ClassLabel, float, int]:
    """Set one superpixel's label directly; a same-label set still logs.

    Returns (old label, bqi, revision).
    """
    with s.lock:
        if sp < 0 or sp >= s.result.map.count:
            raise InputError(f"unknown superpixel id {sp}")
        old, bqi, revision = _apply_edit(s, sp, label)
        return old, bqi, revision


def undo_last_edit(s: Session) -> tuple[float, int]:
    """Drop the newest edit and replay the rest over the initial labels."""
    with s.lock:
        if not s.edit_log:
            raise InputError("nothing to undo")
        s.edit_log.pop()
        labels = list(s.initial_labels)
        for sp, _, new_label in s.edit_log:
            labels[sp] = new_label
        s.result.labels = labels
        s.result.report = compute_bqi(
            labels, s.result.stats, s.result.report.thresholds, s.result.report.image_id
        )
        return s.result.report.bqi, s.revision


def render_label_image(spmap: SuperpixelMap, labels: list[ClassLabel]) -> RgbImage:
    """Palette rendering of per-superpixel class labels."""
    if len(labels) != spmap.count:
        raise InternalError(f"{len(labels)} labels for {spmap.count} superpixels")
    lut = np.zeros((spmap.count, 3), dtype=np.uint8)
    for sp, label in enumerate(labels):
        lut[sp] = PALETTE[label]
    pixels = lut[spmap.labels]
    return RgbImage(width=spmap.width, height=spmap.height, pixels=pixels)


def export_result(s: Session) -> tuple[RgbImage, QuantReport]:
    """Current state as (palette label image, coverage report)."""
    with s.lock:
        image = render_label_image(s.result.map, s.result.labels)
        return image, s.result.report
