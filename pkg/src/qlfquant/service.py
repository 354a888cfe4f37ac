"""Loopback HTTP service exposing review sessions to the browser UI.

Everything stateful lives in a SessionStore shared by the request
handlers; edits go through the correction-session operations only, so
their locking and replay guarantees carry over unchanged. Request and
response bodies are JSON; the three image endpoints serve PNG. The
label-map PNG encodes superpixel ids as 24-bit colors
(id = R*65536 + G*256 + B) so the browser can hit-test clicks without a
round trip.
"""
from __future__ import annotations

import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import uvicorn
from fastapi import FastAPI
from fastapi.responses import JSONResponse, Response
from PIL import Image
from pydantic import BaseModel

from .color_pipeline import RgbImage
from .divergence import ClassLabel
from .errors import InputError, ParameterError
from .quantify import QuantReport
from .session import (
    SegmentationResult,
    Session,
    create_session,
    render_label_image,
    set_label,
    toggle_label,
    undo_last_edit,
)

__all__ = ["MAX_LABELMAP_IDS", "SessionRecord", "SessionStore", "create_app", "serve"]

# the 24-bit color encoding of the label-map PNG caps the superpixel count
MAX_LABELMAP_IDS = 2**24 - 1


def _png_bytes(pixels: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(pixels, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def _labelmap_png(labels: np.ndarray) -> bytes:
    ids = labels.astype(np.uint32)
    encoded = np.stack(
        [(ids >> 16) & 0xFF, (ids >> 8) & 0xFF, ids & 0xFF], axis=-1
    ).astype(np.uint8)
    return _png_bytes(encoded)


@dataclass
class SessionRecord:
    session: Session
    source: RgbImage
    source_png: bytes
    labelmap_png: bytes


class SessionStore:
    """All open sessions plus the export directory and edit-export flag."""

    def __init__(self, out_dir: str | Path = ".", export_on_edit: bool = False):
        self.out_dir = Path(out_dir)
        self.export_on_edit = export_on_edit
        self._records: dict[str, SessionRecord] = {}

    def add(self, result: SegmentationResult, source: RgbImage) -> Session:
        if result.map.count > MAX_LABELMAP_IDS:
            raise ParameterError(
                f"{result.map.count} superpixels exceed the label-map limit "
                f"of {MAX_LABELMAP_IDS}"
            )
        session = create_session(result)
        self._records[session.id] = SessionRecord(
            session=session,
            source=source,
            source_png=_png_bytes(source.pixels),
            labelmap_png=_labelmap_png(result.map.labels),
        )
        return session

    def get(self, session_id: str) -> SessionRecord | None:
        return self._records.get(session_id)

    def ids(self) -> list[str]:
        return list(self._records)

    def export(self, record: SessionRecord) -> tuple[Path, Path]:
        """Write the current label image and report; returns their paths."""
        s = record.session
        stem = Path(s.result.source_image_id).stem or f"session_{s.id[:8]}"
        self.out_dir.mkdir(parents=True, exist_ok=True)
        label_path = self.out_dir / f"{stem}_labels.png"
        report_path = self.out_dir / f"{stem}_report.json"
        with s.lock:
            image = render_label_image(s.result.map, s.result.labels)
            report: QuantReport = s.result.report
            revision = s.revision
        label_path.write_bytes(_png_bytes(image.pixels))
        report_path.write_text(
            json.dumps(report.to_json_dict(revision=revision), indent=2) + "\n"
        )
        return label_path, report_path


class ToggleBody(BaseModel):
    x: int
    y: int


class LabelBody(BaseModel):
    superpixel: int
    label: str


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": message})


def _not_found(session_id: str) -> JSONResponse:
    return _error(404, f"unknown session {session_id!r}")


def create_app(store: SessionStore) -> FastAPI:
    app = FastAPI(title="biofilm review service")

    @app.get("/api/sessions")
    def list_sessions():
        return [
            {
                "session_id": sid,
                "image": store.get(sid).session.result.source_image_id,
            }
            for sid in store.ids()
        ]

    @app.get("/api/sessions/{session_id}")
    def session_state(session_id: str):
        record = store.get(session_id)
        if record is None:
            return _not_found(session_id)
        s = record.session
        with s.lock:
            base = f"/api/sessions/{session_id}"
            return {
                "session_id": session_id,
                "width": s.result.map.width,
                "height": s.result.map.height,
                "superpixel_count": s.result.map.count,
                "labels": [label.value for label in s.result.labels],
                "bqi": s.result.report.bqi,
                "revision": s.revision,
                "image_url": f"{base}/image.png",
                "overlay_url": f"{base}/overlay.png",
                "label_map_url": f"{base}/labelmap.png",
            }

    def _after_edit(record: SessionRecord):
        if store.export_on_edit:
            store.export(record)

    @app.post("/api/sessions/{session_id}/toggle")
    def toggle(session_id: str, body: ToggleBody):
        record = store.get(session_id)
        if record is None:
            return _not_found(session_id)
        try:
            sp, old, new, bqi, revision = toggle_label(record.session, body.x, body.y)
        except InputError as exc:
            return _error(422, str(exc))
        _after_edit(record)
        return {
            "superpixel": sp,
            "old_label": old.value,
            "new_label": new.value,
            "bqi": bqi,
            "revision": revision,
        }

    @app.post("/api/sessions/{session_id}/label")
    def relabel(session_id: str, body: LabelBody):
        record = store.get(session_id)
        if record is None:
            return _not_found(session_id)
        try:
            label = ClassLabel.from_string(body.label)
            old, bqi, revision = set_label(record.session, body.superpixel, label)
        except (InputError, ParameterError) as exc:
            return _error(422, str(exc))
        _after_edit(record)
        return {
            "superpixel": body.superpixel,
            "old_label": old.value,
            "new_label": label.value,
            "bqi": bqi,
            "revision": revision,
        }

    @app.post("/api/sessions/{session_id}/undo")
    def undo(session_id: str):
        record = store.get(session_id)
        if record is None:
            return _not_found(session_id)
        try:
            bqi, revision = undo_last_edit(record.session)
        except InputError as exc:
            return _error(409, str(exc))
        _after_edit(record)
        return {"bqi": bqi, "revision": revision}

    @app.get("/api/sessions/{session_id}/image.png")
    def image_png(session_id: str):
        record = store.get(session_id)
        if record is None:
            return _not_found(session_id)
        return Response(content=record.source_png, media_type="image/png")

    @app.get("/api/sessions/{session_id}/overlay.png")
    def overlay_png(session_id: str):
        record = store.get(session_id)
        if record is None:
            return _not_found(session_id)
        s = record.session
        with s.lock:
            label_image = render_label_image(s.result.map, s.result.labels)
        blend = (
            record.source.pixels.astype(np.uint16) + label_image.pixels.astype(np.uint16)
        ) // 2
        return Response(content=_png_bytes(blend.astype(np.uint8)), media_type="image/png")

    @app.get("/api/sessions/{session_id}/labelmap.png")
    def labelmap_png(session_id: str):
        record = store.get(session_id)
        if record is None:
            return _not_found(session_id)
        return Response(content=record.labelmap_png, media_type="image/png")

    @app.post("/api/sessions/{session_id}/export")
    def export(session_id: str):
        record = store.get(session_id)
        if record is None:
            return _not_found(session_id)
        label_path, report_path = store.export(record)
        return {
            "label_image": str(label_path),
            "report": str(report_path),
            "revision": record.session.revision,
        }

    return app


def serve(store: SessionStore, host: str = "127.0.0.1", port: int = 8077) -> None:
    """Run the service until interrupted; binding failures propagate."""
    uvicorn.run(create_app(store), host=host, port=port, log_level="warning")
