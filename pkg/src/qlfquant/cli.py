"""Command-line entry point.

Subcommands cover the whole workflow: segment a single image, batch a
directory, aggregate a longitudinal manifest, calibrate thresholds from
expert-labeled pairs, and serve open review sessions over HTTP. Reports
carry no wall-clock data, so identical inputs and flags produce
byte-identical outputs; run metadata goes to a separate sidecar file.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

import numpy as np
from PIL import Image

from . import __version__
from .color_pipeline import RgbImage, load_image
from .divergence import (
    CLASS_ORDER,
    DEFAULT_BG_THRESHOLD,
    DEFAULT_KL_THRESHOLD,
    Thresholds,
    TrainingExample,
    calibrate_thresholds,
    whole_image_divergence,
)
from .errors import InputError, ParameterError, QlfError
from .gmrf import (
    DEFAULT_RIDGE,
    EIGHT_NEIGHBORHOOD,
    FOUR_NEIGHBORHOOD,
    GmrfConfig,
)
from .pipeline import segment_image
from .quantify import longitudinal_summary
from .service import SessionStore, serve
from .session import PALETTE, SegmentationResult, render_label_image
from .superpixel import (
    DEFAULT_COMPACTNESS,
    DEFAULT_CONVERGENCE_EPS,
    DEFAULT_MAX_ITERS,
    DEFAULT_SUPERPIXELS,
    SlicParams,
)

__all__ = ["RunConfig", "build_parser", "main"]

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg"}
TRUTH_SUFFIX = "_truth"


@dataclass(frozen=True)
class RunConfig:
    """Everything a pipeline run needs, assembled from CLI flags."""

    slic: SlicParams
    gmrf: GmrfConfig
    thresholds: Thresholds
    out_dir: Path
    jobs: int


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qlfquant",
        description="Segment and quantify dental biofilm in QLF photographs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def shared(p: argparse.ArgumentParser) -> argparse.ArgumentParser:
        p.add_argument("--superpixels", type=int, default=DEFAULT_SUPERPIXELS,
                       help="target superpixel count (default %(default)s)")
        p.add_argument("--compactness", type=float, default=DEFAULT_COMPACTNESS,
                       help="superpixel shape/value trade-off (default %(default)s)")
        p.add_argument("--max-iters", type=int, default=DEFAULT_MAX_ITERS,
                       help="superpixel refinement iteration cap (default %(default)s)")
        p.add_argument("--convergence-eps", type=float, default=DEFAULT_CONVERGENCE_EPS,
                       help="superpixel convergence residual (default %(default)s)")
        p.add_argument("--neighborhood", choices=("4", "8"), default="4",
                       help="field stencil: 4- or 8-connected (default %(default)s)")
        p.add_argument("--ridge", type=float, default=DEFAULT_RIDGE,
                       help="covariance ridge (default %(default)s)")
        p.add_argument("--bg-threshold", type=float, default=None,
                       help=f"background intensity cut (default {DEFAULT_BG_THRESHOLD})")
        p.add_argument("--kl-threshold", type=float, default=None,
                       help=f"biofilm divergence cut in nats (default {DEFAULT_KL_THRESHOLD})")
        p.add_argument("--thresholds", type=Path, default=None, metavar="JSON",
                       help="thresholds file; overrides --bg-threshold/--kl-threshold")
        p.add_argument("--out-dir", type=Path, default=Path("."),
                       help="output directory (default current directory)")
        p.add_argument("--jobs", type=int, default=1,
                       help="parallel workers for batch mode (default %(default)s)")
        p.add_argument("--port", type=int, default=8077,
                       help="review service port (default %(default)s)")
        p.add_argument("--host", default="127.0.0.1",
                       help="review service bind address (default %(default)s)")
        return p

    p = shared(sub.add_parser("segment", help="segment one image"))
    p.add_argument("input", type=Path, help="PNG or JPEG image")

    p = shared(sub.add_parser("batch", help="segment every image in a directory"))
    p.add_argument("input_dir", type=Path, help="directory of PNG/JPEG images")

    p = shared(sub.add_parser("longitudinal", help="per-subject coverage over time"))
    p.add_argument("manifest", type=Path,
                   help="CSV with header subject_id,timestamp,image_path")
    p.add_argument("--out", type=Path, default=None,
                   help="output JSON (default OUT_DIR/longitudinal.json)")

    p = shared(sub.add_parser("calibrate", help="fit thresholds from labeled pairs"))
    p.add_argument("labeled_dir", type=Path,
                   help="directory pairing each image with <stem>_truth.png")
    p.add_argument("--out", type=Path, default=None,
                   help="output JSON (default OUT_DIR/thresholds.json)")

    p = shared(sub.add_parser("serve", help="serve review sessions over HTTP"))
    p.add_argument("inputs", type=Path, nargs="+", help="images to open sessions for")
    p.add_argument("--export-on-edit", action="store_true",
                   help="rewrite the label image and report after every edit")

    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    if args.jobs < 1:
        raise ParameterError(f"--jobs must be >= 1, got {args.jobs}")
    if args.thresholds is not None:
        try:
            raw = json.loads(args.thresholds.read_text())
        except FileNotFoundError:
            raise InputError(f"thresholds file not found: {args.thresholds}") from None
        except json.JSONDecodeError as exc:
            raise InputError(f"{args.thresholds}: invalid JSON ({exc})") from None
        thresholds = Thresholds.from_json_dict(raw)
    else:
        thresholds = Thresholds(
            bg=args.bg_threshold if args.bg_threshold is not None else DEFAULT_BG_THRESHOLD,
            kl=args.kl_threshold if args.kl_threshold is not None else DEFAULT_KL_THRESHOLD,
        )
    return RunConfig(
        slic=SlicParams(
            k=args.superpixels,
            compactness=args.compactness,
            max_iters=args.max_iters,
            convergence_eps=args.convergence_eps,
        ),
        gmrf=GmrfConfig(
            neighborhood=FOUR_NEIGHBORHOOD if args.neighborhood == "4" else EIGHT_NEIGHBORHOOD,
            ridge=args.ridge,
        ),
        thresholds=thresholds,
        out_dir=args.out_dir,
        jobs=args.jobs,
    )


def _write_png(image: RgbImage, path: Path) -> None:
    Image.fromarray(image.pixels, mode="RGB").save(path, format="PNG")


def _write_json(payload: dict, path: Path) -> None:
    path.write_text(json.dumps(payload, indent=2) + "\n")


def _config_echo(config: RunConfig) -> dict:
    return {
        "superpixels": config.slic.k,
        "compactness": config.slic.compactness,
        "max_iters": config.slic.max_iters,
        "convergence_eps": config.slic.convergence_eps,
        "neighborhood": len(config.gmrf.neighborhood),
        "ridge": config.gmrf.ridge,
        "thresholds": config.thresholds.to_json_dict(),
    }


def _segment_to_files(path: Path, config: RunConfig) -> SegmentationResult:
    """Segment one image and write its label image, report, and sidecar."""
    img = load_image(str(path))
    result = segment_image(img, config.slic, config.gmrf, config.thresholds,
                           image_id=path.name)
    config.out_dir.mkdir(parents=True, exist_ok=True)
    stem = path.stem
    _write_png(render_label_image(result.map, result.labels),
               config.out_dir / f"{stem}_labels.png")
    _write_json(result.report.to_json_dict(revision=0),
                config.out_dir / f"{stem}_report.json")
    _write_json(
        {
            "tool": "qlfquant",
            "version": __version__,
            "config": _config_echo(config),
            "whole_image_divergence": whole_image_divergence(result.scores),
        },
        config.out_dir / f"{stem}_meta.json",
    )
    return result


def cmd_segment(args: argparse.Namespace, config: RunConfig) -> int:
    result = _segment_to_files(args.input, config)
    print(f"{args.input.name}: bqi={result.report.bqi:.4f} "
          f"({result.map.count} superpixels)")
    return 0


def _list_images(directory: Path) -> list[Path]:
    if not directory.is_dir():
        raise InputError(f"not a directory: {directory}")
    return sorted(
        p for p in directory.iterdir()
        if p.suffix.lower() in IMAGE_SUFFIXES and not p.stem.endswith(TRUTH_SUFFIX)
    )


def cmd_batch(args: argparse.Namespace, config: RunConfig) -> int:
    paths = _list_images(args.input_dir)
    if not paths:
        raise InputError(f"no PNG or JPEG images in {args.input_dir}")

    def work(path: Path):
        return _segment_to_files(path, config)

    outcomes: list[tuple[Path, SegmentationResult | None, str | None]] = []
    if config.jobs > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            futures = [pool.submit(work, p) for p in paths]
            for path, future in zip(paths, futures):
                try:
                    outcomes.append((path, future.result(), None))
                except (QlfError, OSError) as exc:
                    outcomes.append((path, None, str(exc)))
    else:
        for path in paths:
            try:
                outcomes.append((path, work(path), None))
            except (QlfError, OSError) as exc:
                outcomes.append((path, None, str(exc)))

    summary = {
        "images": [
            {"image": p.name, "bqi": r.report.bqi, "no_tooth": r.report.no_tooth}
            for p, r, _ in outcomes if r is not None
        ],
        "failures": [
            {"image": p.name, "error": e} for p, _, e in outcomes if e is not None
        ],
    }
    config.out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(summary, config.out_dir / "batch_summary.json")
    done, failed = len(summary["images"]), len(summary["failures"])
    print(f"batch: {done} segmented, {failed} failed")
    for entry in summary["failures"]:
        print(f"  failed {entry['image']}: {entry['error']}", file=sys.stderr)
    return 0


def _parse_manifest(path: Path) -> list[tuple[str, datetime, Path]]:
    try:
        fh = open(path, newline="")
    except FileNotFoundError:
        raise InputError(f"manifest not found: {path}") from None
    rows = []
    seen = set()
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header] != [
            "subject_id", "timestamp", "image_path",
        ]:
            raise InputError(
                f"{path}:1: manifest header must be subject_id,timestamp,image_path"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise InputError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            subject, stamp_text, image_path = (c.strip() for c in row)
            if not subject:
                raise InputError(f"{path}:{lineno}: empty subject_id")
            try:
                stamp = datetime.fromisoformat(stamp_text)
            except ValueError:
                raise InputError(
                    f"{path}:{lineno}: timestamp {stamp_text!r} is not ISO-8601"
                ) from None
            if (subject, stamp) in seen:
                raise InputError(
                    f"{path}:{lineno}: duplicate entry for {subject} at {stamp_text}"
                )
            seen.add((subject, stamp))
            image = Path(image_path)
            if not image.is_absolute():
                image = path.parent / image
            rows.append((subject, stamp, image))
    if not rows:
        raise InputError(f"{path}: manifest has no data rows")
    return rows


def cmd_longitudinal(args: argparse.Namespace, config: RunConfig) -> int:
    rows = _parse_manifest(args.manifest)
    by_subject: dict[str, list] = {}
    for subject, stamp, image_path in rows:
        img = load_image(str(image_path))
        result = segment_image(img, config.slic, config.gmrf, config.thresholds,
                               image_id=image_path.name)
        by_subject.setdefault(subject, []).append((stamp, result.report))

    reports = [
        longitudinal_summary(entries, subject)
        for subject, entries in sorted(by_subject.items())
    ]
    out = args.out if args.out is not None else config.out_dir / "longitudinal.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_json({"subjects": [r.to_json_dict() for r in reports]}, out)
    print(f"longitudinal: {len(reports)} subject(s) -> {out}")
    return 0


_COLOR_TO_CLASS = [(PALETTE[label], label) for label in CLASS_ORDER]


def _truth_classes(truth: RgbImage, path: Path) -> np.ndarray:
    """Class index per pixel of an expert label image; palette-only."""
    idx = np.full((truth.height, truth.width), -1, dtype=np.int64)
    for class_index, (color, _) in enumerate(_COLOR_TO_CLASS):
        idx[(truth.pixels == color).all(axis=2)] = class_index
    if (idx < 0).any():
        bad = truth.pixels[idx < 0][0]
        raise InputError(
            f"{path}: color {tuple(int(c) for c in bad)} is not in the label palette"
        )
    return idx


def cmd_calibrate(args: argparse.Namespace, config: RunConfig) -> int:
    paths = _list_images(args.labeled_dir)
    if not paths:
        raise InputError(f"no PNG or JPEG images in {args.labeled_dir}")

    training: list[TrainingExample] = []
    for path in paths:
        truth_path = path.with_name(f"{path.stem}{TRUTH_SUFFIX}.png")
        if not truth_path.exists():
            raise InputError(f"missing truth image for {path.name}: {truth_path.name}")
        img = load_image(str(path))
        truth = load_image(str(truth_path))
        if (truth.width, truth.height) != (img.width, img.height):
            raise InputError(
                f"{truth_path.name} is {truth.width}x{truth.height}, "
                f"image is {img.width}x{img.height}"
            )
        result = segment_image(img, config.slic, config.gmrf, config.thresholds,
                               image_id=path.name)
        truth_idx = _truth_classes(truth, truth_path)
        k = result.map.count
        counts = np.zeros((len(CLASS_ORDER), k), dtype=np.int64)
        for class_index in range(len(CLASS_ORDER)):
            counts[class_index] = np.bincount(
                result.map.labels[truth_idx == class_index], minlength=k
            )
        # ties go to the earliest class in the fixed order
        winners = np.argmax(counts, axis=0)
        for sp in range(k):
            training.append(
                TrainingExample(
                    kl=float(result.scores.kl[sp]),
                    mean_intensity=float(result.scores.mean_intensity[sp]),
                    label=CLASS_ORDER[winners[sp]],
                )
            )

    thresholds = calibrate_thresholds(training)
    out = args.out if args.out is not None else config.out_dir / "thresholds.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_json(thresholds.to_json_dict(), out)
    print(f"calibrated on {len(training)} superpixels from {len(paths)} image(s) -> {out}")
    return 0


def build_store(inputs: list[Path], config: RunConfig, export_on_edit: bool) -> SessionStore:
    """Segment every input and open a session for it."""
    store = SessionStore(out_dir=config.out_dir, export_on_edit=export_on_edit)
    for path in inputs:
        img = load_image(str(path))
        result = segment_image(img, config.slic, config.gmrf, config.thresholds,
                               image_id=path.name)
        store.add(result, img)
    return store


def cmd_serve(args: argparse.Namespace, config: RunConfig) -> int:
    store = build_store(args.inputs, config, args.export_on_edit)
    print(f"serving {len(store.ids())} session(s) at http://{args.host}:{args.port}/")
    serve(store, host=args.host, port=args.port)
    return 0


_COMMANDS = {
    "segment": cmd_segment,
    "batch": cmd_batch,
    "longitudinal": cmd_longitudinal,
    "calibrate": cmd_calibrate,
    "serve": cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _config_from_args(args)
        return _COMMANDS[args.command](args, config)
    except (QlfError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
