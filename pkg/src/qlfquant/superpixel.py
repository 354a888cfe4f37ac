"""Superpixel oversegmentation of a scalar field.

Implements grid-seeded, locally windowed iterative clustering over
(value, x, y): seeds are placed on a regular grid with interval
S = sqrt(total_pixels / k), nudged off high-gradient pixels, and then
refined by alternating windowed nearest-center assignment and center
updates until the L2 residual of the center set converges. A
post-processing step enforces 4-connectivity by splitting off large
stray fragments and absorbing small ones into the neighbor they share
the longest boundary with.

Coordinate convention: pixel (ix, iy) has its center at (ix+0.5, iy+0.5),
so cluster centers live in the continuous box [0, width) x [0, height).
With this convention an exact grid fit puts region boundaries between
pixel columns and the result is free of distance ties.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dataclass_field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .color_pipeline import ScalarField
from .errors import ParameterError

__all__ = [
    "SlicParams",
    "ClusterCenter",
    "SuperpixelMap",
    "compute_grid_interval",
    "seed_clusters",
    "slic_segment",
    "enforce_connectivity",
]

DEFAULT_SUPERPIXELS = 600
DEFAULT_COMPACTNESS = 10.0
DEFAULT_MAX_ITERS = 10
DEFAULT_CONVERGENCE_EPS = 1e-4


@dataclass(frozen=True)
class SlicParams:
    k: int = DEFAULT_SUPERPIXELS
    compactness: float = DEFAULT_COMPACTNESS
    max_iters: int = DEFAULT_MAX_ITERS
    convergence_eps: float = DEFAULT_CONVERGENCE_EPS

    def validate(self, width: int, height: int) -> None:
        if self.k < 1:
            raise ParameterError(f"superpixel count must be >= 1, got {self.k}")
        if self.k > width * height:
            raise ParameterError(
                f"superpixel count {self.k} exceeds pixel count {width * height}"
            )
        if self.compactness <= 0:
            raise ParameterError(f"compactness must be > 0, got {self.compactness}")
        if self.max_iters < 1:
            raise ParameterError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.convergence_eps < 0:
            raise ParameterError(f"convergence_eps must be >= 0, got {self.convergence_eps}")


@dataclass(frozen=True)
class ClusterCenter:
    """A center in (value, x, y) space; x, y are subpixel coordinates."""

    v: float
    x: float
    y: float


@dataclass
class SuperpixelMap:
    width: int
    height: int
    labels: np.ndarray  # (height, width) int32, values in [0, len(centers))
    centers: list[ClusterCenter] = dataclass_field(default_factory=list)
    grid_interval: float = 0.0

    @property
    def count(self) -> int:
        return len(self.centers)


def compute_grid_interval(width: int, height: int, k: int) -> float:
    """Seed grid spacing sqrt(width*height / k)."""
    if k < 1:
        raise ParameterError(f"superpixel count must be >= 1, got {k}")
    if k > width * height:
        raise ParameterError(f"superpixel count {k} exceeds pixel count {width * height}")
    return math.sqrt(width * height / k)


def _grid_shape(width: int, height: int, k: int, interval: float) -> tuple[int, int]:
    """Pick the (nx, ny) grid whose cell count is closest to k.

    Candidates are the floor/ceil of width/S and height/S; ties prefer
    more columns so a square image with k=2 splits vertically.
    """
    xs = {max(1, math.floor(width / interval)), max(1, math.ceil(width / interval))}
    ys = {max(1, math.floor(height / interval)), max(1, math.ceil(height / interval))}
    best = None
    for nx in sorted(xs, reverse=True):
        for ny in sorted(ys, reverse=True):
            score = abs(nx * ny - k)
            if best is None or score < best[0]:
                best = (score, nx, ny)
    return best[1], best[2]


def _gradient_map(values: np.ndarray) -> np.ndarray:
    """Squared gradient magnitude; border pixels get +inf."""
    grad = np.full(values.shape, np.inf)
    if values.shape[0] >= 3 and values.shape[1] >= 3:
        dx = values[1:-1, 2:] - values[1:-1, :-2]
        dy = values[2:, 1:-1] - values[:-2, 1:-1]
        grad[1:-1, 1:-1] = dx * dx + dy * dy
    return grad


def seed_clusters(field: ScalarField, params: SlicParams) -> list[ClusterCenter]:
    """Place initial centers on a regular grid, nudged off edges.

    Each seed keeps its exact grid coordinate unless a strictly
    lower-gradient pixel exists in the 3x3 window around it, in which
    case the seed snaps to that pixel's center. The seed value is the
    field value at the pixel containing the seed coordinate.
    """
    w, h = field.width, field.height
    params.validate(w, h)
    interval = compute_grid_interval(w, h, params.k)
    nx, ny = _grid_shape(w, h, params.k, interval)
    spacing_x, spacing_y = w / nx, h / ny

    grad = _gradient_map(field.values)
    centers = []
    for gy in range(ny):
        for gx in range(nx):
            cx = spacing_x * (gx + 0.5)
            cy = spacing_y * (gy + 0.5)
            px = min(int(cx), w - 1)
            py = min(int(cy), h - 1)
            # scan the 3x3 window for a strictly lower gradient
            best_px, best_py, best_g = px, py, grad[py, px]
            moved = False
            for wy in range(max(0, py - 1), min(h, py + 2)):
                for wx in range(max(0, px - 1), min(w, px + 2)):
                    if grad[wy, wx] < best_g:
                        best_px, best_py, best_g = wx, wy, grad[wy, wx]
                        moved = True
            if moved:
                px, py = best_px, best_py
                cx, cy = px + 0.5, py + 0.5
            centers.append(ClusterCenter(v=float(field.values[py, px]), x=cx, y=cy))
    return centers


def slic_segment(field: ScalarField, params: SlicParams) -> SuperpixelMap:
    """Oversegment a field by windowed iterative clustering.

    Pixels compete only for centers whose 2Sx2S search window covers
    them, under D^2 = d_v^2 + (d_xy/S)^2 * m^2; ties go to the lowest
    center index. Pixels missed by every window (possible on extreme
    aspect ratios) fall back to the globally nearest center.
    Connectivity is enforced before returning.
    """
    w, h = field.width, field.height
    params.validate(w, h)
    interval = compute_grid_interval(w, h, params.k)
    seeds = seed_clusters(field, params)

    centers = np.array([[c.v, c.x, c.y] for c in seeds], dtype=np.float64)
    values = field.values
    m2_over_s2 = (params.compactness / interval) ** 2

    xs = np.arange(w, dtype=np.float64) + 0.5
    ys = np.arange(h, dtype=np.float64) + 0.5

    labels = np.zeros((h, w), dtype=np.int32)
    for _ in range(params.max_iters):
        best = np.full((h, w), np.inf)
        labels.fill(-1)
        for idx in range(centers.shape[0]):
            cv, cx, cy = centers[idx]
            ix0 = max(0, math.ceil(cx - interval - 0.5))
            ix1 = min(w - 1, math.floor(cx + interval - 0.5))
            iy0 = max(0, math.ceil(cy - interval - 0.5))
            iy1 = min(h - 1, math.floor(cy + interval - 0.5))
            if ix0 > ix1 or iy0 > iy1:
                continue
            dv = values[iy0 : iy1 + 1, ix0 : ix1 + 1] - cv
            dx = xs[ix0 : ix1 + 1] - cx
            dy = ys[iy0 : iy1 + 1] - cy
            d2 = dv * dv + (dy[:, None] ** 2 + dx[None, :] ** 2) * m2_over_s2
            window_best = best[iy0 : iy1 + 1, ix0 : ix1 + 1]
            improved = d2 < window_best
            window_best[improved] = d2[improved]
            labels[iy0 : iy1 + 1, ix0 : ix1 + 1][improved] = idx

        uncovered = labels < 0
        if uncovered.any():
            uy, ux = np.nonzero(uncovered)
            dv = values[uy, ux][None, :] - centers[:, 0:1]
            dx = (ux + 0.5)[None, :] - centers[:, 1:2]
            dy = (uy + 0.5)[None, :] - centers[:, 2:3]
            d2 = dv * dv + (dx * dx + dy * dy) * m2_over_s2
            labels[uy, ux] = np.argmin(d2, axis=0)

        flat = labels.ravel()
        counts = np.bincount(flat, minlength=centers.shape[0]).astype(np.float64)
        sum_v = np.bincount(flat, weights=values.ravel(), minlength=centers.shape[0])
        sum_x = np.bincount(flat, weights=np.tile(xs, h), minlength=centers.shape[0])
        sum_y = np.bincount(flat, weights=np.repeat(ys, w), minlength=centers.shape[0])
        occupied = counts > 0
        updated = centers.copy()
        updated[occupied, 0] = sum_v[occupied] / counts[occupied]
        updated[occupied, 1] = sum_x[occupied] / counts[occupied]
        updated[occupied, 2] = sum_y[occupied] / counts[occupied]
        residual = float(np.linalg.norm(updated - centers))
        centers = updated
        if residual <= params.convergence_eps:
            break

    # drop centers that ended with no members and compact the index range
    counts = np.bincount(labels.ravel(), minlength=centers.shape[0])
    occupied = counts > 0
    if not occupied.all():
        remap = np.cumsum(occupied) - 1
        labels = remap[labels].astype(np.int32)
        centers = centers[occupied]

    spmap = SuperpixelMap(
        width=w,
        height=h,
        labels=labels,
        centers=[ClusterCenter(v=float(v), x=float(x), y=float(y)) for v, x, y in centers],
        grid_interval=interval,
    )
    return enforce_connectivity(spmap)


def _label_components(labels: np.ndarray) -> np.ndarray:
    """Connected components of equal-valued 4-neighbor pixels."""
    h, w = labels.shape
    n = h * w
    idx = np.arange(n, dtype=np.int64).reshape(h, w)
    rows, cols = [], []
    horiz = labels[:, 1:] == labels[:, :-1]
    rows.append(idx[:, 1:][horiz])
    cols.append(idx[:, :-1][horiz])
    vert = labels[1:, :] == labels[:-1, :]
    rows.append(idx[1:, :][vert])
    cols.append(idx[:-1, :][vert])
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    graph = coo_matrix((np.ones(len(r), dtype=np.int8), (r, c)), shape=(n, n))
    _, comp = connected_components(graph, directed=False)
    return comp.reshape(h, w)


def enforce_connectivity(spmap: SuperpixelMap) -> SuperpixelMap:
    """Make every superpixel a single 4-connected region.

    For each label the largest component keeps the label's identity and
    center. Stray fragments of at least S^2/4 pixels become superpixels
    of their own (appended label ids); smaller ones are absorbed by the
    already-resolved neighbor region sharing the longest boundary, ties
    toward the smaller label id. An already-connected map is returned
    unchanged.
    """
    labels = spmap.labels
    h, w = labels.shape
    comp = _label_components(labels)
    n_comp = int(comp.max()) + 1
    k = spmap.count
    if n_comp == k:
        # one component per label: nothing to do
        return spmap

    comp_flat = comp.ravel()
    sizes = np.bincount(comp_flat, minlength=n_comp)
    _, first_idx = np.unique(comp_flat, return_index=True)
    comp_label = labels.ravel()[first_idx]  # original label of each component

    # the largest component per label is its main one; the stable sort on
    # descending size breaks ties toward the lower component id
    main_comp = np.full(k, -1, dtype=np.int64)
    for cid in np.argsort(-sizes, kind="stable"):
        lbl = comp_label[cid]
        if main_comp[lbl] < 0:
            main_comp[lbl] = cid

    final_of_comp = np.full(n_comp, -1, dtype=np.int64)
    final_of_comp[main_comp] = np.arange(k)
    new_centers = list(spmap.centers)

    min_size = spmap.grid_interval ** 2 / 4.0
    for cid in range(n_comp):
        if final_of_comp[cid] >= 0 or sizes[cid] < min_size:
            continue
        # large fragment: promote to a superpixel of its own
        final_of_comp[cid] = len(new_centers)
        pix = np.nonzero(comp_flat == cid)[0]
        new_centers.append(
            ClusterCenter(
                v=spmap.centers[comp_label[cid]].v,
                x=float(np.mean(pix % w) + 0.5),
                y=float(np.mean(pix // w) + 0.5),
            )
        )

    final = final_of_comp[comp]  # (h, w); -1 marks small fragments
    pending = [cid for cid in range(n_comp) if final_of_comp[cid] < 0]
    comp_pixels = {cid: np.nonzero(comp_flat == cid)[0] for cid in pending}
    while pending:
        still = []
        for cid in pending:
            pix = comp_pixels[cid]
            py, px = pix // w, pix % w
            counts: dict[int, int] = {}
            for dy, dx in ((0, 1), (0, -1), (1, 0), (-1, 0)):
                ny_, nx_ = py + dy, px + dx
                ok = (ny_ >= 0) & (ny_ < h) & (nx_ >= 0) & (nx_ < w)
                for t in final[ny_[ok], nx_[ok]]:
                    if t >= 0:
                        counts[int(t)] = counts.get(int(t), 0) + 1
            if not counts:
                still.append(cid)  # neighbors not resolved yet; retry next pass
                continue
            best = max(counts.values())
            target = min(t for t, c in counts.items() if c == best)
            final[py, px] = target
            final_of_comp[cid] = target
        if len(still) == len(pending):
            raise AssertionError("connectivity merge made no progress")
        pending = still

    return SuperpixelMap(
        width=w,
        height=h,
        labels=final.astype(np.int32),
        centers=new_centers,
        grid_interval=spmap.grid_interval,
    )
