"""Seeded synthesis of strikethrough strokes on clean word images.

Seven stroke types are supported: single, double, diagonal, cross, zigzag,
wave and scratch.  A stroke is sampled relative to the word's ink geometry
(bounding box, core band, pen width), rendered with an anti-aliased round
brush and composited over the clean image by pixelwise max in inverted
space, so the struck image only ever gains ink.

Everything is deterministic: the same (clean image, stroke type, seed)
always produces the same struck image, and a whole partition is a pure
function of (corpus, global seed).
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from destrike.imaging import (
    BinaryImage,
    GrayImage,
    Polarity,
    invert,
    otsu_binarize,
    save_image,
)

Point = tuple[float, float]
Polyline = list[Point]


class StrokeType(enum.Enum):
    SINGLE = "single"
    DOUBLE = "double"
    DIAGONAL = "diagonal"
    CROSS = "cross"
    ZIGZAG = "zigzag"
    WAVE = "wave"
    SCRATCH = "scratch"


class NoInkError(ValueError):
    """Raised for images whose Otsu mask contains no ink."""


@dataclass(frozen=True)
class InkGeometry:
    """Where the written word sits: tight ink bounding box (inclusive row and
    column bounds), the core band of rows holding the middle 50% of the
    vertical ink mass, the median pen width, and the bright-ink level used to
    match stroke intensity to the writer's ink."""

    bbox: tuple[int, int, int, int]  # top, left, bottom, right (inclusive)
    core_band: tuple[int, int]  # row_lo, row_hi
    pen_width: float
    ink_level: float

    def __post_init__(self) -> None:
        top, left, bottom, right = self.bbox
        row_lo, row_hi = self.core_band
        if not (top <= bottom and left <= right):
            raise ValueError(f"degenerate bbox {self.bbox}")
        if not row_lo < row_hi:
            raise ValueError(f"core band must span at least one row: {self.core_band}")
        if self.pen_width < 1:
            raise ValueError(f"pen width must be >= 1, got {self.pen_width}")

    @property
    def band_height(self) -> float:
        return float(self.core_band[1] - self.core_band[0])

    @property
    def box_width(self) -> float:
        return float(self.bbox[3] - self.bbox[1] + 1)

    @property
    def box_height(self) -> float:
        return float(self.bbox[2] - self.bbox[0] + 1)


@dataclass(frozen=True)
class StrokeSpec:
    """Full record of one synthetic stroke; enough to replay the render.

    ``control_points`` holds one or more polylines (double, cross and
    scratch strokes consist of several).  For ``wave`` the points are the
    triangular-wave vertices that the renderer smooths with quadratic
    Bezier segments.
    """

    type: StrokeType
    seed: int
    control_points: list[Polyline]
    brush_width: float
    intensity: float
    image_id: str = ""

    def __post_init__(self) -> None:
        if not self.control_points or any(len(p) < 2 for p in self.control_points):
            raise ValueError("each stroke path needs at least two control points")
        if self.brush_width < 1:
            raise ValueError(f"brush width must be >= 1, got {self.brush_width}")

    def to_dict(self) -> dict:
        return {
            "image_id": self.image_id,
            "type": self.type.value,
            "seed": self.seed,
            "brush_width": self.brush_width,
            "intensity": self.intensity,
            "control_points": [[[float(x), float(y)] for x, y in path] for path in self.control_points],
        }

    @staticmethod
    def from_dict(d: dict) -> "StrokeSpec":
        return StrokeSpec(
            type=StrokeType(d["type"]),
            seed=int(d["seed"]),
            control_points=[[(float(x), float(y)) for x, y in path] for path in d["control_points"]],
            brush_width=float(d["brush_width"]),
            intensity=float(d["intensity"]),
            image_id=d.get("image_id", ""),
        )


def derive_seed(*parts: int | str) -> int:
    """Stable 64-bit seed from arbitrary parts (order-sensitive).

    Uses BLAKE2b rather than ``hash()`` so partitions replay byte-for-byte
    across processes.
    """
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        h.update(str(part).encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "big")


def estimate_ink_geometry(clean: GrayImage) -> InkGeometry:
    """Locate the written word in an inverted-polarity clean image."""
    if clean.polarity is not Polarity.INVERTED:
        raise ValueError("estimate_ink_geometry expects inverted polarity")
    mask = otsu_binarize(invert(clean)).mask
    if not mask.any():
        raise NoInkError("image contains no ink after Otsu binarisation")

    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    top, bottom = int(rows[0]), int(rows[-1])
    left, right = int(cols[0]), int(cols[-1])

    row_mass = mask.sum(axis=1).astype(np.float64)
    cum = np.cumsum(row_mass)
    total = cum[-1]
    row_lo = int(np.searchsorted(cum, 0.25 * total))
    row_hi = int(np.searchsorted(cum, 0.75 * total))
    if row_hi <= row_lo:  # ink concentrated on very few rows
        row_lo = max(top, row_lo - 1)
        row_hi = min(bottom, row_lo + 1) if row_lo < bottom else row_lo + 1

    pen = _median_vertical_run(mask)
    ink_level = float(np.percentile(clean.pixels[mask], 95))
    return InkGeometry(
        bbox=(top, left, bottom, right),
        core_band=(row_lo, row_hi),
        pen_width=max(1.0, pen),
        ink_level=max(ink_level, 1e-3),
    )


def _median_vertical_run(mask: np.ndarray) -> float:
    """Median length of the maximal vertical ink runs over all columns."""
    padded = np.zeros((mask.shape[0] + 2, mask.shape[1]), dtype=np.int8)
    padded[1:-1] = mask
    diff = np.diff(padded, axis=0)
    starts = np.argwhere(diff == 1)
    ends = np.argwhere(diff == -1)
    # starts/ends pair up per column because every run opens before it closes
    order = np.lexsort((starts[:, 0], starts[:, 1]))
    starts = starts[order]
    ends = ends[np.lexsort((ends[:, 0], ends[:, 1]))]
    lengths = ends[:, 0] - starts[:, 0]
    return float(np.median(lengths))


# ---------------------------------------------------------------------------
# stroke sampling


def sample_stroke(
    stroke_type: StrokeType,
    geom: InkGeometry,
    rng: np.random.Generator,
    image_id: str = "",
    seed: int = 0,
) -> StrokeSpec:
    """Draw the control points and brush parameters for one stroke.

    The per-type placement rules keep single/double/zigzag/wave paths inside
    the core band and diagonal/cross/scratch paths inside the ink bounding
    box, while always covering at least 80% of the word's width.
    """
    top, left, bottom, right = geom.bbox
    band_lo, band_hi = geom.core_band
    h = geom.band_height
    mid = (band_lo + band_hi) / 2.0

    if stroke_type is StrokeType.SINGLE:
        paths = [_single_path(rng, geom, base_y=mid)]
    elif stroke_type is StrokeType.DOUBLE:
        offset = rng.uniform(0.6, 1.0) * h
        paths = [
            _single_path(rng, geom, base_y=mid - offset / 2.0),
            _single_path(rng, geom, base_y=mid + offset / 2.0),
        ]
    elif stroke_type is StrokeType.DIAGONAL:
        paths = [_diagonal_path(rng, geom, downward=bool(rng.integers(2)))]
    elif stroke_type is StrokeType.CROSS:
        downward = bool(rng.integers(2))
        paths = [
            _diagonal_path(rng, geom, downward=downward),
            _diagonal_path(rng, geom, downward=not downward),
        ]
    elif stroke_type in (StrokeType.ZIGZAG, StrokeType.WAVE):
        paths = [_zigzag_path(rng, geom)]
    elif stroke_type is StrokeType.SCRATCH:
        n = int(rng.integers(3, 8))
        span = max(h, 2.0)
        paths = []
        for _ in range(n):
            base = mid + rng.uniform(-0.75, 0.75) * span
            base = float(np.clip(base, top, bottom))
            paths.append(_single_path(rng, geom, base_y=base, y_lo=top, y_hi=bottom, jitter=0.3 * span))
    else:  # pragma: no cover - enum is closed
        raise ValueError(f"unknown stroke type {stroke_type}")

    brush = max(1.0, geom.pen_width * rng.uniform(0.75, 1.25))
    intensity = float(np.clip(rng.uniform(0.85, 1.0) * geom.ink_level, 0.05, 1.0))
    return StrokeSpec(
        type=stroke_type,
        seed=seed,
        control_points=paths,
        brush_width=brush,
        intensity=intensity,
        image_id=image_id,
    )


def _x_span(rng: np.random.Generator, geom: InkGeometry) -> tuple[float, float]:
    """Horizontal extent of a stroke: the bbox width, inset by at most 5%
    per side so coverage stays above 80%."""
    left, right = geom.bbox[1], geom.bbox[3]
    w = geom.box_width
    return left + rng.uniform(0.0, 0.05) * w, right - rng.uniform(0.0, 0.05) * w


def _single_path(
    rng: np.random.Generator,
    geom: InkGeometry,
    base_y: float,
    y_lo: float | None = None,
    y_hi: float | None = None,
    jitter: float | None = None,
) -> Polyline:
    """A near-horizontal 4-segment polyline with per-vertex y-jitter."""
    band_lo, band_hi = geom.core_band
    lo = band_lo if y_lo is None else y_lo
    hi = band_hi if y_hi is None else y_hi
    jit = 0.2 * geom.band_height if jitter is None else jitter
    x0, x1 = _x_span(rng, geom)
    slope = math.tan(math.radians(rng.uniform(-3.0, 3.0)))
    xc = (x0 + x1) / 2.0
    xs = np.linspace(x0, x1, 5)
    ys = base_y + slope * (xs - xc) + rng.uniform(-jit, jit, size=5)
    ys = np.clip(ys, lo, hi)
    return [(float(x), float(y)) for x, y in zip(xs, ys)]


def _diagonal_path(rng: np.random.Generator, geom: InkGeometry, downward: bool) -> Polyline:
    """Corner-to-corner straight line with +-5% endpoint jitter."""
    top, left, bottom, right = geom.bbox
    jx = 0.05 * geom.box_width
    jy = 0.05 * geom.box_height
    y_start, y_end = (top, bottom) if downward else (bottom, top)
    x0 = float(np.clip(left + rng.uniform(-jx, jx), left, right))
    x1 = float(np.clip(right + rng.uniform(-jx, jx), left, right))
    y0 = float(np.clip(y_start + rng.uniform(-jy, jy), top, bottom))
    y1 = float(np.clip(y_end + rng.uniform(-jy, jy), top, bottom))
    return [(x0, y0), (x1, y1)]


def _zigzag_path(rng: np.random.Generator, geom: InkGeometry) -> Polyline:
    """Triangular wave across the word: 3-6 periods, peak-to-peak amplitude
    between half and the full core-band height."""
    band_lo, band_hi = geom.core_band
    mid = (band_lo + band_hi) / 2.0
    amplitude = rng.uniform(0.5, 1.0) * geom.band_height  # peak to peak
    periods = int(rng.integers(3, 7))
    sign = 1.0 if rng.integers(2) else -1.0
    x0, x1 = _x_span(rng, geom)
    n_vertices = 2 * periods + 1
    xs = np.linspace(x0, x1, n_vertices)
    ys = [mid + sign * (amplitude / 2.0) * (1 if i % 2 == 0 else -1) for i in range(n_vertices)]
    ys = np.clip(ys, band_lo, band_hi)
    return [(float(x), float(y)) for x, y in zip(xs, ys)]


# ---------------------------------------------------------------------------
# rendering


def _smooth_wave(vertices: Polyline, samples_per_segment: int = 16) -> Polyline:
    """Quadratic Bezier chain through segment midpoints with the zigzag
    vertices acting as the alternating control points."""
    if len(vertices) < 3:
        return list(vertices)
    pts = np.asarray(vertices, dtype=np.float64)
    mids = (pts[:-1] + pts[1:]) / 2.0
    t = np.linspace(0.0, 1.0, samples_per_segment)[:, None]
    out = [tuple(pts[0])]
    anchors = np.vstack([pts[0], mids[1:-1], pts[-1]]) if len(pts) > 3 else np.vstack([pts[0], pts[-1]])
    # quadratic Bezier between consecutive anchors, controlled by the vertex between them
    for i in range(1, len(pts) - 1):
        p0 = anchors[i - 1]
        c = pts[i]
        p1 = anchors[i]
        curve = (1 - t) ** 2 * p0 + 2 * (1 - t) * t * c + t**2 * p1
        out.extend(tuple(p) for p in curve[1:])
    return [(float(x), float(y)) for x, y in out]


def _segment_distance_field(canvas: tuple[int, int], paths: Iterable[Polyline], reach: float) -> np.ndarray:
    """Minimum distance from each pixel centre to any path segment, computed
    only within ``reach`` of each segment's bounding box."""
    h, w = canvas
    dist = np.full((h, w), np.inf, dtype=np.float64)
    pad = int(math.ceil(reach)) + 1
    for path in paths:
        pts = np.asarray(path, dtype=np.float64)
        for (x0, y0), (x1, y1) in zip(pts[:-1], pts[1:]):
            r0 = max(0, int(math.floor(min(y0, y1))) - pad)
            r1 = min(h, int(math.ceil(max(y0, y1))) + pad + 1)
            c0 = max(0, int(math.floor(min(x0, x1))) - pad)
            c1 = min(w, int(math.ceil(max(x0, x1))) + pad + 1)
            if r0 >= r1 or c0 >= c1:
                continue
            yy, xx = np.mgrid[r0:r1, c0:c1]
            dx, dy = x1 - x0, y1 - y0
            seg_len2 = dx * dx + dy * dy
            if seg_len2 == 0.0:
                d = np.hypot(xx - x0, yy - y0)
            else:
                t = ((xx - x0) * dx + (yy - y0) * dy) / seg_len2
                t = np.clip(t, 0.0, 1.0)
                d = np.hypot(xx - (x0 + t * dx), yy - (y0 + t * dy))
            np.minimum(dist[r0:r1, c0:c1], d, out=dist[r0:r1, c0:c1])
    return dist


def render_stroke(spec: StrokeSpec, canvas: tuple[int, int]) -> tuple[GrayImage, BinaryImage]:
    """Rasterise a stroke spec onto an empty inverted-polarity canvas.

    A round brush of diameter ``brush_width`` sweeps the path; pixel
    coverage falls off linearly across the brush edge (one-pixel
    anti-aliasing ramp).  The mask contains every touched pixel, so the
    layer is exactly 0 wherever the mask is False.
    """
    paths: list[Polyline] = list(spec.control_points)
    if spec.type is StrokeType.WAVE:
        paths = [_smooth_wave(p) for p in paths]
    radius = spec.brush_width / 2.0
    dist = _segment_distance_field(canvas, paths, reach=radius + 1.0)
    coverage = np.clip(radius + 0.5 - dist, 0.0, 1.0)
    layer = (coverage * spec.intensity).astype(np.float32)
    return GrayImage(layer, Polarity.INVERTED), BinaryImage(coverage > 0.0)


def apply_strikethrough(
    clean: GrayImage,
    stroke_type: StrokeType,
    seed: int,
    image_id: str = "",
) -> tuple[GrayImage, BinaryImage, StrokeSpec]:
    """Sample, render and composite one stroke over a clean word image.

    Compositing is pixelwise max in inverted space; the struck image equals
    the clean one everywhere off the stroke mask.
    """
    geom = estimate_ink_geometry(clean)
    rng = np.random.default_rng(seed)
    spec = sample_stroke(stroke_type, geom, rng, image_id=image_id, seed=seed)
    layer, mask = render_stroke(spec, clean.shape)
    struck = np.maximum(clean.pixels, layer.pixels)
    return GrayImage(struck, Polarity.INVERTED), mask, spec


def generate_partition(
    clean_set: Sequence[tuple[str, GrayImage]],
    global_seed: int,
) -> list[tuple[str, GrayImage, GrayImage, BinaryImage, StrokeSpec]]:
    """Strike every clean image once, choosing the stroke type uniformly.

    Each image gets its own generator seeded from (global_seed, image id),
    so the partition does not depend on corpus order and replays exactly.
    Returns (id, struck, clean, mask, spec) tuples; images are in inverted
    polarity.
    """
    if not clean_set:
        raise ValueError("clean_set is empty")
    types = list(StrokeType)
    out = []
    for image_id, clean in clean_set:
        per_image = np.random.default_rng(derive_seed(global_seed, image_id))
        stroke_type = types[int(per_image.integers(len(types)))]
        stroke_seed = int(per_image.integers(2**63))
        struck, mask, spec = apply_strikethrough(clean, stroke_type, stroke_seed, image_id=image_id)
        out.append((image_id, struck, clean, mask, spec))
    return out


def write_partition(
    partition: Iterable[tuple[str, GrayImage, GrayImage, BinaryImage, StrokeSpec]],
    out_dir: str | Path,
) -> None:
    """Emit the on-disk partition layout:

    ``struck/<id>.png``, ``clean/<id>.png``, ``masks/<id>.png`` (display
    polarity PNGs) plus ``strokes.json`` with every stroke spec.
    """
    out = Path(out_dir)
    specs = []
    for image_id, struck, clean, mask, spec in partition:
        save_image(struck, out / "struck" / f"{image_id}.png")
        save_image(clean, out / "clean" / f"{image_id}.png")
        mask_img = GrayImage(mask.mask.astype(np.float32), Polarity.INVERTED)
        save_image(mask_img, out / "masks" / f"{image_id}.png")
        specs.append(spec.to_dict())
    with open(out / "strokes.json", "w", encoding="utf-8") as fh:
        json.dump(specs, fh, indent=1, sort_keys=True)
        fh.write("\n")
