"""Grayscale image primitives shared by the whole pipeline.

Images travel through the code in one of two polarities:

* ``display``: ink is dark, background bright -- what PNG files look like.
* ``inverted``: ink is bright, background is 0 -- what the networks see.

``preprocess`` maps an inverted word image into the fixed 1x128x512 network
frame (scale to height 128, pad right with background); ``postprocess``
undoes the geometry exactly and returns to display polarity.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

NETWORK_HEIGHT = 128
NETWORK_WIDTH = 512

# ITU-R 601 luma weights used when collapsing color inputs.
_LUMA = np.array([0.299, 0.587, 0.114], dtype=np.float64)


class Polarity(enum.Enum):
    DISPLAY = "display"  # ink dark
    INVERTED = "inverted"  # ink bright


class ImagingError(ValueError):
    """Invalid image content or inconsistent processing metadata."""


@dataclass(frozen=True)
class GrayImage:
    """A 2-D intensity image in [0, 1] with an explicit polarity flag."""

    pixels: np.ndarray
    polarity: Polarity = Polarity.DISPLAY

    def __post_init__(self) -> None:
        px = self.pixels
        if px.ndim != 2 or px.shape[0] < 1 or px.shape[1] < 1:
            raise ImagingError(f"expected a non-empty 2-D array, got shape {px.shape}")
        if px.dtype not in (np.float32, np.float64):
            raise ImagingError(f"expected float pixels, got dtype {px.dtype}")
        lo, hi = float(px.min()), float(px.max())
        if lo < 0.0 or hi > 1.0:
            raise ImagingError(f"intensities outside [0, 1]: min={lo}, max={hi}")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape  # type: ignore[return-value]


@dataclass(frozen=True)
class BinaryImage:
    """Boolean ink mask; True marks ink pixels."""

    mask: np.ndarray

    def __post_init__(self) -> None:
        if self.mask.ndim != 2 or self.mask.dtype != bool:
            raise ImagingError(f"expected a 2-D bool mask, got {self.mask.dtype}{self.mask.shape}")

    @property
    def height(self) -> int:
        return self.mask.shape[0]

    @property
    def width(self) -> int:
        return self.mask.shape[1]

    @property
    def ink_count(self) -> int:
        return int(self.mask.sum())


@dataclass(frozen=True)
class ProcessingMeta:
    """Records how an image was fitted into the 128x512 frame.

    ``scale_factor`` is the content scale (network pixels per original
    pixel); ``pad_right``/``pad_bottom`` the number of padded columns/rows.
    """

    original_height: int
    original_width: int
    scale_factor: float
    pad_right: int
    pad_bottom: int

    def __post_init__(self) -> None:
        if self.original_height < 1 or self.original_width < 1:
            raise ImagingError("original dimensions must be positive")
        if self.scale_factor <= 0:
            raise ImagingError("scale_factor must be positive")
        if self.pad_right < 0 or self.pad_bottom < 0:
            raise ImagingError("padding must be non-negative")

    @property
    def content_height(self) -> int:
        return NETWORK_HEIGHT - self.pad_bottom

    @property
    def content_width(self) -> int:
        return NETWORK_WIDTH - self.pad_right


def invert(img: GrayImage) -> GrayImage:
    """Flip ink/background intensities (involutive) and the polarity flag."""
    flipped = Polarity.INVERTED if img.polarity is Polarity.DISPLAY else Polarity.DISPLAY
    return GrayImage((1.0 - img.pixels).astype(img.pixels.dtype, copy=False), flipped)


def _resize_bilinear(pixels: np.ndarray, height: int, width: int) -> np.ndarray:
    """Classic bilinear resample to (height, width).

    Output pixel centres map onto input coordinates (half-pixel aligned),
    edges replicate.  Plain two-neighbour interpolation, no antialias, so
    linear ramps reproduce exactly and the round-trip error budget holds.
    """
    if pixels.shape == (height, width):
        return pixels.copy()
    src = pixels.astype(np.float64)
    h, w = src.shape
    ys = (np.arange(height, dtype=np.float64) + 0.5) * (h / height) - 0.5
    xs = (np.arange(width, dtype=np.float64) + 0.5) * (w / width) - 0.5
    y0 = np.floor(ys)
    x0 = np.floor(xs)
    wy = (ys - y0)[:, None]
    wx = (xs - x0)[None, :]
    y0i = np.clip(y0.astype(np.int64), 0, h - 1)
    y1i = np.clip(y0i + 1, 0, h - 1)
    x0i = np.clip(x0.astype(np.int64), 0, w - 1)
    x1i = np.clip(x0i + 1, 0, w - 1)
    top = (1.0 - wx) * src[y0i[:, None], x0i[None, :]] + wx * src[y0i[:, None], x1i[None, :]]
    bot = (1.0 - wx) * src[y1i[:, None], x0i[None, :]] + wx * src[y1i[:, None], x1i[None, :]]
    out = (1.0 - wy) * top + wy * bot
    return np.clip(out, 0.0, 1.0).astype(np.float32)


def preprocess(img: GrayImage) -> tuple[GrayImage, ProcessingMeta]:
    """Fit an inverted word image into the fixed 128x512 network frame.

    Content is scaled to height 128 preserving aspect ratio and padded on
    the right with background (0).  If the scaled width would exceed 512,
    the image is instead scaled to width 512 and padded at the bottom.
    """
    if img.polarity is not Polarity.INVERTED:
        raise ImagingError("preprocess expects inverted polarity (background = 0)")
    h, w = img.shape
    scaled_w = max(1, round(w * NETWORK_HEIGHT / h))
    if scaled_w <= NETWORK_WIDTH:
        content_h, content_w = NETWORK_HEIGHT, scaled_w
        scale = NETWORK_HEIGHT / h
    else:
        content_h = max(1, round(h * NETWORK_WIDTH / w))
        content_w = NETWORK_WIDTH
        scale = NETWORK_WIDTH / w
    content = _resize_bilinear(img.pixels, content_h, content_w)
    frame = np.zeros((NETWORK_HEIGHT, NETWORK_WIDTH), dtype=np.float32)
    frame[:content_h, :content_w] = content
    meta = ProcessingMeta(
        original_height=h,
        original_width=w,
        scale_factor=scale,
        pad_right=NETWORK_WIDTH - content_w,
        pad_bottom=NETWORK_HEIGHT - content_h,
    )
    return GrayImage(frame, Polarity.INVERTED), meta


def postprocess(img: GrayImage, meta: ProcessingMeta) -> GrayImage:
    """Undo ``preprocess``: crop padding, rescale to the original size, flip
    back to display polarity."""
    if img.shape != (NETWORK_HEIGHT, NETWORK_WIDTH):
        raise ImagingError(f"postprocess expects a {NETWORK_HEIGHT}x{NETWORK_WIDTH} frame, got {img.shape}")
    if img.polarity is not Polarity.INVERTED:
        raise ImagingError("postprocess expects inverted polarity (network output space)")
    if meta.content_height < 1 or meta.content_width < 1:
        raise ImagingError(f"meta inconsistent with the network frame: {meta}")
    content = img.pixels[: meta.content_height, : meta.content_width]
    restored = _resize_bilinear(content, meta.original_height, meta.original_width)
    restored = (1.0 - restored).astype(np.float32)
    return GrayImage(np.clip(restored, 0.0, 1.0), Polarity.DISPLAY)


def otsu_binarize(img: GrayImage) -> BinaryImage:
    """Threshold a display-polarity image by maximising between-class variance.

    A 256-bin histogram over [0, 1] is used; ties go to the smallest
    threshold and the dark class is declared ink.  Constant images have no
    variance to split and yield an empty mask.
    """
    if img.polarity is not Polarity.DISPLAY:
        raise ImagingError("otsu_binarize expects display polarity (ink dark)")
    bins = _histogram_bins(img.pixels)
    k = otsu_threshold_bin(np.bincount(bins.ravel(), minlength=256))
    if k < 0:
        return BinaryImage(np.zeros(img.shape, dtype=bool))
    return BinaryImage(bins <= k)


def otsu_threshold_bin(hist: np.ndarray) -> int:
    """Index of the last histogram bin of the dark class, or -1 when the
    histogram has no between-class variance at any split."""
    hist = hist.astype(np.float64)
    total = hist.sum()
    idx = np.arange(hist.size, dtype=np.float64)
    w0 = np.cumsum(hist)
    w1 = total - w0
    sum0 = np.cumsum(hist * idx)
    sum_total = sum0[-1]
    valid = (w0 > 0) & (w1 > 0)
    bcv = np.zeros(hist.size, dtype=np.float64)
    # between-class variance: w0*w1*(mu0-mu1)^2, written division-free safe
    np.divide(
        (sum_total * w0 - sum0 * total) ** 2,
        w0 * w1 * total * total,
        out=bcv,
        where=valid,
    )
    if not valid.any() or bcv.max() == 0.0:
        return -1
    return int(bcv.argmax())


def _histogram_bins(pixels: np.ndarray) -> np.ndarray:
    """Map [0, 1] intensities onto 256 uniform bins (1.0 joins the top bin)."""
    return np.minimum((pixels * 256.0).astype(np.int64), 255)


def load_image(path: str | Path) -> GrayImage:
    """Read a PNG (or any PIL-readable file) as a display-polarity image.

    8-bit values map to [0, 1] by dividing by 255; color inputs collapse
    via the 0.299/0.587/0.114 luma combination.
    """
    with Image.open(path) as im:
        if im.mode not in ("L", "I", "F", "RGB", "RGBA"):
            im = im.convert("RGB")  # palette / alpha-gray variants
        arr = np.asarray(im)
    if arr.ndim == 3:
        arr = arr[:, :, :3].astype(np.float64) @ _LUMA
    if arr.dtype == np.uint8 or arr.max() > 1.0:
        arr = arr / 255.0
    return GrayImage(np.clip(arr, 0.0, 1.0).astype(np.float32), Polarity.DISPLAY)


def save_image(img: GrayImage, path: str | Path) -> None:
    """Write an 8-bit grayscale PNG; display polarity, rounding half-up."""
    if img.polarity is not Polarity.DISPLAY:
        img = invert(img)
    data = np.floor(img.pixels.astype(np.float64) * 255.0 + 0.5).astype(np.uint8)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(data, mode="L").save(path)
