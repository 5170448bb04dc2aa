"""Rendered-text fallback corpus.

When the published scans cannot be fetched, the pipeline still needs clean
word images to strike through.  This module renders pseudo-words (random
pronounceable syllables, so ascenders and descenders occur naturally) as
dark-ink-on-white PNGs with slight per-word rotation.  Deterministic for a
given seed and font.
"""

from __future__ import annotations

import glob
import os
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw, ImageFont

from destrike.imaging import GrayImage, Polarity

_FONT_CANDIDATES = [
    "DejaVuSerif-Italic.ttf",
    "DejaVuSans-Oblique.ttf",
    "DejaVuSerif.ttf",
    "DejaVuSans.ttf",
]
_FONT_ROOTS = [
    "/usr/share/fonts",
    "/usr/local/share/fonts",
    os.path.expanduser("~/.fonts"),
]

_ONSETS = list("bcdfghjklmnprstvw") + ["br", "ch", "cl", "gr", "sh", "st", "th", "tr"]
_VOWELS = ["a", "e", "i", "o", "u", "ai", "ea", "ou"]
_CODAS = ["", "", "n", "r", "s", "t", "l", "ck", "ng", "st"]


def find_font(explicit: str | None = None) -> str | None:
    """Path of a usable TTF, or None to fall back to PIL's built-in font.

    Resolution order: explicit argument, the DESTRIKE_FONT environment
    variable, system font directories, matplotlib's bundled DejaVu set.
    """
    if explicit:
        return explicit
    env = os.environ.get("DESTRIKE_FONT")
    if env:
        return env
    roots = list(_FONT_ROOTS)
    try:
        import matplotlib

        roots.append(os.path.join(os.path.dirname(matplotlib.__file__), "mpl-data", "fonts"))
    except ImportError:
        pass
    for name in _FONT_CANDIDATES:
        for root in roots:
            hits = glob.glob(os.path.join(root, "**", name), recursive=True)
            if hits:
                return sorted(hits)[0]
    return None


def _load_font(path: str | None, size: int) -> ImageFont.FreeTypeFont:
    if path is None:
        return ImageFont.load_default(size=size)
    return ImageFont.truetype(path, size=size)


def random_word(rng: np.random.Generator) -> str:
    """A pronounceable pseudo-word of 1-4 syllables."""
    n = int(rng.integers(1, 5))
    word = "".join(
        _ONSETS[rng.integers(len(_ONSETS))]
        + _VOWELS[rng.integers(len(_VOWELS))]
        + _CODAS[rng.integers(len(_CODAS))]
        for _ in range(n)
    )
    return word


def render_word(
    word: str,
    rng: np.random.Generator,
    font_path: str | None = None,
    font_size: int = 44,
) -> GrayImage:
    """One word as a display-polarity image: dark ink, white page, a few
    pixels of margin, up to +-2.5 degrees of rotation."""
    font = _load_font(font_path, font_size)
    left, top, right, bottom = font.getbbox(word)
    w, h = right - left, bottom - top
    margin = max(6, font_size // 6)
    canvas = Image.new("L", (w + 2 * margin, h + 2 * margin), color=255)
    draw = ImageDraw.Draw(canvas)
    ink = int(rng.integers(10, 60))
    draw.text((margin - left, margin - top), word, font=font, fill=ink)
    angle = float(rng.uniform(-2.5, 2.5))
    canvas = canvas.rotate(angle, resample=Image.Resampling.BILINEAR, expand=True, fillcolor=255)
    arr = np.asarray(canvas, dtype=np.float32) / 255.0
    return GrayImage(arr, Polarity.DISPLAY)


def render_corpus(
    out_dir: str | Path,
    n_words: int,
    seed: int,
    font_path: str | None = None,
    font_size: int = 44,
) -> list[Path]:
    """Render ``n_words`` clean word PNGs into ``out_dir``.

    File names are ``word-0000.png`` onward; returns the written paths.
    """
    from destrike.imaging import save_image

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    font = font_path if font_path is not None else find_font()
    rng = np.random.default_rng(seed)
    paths = []
    for i in range(n_words):
        img = render_word(random_word(rng), rng, font_path=font, font_size=font_size)
        p = out / f"word-{i:04d}.png"
        save_image(img, p)
        paths.append(p)
    return paths
