import numpy as np
import pytest

from destrike.cli import main
from destrike.imaging import GrayImage, Polarity
from destrike.wordgen import render_corpus


def fake_word(
    seed: int, height: int = 48, width: int = 160, ink_level: float | None = None
) -> tuple[GrayImage, tuple[int, int]]:
    """A word-like display-polarity image built from rectangles.

    Most of the ink mass sits in a known x-height body band; a few
    ascenders/descenders stick out.  Returns (image, (body_lo, body_hi)).
    ``ink_level`` pins the ink intensity (1.0 gives binary targets with a
    zero cross-entropy floor); by default levels vary on a dyadic grid so
    polarity inversion stays bit-exact.
    """
    rng = np.random.default_rng(seed)
    ink = np.zeros((height, width), dtype=np.float32)  # inverted space
    body_lo, body_hi = int(height * 0.40), int(height * 0.65)
    asc_top, desc_bot = int(height * 0.18), int(height * 0.88)
    x = 8
    while x < width - 16:
        w = int(rng.integers(5, 11))
        level = float(rng.integers(180, 244)) / 256.0 if ink_level is None else ink_level
        ink[body_lo:body_hi, x : x + w] = level
        accent = int(rng.integers(4))
        if accent == 1:
            ink[asc_top:body_lo, x : x + 2] = level
        elif accent == 2:
            ink[body_hi:desc_bot, x : x + 2] = level
        x += w + int(rng.integers(3, 7))
    return GrayImage(1.0 - ink, Polarity.DISPLAY), (body_lo, body_hi)


def smooth_image(h: int, w: int, seed: int) -> np.ndarray:
    """Bandlimited test content: soft blobs away from the borders, no
    saturation, so resampling error stays within the round-trip budget."""
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    img = np.zeros((h, w))
    rng = np.random.default_rng(seed)
    for _ in range(8):
        cy = rng.uniform(18, h - 18)
        cx = rng.uniform(18, w - 18)
        s = rng.uniform(5.0, 9.0)
        img += 0.45 * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * s * s))
    return np.clip(img, 0.0, 0.95).astype(np.float32)


def native_frame_pairs(n: int, seed: int = 0, ink_level: float | None = None):
    """ImagePairs whose originals are already 128x512: the preprocessing
    geometry is the identity, so restored outputs can match ground truth
    bit-for-bit.  Word content is drawn at a realistic stroke scale and
    pasted into the frame (no resampling anywhere)."""
    from destrike.dataset import ImagePair
    from destrike.imaging import GrayImage, Polarity, invert, preprocess
    from destrike.strokegen import StrokeType, apply_strikethrough

    pairs = []
    types = list(StrokeType)
    for i in range(n):
        content, _ = fake_word(seed + i, height=48, width=440, ink_level=ink_level)
        canvas = np.ones((128, 512), dtype=np.float32)
        canvas[40:88, 36:476] = content.pixels
        word = GrayImage(canvas, Polarity.DISPLAY)
        clean_inv = invert(word)
        struck, _, spec = apply_strikethrough(clean_inv, types[i % len(types)], seed=seed + i)
        struck_pre, meta = preprocess(struck)
        clean_pre, _ = preprocess(clean_inv)
        assert meta.pad_right == 0 and meta.pad_bottom == 0
        pairs.append(ImagePair(
            id=f"native-{i:02d}", struck=struck_pre, clean=clean_pre,
            meta=meta, clean_orig=word, stroke_type=spec.type,
        ))
    return pairs


@pytest.fixture(scope="session")
def clean_words_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("clean-words")
    render_corpus(root, n_words=10, seed=77)
    return root


@pytest.fixture(scope="session")
def dataset_root(tmp_path_factory, clean_words_dir):
    """A small synthesised dataset: two partitions of ten words."""
    out = tmp_path_factory.mktemp("dataset")
    rc = main([
        "synth", "--clean-dir", str(clean_words_dir), "--out", str(out),
        "--partitions", "2", "--seed", "4242", "--name", "fixture",
    ])
    assert rc == 0
    return out


@pytest.fixture(scope="session")
def fixture_pairs(dataset_root):
    from destrike.dataset import load_manifest, load_pairs

    manifest = load_manifest(dataset_root / "manifest.json")
    return load_pairs(manifest, "partition-0"), load_pairs(manifest, "partition-1")
