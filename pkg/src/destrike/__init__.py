"""Strikethrough removal from handwritten words via paired image-to-image translation.

The package is organised around a small pipeline:

``imaging``
    grayscale image primitives: loading, polarity inversion, the fixed
    128x512 network geometry and Otsu binarisation.
``strokegen``
    seeded synthesis of the seven strikethrough stroke types on clean
    word images, producing paired (struck, clean) data plus stroke masks.
``dataset``
    manifests, split handling, partition aggregation and pair loading.
``models``
    the four translation networks (simple_cnn, shallow, unet, generator).
``training``
    per-pixel cross-entropy training with best-epoch retention and
    repeated seeded runs.
``evaluation``
    pixel-level detection rate / recognition accuracy / F1, RMSE, run
    aggregation and mean-image rendering.
``cli``
    the ``destrike`` command: synth, train, evaluate, clean, mean-image,
    fetch, report.
"""

from destrike.imaging import (
    BinaryImage,
    GrayImage,
    Polarity,
    ProcessingMeta,
    invert,
    load_image,
    otsu_binarize,
    postprocess,
    preprocess,
    save_image,
)
from destrike.strokegen import (
    InkGeometry,
    StrokeSpec,
    StrokeType,
    apply_strikethrough,
    estimate_ink_geometry,
    generate_partition,
    render_stroke,
    sample_stroke,
)

__version__ = "0.1.0"

__all__ = [
    "BinaryImage",
    "GrayImage",
    "InkGeometry",
    "Polarity",
    "ProcessingMeta",
    "StrokeSpec",
    "StrokeType",
    "apply_strikethrough",
    "estimate_ink_geometry",
    "generate_partition",
    "invert",
    "load_image",
    "otsu_binarize",
    "postprocess",
    "preprocess",
    "render_stroke",
    "sample_stroke",
    "save_image",
]
