"""Pixel-level cleaning metrics and run aggregation.

For one image pair, the cleaned output is restored to its original size,
both it and the ground truth are Otsu-binarised, and ink pixels are
compared: with N the ground-truth ink count, M the cleaned-output ink
count and O2O their overlap,

    detection rate       DR = O2O / N
    recognition accuracy RA = O2O / M
    F1 = 2 * DR * RA / (DR + RA)

The grayscale discrepancy is reported as the RMSE of the two display-
polarity images.  Blank-image conventions: when both masks are empty the
scores are 1 (perfect agreement); when exactly one is empty the undefined
ratio counts as 0 and F1 is 0.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from destrike.dataset import ImagePair
from destrike.imaging import (
    BinaryImage,
    GrayImage,
    Polarity,
    invert,
    otsu_binarize,
    postprocess,
    preprocess,
)
from destrike.models import Model, load_checkpoint
from destrike.strokegen import StrokeType


class Cleaner(Protocol):
    """Anything that maps a Bx1x128x512 batch to probabilities of ink."""

    def predict(self, batch: np.ndarray) -> np.ndarray: ...


class IdentityCleaner:
    """The do-nothing baseline: returns the struck input unchanged."""

    def predict(self, batch: np.ndarray) -> np.ndarray:
        return batch


@dataclass(frozen=True)
class PixelCounts:
    n: int  # ground-truth ink pixels
    m: int  # cleaned-output ink pixels
    o2o: int  # matching ink pixels

    def __post_init__(self) -> None:
        if min(self.n, self.m, self.o2o) < 0 or self.o2o > min(self.n, self.m):
            raise ValueError(f"inconsistent counts {self}")


def pixel_counts(pred: BinaryImage, truth: BinaryImage) -> PixelCounts:
    if pred.mask.shape != truth.mask.shape:
        raise ValueError(f"mask shapes differ: {pred.mask.shape} vs {truth.mask.shape}")
    return PixelCounts(
        n=int(truth.mask.sum()),
        m=int(pred.mask.sum()),
        o2o=int((pred.mask & truth.mask).sum()),
    )


def detection_rate(c: PixelCounts) -> float:
    if c.n == 0:
        return 1.0 if c.m == 0 else 0.0
    return c.o2o / c.n


def recognition_accuracy(c: PixelCounts) -> float:
    if c.m == 0:
        return 1.0 if c.n == 0 else 0.0
    return c.o2o / c.m


def f1_score(c: PixelCounts) -> float:
    dr = detection_rate(c)
    ra = recognition_accuracy(c)
    if dr + ra == 0.0:
        return 0.0
    return 2.0 * dr * ra / (dr + ra)


def rmse(pred: GrayImage, truth: GrayImage) -> float:
    """Root mean square error of two display-polarity grayscale images."""
    if pred.shape != truth.shape:
        raise ValueError(f"image shapes differ: {pred.shape} vs {truth.shape}")
    if pred.polarity is not Polarity.DISPLAY or truth.polarity is not Polarity.DISPLAY:
        raise ValueError("rmse expects display-polarity images")
    diff = pred.pixels.astype(np.float64) - truth.pixels.astype(np.float64)
    return float(math.sqrt(np.mean(diff * diff)))


# ---------------------------------------------------------------------------
# whole-model evaluation


@dataclass(frozen=True)
class PairRecord:
    id: str
    stroke_type: StrokeType | None
    f1: float
    rmse: float


@dataclass(frozen=True)
class TypeScores:
    f1: float
    rmse: float


@dataclass(frozen=True)
class MetricSummary:
    mean_f1: float
    std_f1: float
    mean_rmse: float
    std_rmse: float
    n: int
    per_type: dict[str, TypeScores] = field(default_factory=dict)


def clean_pair(cleaner: Cleaner, pair: ImagePair) -> GrayImage:
    """Run one struck frame through a cleaner and restore the original
    geometry (display polarity, original size)."""
    batch = pair.struck.pixels[None, None]
    out = cleaner.predict(batch)[0, 0]
    return postprocess(GrayImage(out, Polarity.INVERTED), pair.meta)


def evaluate_pairs(
    cleaner: Cleaner,
    pairs: Sequence[ImagePair],
    batch_size: int = 4,
) -> tuple[list[PairRecord], MetricSummary]:
    """Evaluate a cleaner over a split: per-image F1/RMSE plus the summary."""
    records = []
    for start in range(0, len(pairs), batch_size):
        chunk = pairs[start : start + batch_size]
        batch = np.stack([p.struck.pixels for p in chunk])[:, None]
        outs = cleaner.predict(batch)
        for pair, out in zip(chunk, outs):
            restored = postprocess(GrayImage(out[0], Polarity.INVERTED), pair.meta)
            counts = pixel_counts(otsu_binarize(restored), otsu_binarize(pair.clean_orig))
            records.append(
                PairRecord(
                    id=pair.id,
                    stroke_type=pair.stroke_type,
                    f1=f1_score(counts),
                    rmse=rmse(restored, pair.clean_orig),
                )
            )
    return records, summarize_records(records)


def evaluate_model(model: Cleaner, test_pairs: Sequence[ImagePair]) -> tuple[list[PairRecord], MetricSummary]:
    """Alias of :func:`evaluate_pairs` with the trained-model reading."""
    return evaluate_pairs(model, test_pairs)


def _mean_std(values: Sequence[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    # population form: describes exactly the observed set
    return float(arr.mean()), float(arr.std())


def summarize_records(records: Sequence[PairRecord]) -> MetricSummary:
    if not records:
        raise ValueError("no records to summarise")
    mean_f1, std_f1 = _mean_std([r.f1 for r in records])
    mean_rmse, std_rmse = _mean_std([r.rmse for r in records])
    per_type: dict[str, TypeScores] = {}
    typed = [r for r in records if r.stroke_type is not None]
    for st in sorted({r.stroke_type.value for r in typed}):
        group = [r for r in typed if r.stroke_type.value == st]
        per_type[st] = TypeScores(
            f1=float(np.mean([r.f1 for r in group])),
            rmse=float(np.mean([r.rmse for r in group])),
        )
    return MetricSummary(
        mean_f1=mean_f1, std_f1=std_f1,
        mean_rmse=mean_rmse, std_rmse=std_rmse,
        n=len(records), per_type=per_type,
    )


def summarize_runs(results: Sequence[MetricSummary]) -> MetricSummary:
    """Aggregate per-run summaries: mean and population std of the per-run
    means, as reported in the experiment tables."""
    if not results:
        raise ValueError("no run summaries to aggregate")
    mean_f1, std_f1 = _mean_std([r.mean_f1 for r in results])
    mean_rmse, std_rmse = _mean_std([r.mean_rmse for r in results])
    per_type: dict[str, TypeScores] = {}
    keys = sorted({k for r in results for k in r.per_type})
    for k in keys:
        vals = [r.per_type[k] for r in results if k in r.per_type]
        per_type[k] = TypeScores(
            f1=float(np.mean([v.f1 for v in vals])),
            rmse=float(np.mean([v.rmse for v in vals])),
        )
    return MetricSummary(
        mean_f1=mean_f1, std_f1=std_f1,
        mean_rmse=mean_rmse, std_rmse=std_rmse,
        n=len(results), per_type=per_type,
    )


# ---------------------------------------------------------------------------
# qualitative mean images


def mean_image(checkpoints: Sequence[str | Path | Model], struck: GrayImage) -> GrayImage:
    """Pixelwise mean of the restored outputs of several checkpoints of the
    same architecture on one struck word (display polarity input)."""
    if not checkpoints:
        raise ValueError("need at least one checkpoint")
    models = [c if isinstance(c, Model) else load_checkpoint(c) for c in checkpoints]
    archs = {m.arch for m in models}
    if len(archs) > 1:
        raise ValueError(f"mixed architectures {sorted(archs)}; mean image needs one")
    frame, meta = preprocess(invert(struck))
    batch = frame.pixels[None, None]
    acc = np.zeros(struck.shape, dtype=np.float64)
    for m in models:
        out = m.predict(batch)[0, 0]
        acc += postprocess(GrayImage(out, Polarity.INVERTED), meta).pixels
    return GrayImage((acc / len(models)).astype(np.float32), Polarity.DISPLAY)


# ---------------------------------------------------------------------------
# reporting


def format_mean_std(mean: float, std: float) -> str:
    return f"{mean:.4f} (± {std:.4f})"


def report_table(summaries: dict[str, MetricSummary]) -> str:
    """Text table in the experiment-matrix style: one row per model,
    'mean (± std)' per metric."""
    header = ("Model", "F1", "RMSE")
    rows = [header]
    for name in summaries:
        s = summaries[name]
        rows.append((name, format_mean_std(s.mean_f1, s.std_f1),
                     format_mean_std(s.mean_rmse, s.std_rmse)))
    widths = [max(len(r[i]) for r in rows) for i in range(3)]
    lines = []
    for i, row in enumerate(rows):
        lines.append(" | ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        if i == 0:
            lines.append("-+-".join("-" * w for w in widths))
    return "\n".join(lines)


def write_summary_csv(summaries: dict[str, MetricSummary], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["model", "mean_f1", "std_f1", "mean_rmse", "std_rmse", "n"])
        for name, s in summaries.items():
            w.writerow([name, f"{s.mean_f1:.6f}", f"{s.std_f1:.6f}",
                        f"{s.mean_rmse:.6f}", f"{s.std_rmse:.6f}", s.n])


def write_records_csv(records: Sequence[PairRecord], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "stroke_type", "f1", "rmse"])
        for r in records:
            w.writerow([r.id, r.stroke_type.value if r.stroke_type else "",
                        f"{r.f1:.6f}", f"{r.rmse:.6f}"])
