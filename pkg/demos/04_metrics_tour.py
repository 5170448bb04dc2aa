"""Tour of the pixel-level metrics on tiny hand-checkable examples.

    python demos/04_metrics_tour.py
"""

import numpy as np

from destrike.evaluation import (
    PixelCounts,
    detection_rate,
    f1_score,
    pixel_counts,
    recognition_accuracy,
    rmse,
)
from destrike.imaging import BinaryImage, GrayImage, otsu_binarize

print("== detection rate / recognition accuracy / F1 ==")
truth = BinaryImage(np.array([[1, 1, 0], [1, 1, 0], [0, 0, 0]], dtype=bool))
pred = BinaryImage(np.array([[1, 0, 0], [0, 1, 0], [0, 0, 0]], dtype=bool))
c = pixel_counts(pred, truth)
print(f"counts: ground-truth ink N={c.n}, predicted ink M={c.m}, overlap O2O={c.o2o}")
print(f"DR = O2O/N = {detection_rate(c):.4f}")
print(f"RA = O2O/M = {recognition_accuracy(c):.4f}")
print(f"F1 = harmonic mean = {f1_score(c):.4f}")

print("\n== degenerate conventions ==")
print(f"both masks blank      -> F1 {f1_score(PixelCounts(0, 0, 0))}")
print(f"prediction blank only -> F1 {f1_score(PixelCounts(5, 0, 0))}")

print("\n== Otsu binarisation ==")
px = np.full((6, 6), 0.85, dtype=np.float32)
px[2:4, 1:5] = 0.15  # dark ink bar
mask = otsu_binarize(GrayImage(px))
print(f"ink pixels found: {mask.ink_count} (expected 8)")
print(mask.mask.astype(int))

print("\n== RMSE ==")
a = GrayImage(np.array([[0.0, 0.0], [1.0, 1.0]], dtype=np.float32))
b = GrayImage(np.array([[0.0, 1.0], [1.0, 1.0]], dtype=np.float32))
print(f"2x2 fixture: {rmse(a, b)} (expected 0.5)")
