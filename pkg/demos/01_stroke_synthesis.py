"""Walk through the stroke synthesiser: estimate where a word sits, then
apply each of the seven strikethrough types to it and save a contact sheet.

    python demos/01_stroke_synthesis.py [out_dir]

Outputs one PNG per stroke type plus strokes.json-style records printed to
the console.
"""

import sys
from pathlib import Path

import numpy as np

from destrike.imaging import GrayImage, Polarity, invert, save_image
from destrike.strokegen import StrokeType, apply_strikethrough, estimate_ink_geometry
from destrike.wordgen import render_word

out_dir = Path(sys.argv[1] if len(sys.argv) > 1 else "demo-output/strokes")
out_dir.mkdir(parents=True, exist_ok=True)

rng = np.random.default_rng(7)
word = render_word("penstroke", rng)
save_image(word, out_dir / "clean.png")
print(f"clean word: {word.height}x{word.width} -> {out_dir / 'clean.png'}")

clean_inv = invert(word)
geom = estimate_ink_geometry(clean_inv)
print(f"ink bbox rows {geom.bbox[0]}..{geom.bbox[2]}, cols {geom.bbox[1]}..{geom.bbox[3]}")
print(f"core band rows {geom.core_band[0]}..{geom.core_band[1]}, "
      f"pen width {geom.pen_width:.1f}px, ink level {geom.ink_level:.2f}")

for stroke_type in StrokeType:
    struck, mask, spec = apply_strikethrough(clean_inv, stroke_type, seed=42)
    save_image(struck, out_dir / f"struck-{stroke_type.value}.png")
    save_image(GrayImage(mask.mask.astype(np.float32), Polarity.INVERTED),
               out_dir / f"mask-{stroke_type.value}.png")
    print(f"{stroke_type.value:9s}: {len(spec.control_points)} path(s), "
          f"brush {spec.brush_width:.1f}px, intensity {spec.intensity:.2f}, "
          f"{mask.ink_count} stroke pixels")

print(f"\nwrote images to {out_dir}/")
