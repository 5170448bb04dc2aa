"""Qualitative stability check: average the outputs of several retrained
models on the same struck word.  Crisp mean images mean the repetitions
agree; blur means they disagree.

    python demos/05_mean_image.py [work_dir]
"""

import sys
from pathlib import Path

from destrike import dataset as ds
from destrike.cli import main
from destrike.evaluation import mean_image
from destrike.imaging import load_image, save_image
from destrike.training import TrainConfig, train_many
from destrike.wordgen import render_corpus

work = Path(sys.argv[1] if len(sys.argv) > 1 else "demo-output/mean-image")
render_corpus(work / "clean", n_words=16, seed=21)
rc = main(["synth", "--clean-dir", str(work / "clean"), "--out", str(work / "data"),
           "--partitions", "2", "--seed", "6", "--name", "demo"])
assert rc == 0

manifest = ds.load_manifest(work / "data" / "manifest.json")
train_pairs = ds.load_pairs(manifest, "partition-0")
val_pairs = ds.load_pairs(manifest, "partition-1")

config = TrainConfig(arch="simple_cnn", epochs=6, run_seed=2, repetitions=3)
print("training 3 repetitions ...")
results = train_many(config, out_dir=work / "runs", data=(train_pairs, val_pairs))
for k, r in enumerate(results):
    print(f"rep-{k}: best epoch {r.best_epoch}, val F1 {r.best_val_f1:.4f}")

struck_png = next((work / "data" / "partition-1" / "struck").glob("*.png"))
mean = mean_image([r.checkpoint for r in results], load_image(struck_png))
out = work / "mean.png"
save_image(mean, out)
print(f"averaged {len(results)} model outputs on {struck_png.name} -> {out}")
