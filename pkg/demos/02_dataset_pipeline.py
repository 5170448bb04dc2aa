"""Build a small paired dataset end to end: render clean words, synthesise
five seeded strikethrough partitions, inspect the manifest and aggregate
the partitions into one training split.

    python demos/02_dataset_pipeline.py [work_dir]
"""

import sys
from pathlib import Path

from destrike import dataset as ds
from destrike.cli import main
from destrike.wordgen import render_corpus

work = Path(sys.argv[1] if len(sys.argv) > 1 else "demo-output/dataset")
clean_dir = work / "clean"
data_dir = work / "data"

print("rendering 20 clean words ...")
render_corpus(clean_dir, n_words=20, seed=3)

print("synthesising 5 partitions (one stroke per word per partition) ...")
rc = main(["synth", "--clean-dir", str(clean_dir), "--out", str(data_dir),
           "--partitions", "5", "--seed", "1234", "--name", "demo"])
assert rc == 0

manifest = ds.load_manifest(data_dir / "manifest.json")
print(f"\nmanifest '{manifest.name}' splits: "
      f"{ {s: len(v) for s, v in manifest.splits.items()} }")

first = manifest.splits["partition-0"][0]
print(f"sample pair: id={first.id} stroke={first.stroke_type.value}")

aggregate = ds.aggregate_partitions(manifest, manifest.partition_names())
print(f"aggregated training split: {len(aggregate)} pairs "
      f"(5 partitions x 20 words)")

pairs = ds.load_pairs(manifest, "partition-0")
p = pairs[0]
print(f"loaded pair '{p.id}': network frames {p.struck.shape}, "
      f"original {p.clean_orig.shape}, stroke type {p.stroke_type.value}")

report = ds.validate_counts(manifest)
print(f"\nsplit-count check: {report.describe()}")
