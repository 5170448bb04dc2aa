"""Train a small cleaning network and score it with the pixel metrics.

Renders a mini corpus, synthesises five partitions, trains the shallow
network on a three-partition aggregate and compares it against the
identity baseline (the struck image passed through unchanged).  Takes a
few minutes on one CPU core; the acceptance suite runs the full-size
version of this experiment.

    python demos/03_train_and_evaluate.py [work_dir]
"""

import sys
from pathlib import Path

from destrike import dataset as ds
from destrike.cli import main
from destrike.evaluation import IdentityCleaner, evaluate_pairs, report_table, summarize_runs
from destrike.models import load_checkpoint
from destrike.training import TrainConfig, train_run
from destrike.wordgen import render_corpus

work = Path(sys.argv[1] if len(sys.argv) > 1 else "demo-output/training")
render_corpus(work / "clean", n_words=24, seed=11)
rc = main(["synth", "--clean-dir", str(work / "clean"), "--out", str(work / "data"),
           "--partitions", "5", "--seed", "5", "--name", "demo"])
assert rc == 0

manifest = ds.load_manifest(work / "data" / "manifest.json")
train_parts = ["partition-0", "partition-1", "partition-2"]
train_pairs = [ds.load_entry(e)
               for e in ds.aggregate_partitions(manifest, train_parts)]
val_pairs = ds.load_pairs(manifest, "partition-3")
test_pairs = ds.load_pairs(manifest, "partition-4")
print(f"{len(train_pairs)} train / {len(val_pairs)} val / {len(test_pairs)} test pairs")

config = TrainConfig(arch="shallow", epochs=12, batch_size=4, run_seed=1)
print(f"training {config.arch} for {config.epochs} epochs ...")
result = train_run(config, run_dir=work / "run", data=(train_pairs, val_pairs))
print(f"best epoch {result.best_epoch} with validation F1 {result.best_val_f1:.4f}")

model = load_checkpoint(result.checkpoint)
_, trained = evaluate_pairs(model, test_pairs)
_, baseline = evaluate_pairs(IdentityCleaner(), test_pairs)

print()
print(report_table({
    "shallow": summarize_runs([trained]),
    "identity-baseline": summarize_runs([baseline]),
}))
print("\nper-stroke-type F1 (trained):")
for name, scores in trained.per_type.items():
    print(f"  {name:9s} {scores.f1:.4f}")
