"""Command line surface: synth, train, evaluate, clean, mean-image, fetch,
report.

Exit codes: 0 success, 1 validation error (bad config, bad arguments),
2 runtime failure.  Diagnostics go to stderr; results go to files (and the
report table additionally to stdout).
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import yaml

from destrike import dataset as ds
from destrike import evaluation as ev
from destrike.fetch import FetchError, fetch_dataset
from destrike.imaging import GrayImage, Polarity, invert, load_image, postprocess, preprocess, save_image
from destrike.models import ARCH_NAMES, CheckpointError, load_checkpoint
from destrike.strokegen import derive_seed, generate_partition, write_partition
from destrike.training import OptimizerParams, RunResult, TrainConfig, train_run

DESK_TRAIN_CAP = 128
DESK_EVAL_CAP = 64


class CliError(ValueError):
    """User-facing validation problem; exits with code 1."""


@dataclass
class ExperimentConfig:
    """Flat key-value experiment description (one YAML document).

    ``train_split`` selects what the models see: a single partition, the
    special name ``aggregate`` (all partitions combined) or an ordinary
    ``train`` split.
    """

    manifest: str
    output_dir: str
    archs: list[str] = field(default_factory=lambda: list(ARCH_NAMES))
    train_split: str = "train"
    val_split: str = "validation"
    test_split: str = "test"
    epochs: int = 30
    batch_size: int = 4
    learning_rate: float = 1e-3
    repetitions: int = 1
    run_seed: int = 0

    @staticmethod
    def load(path: str | Path) -> "ExperimentConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                doc = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise CliError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise CliError(f"config {path} must be a flat key-value document")
        known = set(ExperimentConfig.__dataclass_fields__)
        problems = [f"unknown key {k!r}" for k in doc if k not in known]
        missing = [k for k in ("manifest", "output_dir") if k not in doc]
        problems += [f"missing required key {k!r}" for k in missing]
        if problems:
            raise CliError("invalid config:\n  " + "\n  ".join(problems))
        cfg = ExperimentConfig(**doc)
        cfg.validate(base=Path(path).resolve().parent)
        return cfg

    def validate(self, base: Path | None = None) -> None:
        problems = []
        if isinstance(self.archs, str):
            self.archs = [self.archs]
        for a in self.archs:
            if a not in ARCH_NAMES:
                problems.append(f"unknown arch {a!r}; expected one of {ARCH_NAMES}")
        if base is not None and not Path(self.manifest).is_absolute():
            self.manifest = str((base / self.manifest).resolve())
        if not Path(self.manifest).is_file():
            problems.append(f"manifest {self.manifest!r} does not exist")
        for name, value in (("epochs", self.epochs), ("batch_size", self.batch_size),
                            ("repetitions", self.repetitions)):
            if not isinstance(value, int) or value < 1:
                problems.append(f"{name} must be a positive integer, got {value!r}")
        if not isinstance(self.run_seed, int):
            problems.append(f"run_seed must be an integer, got {self.run_seed!r}")
        if not (isinstance(self.learning_rate, (int, float)) and self.learning_rate >= 0):
            problems.append(f"learning_rate must be a non-negative number, got {self.learning_rate!r}")
        if problems:
            raise CliError("invalid config:\n  " + "\n  ".join(problems))

    def save(self, path: Path) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            yaml.safe_dump(asdict(self), fh, sort_keys=True, default_flow_style=False)

    def train_config(self, arch: str) -> TrainConfig:
        return TrainConfig(
            arch=arch,
            manifest_path=self.manifest,
            train_split=self.train_split,
            val_split=self.val_split,
            epochs=self.epochs,
            batch_size=self.batch_size,
            optimizer=OptimizerParams(step_size=float(self.learning_rate)),
            run_seed=self.run_seed,
            repetitions=self.repetitions,
        )


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


# ---------------------------------------------------------------------------
# synth


def cmd_synth(args: argparse.Namespace) -> int:
    clean_dir = Path(args.clean_dir)
    files = sorted(clean_dir.glob("*.png"))
    if not files:
        raise CliError(f"no PNG images in {clean_dir}")
    clean_set = [(p.stem, invert(load_image(p))) for p in files]
    out = Path(args.out)
    for k in range(args.partitions):
        part = generate_partition(clean_set, derive_seed(args.seed, f"partition-{k}"))
        write_partition(part, out / f"partition-{k}")
        _log(f"partition-{k}: {len(part)} pairs")
    manifest = ds.build_manifest(out, name=args.name)
    ds.save_manifest(manifest, out / "manifest.json")
    _log(f"wrote {out / 'manifest.json'}")
    return 0


# ---------------------------------------------------------------------------
# train


def _desk_profile(cfg: ExperimentConfig) -> ExperimentConfig:
    # small, CI-friendly footprint: shallow only, capped corpus
    cfg.archs = ["shallow"]
    return cfg


def _train_one_rep(task: tuple[TrainConfig, str]) -> RunResult:
    config, rep_dir = task
    return train_run(config, run_dir=rep_dir)


def cmd_train(args: argparse.Namespace) -> int:
    cfg = ExperimentConfig.load(args.config)
    if args.profile == "desk":
        if args.parallel > 1:
            raise CliError("--profile desk runs sequentially; drop --parallel")
        cfg = _desk_profile(cfg)
    out = Path(cfg.output_dir)
    if out.exists() and any(out.iterdir()):
        if not args.force:
            raise CliError(f"experiment directory {out} already exists; rerun with --force")
    out.mkdir(parents=True, exist_ok=True)
    cfg.save(out / "experiment.yaml")

    manifest = ds.load_manifest(cfg.manifest)
    train_pairs = ds.load_pairs(manifest, cfg.train_split)
    val_pairs = ds.load_pairs(manifest, cfg.val_split)
    if args.profile == "desk":
        train_pairs = train_pairs[:DESK_TRAIN_CAP]
        val_pairs = val_pairs[:DESK_EVAL_CAP]
    _log(f"train pairs: {len(train_pairs)}, val pairs: {len(val_pairs)}")

    index: dict[str, list[str]] = {}
    for arch in cfg.archs:
        arch_dir = out / arch
        tasks = []
        for k in range(cfg.repetitions):
            rep_cfg = replace(cfg.train_config(arch), run_seed=derive_seed(cfg.run_seed, k))
            tasks.append((rep_cfg, str(arch_dir / f"rep-{k}")))
        if args.parallel > 1:
            with ProcessPoolExecutor(max_workers=args.parallel) as pool:
                results = list(pool.map(_train_one_rep, tasks))
        else:
            results = []
            for rep_cfg, rep_dir in tasks:
                results.append(train_run(rep_cfg, run_dir=rep_dir,
                                         data=(train_pairs, val_pairs)))
        for k, res in enumerate(results):
            _log(f"{arch} rep-{k}: best epoch {res.best_epoch}, val F1 {res.best_val_f1:.4f}")
        index[arch] = [str(Path(d).resolve()) for _, d in tasks]
    with open(out / "index.json", "w", encoding="utf-8") as fh:
        json.dump(index, fh, indent=1, sort_keys=True)
        fh.write("\n")
    _log(f"experiment index: {out / 'index.json'}")
    return 0


# ---------------------------------------------------------------------------
# evaluate / report


def _load_index(experiment_dir: Path) -> dict[str, list[str]]:
    index_path = experiment_dir / "index.json"
    if not index_path.is_file():
        raise CliError(f"{experiment_dir} has no index.json; run 'destrike train' first")
    with open(index_path, encoding="utf-8") as fh:
        return json.load(fh)


def cmd_evaluate(args: argparse.Namespace) -> int:
    experiment_dir = Path(args.experiment)
    index = _load_index(experiment_dir)
    manifest = ds.load_manifest(args.manifest)
    test_pairs = ds.load_pairs(manifest, args.split)
    _log(f"evaluating on {len(test_pairs)} pairs from split {args.split!r}")

    eval_dir = experiment_dir / "evaluation"
    eval_dir.mkdir(parents=True, exist_ok=True)
    summaries: dict[str, ev.MetricSummary] = {}
    for arch, rep_dirs in sorted(index.items()):
        per_run = []
        for k, rep_dir in enumerate(rep_dirs):
            ckpt = Path(rep_dir) / "best.ckpt"
            if not ckpt.is_file():
                _log(f"{arch} rep-{k}: missing checkpoint {ckpt}, skipping")
                continue
            try:
                model = load_checkpoint(ckpt, expected_arch=arch)
            except CheckpointError as exc:
                _log(f"{arch} rep-{k}: {exc}, skipping")
                continue
            records, summary = ev.evaluate_pairs(model, test_pairs)
            ev.write_records_csv(records, eval_dir / f"{arch}-rep{k}-records.csv")
            per_run.append(summary)
        if per_run:
            summaries[arch] = ev.summarize_runs(per_run)
            _log(f"{arch}: F1 {summaries[arch].mean_f1:.4f} over {len(per_run)} run(s)")
    if args.identity_baseline:
        _, base = ev.evaluate_pairs(ev.IdentityCleaner(), test_pairs)
        summaries["identity-baseline"] = ev.summarize_runs([base])
    if not summaries:
        raise CliError("no checkpoints could be evaluated")
    ev.write_summary_csv(summaries, eval_dir / "summary.csv")
    table = ev.report_table(summaries)
    (eval_dir / "table.txt").write_text(table + "\n", encoding="utf-8")
    _log(f"wrote {eval_dir / 'summary.csv'} and table.txt")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    table_path = Path(args.experiment) / "evaluation" / "table.txt"
    if not table_path.is_file():
        raise CliError(f"{table_path} not found; run 'destrike evaluate' first")
    print(table_path.read_text(encoding="utf-8"), end="")
    return 0


# ---------------------------------------------------------------------------
# clean / mean-image


def cmd_clean(args: argparse.Namespace) -> int:
    model = load_checkpoint(args.checkpoint)
    img = load_image(args.input)
    frame, meta = preprocess(invert(img))
    out = model.predict(frame.pixels[None, None])[0, 0]
    restored = postprocess(GrayImage(out, Polarity.INVERTED), meta)
    save_image(restored, args.output)
    _log(f"cleaned {args.input} -> {args.output} ({restored.height}x{restored.width})")
    return 0


def cmd_mean_image(args: argparse.Namespace) -> int:
    experiment_dir = Path(args.experiment)
    index = _load_index(experiment_dir)
    if args.arch not in index:
        raise CliError(f"arch {args.arch!r} not in experiment; have {sorted(index)}")
    ckpts = [Path(d) / "best.ckpt" for d in index[args.arch]]
    ckpts = [c for c in ckpts if c.is_file()]
    if not ckpts:
        raise CliError(f"no checkpoints found for {args.arch!r}")
    struck = load_image(args.input)
    mean = ev.mean_image(ckpts, struck)
    save_image(mean, args.output)
    _log(f"mean of {len(ckpts)} checkpoint(s) -> {args.output}")
    return 0


# ---------------------------------------------------------------------------
# fetch


def cmd_fetch(args: argparse.Namespace) -> int:
    manifest = fetch_dataset(args.name, args.out, doi=args.doi)
    _log(f"installed {manifest.name}: splits {manifest.split_names()}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="destrike",
                                description="strikethrough synthesis, removal training and evaluation")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="apply synthetic strikethrough partitions to clean words")
    s.add_argument("--clean-dir", required=True, help="directory of clean word PNGs")
    s.add_argument("--out", required=True, help="output dataset root")
    s.add_argument("--partitions", type=int, default=5)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--name", default="synth", help="dataset name recorded in the manifest")
    s.set_defaults(func=cmd_synth)

    t = sub.add_parser("train", help="train architectures per an experiment config")
    t.add_argument("--config", required=True, help="YAML experiment config")
    t.add_argument("--force", action="store_true", help="reuse a non-empty experiment directory")
    t.add_argument("--parallel", type=int, default=1, help="repetitions trained in parallel processes")
    t.add_argument("--profile", choices=["full", "desk"], default="full")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", help="evaluate all best checkpoints of an experiment")
    e.add_argument("--experiment", required=True)
    e.add_argument("--manifest", required=True)
    e.add_argument("--split", default="test")
    e.add_argument("--identity-baseline", action="store_true",
                   help="include the pass-through baseline row")
    e.set_defaults(func=cmd_evaluate)

    c = sub.add_parser("clean", help="clean one struck image with a checkpoint")
    c.add_argument("--checkpoint", required=True)
    c.add_argument("--input", required=True)
    c.add_argument("--output", required=True)
    c.set_defaults(func=cmd_clean)

    m = sub.add_parser("mean-image", help="average all repetitions' outputs on one image")
    m.add_argument("--experiment", required=True)
    m.add_argument("--arch", required=True)
    m.add_argument("--input", required=True)
    m.add_argument("--output", required=True)
    m.set_defaults(func=cmd_mean_image)

    f = sub.add_parser("fetch", help="download and install a published dataset")
    f.add_argument("--name", required=True)
    f.add_argument("--out", required=True)
    f.add_argument("--doi", default=None, help="override or supply the Zenodo DOI")
    f.set_defaults(func=cmd_fetch)

    r = sub.add_parser("report", help="print the evaluation table of an experiment")
    r.add_argument("--experiment", required=True)
    r.set_defaults(func=cmd_report)

    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        _log(f"error: {exc}")
        return 1
    except (ds.DatasetError, FetchError, CheckpointError) as exc:
        _log(f"error: {exc}")
        return 2
    except OSError as exc:
        _log(f"i/o error: {exc}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
