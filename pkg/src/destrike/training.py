"""Training protocol: per-pixel cross entropy, per-epoch validation by F1,
best-epoch checkpoint retention, repeated seeded runs.

Every run is a pure function of its configuration and data: model init,
epoch shuffling and repetition seeds all derive from ``run_seed``, nothing
reads global random state.  Two runs with the same config on the same
machine and thread count produce bit-identical loss curves.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import torch

from destrike.dataset import ImagePair, load_manifest, load_pairs
from destrike.evaluation import evaluate_pairs
from destrike.models import Model, build_model, reference_config, save_checkpoint
from destrike.strokegen import derive_seed


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class OptimizerParams:
    """Adam constants; the defaults of the cited optimiser."""

    step_size: float = 1e-3
    moment1: float = 0.9
    moment2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self) -> None:
        if min(self.step_size, self.moment1, self.moment2, self.epsilon) < 0:
            raise ValueError("optimizer constants must be non-negative")


@dataclass(frozen=True)
class TrainConfig:
    arch: str
    manifest_path: str | None = None
    train_split: str = "train"
    val_split: str = "validation"
    epochs: int = 30
    batch_size: int = 4
    optimizer: OptimizerParams = field(default_factory=OptimizerParams)
    run_seed: int = 0
    repetitions: int = 1

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")


@dataclass(frozen=True)
class RunResult:
    """Outcome of one run: the retained best epoch plus the whole curve."""

    best_epoch: int  # 1-based, earliest argmax of validation F1
    best_val_f1: float
    checkpoint: Path | None
    curve: tuple[tuple[float, float], ...]  # (train_loss, val_f1) per epoch
    run_seed: int


def bce_loss(
    pred: np.ndarray | torch.Tensor,
    target: np.ndarray | torch.Tensor,
    from_logits: bool = False,
) -> torch.Tensor | float:
    """Mean binary cross entropy over all pixels.

    With ``from_logits`` the probabilities are sigmoid(pred), evaluated in
    the standard overflow-free form.  Tensor inputs give a (differentiable)
    scalar tensor; numpy inputs give a float.
    """
    was_numpy = isinstance(pred, np.ndarray)
    p = torch.from_numpy(pred) if was_numpy else pred
    t = torch.from_numpy(target) if isinstance(target, np.ndarray) else target
    if p.shape != t.shape:
        raise ValueError(f"shape mismatch: pred {tuple(p.shape)} vs target {tuple(t.shape)}")
    if from_logits:
        loss = torch.nn.functional.binary_cross_entropy_with_logits(p, t)
    else:
        loss = torch.nn.functional.binary_cross_entropy(p, t)
    return float(loss) if was_numpy else loss


def make_optimizer(model: Model, params: OptimizerParams) -> torch.optim.Optimizer:
    return torch.optim.Adam(
        model.module.parameters(),
        lr=params.step_size,
        betas=(params.moment1, params.moment2),
        eps=params.epsilon,
    )


def _stack_pairs(pairs: Sequence[ImagePair]) -> tuple[torch.Tensor, torch.Tensor]:
    struck = torch.from_numpy(np.stack([p.struck.pixels for p in pairs])[:, None])
    clean = torch.from_numpy(np.stack([p.clean.pixels for p in pairs])[:, None])
    return struck, clean


def train_epoch(
    model: Model,
    pairs: Sequence[ImagePair],
    optimizer: torch.optim.Optimizer,
    batch_size: int = 4,
    order: np.ndarray | None = None,
    tensors: tuple[torch.Tensor, torch.Tensor] | None = None,
) -> tuple[Model, torch.optim.Optimizer, float]:
    """One pass over the training pairs in batches; Adam update per batch.

    ``order`` is the (already shuffled) index order; the last short batch
    is kept.  Returns the unweighted mean of the per-batch losses.
    ``tensors`` lets callers reuse an already stacked (struck, clean) pair
    of tensors across epochs.
    """
    if tensors is None and not pairs:
        raise TrainingError("empty training set")
    struck, clean = _stack_pairs(pairs) if tensors is None else tensors
    idx = np.arange(len(struck)) if order is None else np.asarray(order)
    model.module.train()
    losses = []
    for start in range(0, len(idx), batch_size):
        sel = torch.from_numpy(idx[start : start + batch_size].copy())
        x = struck[sel]
        t = clean[sel]
        optimizer.zero_grad()
        out = model.module(x)
        loss = bce_loss(out, t, from_logits=model.output_logits)
        loss.backward()
        optimizer.step()
        losses.append(float(loss.detach()))
    return model, optimizer, float(np.mean(losses))


def validate(model, val_pairs: Sequence[ImagePair]) -> float:
    """Mean F1 over the validation pairs, via the full evaluation path
    (restore geometry, Otsu-binarise output and ground truth).  Accepts any
    cleaner with a ``predict`` method, including the identity baseline."""
    if not val_pairs:
        raise TrainingError("empty validation set")
    _, summary = evaluate_pairs(model, val_pairs)
    return summary.mean_f1


def train_run(
    config: TrainConfig,
    run_dir: str | Path | None = None,
    data: tuple[Sequence[ImagePair], Sequence[ImagePair]] | None = None,
) -> RunResult:
    """Run the full protocol once: ``epochs`` passes, validating after each
    and checkpointing whenever validation F1 strictly improves.

    ``data`` supplies (train_pairs, val_pairs) directly; otherwise they are
    loaded from ``config.manifest_path``.  When ``run_dir`` is given the run
    writes ``curve.csv``, ``best.ckpt`` and ``config.json`` there.
    """
    train_pairs, val_pairs = data if data is not None else _load_data(config)
    model = build_model(reference_config(config.arch), init_seed=derive_seed(config.run_seed, "init"))
    optimizer = make_optimizer(model, config.optimizer)
    shuffle_rng = np.random.default_rng(derive_seed(config.run_seed, "shuffle"))
    tensors = _stack_pairs(train_pairs)

    out_dir = Path(run_dir) if run_dir is not None else None
    ckpt_path = out_dir / "best.ckpt" if out_dir else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "config.json", "w", encoding="utf-8") as fh:
            json.dump(asdict(config), fh, indent=1, sort_keys=True)
            fh.write("\n")

    curve: list[tuple[float, float]] = []
    best_epoch, best_f1 = 0, -1.0
    for epoch in range(1, config.epochs + 1):
        order = shuffle_rng.permutation(len(train_pairs))
        _, _, mean_loss = train_epoch(
            model, train_pairs, optimizer, config.batch_size, order, tensors=tensors
        )
        val_f1 = validate(model, val_pairs)
        curve.append((mean_loss, val_f1))
        if val_f1 > best_f1:
            best_epoch, best_f1 = epoch, val_f1
            model.epoch = epoch
            if ckpt_path is not None:
                save_checkpoint(model, ckpt_path)

    if out_dir:
        _write_curve(out_dir / "curve.csv", curve)
    return RunResult(
        best_epoch=best_epoch,
        best_val_f1=best_f1,
        checkpoint=ckpt_path,
        curve=tuple(curve),
        run_seed=config.run_seed,
    )


def train_many(
    config: TrainConfig,
    repetitions: int | None = None,
    out_dir: str | Path | None = None,
    data: tuple[Sequence[ImagePair], Sequence[ImagePair]] | None = None,
) -> list[RunResult]:
    """Repeat the protocol; repetition ``k`` runs with a seed derived from
    (run_seed, k), so reruns reproduce the same result list."""
    reps = config.repetitions if repetitions is None else repetitions
    if reps < 1:
        raise TrainingError("repetitions must be >= 1")
    if data is None and config.manifest_path is not None:
        data = _load_data(config)
    results = []
    for k in range(reps):
        rep_config = _with_seed(config, derive_seed(config.run_seed, k))
        rep_dir = Path(out_dir) / f"rep-{k}" if out_dir is not None else None
        results.append(train_run(rep_config, run_dir=rep_dir, data=data))
    return results


def _with_seed(config: TrainConfig, seed: int) -> TrainConfig:
    cfg = asdict(config)
    cfg["run_seed"] = seed
    cfg["optimizer"] = OptimizerParams(**cfg["optimizer"])
    return TrainConfig(**cfg)


def _load_data(config: TrainConfig) -> tuple[list[ImagePair], list[ImagePair]]:
    if config.manifest_path is None:
        raise TrainingError("no manifest_path in config and no data supplied")
    manifest = load_manifest(config.manifest_path)
    return load_pairs(manifest, config.train_split), load_pairs(manifest, config.val_split)


def _write_curve(path: Path, curve: Sequence[tuple[float, float]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "train_loss", "val_f1"])
        for i, (loss, f1) in enumerate(curve, start=1):
            w.writerow([i, f"{loss:.10g}", f"{f1:.10g}"])
