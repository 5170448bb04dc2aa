"""Dataset manifests, split handling and pair loading.

A dataset root contains one directory per split (``train``, ``validation``,
``test`` or ``partition-<k>``), each with ``struck/`` and ``clean/`` PNG
subdirectories and optionally ``masks/`` and a ``strokes.json`` written by
the synthesiser.  A manifest enumerates the pairs per split and serialises
to a single JSON document with paths relative to its own location.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from destrike.imaging import GrayImage, ProcessingMeta, invert, load_image, preprocess
from destrike.strokegen import StrokeType

SPLIT_PATTERN = re.compile(r"^(train|validation|test|partition-\d+)$")

# published split sizes for the known corpora
REFERENCE_COUNTS: dict[str, dict[str, int]] = {
    "iam-synth": {"train": 3066, "validation": 273, "test": 819},
    "dracula-real": {"train": 126, "validation": 126, "test": 378},
    "dracula-synth": {f"partition-{k}": 126 for k in range(5)},
}


class DatasetError(ValueError):
    pass


class DanglingPairError(DatasetError):
    """A struck image without its clean mate, or vice versa."""


@dataclass(frozen=True)
class PairEntry:
    id: str
    struck_path: Path
    clean_path: Path
    stroke_type: StrokeType | None = None


@dataclass
class Manifest:
    name: str
    writer_mode: str = "single-writer"
    splits: dict[str, list[PairEntry]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.writer_mode not in ("single-writer", "multi-writer"):
            raise DatasetError(f"unknown writer mode {self.writer_mode!r}")
        for split, entries in self.splits.items():
            if not SPLIT_PATTERN.match(split):
                raise DatasetError(f"invalid split name {split!r}")
            ids = [e.id for e in entries]
            if len(set(ids)) != len(ids):
                dupes = sorted({i for i in ids if ids.count(i) > 1})
                raise DatasetError(f"duplicate ids in split {split!r}: {dupes[:5]}")

    def split_names(self) -> list[str]:
        return sorted(self.splits)

    def partition_names(self) -> list[str]:
        return sorted(
            (s for s in self.splits if s.startswith("partition-")),
            key=lambda s: int(s.split("-")[1]),
        )


@dataclass(frozen=True)
class ImagePair:
    """One preprocessed training/evaluation unit.

    ``struck`` and ``clean`` are inverted-polarity 128x512 frames;
    ``clean_orig`` keeps the untouched display-polarity ground truth at its
    original size for evaluation, and ``meta`` undoes the frame geometry.
    """

    id: str
    struck: GrayImage
    clean: GrayImage
    meta: ProcessingMeta
    clean_orig: GrayImage
    stroke_type: StrokeType | None = None


def build_manifest(
    root_dir: str | Path,
    name: str | None = None,
    writer_mode: str = "single-writer",
) -> Manifest:
    """Scan a dataset root and enumerate all pairs per split, sorted by id.

    Raises :class:`DanglingPairError` when a struck image lacks its clean
    counterpart or the other way around.
    """
    root = Path(root_dir)
    if not root.is_dir():
        raise DatasetError(f"dataset root {root} does not exist")
    splits: dict[str, list[PairEntry]] = {}
    for split_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        if not SPLIT_PATTERN.match(split_dir.name):
            continue
        splits[split_dir.name] = _scan_split(split_dir)
    return Manifest(name=name or root.name, writer_mode=writer_mode, splits=splits)


def _scan_split(split_dir: Path) -> list[PairEntry]:
    struck_dir = split_dir / "struck"
    clean_dir = split_dir / "clean"
    struck_ids = {p.stem for p in struck_dir.glob("*.png")} if struck_dir.is_dir() else set()
    clean_ids = {p.stem for p in clean_dir.glob("*.png")} if clean_dir.is_dir() else set()
    for missing in sorted(struck_ids ^ clean_ids):
        side = "clean" if missing in struck_ids else "struck"
        raise DanglingPairError(f"{split_dir.name}/{missing}: no {side} counterpart")
    types = _load_stroke_types(split_dir / "strokes.json")
    return [
        PairEntry(
            id=i,
            struck_path=struck_dir / f"{i}.png",
            clean_path=clean_dir / f"{i}.png",
            stroke_type=types.get(i),
        )
        for i in sorted(struck_ids)
    ]


def _load_stroke_types(path: Path) -> dict[str, StrokeType]:
    if not path.is_file():
        return {}
    with open(path, encoding="utf-8") as fh:
        specs = json.load(fh)
    return {s["image_id"]: StrokeType(s["type"]) for s in specs if s.get("image_id")}


def aggregate_partitions(manifest: Manifest, parts: list[str]) -> list[PairEntry]:
    """Concatenate the named partitions into one training split.

    Entry ids are suffixed with ``@<partition>`` so the same word occurring
    in several partitions stays unique; the total count is the sum of the
    parts.
    """
    out: list[PairEntry] = []
    for part in parts:
        if part not in manifest.splits:
            raise DatasetError(f"unknown partition {part!r}; have {manifest.split_names()}")
        for e in manifest.splits[part]:
            out.append(
                PairEntry(
                    id=f"{e.id}@{part}",
                    struck_path=e.struck_path,
                    clean_path=e.clean_path,
                    stroke_type=e.stroke_type,
                )
            )
    return out


def load_entry(entry: PairEntry) -> ImagePair:
    """Load one pair from disk and run the fixed preprocessing."""
    try:
        struck_orig = load_image(entry.struck_path)
        clean_orig = load_image(entry.clean_path)
    except OSError as exc:
        raise DatasetError(f"cannot read pair {entry.id!r}: {exc}") from exc
    if struck_orig.shape != clean_orig.shape:
        raise DatasetError(
            f"pair {entry.id!r}: struck {struck_orig.shape} vs clean {clean_orig.shape}"
        )
    struck, meta = preprocess(invert(struck_orig))
    clean, _ = preprocess(invert(clean_orig))
    return ImagePair(
        id=entry.id,
        struck=struck,
        clean=clean,
        meta=meta,
        clean_orig=clean_orig,
        stroke_type=entry.stroke_type,
    )


def load_pairs(
    manifest: Manifest,
    split: str,
    shuffle_seed: int | None = None,
) -> list[ImagePair]:
    """Load a whole split as preprocessed pairs, in id order (or shuffled
    deterministically when a seed is given).

    The special split name ``aggregate`` concatenates all partitions.
    """
    if split == "aggregate":
        entries = aggregate_partitions(manifest, manifest.partition_names())
    elif split in manifest.splits:
        entries = list(manifest.splits[split])
    else:
        raise DatasetError(f"unknown split {split!r}; have {manifest.split_names()}")
    if shuffle_seed is not None:
        order = np.random.default_rng(shuffle_seed).permutation(len(entries))
        entries = [entries[i] for i in order]
    return [load_entry(e) for e in entries]


# ---------------------------------------------------------------------------
# manifest serialisation


def save_manifest(manifest: Manifest, path: str | Path) -> None:
    """Write the manifest as one JSON document with paths relative to it."""
    path = Path(path)
    base = path.resolve().parent
    doc = {
        "name": manifest.name,
        "writer_mode": manifest.writer_mode,
        "splits": {
            split: [
                {
                    "id": e.id,
                    "struck": _relative_to(e.struck_path, base),
                    "clean": _relative_to(e.clean_path, base),
                    "stroke_type": e.stroke_type.value if e.stroke_type else None,
                }
                for e in entries
            ]
            for split, entries in manifest.splits.items()
        },
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_manifest(path: str | Path) -> Manifest:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    base = path.resolve().parent
    splits = {
        split: [
            PairEntry(
                id=e["id"],
                struck_path=_resolve(e["struck"], base),
                clean_path=_resolve(e["clean"], base),
                stroke_type=StrokeType(e["stroke_type"]) if e.get("stroke_type") else None,
            )
            for e in entries
        ]
        for split, entries in doc["splits"].items()
    }
    return Manifest(name=doc["name"], writer_mode=doc["writer_mode"], splits=splits)


def _relative_to(p: Path, base: Path) -> str:
    try:
        return p.resolve().relative_to(base).as_posix()
    except ValueError:
        return p.resolve().as_posix()


def _resolve(rel: str, base: Path) -> Path:
    p = Path(rel)
    return p if p.is_absolute() else base / p


# ---------------------------------------------------------------------------
# split-size validation against the published tables


@dataclass(frozen=True)
class CountCheck:
    split: str
    expected: int
    actual: int

    @property
    def ok(self) -> bool:
        return self.expected == self.actual


@dataclass(frozen=True)
class CountReport:
    dataset: str
    known: bool
    checks: tuple[CountCheck, ...] = ()

    @property
    def ok(self) -> bool:
        return self.known and all(c.ok for c in self.checks)

    def describe(self) -> str:
        if not self.known:
            return f"{self.dataset}: no reference counts"
        lines = [f"{self.dataset}:"]
        for c in self.checks:
            verdict = "ok" if c.ok else "MISMATCH"
            lines.append(f"  {c.split}: expected {c.expected}, found {c.actual} [{verdict}]")
        return "\n".join(lines)


def validate_counts(manifest: Manifest) -> CountReport:
    """Compare split sizes against the published counts for known corpora."""
    key = re.sub(r"[\s_]+", "-", manifest.name.strip().lower())
    reference = REFERENCE_COUNTS.get(key)
    if reference is None:
        return CountReport(dataset=manifest.name, known=False)
    checks = tuple(
        CountCheck(split=s, expected=n, actual=len(manifest.splits.get(s, [])))
        for s, n in sorted(reference.items())
    )
    return CountReport(dataset=manifest.name, known=True, checks=checks)
