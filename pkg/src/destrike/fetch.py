"""Download and install the published datasets from Zenodo.

Archives are resolved through the Zenodo record API, checksummed with the
MD5 the record reports, unpacked, and wired up with a manifest whose split
sizes are checked against the published tables.  Downloads are cached: a
present archive with a valid checksum is never fetched again.
"""

from __future__ import annotations

import hashlib
import re
import sys
import zipfile
from dataclasses import dataclass
from pathlib import Path

import requests

from destrike.dataset import DatasetError, Manifest, build_manifest, save_manifest, validate_counts

# DOIs of the published archives.  The synthetic training set is the one
# the companion publication lists; for the other corpora pass --doi.
KNOWN_DATASETS: dict[str, str] = {
    "dracula-synth": "10.5281/zenodo.6406538",
}

_ZENODO_API = "https://zenodo.org/api/records/{record_id}"


class FetchError(RuntimeError):
    pass


class ChecksumError(FetchError):
    pass


@dataclass(frozen=True)
class RemoteFile:
    name: str
    url: str
    md5: str


def record_id_from_doi(doi: str) -> str:
    m = re.search(r"zenodo\.(\d+)$", doi.strip())
    if not m:
        raise FetchError(f"cannot derive a Zenodo record id from DOI {doi!r}")
    return m.group(1)


def list_record_files(doi: str, timeout: float = 30.0) -> list[RemoteFile]:
    """Query the Zenodo API for a record's downloadable files."""
    url = _ZENODO_API.format(record_id=record_id_from_doi(doi))
    try:
        resp = requests.get(url, timeout=timeout)
        resp.raise_for_status()
        doc = resp.json()
    except requests.RequestException as exc:
        raise FetchError(f"cannot reach Zenodo for {doi}: {exc}") from exc
    files = []
    for f in doc.get("files", []):
        checksum = f.get("checksum", "")
        md5 = checksum.split(":", 1)[1] if checksum.startswith("md5:") else checksum
        files.append(RemoteFile(name=f["key"], url=f["links"]["self"], md5=md5))
    if not files:
        raise FetchError(f"record for {doi} lists no files")
    return files


def md5_of(path: Path) -> str:
    h = hashlib.md5()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def download_file(remote: RemoteFile, dest: Path, timeout: float = 60.0) -> Path:
    """Stream one archive to ``dest``; cache hit when the checksum already
    matches.  A checksum mismatch after download aborts."""
    dest.parent.mkdir(parents=True, exist_ok=True)
    if dest.is_file() and remote.md5 and md5_of(dest) == remote.md5:
        return dest  # cache hit
    tmp = dest.with_suffix(dest.suffix + ".part")
    try:
        with requests.get(remote.url, stream=True, timeout=timeout) as resp:
            resp.raise_for_status()
            with open(tmp, "wb") as fh:
                for chunk in resp.iter_content(chunk_size=1 << 20):
                    fh.write(chunk)
    except requests.RequestException as exc:
        tmp.unlink(missing_ok=True)
        raise FetchError(f"download of {remote.name} failed: {exc}") from exc
    if remote.md5 and md5_of(tmp) != remote.md5:
        tmp.unlink(missing_ok=True)
        raise ChecksumError(f"checksum mismatch for {remote.name}; aborting")
    tmp.replace(dest)
    return dest


def install_archive(
    archive: Path,
    out_dir: Path,
    expected_md5: str | None = None,
    name: str | None = None,
) -> Manifest:
    """Verify, unpack and index one downloaded archive (offline part of the
    fetch pipeline; exercised directly by the tests)."""
    if expected_md5 and md5_of(archive) != expected_md5:
        raise ChecksumError(f"checksum mismatch for {archive.name}; aborting")
    out_dir.mkdir(parents=True, exist_ok=True)
    if not zipfile.is_zipfile(archive):
        raise FetchError(f"{archive.name} is not a zip archive")
    with zipfile.ZipFile(archive) as zf:
        zf.extractall(out_dir)
    root = _locate_dataset_root(out_dir)
    manifest = build_manifest(root, name=name or _normalise_name(archive.stem))
    save_manifest(manifest, root / "manifest.json")
    return manifest


def _normalise_name(stem: str) -> str:
    return re.sub(r"[\s_]+", "-", stem.strip().lower())


def _locate_dataset_root(out_dir: Path) -> Path:
    """Find the directory that holds the split folders (struck/clean layout
    may sit one or two levels below the archive root)."""
    candidates = [out_dir] + [p for p in sorted(out_dir.rglob("*")) if p.is_dir()]
    for cand in candidates:
        try:
            if build_manifest(cand, name="probe").splits:
                return cand
        except DatasetError:
            continue
    raise FetchError(f"no struck/clean split layout found under {out_dir}")


def fetch_dataset(
    name: str,
    out_dir: str | Path,
    doi: str | None = None,
    quiet: bool = False,
) -> Manifest:
    """Download a named dataset (or any DOI), unpack it, build its manifest
    and report the split-count check."""
    key = _normalise_name(name)
    doi = doi or KNOWN_DATASETS.get(key)
    if doi is None:
        known = ", ".join(sorted(KNOWN_DATASETS))
        raise FetchError(f"unknown dataset {name!r} and no --doi given; known: {known}")
    out = Path(out_dir)
    archive_dir = out / "archives"
    extract_dir = out / key
    manifest: Manifest | None = None
    for remote in list_record_files(doi):
        dest = download_file(remote, archive_dir / remote.name)
        if dest.suffix.lower() == ".zip" or zipfile.is_zipfile(dest):
            manifest = install_archive(dest, extract_dir, name=key)
    if manifest is None:
        raise FetchError(f"record {doi} contained no usable zip archive")
    report = validate_counts(manifest)
    if not quiet:
        print(report.describe(), file=sys.stderr)
    return manifest
