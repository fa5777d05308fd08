"""Catalog of known datasets: bundled samples plus declarative local loaders.

A catalog is a JSON object mapping dataset names to entries like::

    {"modality": "categorical",
     "files": {"annotations": "x/annotations.csv", "truth": "x/truth.csv"},
     "remote": {"x/annotations.csv": {"url": "http://...", "sha256": "..."}}}

File paths are relative to the directory the entry is loaded from: an
explicit ``local_dir`` when given, else the bundled data directory.
``remote`` is optional; nothing is ever downloaded unless ``fetch_dataset``
is called explicitly.
"""

from __future__ import annotations

import hashlib
import json
import urllib.request
from importlib import resources
from pathlib import Path

from .errors import ChecksumMismatch, MissingFiles, UnknownDataset, ValidationError
from .io import (
    ingest_categorical,
    ingest_masks,
    ingest_pairwise,
    ingest_sequence,
    read_labels_csv,
    read_pbm,
    read_scores_csv,
    read_sequences_csv,
    _read_columns,
)

MODALITIES = ("categorical", "pairwise", "sequence", "segmentation")


def _bundled_dir() -> Path:
    return Path(resources.files("crowdagg") / "data")


def load_catalog(catalog_path=None) -> dict:
    path = Path(catalog_path) if catalog_path else _bundled_dir() / "catalog.json"
    with path.open(encoding="utf-8") as handle:
        catalog = json.load(handle)
    for name, entry in catalog.items():
        if entry.get("modality") not in MODALITIES:
            raise ValidationError(f"catalog entry {name!r} has invalid modality")
        if "files" not in entry:
            raise ValidationError(f"catalog entry {name!r} declares no files")
    return catalog


def dataset_modality(name, catalog_path=None) -> str:
    catalog = load_catalog(catalog_path)
    if name not in catalog:
        raise UnknownDataset(name, known=catalog)
    return catalog[name]["modality"]


def _resolve(entry, name, local_dir):
    base = Path(local_dir) if local_dir else _bundled_dir()
    paths = {role: base / rel for role, rel in entry["files"].items()}
    missing = [p for p in paths.values() if not p.exists()]
    if missing:
        raise MissingFiles(name, missing)
    return paths


def _load_segmentation_truth(truth_index: Path) -> dict:
    rows = _read_columns(truth_index, ("task", "mask_file"))
    return {task: read_pbm(truth_index.parent / rel) for task, rel in rows}


def load_catalog_dataset(name, local_dir=None, catalog_path=None):
    """Load a named dataset and its ground truth in native types.

    Returns (AnnotationTable | PairwiseTable | SequenceTable |
    list of MaskSet, ground truth dict).
    """
    catalog = load_catalog(catalog_path)
    if name not in catalog:
        raise UnknownDataset(name, known=catalog)
    entry = catalog[name]
    paths = _resolve(entry, name, local_dir)
    modality = entry["modality"]
    if modality == "categorical":
        return ingest_categorical(paths["annotations"]), read_labels_csv(paths["truth"])
    if modality == "pairwise":
        return ingest_pairwise(paths["comparisons"]), read_scores_csv(paths["truth"])
    if modality == "sequence":
        return ingest_sequence(paths["responses"]), read_sequences_csv(paths["truth"])
    return ingest_masks(paths["index"]), _load_segmentation_truth(paths["truth_index"])


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for block in iter(lambda: handle.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def fetch_dataset(name, local_dir, catalog_path=None) -> list:
    """Download a dataset's remote files into ``local_dir``.

    Every downloaded file is checked against its declared sha256 before
    being kept. Returns the list of written paths.
    """
    catalog = load_catalog(catalog_path)
    if name not in catalog:
        raise UnknownDataset(name, known=catalog)
    entry = catalog[name]
    remote = entry.get("remote")
    if not remote:
        raise ValidationError(f"dataset {name!r} declares no remote files")
    local_dir = Path(local_dir)
    written = []
    for rel, spec in sorted(remote.items()):
        target = local_dir / rel
        target.parent.mkdir(parents=True, exist_ok=True)
        with urllib.request.urlopen(spec["url"]) as response:
            payload = response.read()
        actual = hashlib.sha256(payload).hexdigest()
        expected = spec.get("sha256")
        if expected and actual != expected:
            raise ChecksumMismatch(rel, expected, actual)
        target.write_bytes(payload)
        written.append(target)
    return written
