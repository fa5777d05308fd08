"""File ingestion and serialization.

Tabular inputs are CSV/TSV with a header row, or JSON-lines with named
fields; the delimiter is chosen from the file suffix (``.tsv`` means tabs,
``.jsonl``/``.ndjson`` means JSON-lines, anything else is comma CSV).
Masks travel as ASCII portable bitmaps (P1) referenced from an index CSV.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .datamodel import AnnotationTable, MaskSet, PairwiseTable, SequenceTable
from .errors import (
    EmptyFile,
    MissingColumn,
    ShapeMismatch,
    UnreadableMask,
    ValidationError,
)

CATEGORICAL_SCHEMA = ("task", "worker", "label")
PAIRWISE_SCHEMA = ("worker", "left", "right", "winner")
SEQUENCE_SCHEMA = ("task", "worker", "text")
MASK_INDEX_SCHEMA = ("task", "worker", "mask_file")


def _iter_records(path: Path):
    """Yield dict records from a CSV/TSV/JSON-lines file."""
    suffix = path.suffix.lower()
    if suffix in (".jsonl", ".ndjson"):
        with path.open(encoding="utf-8") as handle:
            for line in handle:
                line = line.strip()
                if line:
                    yield json.loads(line)
    else:
        delimiter = "\t" if suffix == ".tsv" else ","
        with path.open(encoding="utf-8", newline="") as handle:
            yield from csv.DictReader(handle, delimiter=delimiter)


def _read_columns(path, schema):
    """Read records and project them onto schema columns, validating presence."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    rows = []
    for record in _iter_records(path):
        for column in schema:
            if column not in record or record[column] is None:
                raise MissingColumn(column, path)
        rows.append(tuple(record[column] for column in schema))
    if not rows:
        raise EmptyFile(path)
    return rows


def ingest_categorical(path, schema=CATEGORICAL_SCHEMA) -> AnnotationTable:
    """Load a long-format (task, worker, label) file.

    ``schema`` names the three columns holding task id, worker id, and
    label, in that order; the file's own column order is irrelevant.
    """
    return AnnotationTable(_read_columns(path, schema))


def ingest_pairwise(path, schema=PAIRWISE_SCHEMA) -> PairwiseTable:
    return PairwiseTable(_read_columns(path, schema))


def ingest_sequence(path, schema=SEQUENCE_SCHEMA) -> SequenceTable:
    return SequenceTable(_read_columns(path, schema))


def read_pbm(path) -> np.ndarray:
    """Read an ASCII P1 portable bitmap into a uint8 H x W array."""
    path = Path(path)
    try:
        text = path.read_text(encoding="ascii")
    except (OSError, UnicodeDecodeError) as exc:
        raise UnreadableMask(path, str(exc)) from exc
    tokens = []
    for line in text.splitlines():
        line = line.split("#", 1)[0]
        tokens.extend(line.split())
    if not tokens or tokens[0] != "P1":
        raise UnreadableMask(path, "not an ASCII P1 bitmap")
    try:
        width, height = int(tokens[1]), int(tokens[2])
        bits = [int(t) for t in tokens[3:]]
    except (IndexError, ValueError) as exc:
        raise UnreadableMask(path, "malformed header or bits") from exc
    if len(bits) != width * height or not all(b in (0, 1) for b in bits):
        raise UnreadableMask(path, f"expected {width * height} 0/1 cells, got {len(bits)}")
    return np.array(bits, dtype=np.uint8).reshape(height, width)


def write_pbm(path, mask) -> None:
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise ValidationError("mask must be a 2-D array")
    height, width = mask.shape
    lines = [f"P1", f"{width} {height}"]
    for row in mask:
        lines.append(" ".join("1" if v else "0" for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def ingest_masks(index_path, schema=MASK_INDEX_SCHEMA) -> list:
    """Load all masks named by an index CSV, grouped into per-task MaskSets.

    Mask file paths are resolved relative to the index file's directory.
    Shape consistency is enforced per task.
    """
    index_path = Path(index_path)
    rows = _read_columns(index_path, schema)
    base = index_path.parent
    by_task: dict = {}
    for task, worker, mask_file in rows:
        mask = read_pbm(base / mask_file)
        by_task.setdefault(str(task), []).append((str(worker), mask))
    return [MaskSet(task, masks) for task, masks in sorted(by_task.items())]


def write_mask_sets(out_dir, masks_by_task, prefix="mask") -> Path:
    """Write one PBM per (task, worker or aggregate) plus an index CSV.

    ``masks_by_task`` maps task id to either a single mask (aggregated
    output) or a list of (worker, mask) pairs. Returns the index path.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    index_rows = []
    for i, task in enumerate(sorted(masks_by_task)):
        entry = masks_by_task[task]
        if isinstance(entry, np.ndarray):
            entry = [("aggregate", entry)]
        for worker, mask in entry:
            name = f"{prefix}_{i:05d}_{worker}.pbm"
            write_pbm(out_dir / name, mask)
            index_rows.append((task, worker, name))
    index_path = out_dir / "index.csv"
    _write_csv(index_path, MASK_INDEX_SCHEMA, index_rows)
    return index_path


def _write_csv(path, header, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def write_categorical_csv(path, table: AnnotationTable) -> None:
    _write_csv(path, CATEGORICAL_SCHEMA, table.rows)


def write_pairwise_csv(path, table: PairwiseTable) -> None:
    _write_csv(path, PAIRWISE_SCHEMA, table.rows)


def write_sequence_csv(path, table: SequenceTable) -> None:
    rows = [(t, w, " ".join(tokens)) for t, w, tokens in table.rows]
    _write_csv(path, SEQUENCE_SCHEMA, rows)


def write_labels_csv(path, labels: dict) -> None:
    rows = [(task, labels[task]) for task in sorted(labels)]
    _write_csv(path, ("task", "label"), rows)


def write_sequence_labels_csv(path, labels: dict) -> None:
    """Aggregated sequences as (task, text) rows, tokens joined by spaces."""
    rows = [(task, " ".join(labels[task])) for task in sorted(labels)]
    _write_csv(path, ("task", "text"), rows)


def write_posteriors_csv(path, posteriors: dict, label_set) -> None:
    rows = []
    for task in sorted(posteriors):
        for label, p in zip(label_set, posteriors[task]):
            rows.append((task, label, repr(float(p))))
    _write_csv(path, ("task", "label", "probability"), rows)


def write_skills_csv(path, skills: dict) -> None:
    rows = [(w, repr(float(skills[w]))) for w in sorted(skills)]
    _write_csv(path, ("worker", "skill"), rows)


def write_scores_csv(path, result) -> None:
    rows = [
        (item, repr(float(result.scores[item])), rank + 1)
        for rank, item in enumerate(result.ranking)
    ]
    _write_csv(path, ("item", "score", "rank"), rows)


def read_labels_csv(path) -> dict:
    rows = _read_columns(path, ("task", "label"))
    return {t: l for t, l in rows}


def read_scores_csv(path) -> dict:
    rows = _read_columns(path, ("item", "score"))
    return {i: float(s) for i, s in rows}


def read_sequences_csv(path) -> dict:
    """(task, text) CSV into task -> token tuple."""
    rows = _read_columns(path, ("task", "text"))
    return {t: tuple(s.split()) for t, s in rows}


def write_truth_labels(path, truth: dict) -> None:
    write_labels_csv(path, truth)


def write_truth_scores(path, truth: dict) -> None:
    rows = [(i, repr(float(truth[i]))) for i in sorted(truth)]
    _write_csv(path, ("item", "score"), rows)
