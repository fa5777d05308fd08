"""Core annotation containers.

All ids (tasks, workers, labels) are opaque strings. Every container
canonicalizes its rows into a sorted order at construction and indexes ids
through sorted dictionaries, so downstream computations see the same arrays
no matter how the input rows were ordered. Containers are not mutated after
construction; their numpy views are marked read-only.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DuplicateResponse, EmptyTable, ShapeMismatch, ValidationError

# Ground truth is a plain mapping: task -> label / item -> score /
# task -> token tuple / task -> binary mask, depending on modality.
GroundTruth = dict


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


class AnnotationTable:
    """Long-format categorical annotations, one (task, worker, label) row each.

    Rows are stored sorted by (task, worker); (task, worker) pairs must be
    unique. ``label_set`` is the lexicographically sorted tuple of distinct
    labels. Integer index arrays aligned with ``rows`` are exposed for
    vectorized aggregation.
    """

    def __init__(self, rows):
        normalized = [(str(t), str(w), str(l)) for t, w, l in rows]
        if not normalized:
            raise EmptyTable("annotation table has no rows")
        normalized.sort()
        for (t1, w1, _), (t2, w2, _) in zip(normalized, normalized[1:]):
            if t1 == t2 and w1 == w2:
                raise DuplicateResponse(t1, w1)
        self.rows = tuple(normalized)
        self.tasks = tuple(sorted({t for t, _, _ in normalized}))
        self.workers = tuple(sorted({w for _, w, _ in normalized}))
        self.label_set = tuple(sorted({l for _, _, l in normalized}))
        t_index = {t: i for i, t in enumerate(self.tasks)}
        w_index = {w: i for i, w in enumerate(self.workers)}
        l_index = {l: i for i, l in enumerate(self.label_set)}
        self.task_idx = _frozen(np.array([t_index[t] for t, _, _ in normalized], dtype=np.intp))
        self.worker_idx = _frozen(np.array([w_index[w] for _, w, _ in normalized], dtype=np.intp))
        self.label_idx = _frozen(np.array([l_index[l] for _, _, l in normalized], dtype=np.intp))

    @classmethod
    def from_records(cls, records) -> "AnnotationTable":
        """Build from any iterable of (task, worker, label) triples.

        Accepts objects exposing ``itertuples`` (pandas DataFrames with
        columns in that order) as well.
        """
        if hasattr(records, "itertuples"):
            records = records.itertuples(index=False)
        return cls(tuple(r)[:3] for r in records)

    @property
    def n_tasks(self) -> int:
        return len(self.tasks)

    @property
    def n_workers(self) -> int:
        return len(self.workers)

    @property
    def n_labels(self) -> int:
        return len(self.label_set)

    def __len__(self) -> int:
        return len(self.rows)

    def __eq__(self, other) -> bool:
        return isinstance(other, AnnotationTable) and self.rows == other.rows

    def __hash__(self):
        return hash(self.rows)

    def __repr__(self) -> str:
        return (
            f"AnnotationTable({len(self.rows)} responses, {self.n_tasks} tasks, "
            f"{self.n_workers} workers, {self.n_labels} labels)"
        )


class PairwiseTable:
    """Pairwise comparison records (worker, left, right, winner).

    The winner must be one of the two compared items and the items must
    differ. Repeated comparisons are allowed; rows are stored sorted. An
    empty table is permitted (some consumers reject it themselves).
    """

    def __init__(self, rows):
        normalized = []
        for row in rows:
            w, l, r, win = (str(x) for x in row)
            if l == r:
                raise ValidationError(f"comparison of item {l!r} with itself by worker {w!r}")
            if win not in (l, r):
                raise ValidationError(
                    f"winner {win!r} is neither {l!r} nor {r!r} (worker {w!r})"
                )
            normalized.append((w, l, r, win))
        normalized.sort()
        self.rows = tuple(normalized)
        self.workers = tuple(sorted({w for w, _, _, _ in normalized}))
        items = set()
        for _, l, r, _ in normalized:
            items.add(l)
            items.add(r)
        self.items = tuple(sorted(items))
        w_index = {w: i for i, w in enumerate(self.workers)}
        i_index = {it: i for i, it in enumerate(self.items)}
        self.worker_idx = _frozen(np.array([w_index[w] for w, _, _, _ in normalized], dtype=np.intp))
        self.left_idx = _frozen(np.array([i_index[l] for _, l, _, _ in normalized], dtype=np.intp))
        self.right_idx = _frozen(np.array([i_index[r] for _, _, r, _ in normalized], dtype=np.intp))
        self.left_wins = _frozen(
            np.array([win == l for _, l, _, win in normalized], dtype=bool)
        )

    @classmethod
    def from_records(cls, records) -> "PairwiseTable":
        if hasattr(records, "itertuples"):
            records = records.itertuples(index=False)
        return cls(tuple(r)[:4] for r in records)

    def __len__(self) -> int:
        return len(self.rows)

    def __eq__(self, other) -> bool:
        return isinstance(other, PairwiseTable) and self.rows == other.rows

    def __repr__(self) -> str:
        return (
            f"PairwiseTable({len(self.rows)} comparisons, {len(self.items)} items, "
            f"{len(self.workers)} workers)"
        )


class SequenceTable:
    """Token-sequence responses, one (task, worker, tokens) row each.

    Tokenization is whitespace-based and the tokens are kept verbatim; every
    row must carry at least one token. One response per worker per task.
    """

    def __init__(self, rows):
        normalized = []
        for t, w, tokens in rows:
            if isinstance(tokens, str):
                tokens = tokens.split()
            tokens = tuple(str(x) for x in tokens)
            if not tokens:
                raise ValidationError(
                    f"empty response for task {t!r} by worker {w!r}"
                )
            normalized.append((str(t), str(w), tokens))
        if not normalized:
            raise EmptyTable("sequence table has no rows")
        normalized.sort()
        for (t1, w1, _), (t2, w2, _) in zip(normalized, normalized[1:]):
            if t1 == t2 and w1 == w2:
                raise DuplicateResponse(t1, w1)
        self.rows = tuple(normalized)
        self.tasks = tuple(sorted({t for t, _, _ in normalized}))
        self.workers = tuple(sorted({w for _, w, _ in normalized}))
        t_index = {t: i for i, t in enumerate(self.tasks)}
        w_index = {w: i for i, w in enumerate(self.workers)}
        self.task_idx = _frozen(np.array([t_index[t] for t, _, _ in normalized], dtype=np.intp))
        self.worker_idx = _frozen(np.array([w_index[w] for _, w, _ in normalized], dtype=np.intp))

    @property
    def n_tasks(self) -> int:
        return len(self.tasks)

    @property
    def n_workers(self) -> int:
        return len(self.workers)

    def __len__(self) -> int:
        return len(self.rows)

    def __eq__(self, other) -> bool:
        return isinstance(other, SequenceTable) and self.rows == other.rows

    def __repr__(self) -> str:
        return (
            f"SequenceTable({len(self.rows)} responses, {len(self.tasks)} tasks, "
            f"{len(self.workers)} workers)"
        )


class MaskSet:
    """All binary masks submitted for one task, one per worker.

    Masks must share one H x W shape and contain only 0/1 cells; they are
    stored as a read-only uint8 array stacked in sorted worker order.
    """

    def __init__(self, task_id, masks):
        self.task_id = str(task_id)
        pairs = []
        for worker_id, mask in masks:
            arr = np.asarray(mask)
            if arr.ndim != 2 or arr.size == 0:
                raise ShapeMismatch(self.task_id, shapes=[arr.shape])
            if not np.isin(arr, (0, 1)).all():
                raise ValidationError(
                    f"mask for task {self.task_id!r} by worker {worker_id!r} has non-binary cells"
                )
            pairs.append((str(worker_id), arr.astype(np.uint8)))
        if not pairs:
            raise EmptyTable(f"no masks for task {self.task_id!r}")
        pairs.sort(key=lambda p: p[0])
        for (w1, _), (w2, _) in zip(pairs, pairs[1:]):
            if w1 == w2:
                raise DuplicateResponse(self.task_id, w1)
        shapes = {m.shape for _, m in pairs}
        if len(shapes) != 1:
            raise ShapeMismatch(self.task_id, shapes=sorted(shapes))
        self.workers = tuple(w for w, _ in pairs)
        self.masks = _frozen(np.stack([m for _, m in pairs]))
        self.shape = self.masks.shape[1:]

    def __len__(self) -> int:
        return len(self.workers)

    def __repr__(self) -> str:
        h, w = self.shape
        return f"MaskSet(task={self.task_id!r}, {len(self.workers)} masks of {h}x{w})"


@dataclass(frozen=True)
class Trace:
    """Convergence record of one aggregation run."""

    iterations_run: int
    final_delta: float
    log_likelihood_per_iter: Optional[tuple] = None

    def summary(self) -> str:
        parts = [f"iterations={self.iterations_run}", f"final_delta={self.final_delta:.3g}"]
        if self.log_likelihood_per_iter:
            parts.append(f"final_loglik={self.log_likelihood_per_iter[-1]:.6g}")
        return ", ".join(parts)


@dataclass(frozen=True)
class AggregationResult:
    """Aggregated answers plus whatever the method estimated on the side.

    ``labels`` maps task id to the aggregated answer (label string, token
    tuple, or mask depending on modality). ``posteriors`` maps task id to a
    probability vector over the table's label_set; ``skills`` maps worker id
    to a scalar. Either may be None when the method does not produce them.
    """

    labels: dict
    posteriors: Optional[dict] = None
    skills: Optional[dict] = None
    trace: Trace = Trace(0, 0.0)


@dataclass(frozen=True)
class ScoreResult:
    """Item scores from pairwise aggregation.

    ``ranking`` lists all scored items by descending score, ties broken by
    lexicographically smaller item id.
    """

    scores: dict
    ranking: tuple
    worker_params: Optional[dict] = None


def rank_items(scores: dict) -> tuple:
    """Descending-score item order with lexicographic tie-break."""
    return tuple(sorted(scores, key=lambda it: (-scores[it], it)))


def as_annotation_table(data) -> AnnotationTable:
    """Coerce estimator input into an AnnotationTable.

    Accepts an existing table, an iterable of (task, worker, label)
    triples, or a DataFrame-like object with those columns first.
    """
    if isinstance(data, AnnotationTable):
        return data
    return AnnotationTable.from_records(data)


def as_pairwise_table(data) -> PairwiseTable:
    if isinstance(data, PairwiseTable):
        return data
    return PairwiseTable.from_records(data)


def as_sequence_table(data) -> SequenceTable:
    if isinstance(data, SequenceTable):
        return data
    return SequenceTable(data)


def as_mask_sets(data) -> list:
    """Coerce estimator input into a list of MaskSet objects."""
    if isinstance(data, MaskSet):
        return [data]
    sets = list(data)
    if not all(isinstance(m, MaskSet) for m in sets):
        raise ValidationError("segmentation input must be MaskSet objects")
    return sets
