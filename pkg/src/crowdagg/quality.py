"""Annotation- and data-quality estimators."""

from __future__ import annotations

import warnings
from typing import Callable, NamedTuple, Optional

import numpy as np

from .categorical import MajorityVote, _vote_fractions
from .datamodel import AggregationResult, as_annotation_table
from .errors import MissingPosteriors, NoCoincidences


def nominal_distance(c: str, k: str) -> float:
    return 0.0 if c == k else 1.0


def krippendorff_alpha(table, distance: Optional[Callable] = None) -> float:
    """Chance-corrected agreement from the label coincidence matrix.

    Every task with n >= 2 responses contributes each ordered response
    pair with mass 1/(n-1). With no such task the coefficient is
    undefined (NoCoincidences); when no disagreement is even expected
    (a single observed label) the result is pinned to 1.0 with a warning.
    """
    table = as_annotation_table(table)
    distance = distance or nominal_distance
    k = table.n_labels
    counts = np.zeros((table.n_tasks, k))
    np.add.at(counts, (table.task_idx, table.label_idx), 1.0)
    sizes = counts.sum(axis=1)
    units = counts[sizes >= 2]
    if units.shape[0] == 0:
        raise NoCoincidences()
    coincidence = np.zeros((k, k))
    for row in units:
        n_u = row.sum()
        coincidence += (np.outer(row, row) - np.diag(row)) / (n_u - 1.0)
    totals = coincidence.sum(axis=1)
    n_total = totals.sum()
    delta = np.array(
        [[distance(c, l) for l in table.label_set] for c in table.label_set]
    )
    d_observed = float((coincidence * delta).sum())
    d_expected = float((np.outer(totals, totals) * delta).sum() / (n_total - 1.0))
    if d_expected == 0.0:
        warnings.warn(
            "all responses share one label; no disagreement observed or expected",
            stacklevel=2,
        )
        return 1.0
    return 1.0 - d_observed / d_expected


def agreement_with_aggregate(table) -> float:
    """Share of responses that match their task's majority-vote label."""
    table = as_annotation_table(table)
    probs = _vote_fractions(table)
    winners = np.argmax(probs, axis=1)
    matched = table.label_idx == winners[table.task_idx]
    return float(matched.mean())


class UncertaintyResult(NamedTuple):
    per_task: dict
    mean: float


def uncertainty(table, skills: Optional[dict] = None) -> UncertaintyResult:
    """Shannon entropy (nats) of the skill-weighted label distribution per task.

    Workers missing from ``skills`` count with weight 1; a task whose total
    weight vanishes falls back to unweighted counts.
    """
    table = as_annotation_table(table)
    if skills is None:
        weights = np.ones(len(table.rows))
    else:
        weights = np.array([float(skills.get(w, 1.0)) for _, w, _ in table.rows])
        if (weights < 0).any():
            raise ValueError("skills must be non-negative")
    mass = np.zeros((table.n_tasks, table.n_labels))
    np.add.at(mass, (table.task_idx, table.label_idx), weights)
    zero = mass.sum(axis=1) == 0
    if zero.any():
        counts = np.zeros_like(mass)
        np.add.at(counts, (table.task_idx, table.label_idx), 1.0)
        mass[zero] = counts[zero]
    p = mass / mass.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(p > 0, p * np.log(p), 0.0)
    entropy = -plogp.sum(axis=1)
    per_task = dict(zip(table.tasks, entropy.tolist()))
    return UncertaintyResult(per_task=per_task, mean=float(entropy.mean()))


def ds_posterior_quality(result: AggregationResult) -> float:
    """Mean over tasks of the winning posterior probability."""
    if result.posteriors is None:
        raise MissingPosteriors()
    return float(np.mean([np.max(v) for v in result.posteriors.values()]))
