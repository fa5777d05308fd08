"""Scoring functions for comparing aggregated answers against ground truth."""

from __future__ import annotations

import numpy as np
from scipy.stats import rankdata

from .errors import FewerThanTwoItems, MissingPrediction, ShapeMismatch


def accuracy(pred: dict, truth: dict) -> float:
    """Fraction of ground-truth tasks whose predicted label matches exactly."""
    if not truth:
        raise ValueError("empty ground truth")
    hits = 0
    for task, answer in truth.items():
        if task not in pred:
            raise MissingPrediction(task)
        hits += pred[task] == answer
    return hits / len(truth)


def spearman_rho(scores: dict, truth_scores: dict) -> float:
    """Rank correlation over the shared item set, average ranks for ties.

    Returns nan when either side ranks all shared items identically.
    """
    common = sorted(set(scores) & set(truth_scores))
    if len(common) < 2:
        raise FewerThanTwoItems(len(common))
    a = rankdata([scores[i] for i in common], method="average")
    b = rankdata([truth_scores[i] for i in common], method="average")
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        return float("nan")
    a = a - a.mean()
    b = b - b.mean()
    return float((a @ b) / np.sqrt((a @ a) * (b @ b)))


def _edit_distance(hyp, ref) -> int:
    """Unit-cost token edit distance, rolling-row DP."""
    if not ref:
        return len(hyp)
    if not hyp:
        return len(ref)
    prev = np.arange(len(ref) + 1)
    for i, h in enumerate(hyp, start=1):
        cur = np.empty_like(prev)
        cur[0] = i
        sub = prev[:-1] + np.array([h != r for r in ref])
        np.minimum(sub, prev[1:] + 1, out=cur[1:])
        for j in range(1, len(ref) + 1):
            if cur[j - 1] + 1 < cur[j]:
                cur[j] = cur[j - 1] + 1
        prev = cur
    return int(prev[-1])


def wer(hyp, ref) -> float:
    """Token edit distance over reference length; can exceed 1.

    An empty reference against a non-empty hypothesis scores the
    hypothesis length (and 0 when both are empty).
    """
    hyp = list(hyp)
    ref = list(ref)
    if not ref:
        return float(len(hyp))
    return _edit_distance(hyp, ref) / len(ref)


def corpus_wer(hyps: dict, refs: dict) -> float:
    """Mean per-task word error rate over the reference tasks."""
    if not refs:
        raise ValueError("empty reference corpus")
    total = 0.0
    for task, ref in refs.items():
        if task not in hyps:
            raise MissingPrediction(task)
        total += wer(hyps[task], ref)
    return total / len(refs)


def iou(a, b) -> float:
    """Intersection over union of two binary masks; two empty masks score 1."""
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise ShapeMismatch(shapes=[a.shape, b.shape])
    union = np.logical_or(a, b).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(a, b).sum() / union)


def mean_iou(preds: dict, truths: dict) -> float:
    if not truths:
        raise ValueError("empty ground truth")
    total = 0.0
    for task, mask in truths.items():
        if task not in preds:
            raise MissingPrediction(task)
        total += iou(preds[task], mask)
    return total / len(truths)
