"""Per-task fusion of binary segmentation masks.

Each task is independent: the functional ops take one MaskSet and return
one fused uint8 mask; the estimator classes map them over a collection.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from .base import BaseAggregator
from .datamodel import AggregationResult, MaskSet, Trace, as_mask_sets


def seg_majority_vote(maskset: MaskSet) -> np.ndarray:
    """Pixel on iff strictly more than half of the workers set it.

    An exact half-split stays off.
    """
    votes = maskset.masks.sum(axis=0, dtype=np.int64)
    return (2 * votes > len(maskset)).astype(np.uint8)


def _mv_soft_init(maskset: MaskSet) -> np.ndarray:
    """Majority-vote start for EM: 0/1 per pixel, exact ties at 0.5."""
    votes = 2 * maskset.masks.sum(axis=0, dtype=np.int64)
    n = len(maskset)
    init = np.where(votes > n, 1.0, 0.0)
    init[votes == n] = 0.5
    return init


def _pixel_log_odds(masks_set, sens, spec, prior):
    """Per-pixel (log_fg, log_bg) under the Bernoulli worker model.

    Log terms are selected elementwise so a zero count never multiplies
    log(0).
    """
    with np.errstate(divide="ignore"):
        log_fg = np.log(prior) + np.where(
            masks_set, np.log(sens)[:, None], np.log1p(-sens)[:, None]
        ).sum(axis=0)
        log_bg = np.log1p(-prior) + np.where(
            masks_set, np.log1p(-spec)[:, None], np.log(spec)[:, None]
        ).sum(axis=0)
    return log_fg, log_bg


def _bernoulli_posterior(masks, masks_set, sens, spec, prior):
    log_fg, log_bg = _pixel_log_odds(masks_set, sens, spec, prior)
    with np.errstate(invalid="ignore"):
        q = expit(log_fg - log_bg)
    q[~np.isfinite(np.maximum(log_fg, log_bg))] = 0.5  # impossible either way
    return q


def _seg_em_run(maskset: MaskSet, n_iter: int, smoothing: float) -> dict:
    masks = maskset.masks.astype(float).reshape(len(maskset), -1)  # (workers, pixels)
    set_mask = masks > 0
    n_pixels = masks.shape[1]
    q = _mv_soft_init(maskset).ravel()
    loglik = []
    sens = spec = None
    prior = None
    for _ in range(n_iter):
        # M: smoothed soft counts
        fg = q.sum()
        bg = n_pixels - fg
        # clip guards float rounding at the [0, 1] endpoints when smoothing=0
        sens = np.clip((smoothing + masks @ q) / (2.0 * smoothing + fg), 0.0, 1.0)
        spec = np.clip(
            (smoothing + (1.0 - masks) @ (1.0 - q)) / (2.0 * smoothing + bg), 0.0, 1.0
        )
        prior = min(max((smoothing + fg) / (2.0 * smoothing + n_pixels), 0.0), 1.0)
        log_fg, log_bg = _pixel_log_odds(set_mask, sens, spec, prior)
        m = np.maximum(log_fg, log_bg)
        with np.errstate(invalid="ignore"):
            loglik.append(
                float((m + np.log(np.exp(log_fg - m) + np.exp(log_bg - m))).sum())
            )
            q = expit(log_fg - log_bg)
        q[~np.isfinite(m)] = 0.5  # pixel impossible under both classes
    fused = (q >= 0.5).astype(np.uint8).reshape(maskset.shape)
    return {
        "mask": fused,
        "posterior": q.reshape(maskset.shape),
        "sensitivity": sens,
        "specificity": spec,
        "prior": prior,
        "loglik": loglik,
    }


def seg_em(maskset: MaskSet, n_iter=10, smoothing=0.01) -> np.ndarray:
    """EM fusion with per-worker sensitivity/specificity.

    Latent per-pixel truth starts from the majority vote (ties at 0.5);
    each iteration re-estimates every worker's hit rate on foreground and
    background with ``smoothing`` pseudo-counts, then recomputes the
    per-pixel posterior. The fused mask thresholds the posterior at 0.5,
    so ``n_iter=0`` returns the thresholded initialization.
    """
    return _seg_em_run(maskset, n_iter, smoothing)["mask"]


def seg_rasa(maskset: MaskSet, n_iter=10) -> np.ndarray:
    """Reliability-weighted soft fusion over flattened masks.

    Worker reliability iterates to the non-negative cosine between the
    worker's mask and the reliability-weighted centroid (an all-zero mask
    has cosine 0 and drops out of the fuse). The output is the weighted
    mean mask thresholded at 0.5; if every weight vanishes the plain
    majority vote is returned.
    """
    flat = maskset.masks.astype(float).reshape(len(maskset), -1)
    norms = np.linalg.norm(flat, axis=1, keepdims=True)
    unit = flat / np.where(norms > 0, norms, 1.0)
    reliab = np.ones(len(maskset))
    for _ in range(n_iter):
        total = reliab.sum()
        centroid = (reliab[:, None] * unit).sum(axis=0) / total if total > 0 else unit.mean(axis=0)
        norm = np.linalg.norm(centroid)
        cos = unit @ (centroid / norm) if norm > 0 else np.zeros(len(maskset))
        reliab = np.maximum(0.0, cos)
    total = reliab.sum()
    if total <= 0:
        return seg_majority_vote(maskset)
    fused = (reliab[:, None] * flat).sum(axis=0) / total
    return (fused >= 0.5).astype(np.uint8).reshape(maskset.shape)


class SegmentationMajorityVote(BaseAggregator):
    def fit(self, data):
        sets = as_mask_sets(data)
        self.labels_ = {ms.task_id: seg_majority_vote(ms) for ms in sets}
        self.result_ = AggregationResult(labels=self.labels_, trace=Trace(0, 0.0))
        return self


class SegmentationEM(BaseAggregator):
    """EM fusion with worker parameters pooled across all tasks.

    Sensitivity and specificity are attributes of a worker, not of one
    task, so the estimator accumulates their soft counts over every
    maskset it is given (the per-task prior stays local). On a single
    maskset this reduces to :func:`seg_em`. Pooling keeps the per-worker
    estimates tight enough that one annotator's boundary slip on one task
    cannot dominate the consensus there.
    """

    def __init__(self, n_iter=10, smoothing=0.01):
        self.n_iter = n_iter
        self.smoothing = smoothing

    def fit(self, data):
        sets = as_mask_sets(data)
        workers = sorted({w for ms in sets for w in ms.workers})
        w_index = {w: i for i, w in enumerate(workers)}
        n_w = len(workers)
        flat = [ms.masks.astype(float).reshape(len(ms), -1) for ms in sets]
        set_masks = [m > 0 for m in flat]
        widx = [np.array([w_index[w] for w in ms.workers], dtype=np.intp) for ms in sets]
        qs = [_mv_soft_init(ms).ravel() for ms in sets]
        sens = np.full(n_w, 0.5)
        spec = np.full(n_w, 0.5)
        priors = [float(q.mean()) for q in qs]
        s = self.smoothing
        for _ in range(self.n_iter):
            num_a = np.zeros(n_w)
            den_a = np.zeros(n_w)
            num_b = np.zeros(n_w)
            den_b = np.zeros(n_w)
            priors = []
            for masks, wk, q in zip(flat, widx, qs):
                fg = q.sum()
                num_a[wk] += masks @ q
                den_a[wk] += fg
                num_b[wk] += (1.0 - masks) @ (1.0 - q)
                den_b[wk] += masks.shape[1] - fg
                priors.append((s + fg) / (2.0 * s + masks.shape[1]))
            sens = np.clip((s + num_a) / (2.0 * s + den_a), 0.0, 1.0)
            spec = np.clip((s + num_b) / (2.0 * s + den_b), 0.0, 1.0)
            qs = [
                _bernoulli_posterior(masks, sm, sens[wk], spec[wk], prior)
                for masks, sm, wk, prior in zip(flat, set_masks, widx, priors)
            ]
        self.sensitivity_ = dict(zip(workers, sens.tolist()))
        self.specificity_ = dict(zip(workers, spec.tolist()))
        self.priors_ = dict(zip((ms.task_id for ms in sets), priors))
        self.labels_ = {
            ms.task_id: (q >= 0.5).astype(np.uint8).reshape(ms.shape)
            for ms, q in zip(sets, qs)
        }
        self.result_ = AggregationResult(labels=self.labels_, trace=Trace(self.n_iter, 0.0))
        return self


class SegmentationRasa(BaseAggregator):
    def __init__(self, n_iter=10):
        self.n_iter = n_iter

    def fit(self, data):
        sets = as_mask_sets(data)
        self.labels_ = {ms.task_id: seg_rasa(ms, self.n_iter) for ms in sets}
        self.result_ = AggregationResult(labels=self.labels_, trace=Trace(self.n_iter, 0.0))
        return self
