"""Pairwise-comparison aggregation into item scores and rankings.

Scores are reported on a log scale for both methods so downstream rank
correlation sees one common convention.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from .base import BaseAggregator
from .datamodel import ScoreResult, as_pairwise_table, rank_items
from .errors import EmptyTable, ValidationError


def _win_matrix(table, items):
    index = {it: i for i, it in enumerate(items)}
    wins = np.zeros((len(items), len(items)))
    for _, left, right, winner in table.rows:
        loser = right if winner == left else left
        wins[index[winner], index[loser]] += 1.0
    return wins


def _needs_regularization(wins: np.ndarray) -> bool:
    """True when some item lacks wins or losses, or the comparison graph
    splits into components that never meet."""
    if (wins.sum(axis=1) == 0).any() or (wins.sum(axis=0) == 0).any():
        return True
    adjacency = (wins + wins.T) > 0
    n = adjacency.shape[0]
    seen = np.zeros(n, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        i = stack.pop()
        for j in np.flatnonzero(adjacency[i]):
            if not seen[j]:
                seen[j] = True
                stack.append(int(j))
    return not bool(seen.all())


def _bt_objective(wins, p):
    """Log-likelihood of the strengths: sum of wins * log(p_i / (p_i + p_j))."""
    with np.errstate(divide="ignore", invalid="ignore"):
        logp = np.log(p)
        pair = np.log(p[:, None] + p[None, :])
    mask = wins > 0
    return float(np.sum(wins[mask] * (logp[np.nonzero(mask)[0]] - pair[mask])))


class BradleyTerry(BaseAggregator):
    """Minorization-maximization fit of item strengths.

    Iterates p_i <- W_i / sum_j n_ij / (p_i + p_j) with the strengths
    renormalized each sweep, stopping at ``tol`` change or ``n_iter``
    sweeps. When an item has no wins, no losses, or the comparison graph is
    disconnected, every item additionally gets half a win against (and half
    a loss to) a virtual pseudo-item, which shrinks unidentifiable strengths
    toward equality instead of failing. Scores are log strengths.

    ``items`` optionally pins the expected item universe; items in it that
    never appear in a comparison are a validation error.
    """

    def __init__(self, n_iter=200, tol=1e-8, items=None):
        self.n_iter = n_iter
        self.tol = tol
        self.items = items

    def fit(self, data):
        table = as_pairwise_table(data)
        if not table.rows:
            raise EmptyTable("no comparisons to aggregate")
        if self.items is not None:
            missing = sorted(set(self.items) - set(table.items))
            if missing:
                raise ValidationError(
                    f"items with zero comparisons: {', '.join(missing)}"
                )
        items = table.items
        wins = _win_matrix(table, items)
        self.regularized_ = _needs_regularization(wins)
        if self.regularized_:
            n = len(items)
            padded = np.zeros((n + 1, n + 1))
            padded[:n, :n] = wins
            padded[:n, n] = 0.5
            padded[n, :n] = 0.5
            wins = padded
        n_all = wins.shape[0]
        totals = wins + wins.T
        win_counts = wins.sum(axis=1)
        p = np.full(n_all, 1.0 / n_all)
        objective = [_bt_objective(wins, p)]
        iterations, delta = 0, 0.0
        active = totals > 0
        for _ in range(self.n_iter):
            pair_sums = p[:, None] + p[None, :]
            denom_terms = np.zeros_like(totals)
            denom_terms[active] = totals[active] / pair_sums[active]
            denom = denom_terms.sum(axis=1)
            p_new = win_counts / denom
            p_new /= p_new.sum()
            objective.append(_bt_objective(wins, p_new))
            delta = float(np.abs(p_new - p).max())
            p = p_new
            iterations += 1
            if delta < self.tol:
                break
        self.objective_per_sweep_ = tuple(objective)
        self.iterations_ = iterations
        strengths = p[: len(items)]
        scores = dict(zip(items, np.log(strengths).tolist()))
        self.scores_ = scores
        self.ranking_ = rank_items(scores)
        self.result_ = ScoreResult(scores=scores, ranking=self.ranking_)
        return self


def _noisy_bt_unpack(table):
    y = np.where(table.left_wins, 1.0, -1.0)
    return table.left_idx, table.right_idx, table.worker_idx, y


def _noisy_bt_objective(table, scores, reliab_raw, bias, l2):
    li, ri, wi, y = _noisy_bt_unpack(table)
    q = expit(reliab_raw[wi])
    p = q * expit(y * (scores[li] - scores[ri])) + (1.0 - q) * expit(y * bias[wi])
    ll = float(np.sum(np.log(np.maximum(p, 1e-300))))
    return ll - l2 * (float(scores @ scores) + float(bias @ bias))


def _noisy_bt_gradients(table, scores, reliab_raw, bias, l2, n_items, n_workers):
    li, ri, wi, y = _noisy_bt_unpack(table)
    q = expit(reliab_raw[wi])
    a = expit(y * (scores[li] - scores[ri]))
    b = expit(y * bias[wi])
    p = np.maximum(q * a + (1.0 - q) * b, 1e-300)
    common_a = q * a * (1.0 - a) * y / p
    g_scores = np.bincount(li, weights=common_a, minlength=n_items)
    g_scores -= np.bincount(ri, weights=common_a, minlength=n_items)
    g_bias = np.bincount(wi, weights=(1.0 - q) * b * (1.0 - b) * y / p, minlength=n_workers)
    g_reliab = np.bincount(wi, weights=(a - b) * q * (1.0 - q) / p, minlength=n_workers)
    g_scores -= 2.0 * l2 * scores
    g_bias -= 2.0 * l2 * bias
    return g_scores, g_reliab, g_bias


class NoisyBradleyTerry(BaseAggregator):
    """Bradley-Terry with per-worker reliability and position bias.

    Each comparison is explained as a mixture: with probability
    q_w = sigmoid(r_w) the worker judges by the score difference, otherwise
    they fall back to a position habit sigmoid(b_w) of picking the left
    item. The penalized log-likelihood (l2 on scores and biases) is
    maximized by full-batch gradient ascent from a seeded small random
    score initialization; r starts at 1 and b at 0. Every coordinate's
    gradient is divided by the number of comparisons touching it, so the
    step size does not depend on the table size.
    """

    def __init__(self, n_iter=200, tol=1e-8, lr=0.1, l2=1e-3, seed=0):
        self.n_iter = n_iter
        self.tol = tol
        self.lr = lr
        self.l2 = l2
        self.seed = seed

    def fit(self, data):
        table = as_pairwise_table(data)
        if not table.rows:
            raise EmptyTable("no comparisons to aggregate")
        n_items, n_workers = len(table.items), len(table.workers)
        item_counts = np.maximum(
            np.bincount(table.left_idx, minlength=n_items)
            + np.bincount(table.right_idx, minlength=n_items),
            1,
        )
        worker_counts = np.maximum(np.bincount(table.worker_idx, minlength=n_workers), 1)
        rng = np.random.default_rng(self.seed)
        scores = rng.normal(0.0, 0.01, n_items)
        reliab_raw = np.ones(n_workers)
        bias = np.zeros(n_workers)
        objective = [_noisy_bt_objective(table, scores, reliab_raw, bias, self.l2)]
        iterations, delta = 0, 0.0
        for _ in range(self.n_iter):
            g_s, g_r, g_b = _noisy_bt_gradients(
                table, scores, reliab_raw, bias, self.l2, n_items, n_workers
            )
            step_s = self.lr * g_s / item_counts
            step_r = self.lr * g_r / worker_counts
            step_b = self.lr * g_b / worker_counts
            scores = scores + step_s
            reliab_raw = reliab_raw + step_r
            bias = bias + step_b
            objective.append(_noisy_bt_objective(table, scores, reliab_raw, bias, self.l2))
            delta = max(
                float(np.abs(step_s).max()),
                float(np.abs(step_r).max()),
                float(np.abs(step_b).max()),
            )
            iterations += 1
            if delta < self.tol:
                break
        self.objective_per_step_ = tuple(objective)
        self.iterations_ = iterations
        score_map = dict(zip(table.items, scores.tolist()))
        reliability = expit(reliab_raw)
        worker_params = {
            w: (float(reliability[i]), float(bias[i])) for i, w in enumerate(table.workers)
        }
        self.scores_ = score_map
        self.ranking_ = rank_items(score_map)
        self.worker_params_ = worker_params
        self.result_ = ScoreResult(
            scores=score_map, ranking=self.ranking_, worker_params=worker_params
        )
        return self


class RandomBaseline(BaseAggregator):
    """Seeded uniform random scores; an evaluation control, not a method."""

    def __init__(self, seed=0):
        self.seed = seed

    def fit(self, data):
        table = as_pairwise_table(data)
        rng = np.random.default_rng(self.seed)
        scores = {item: float(rng.random()) for item in table.items}
        self.scores_ = scores
        self.ranking_ = rank_items(scores)
        self.result_ = ScoreResult(scores=scores, ranking=self.ranking_)
        return self


def bradley_terry(table, n_iter=200, tol=1e-8, items=None) -> ScoreResult:
    return BradleyTerry(n_iter=n_iter, tol=tol, items=items).fit_predict(table)


def noisy_bt(table, n_iter=200, tol=1e-8, lr=0.1, l2=1e-3, seed=0) -> ScoreResult:
    return NoisyBradleyTerry(n_iter=n_iter, tol=tol, lr=lr, l2=l2, seed=seed).fit_predict(table)


def random_baseline(table, seed=0) -> ScoreResult:
    return RandomBaseline(seed=seed).fit_predict(table)
