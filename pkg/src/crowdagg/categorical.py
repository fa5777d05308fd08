"""Categorical truth inference: recover one latent true label per task.

All estimators consume an :class:`~crowdagg.datamodel.AnnotationTable` (or
anything coercible to one) and produce an AggregationResult whose labels are
the argmax of the per-task posterior with ties broken by the
lexicographically smallest label. Probability products are accumulated in
log space. Methods that use random initialization take an explicit seed and
are bit-reproducible.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit, log_expit

from .base import BaseAggregator
from .datamodel import AggregationResult, Trace, as_annotation_table
from .errors import NoOverlap, NotBinary, ValidationError

MMSR_SKILL_EPS = 1e-4


def _vote_fractions(table) -> np.ndarray:
    counts = np.zeros((table.n_tasks, table.n_labels))
    np.add.at(counts, (table.task_idx, table.label_idx), 1.0)
    return counts / counts.sum(axis=1, keepdims=True)


def _labels_from_scores(table, scores: np.ndarray) -> dict:
    # np.argmax returns the first maximum; label_set is sorted, so ties
    # resolve to the lexicographically smallest label.
    winners = np.argmax(scores, axis=1)
    return {task: table.label_set[w] for task, w in zip(table.tasks, winners)}


def _posterior_dict(table, probs: np.ndarray) -> dict:
    return {task: probs[i].copy() for i, task in enumerate(table.tasks)}


def _normalize_log_rows(logq: np.ndarray):
    """Row-normalize in log space; returns (probabilities, per-row logsumexp).

    Rows whose mass underflows to zero everywhere become uniform.
    """
    m = logq.max(axis=1, keepdims=True)
    safe_m = np.where(np.isfinite(m), m, 0.0)
    shifted = np.exp(logq - safe_m)
    totals = shifted.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore"):
        ll_rows = (safe_m + np.log(totals)).ravel()
    ll_rows = np.where(np.isfinite(m.ravel()), ll_rows, -np.inf)
    q = shifted / np.where(totals > 0, totals, 1.0)
    q[totals.ravel() == 0] = 1.0 / logq.shape[1]
    return q, ll_rows


class MajorityVote(BaseAggregator):
    """Per-task plurality vote; posteriors are the empirical vote shares."""

    def fit(self, data):
        table = as_annotation_table(data)
        probs = _vote_fractions(table)
        self.labels_ = _labels_from_scores(table, probs)
        self.posteriors_ = _posterior_dict(table, probs)
        self.skills_ = None
        self.result_ = AggregationResult(
            labels=self.labels_, posteriors=self.posteriors_, trace=Trace(0, 0.0)
        )
        return self


class Wawa(BaseAggregator):
    """Majority vote re-weighted by each worker's agreement with it.

    Pass one computes plain majority labels; each worker's skill is the
    Laplace-smoothed fraction (m+1)/(n+2) of their responses matching those
    labels; pass two re-votes with the skills as weights.
    """

    def fit(self, data):
        table = as_annotation_table(data)
        mv_probs = _vote_fractions(table)
        mv_winner = np.argmax(mv_probs, axis=1)
        matched = table.label_idx == mv_winner[table.task_idx]
        n_w = np.bincount(table.worker_idx, minlength=table.n_workers)
        m_w = np.bincount(table.worker_idx, weights=matched, minlength=table.n_workers)
        skills = (m_w + 1.0) / (n_w + 2.0)
        weighted = np.zeros((table.n_tasks, table.n_labels))
        np.add.at(weighted, (table.task_idx, table.label_idx), skills[table.worker_idx])
        probs = weighted / weighted.sum(axis=1, keepdims=True)
        self.labels_ = _labels_from_scores(table, probs)
        self.posteriors_ = _posterior_dict(table, probs)
        self.skills_ = dict(zip(table.workers, skills.tolist()))
        self.result_ = AggregationResult(
            labels=self.labels_,
            posteriors=self.posteriors_,
            skills=self.skills_,
            trace=Trace(1, 0.0),
        )
        return self


def _ds_m_step(table, q, smoothing):
    """Per-worker confusion rows and class prevalence from soft assignments."""
    counts = np.zeros((table.n_workers, table.n_labels, table.n_labels))
    np.add.at(counts, (table.worker_idx, table.label_idx), q[table.task_idx])
    counts = counts.transpose(0, 2, 1)  # (worker, true, answered)
    conf = counts + smoothing
    norm = conf.sum(axis=2, keepdims=True)
    out = np.divide(conf, norm, out=np.zeros_like(conf), where=norm > 0)
    out[np.broadcast_to(norm == 0, out.shape)] = 1.0 / table.n_labels
    return q.mean(axis=0), out


def _ds_log_posterior(table, pi, conf):
    with np.errstate(divide="ignore"):
        log_pi = np.log(pi)
        log_conf = np.log(conf)
    logq = np.tile(log_pi, (table.n_tasks, 1))
    addends = log_conf[table.worker_idx, :, table.label_idx]  # (rows, labels)
    np.add.at(logq, table.task_idx, addends)
    return logq


class DawidSkene(BaseAggregator):
    """Confusion-matrix EM aggregator.

    Posteriors start at the majority-vote shares. Each iteration re-fits the
    class prevalence and per-worker row-stochastic confusion matrices from
    the soft assignments (M), then recomputes the task posteriors (E),
    stopping after ``n_iter`` iterations or when the largest posterior change
    falls below ``tol``. ``smoothing`` is the pseudo-count added to every
    confusion cell. With ``n_iter=0`` the majority-vote initialization is
    returned unchanged. The trace records the observed-data log-likelihood
    after every M step; reported skills are each worker's prevalence-weighted
    mean diagonal.
    """

    def __init__(self, n_iter=100, tol=1e-6, smoothing=0.01):
        self.n_iter = n_iter
        self.tol = tol
        self.smoothing = smoothing

    def fit(self, data):
        table = as_annotation_table(data)
        q = _vote_fractions(table)
        loglik = []
        iterations = 0
        delta = 0.0
        pi = conf = None
        for _ in range(self.n_iter):
            pi, conf = _ds_m_step(table, q, self.smoothing)
            logq = _ds_log_posterior(table, pi, conf)
            q_new, ll_rows = _normalize_log_rows(logq)
            loglik.append(float(ll_rows.sum()))
            delta = float(np.abs(q_new - q).max())
            q = q_new
            iterations += 1
            if delta < self.tol:
                break
        if pi is None:
            pi, conf = _ds_m_step(table, q, self.smoothing)
        skills = np.einsum("c,wcc->w", pi, conf)
        self.priors_ = pi
        self.confusion_ = conf
        self.labels_ = _labels_from_scores(table, q)
        self.posteriors_ = _posterior_dict(table, q)
        self.skills_ = dict(zip(table.workers, skills.tolist()))
        self.result_ = AggregationResult(
            labels=self.labels_,
            posteriors=self.posteriors_,
            skills=self.skills_,
            trace=Trace(iterations, delta, tuple(loglik)),
        )
        return self


def _glad_log_posterior(table, alpha, log_beta):
    n_labels = table.n_labels
    x = alpha[table.worker_idx] * np.exp(log_beta)[table.task_idx]
    log_correct = log_expit(x)
    log_wrong = log_expit(-x) - np.log(n_labels - 1)
    base = np.bincount(table.task_idx, weights=log_wrong, minlength=table.n_tasks)
    logq = np.full((table.n_tasks, n_labels), -np.log(n_labels)) + base[:, None]
    np.add.at(logq, (table.task_idx, table.label_idx), log_correct - log_wrong)
    return logq


def _glad_objective(table, r_correct, alpha, log_beta):
    """Expected complete-data log-likelihood as a function of the worker
    abilities and log task difficulties, holding the posteriors fixed."""
    x = alpha[table.worker_idx] * np.exp(log_beta)[table.task_idx]
    penalty = np.log(table.n_labels - 1)
    return float(
        np.sum(r_correct * log_expit(x) + (1.0 - r_correct) * (log_expit(-x) - penalty))
    )


def _glad_gradients(table, r_correct, alpha, log_beta):
    beta = np.exp(log_beta)
    x = alpha[table.worker_idx] * beta[table.task_idx]
    resid = r_correct - expit(x)
    g_alpha = np.bincount(
        table.worker_idx, weights=resid * beta[table.task_idx], minlength=table.n_workers
    )
    g_log_beta = np.bincount(
        table.task_idx,
        weights=resid * alpha[table.worker_idx] * beta[table.task_idx],
        minlength=table.n_tasks,
    )
    return g_alpha, g_log_beta


class Glad(BaseAggregator):
    """EM over worker ability and task difficulty.

    A response is correct with probability sigmoid(ability * difficulty);
    wrong labels split the remainder evenly. The E step computes label
    posteriors under a uniform prior; the M step runs ``grad_steps`` fixed
    gradient-ascent steps of size ``lr`` on the expected complete-data
    log-likelihood, jointly in abilities and log difficulties. Each
    coordinate's gradient is divided by its response count so the step
    size is scale-free and the fixed budget stays stable on large tables.
    Abilities start at 1, log difficulties at 0; both are returned
    (abilities as skills, difficulties via ``task_difficulty_``).
    """

    def __init__(self, n_iter=100, tol=1e-6, grad_steps=25, lr=0.1):
        self.n_iter = n_iter
        self.tol = tol
        self.grad_steps = grad_steps
        self.lr = lr

    def fit(self, data):
        table = as_annotation_table(data)
        alpha = np.ones(table.n_workers)
        log_beta = np.zeros(table.n_tasks)
        if table.n_labels == 1:
            # degenerate single-label table: nothing to infer
            q = np.ones((table.n_tasks, 1))
            loglik = [0.0]
            iterations, delta = 0, 0.0
        else:
            per_worker = np.bincount(table.worker_idx, minlength=table.n_workers).astype(float)
            per_task = np.bincount(table.task_idx, minlength=table.n_tasks).astype(float)
            q, ll_rows = _normalize_log_rows(_glad_log_posterior(table, alpha, log_beta))
            loglik = [float(ll_rows.sum())]
            iterations, delta = 0, 0.0
            for _ in range(self.n_iter):
                r_correct = q[table.task_idx, table.label_idx]
                for _ in range(self.grad_steps):
                    g_alpha, g_log_beta = _glad_gradients(table, r_correct, alpha, log_beta)
                    alpha = alpha + self.lr * g_alpha / per_worker
                    log_beta = log_beta + self.lr * g_log_beta / per_task
                q_new, ll_rows = _normalize_log_rows(
                    _glad_log_posterior(table, alpha, log_beta)
                )
                loglik.append(float(ll_rows.sum()))
                delta = float(np.abs(q_new - q).max())
                q = q_new
                iterations += 1
                if delta < self.tol:
                    break
        self.abilities_ = alpha
        self.task_difficulty_ = dict(zip(table.tasks, np.exp(log_beta).tolist()))
        self.labels_ = _labels_from_scores(table, q)
        self.posteriors_ = _posterior_dict(table, q)
        self.skills_ = dict(zip(table.workers, alpha.tolist()))
        self.result_ = AggregationResult(
            labels=self.labels_,
            posteriors=self.posteriors_,
            skills=self.skills_,
            trace=Trace(iterations, delta, tuple(loglik)),
        )
        return self


def _mace_e_step(table, theta, xi):
    """Label posteriors and per-response know-the-truth posteriors."""
    t_w = theta[table.worker_idx]
    xi_k = xi[table.worker_idx, table.label_idx]
    log_spam = np.log1p(-t_w) + np.log(xi_k)
    own = t_w + (1.0 - t_w) * xi_k
    log_own = np.log(own)
    base = np.bincount(table.task_idx, weights=log_spam, minlength=table.n_tasks)
    logq = np.full((table.n_tasks, table.n_labels), -np.log(table.n_labels))
    logq += base[:, None]
    np.add.at(logq, (table.task_idx, table.label_idx), log_own - log_spam)
    q, ll_rows = _normalize_log_rows(logq)
    know = q[table.task_idx, table.label_idx] * t_w / own
    return q, know, float(ll_rows.sum())


def _mace_m_step(table, know, smoothing):
    n_w = np.bincount(table.worker_idx, minlength=table.n_workers)
    know_w = np.bincount(table.worker_idx, weights=know, minlength=table.n_workers)
    theta = (smoothing + know_w) / (2.0 * smoothing + n_w)
    spam_counts = np.zeros((table.n_workers, table.n_labels))
    np.add.at(spam_counts, (table.worker_idx, table.label_idx), 1.0 - know)
    xi = spam_counts + smoothing
    xi /= xi.sum(axis=1, keepdims=True)
    return theta, xi


class Mace(BaseAggregator):
    """Spammer-model EM.

    Each response is either a copy of the latent true label (probability
    theta_w) or a draw from the worker's private spam distribution xi_w.
    EM alternates posteriors over (true label, spam indicator) with
    smoothed re-estimation of theta and xi. ``restarts`` seeded random
    initializations are run (theta ~ U(0.4, 0.9), xi uniform with small
    jitter) and the one with the highest final log-likelihood wins.
    Skills are theta.
    """

    def __init__(self, n_iter=100, tol=1e-6, smoothing=0.01, restarts=10, seed=0):
        self.n_iter = n_iter
        self.tol = tol
        self.smoothing = smoothing
        self.restarts = restarts
        self.seed = seed

    def _run(self, table, theta, xi):
        q, know, ll = _mace_e_step(table, theta, xi)
        loglik = [ll]
        iterations, delta = 0, 0.0
        for _ in range(self.n_iter):
            theta, xi = _mace_m_step(table, know, self.smoothing)
            q_new, know, ll = _mace_e_step(table, theta, xi)
            loglik.append(ll)
            delta = float(np.abs(q_new - q).max())
            q = q_new
            iterations += 1
            if delta < self.tol:
                break
        return {
            "theta": theta,
            "xi": xi,
            "q": q,
            "loglik": loglik,
            "iterations": iterations,
            "delta": delta,
        }

    def fit(self, data):
        table = as_annotation_table(data)
        rng = np.random.default_rng(self.seed)
        best = None
        for _ in range(max(1, self.restarts)):
            theta0 = rng.uniform(0.4, 0.9, table.n_workers)
            xi0 = 1.0 + 0.1 * rng.uniform(-1.0, 1.0, (table.n_workers, table.n_labels))
            xi0 /= xi0.sum(axis=1, keepdims=True)
            run = self._run(table, theta0, xi0)
            if best is None or run["loglik"][-1] > best["loglik"][-1]:
                best = run
        self.spam_distribution_ = best["xi"]
        self.labels_ = _labels_from_scores(table, best["q"])
        self.posteriors_ = _posterior_dict(table, best["q"])
        self.skills_ = dict(zip(table.workers, best["theta"].tolist()))
        self.result_ = AggregationResult(
            labels=self.labels_,
            posteriors=self.posteriors_,
            skills=self.skills_,
            trace=Trace(best["iterations"], best["delta"], tuple(best["loglik"])),
        )
        return self


class Kos(BaseAggregator):
    """Message passing on the task-worker graph, binary labels only.

    Responses map to +/-1 (lexicographically first label is +1). Messages
    start at Normal(1, 1) draws and alternate task-to-worker and
    worker-to-task sums that exclude the receiving edge. A task's answer is
    the sign of its response-weighted worker messages; a zero sum falls back
    to the lexicographically smaller label, matching the majority-vote
    tie rule.
    """

    def __init__(self, k_iter=10, seed=0):
        self.k_iter = k_iter
        self.seed = seed

    def fit(self, data):
        table = as_annotation_table(data)
        if table.n_labels != 2:
            raise NotBinary(table.n_labels)
        signs = np.where(table.label_idx == 0, 1.0, -1.0)
        rng = np.random.default_rng(self.seed)
        y = rng.normal(1.0, 1.0, len(table.rows))
        for _ in range(self.k_iter):
            ay = signs * y
            x = np.bincount(table.task_idx, weights=ay, minlength=table.n_tasks)
            x = x[table.task_idx] - ay
            ax = signs * x
            y = np.bincount(table.worker_idx, weights=ax, minlength=table.n_workers)
            y = y[table.worker_idx] - ax
        decision = np.bincount(table.task_idx, weights=signs * y, minlength=table.n_tasks)
        first, second = table.label_set
        self.labels_ = {
            task: (first if d >= 0 else second) for task, d in zip(table.tasks, decision)
        }
        self.decision_margin_ = dict(zip(table.tasks, decision.tolist()))
        self.posteriors_ = None
        self.skills_ = None
        self.result_ = AggregationResult(labels=self.labels_, trace=Trace(self.k_iter, 0.0))
        return self


def _pairwise_agreement(table):
    """Co-annotation and agreement counts between all worker pairs."""
    n_w = table.n_workers
    co = np.zeros((n_w, n_w))
    agree = np.zeros((n_w, n_w))
    # canonical row order is sorted by task, so tasks form contiguous runs
    boundaries = np.searchsorted(table.task_idx, np.arange(table.n_tasks + 1))
    for t in range(table.n_tasks):
        lo, hi = boundaries[t], boundaries[t + 1]
        wk = table.worker_idx[lo:hi]
        lb = table.label_idx[lo:hi]
        co[np.ix_(wk, wk)] += 1.0
        agree[np.ix_(wk, wk)] += lb[:, None] == lb[None, :]
    np.fill_diagonal(co, 0.0)
    np.fill_diagonal(agree, 0.0)
    return co, agree


def _connected(observed: np.ndarray) -> bool:
    n = observed.shape[0]
    seen = np.zeros(n, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        i = stack.pop()
        for j in np.flatnonzero(observed[i]):
            if not seen[j]:
                seen[j] = True
                stack.append(int(j))
    return bool(seen.all())


def _recover_rank_one(ratings, observed, x0, n_iter, tol):
    """Fit x with ratings ~ x x^T on the observed off-diagonal entries.

    Jacobi sweeps of the per-coordinate least-squares update, entries
    clipped to [-1, 1]; coordinates with vanishing denominators keep their
    previous value.
    """
    x = x0.astype(float).copy()
    masked = np.where(observed, ratings, 0.0)
    weights = observed.astype(float)
    for _ in range(n_iter):
        num = masked @ x
        den = weights @ (x * x)
        x_new = np.where(den > 1e-12, num / np.maximum(den, 1e-12), x)
        np.clip(x_new, -1.0, 1.0, out=x_new)
        delta = float(np.abs(x_new - x).max())
        x = x_new
        if delta < tol:
            break
    return x


class MMsr(BaseAggregator):
    """Skill recovery from the rank-one structure of worker agreement.

    Pairwise agreement rates are shifted so that, under independent
    responses, the expected matrix is the outer product of the vector
    x_i = (M s_i - 1)/(M - 1) built from the true skills s_i (M = number of
    labels). That vector is recovered by seeded rank-one completion over the
    observed entries, its global sign fixed so the mean recovered skill is
    at least 1/M, and the final labels are a vote weighted by
    log((M-1) s_i / (1 - s_i)). Raises NoOverlap when the worker
    co-annotation graph is disconnected.
    """

    def __init__(self, n_iter=100, tol=1e-6, seed=0):
        self.n_iter = n_iter
        self.tol = tol
        self.seed = seed

    def fit(self, data):
        table = as_annotation_table(data)
        if table.n_workers < 2:
            raise ValidationError("skill recovery needs at least 2 workers")
        if table.n_labels < 2:
            raise ValidationError("skill recovery needs at least 2 labels")
        m = table.n_labels
        co, agree = _pairwise_agreement(table)
        observed = co > 0
        if not _connected(observed):
            raise NoOverlap()
        rates = np.divide(agree, co, out=np.zeros_like(agree), where=observed)
        ratings = (m * rates - 1.0) / (m - 1.0)
        rng = np.random.default_rng(self.seed)
        x0 = rng.uniform(0.1, 1.0, table.n_workers)
        x = _recover_rank_one(ratings, observed, x0, self.n_iter, self.tol)
        if x.mean() < 0:
            x = -x
        skills = np.clip((1.0 + (m - 1.0) * x) / m, MMSR_SKILL_EPS, 1.0 - MMSR_SKILL_EPS)
        weights = np.log((m - 1.0) * skills / (1.0 - skills))
        weighted = np.zeros((table.n_tasks, table.n_labels))
        np.add.at(weighted, (table.task_idx, table.label_idx), weights[table.worker_idx])
        self.labels_ = _labels_from_scores(table, weighted)
        self.posteriors_ = None
        self.skills_ = dict(zip(table.workers, skills.tolist()))
        self.result_ = AggregationResult(
            labels=self.labels_, skills=self.skills_, trace=Trace(self.n_iter, 0.0)
        )
        return self


def majority_vote(table) -> AggregationResult:
    return MajorityVote().fit_predict(table)


def wawa(table) -> AggregationResult:
    return Wawa().fit_predict(table)


def dawid_skene(table, n_iter=100, tol=1e-6, smoothing=0.01) -> AggregationResult:
    return DawidSkene(n_iter=n_iter, tol=tol, smoothing=smoothing).fit_predict(table)


def glad(table, n_iter=100, tol=1e-6, grad_steps=25, lr=0.1) -> AggregationResult:
    return Glad(n_iter=n_iter, tol=tol, grad_steps=grad_steps, lr=lr).fit_predict(table)


def mace(table, n_iter=100, tol=1e-6, smoothing=0.01, restarts=10, seed=0) -> AggregationResult:
    return Mace(
        n_iter=n_iter, tol=tol, smoothing=smoothing, restarts=restarts, seed=seed
    ).fit_predict(table)


def kos(table, k_iter=10, seed=0) -> AggregationResult:
    return Kos(k_iter=k_iter, seed=seed).fit_predict(table)


def mmsr(table, n_iter=100, tol=1e-6, seed=0) -> AggregationResult:
    return MMsr(n_iter=n_iter, tol=tol, seed=seed).fit_predict(table)
