"""Token-sequence aggregation.

ROVER fuses hypotheses through a slot-aligned transition network and votes
per slot; RASA and HRRASA embed whole responses, iterate global worker
reliabilities, and always return one of the submitted responses verbatim.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .base import BaseAggregator
from .datamodel import AggregationResult, Trace, as_sequence_table
from .errors import ValidationError

NULL = None  # distinguished non-token slot entry


class TrigramEmbedder:
    """Character-trigram hashed TF-IDF embedding.

    Trigrams are hashed into ``dimension`` buckets with a keyed blake2
    digest, so equal strings always map to equal vectors regardless of
    platform or process. ``fit`` learns smoothed idf weights from a corpus;
    ``transform`` emits L2-normalized rows (the all-zero vector stays zero,
    giving it cosine similarity 0 to everything by convention).
    """

    def __init__(self, dimension=512, hash_seed=17):
        self.dimension = dimension
        self.hash_seed = hash_seed
        self.idf_ = None

    def _bucket(self, gram: str) -> int:
        digest = hashlib.blake2b(
            gram.encode("utf-8"), digest_size=8, key=str(self.hash_seed).encode()
        ).digest()
        return int.from_bytes(digest, "big") % self.dimension

    def _counts(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dimension)
        if len(text) < 3:
            grams = [text] if text else []
        else:
            grams = [text[i : i + 3] for i in range(len(text) - 2)]
        for gram in grams:
            vec[self._bucket(gram)] += 1.0
        return vec

    def fit(self, texts) -> "TrigramEmbedder":
        texts = list(texts)
        df = np.zeros(self.dimension)
        for text in texts:
            df += self._counts(text) > 0
        self.idf_ = np.log((1.0 + len(texts)) / (1.0 + df)) + 1.0
        return self

    def transform(self, texts) -> np.ndarray:
        if self.idf_ is None:
            raise ValidationError("embedder must be fitted before transform")
        rows = np.stack([self._counts(t) * self.idf_ for t in texts])
        norms = np.linalg.norm(rows, axis=1, keepdims=True)
        return rows / np.where(norms > 0, norms, 1.0)

    def fit_transform(self, texts) -> np.ndarray:
        return self.fit(texts).transform(texts)


def _align_hypothesis(slots, n_aligned, tokens):
    """Edit-distance alignment of one hypothesis against the network.

    Matching a slot costs 0 when the token already occurs in it, else 1;
    gaps on either side cost 1 and fill with NULL. On equal cost the
    traceback prefers match, then substitution, then insertion (a fresh
    slot for the token), then deletion (NULL into an existing slot).
    """
    m, n = len(slots), len(tokens)
    slot_sets = [set(s) for s in slots]
    cost = np.zeros((m + 1, n + 1))
    cost[:, 0] = np.arange(m + 1)
    cost[0, :] = np.arange(n + 1)
    for i in range(1, m + 1):
        row = cost[i]
        prev = cost[i - 1]
        for j in range(1, n + 1):
            diag = prev[j - 1] + (0 if tokens[j - 1] in slot_sets[i - 1] else 1)
            row[j] = min(diag, row[j - 1] + 1, prev[j] + 1)
    out = []
    i, j = m, n
    while i > 0 or j > 0:
        here = cost[i, j]
        if i > 0 and j > 0 and tokens[j - 1] in slot_sets[i - 1] and here == cost[i - 1, j - 1]:
            out.append(slots[i - 1] + [tokens[j - 1]])  # match
            i, j = i - 1, j - 1
        elif i > 0 and j > 0 and here == cost[i - 1, j - 1] + 1:
            out.append(slots[i - 1] + [tokens[j - 1]])  # substitution
            i, j = i - 1, j - 1
        elif j > 0 and here == cost[i, j - 1] + 1:
            out.append([NULL] * n_aligned + [tokens[j - 1]])  # insertion
            j -= 1
        else:
            out.append(slots[i - 1] + [NULL])  # deletion
            i -= 1
    out.reverse()
    return out


def _vote_slot(entries):
    tally = {}
    for e in entries:
        tally[e] = tally.get(e, 0) + 1
    # plurality; ties prefer a real token over NULL, then the smaller token
    return min(tally, key=lambda e: (-tally[e], e is NULL, e if e is not NULL else ""))


def rover(responses, tie_seed=0):
    """Fuse token lists by transition-network alignment and slot voting.

    The first response seeds the network and the rest align in input
    order. Tie-breaking is deterministic (``tie_seed`` is reserved).
    Returns the winning token list with NULL slots dropped.
    """
    responses = [list(r) for r in responses]
    if not responses:
        raise ValidationError("need at least one response to fuse")
    slots = [[token] for token in responses[0]]
    for k, hypothesis in enumerate(responses[1:], start=1):
        slots = _align_hypothesis(slots, k, hypothesis)
    winners = [_vote_slot(slot) for slot in slots]
    return [w for w in winners if w is not NULL]


def rover_order_sensitivity(all_responses, n_shuffles=20, seed=0):
    """Fraction of tasks whose fused output changes when the alignment
    order of hypotheses 2..n is shuffled (the base stays first)."""
    rng = np.random.default_rng(seed)
    changed = 0
    total = 0
    for responses in all_responses:
        responses = [list(r) for r in responses]
        reference = rover(responses)
        rest = responses[1:]
        for _ in range(n_shuffles):
            order = rng.permutation(len(rest))
            shuffled = [responses[0]] + [rest[i] for i in order]
            total += 1
            if rover(shuffled) != reference:
                changed += 1
    return changed / total if total else 0.0


def _task_slices(table):
    boundaries = np.searchsorted(table.task_idx, np.arange(table.n_tasks + 1))
    return [(boundaries[t], boundaries[t + 1]) for t in range(table.n_tasks)]


def _reliability_loop(table, vectors, n_iter):
    """Shared RASA reliability iteration over normalized response vectors.

    Single-response tasks are uninformative (their centroid is the response
    itself) and do not contribute to the updates; workers seen only on such
    tasks keep their current reliability.
    """
    slices = _task_slices(table)
    reliab = np.ones(table.n_workers)
    centroids = np.zeros((table.n_tasks, vectors.shape[1]))
    cosines = np.zeros(len(table.rows))
    for _ in range(n_iter):
        for t, (lo, hi) in enumerate(slices):
            w = reliab[table.worker_idx[lo:hi]]
            total = w.sum()
            centroid = (
                (w[:, None] * vectors[lo:hi]).sum(axis=0) / total
                if total > 0
                else vectors[lo:hi].mean(axis=0)
            )
            centroids[t] = centroid
            norm = np.linalg.norm(centroid)
            cosines[lo:hi] = vectors[lo:hi] @ (centroid / norm) if norm > 0 else 0.0
        num = np.zeros(table.n_workers)
        cnt = np.zeros(table.n_workers)
        for t, (lo, hi) in enumerate(slices):
            if hi - lo < 2:
                continue
            wk = table.worker_idx[lo:hi]
            np.add.at(num, wk, np.maximum(0.0, cosines[lo:hi]))
            np.add.at(cnt, wk, 1.0)
        reliab = np.where(cnt > 0, num / np.maximum(cnt, 1.0), reliab)
    # final centroids/cosines under the final reliabilities
    for t, (lo, hi) in enumerate(slices):
        w = reliab[table.worker_idx[lo:hi]]
        total = w.sum()
        centroid = (
            (w[:, None] * vectors[lo:hi]).sum(axis=0) / total
            if total > 0
            else vectors[lo:hi].mean(axis=0)
        )
        centroids[t] = centroid
        norm = np.linalg.norm(centroid)
        cosines[lo:hi] = vectors[lo:hi] @ (centroid / norm) if norm > 0 else 0.0
    return reliab, cosines, slices


def _select(table, slices, keys):
    """Per task, pick the response with the largest key; ties go to the
    lexicographically smallest response text."""
    texts = [" ".join(tokens) for _, _, tokens in table.rows]
    labels = {}
    for t, (lo, hi) in enumerate(slices):
        best = min(range(lo, hi), key=lambda k: (-keys[k], texts[k]))
        labels[table.tasks[t]] = table.rows[best][2]
    return labels


class Rasa(BaseAggregator):
    """Reliability-aware selection of one verbatim response per task.

    Responses are embedded; worker reliabilities weight per-task centroids
    and are re-estimated as each worker's mean non-negative cosine to those
    centroids. The output response maximizes cosine to the final centroid.
    """

    def __init__(self, n_iter=10, embedder=None):
        self.n_iter = n_iter
        self.embedder = embedder

    def fit(self, data):
        table = as_sequence_table(data)
        embedder = self.embedder if self.embedder is not None else TrigramEmbedder()
        texts = [" ".join(tokens) for _, _, tokens in table.rows]
        vectors = embedder.fit_transform(texts)
        reliab, cosines, slices = _reliability_loop(table, vectors, self.n_iter)
        self.labels_ = _select(table, slices, cosines)
        self.skills_ = dict(zip(table.workers, reliab.tolist()))
        self.result_ = AggregationResult(
            labels=self.labels_, skills=self.skills_, trace=Trace(self.n_iter, 0.0)
        )
        return self


class Hrrasa(BaseAggregator):
    """RASA selection augmented with per-response local quality.

    The reliability loop is RASA's; the selection key becomes
    reliability^lam * local^(1-lam) with lam = ``local_weight``, where
    local is the response's mean non-negative cosine to the other
    responses of its task (1 when it stands alone).
    """

    def __init__(self, n_iter=10, local_weight=0.5, embedder=None):
        self.n_iter = n_iter
        self.local_weight = local_weight
        self.embedder = embedder

    def fit(self, data):
        table = as_sequence_table(data)
        embedder = self.embedder if self.embedder is not None else TrigramEmbedder()
        texts = [" ".join(tokens) for _, _, tokens in table.rows]
        vectors = embedder.fit_transform(texts)
        reliab, _, slices = _reliability_loop(table, vectors, self.n_iter)
        local = np.ones(len(table.rows))
        for _, (lo, hi) in enumerate(slices):
            if hi - lo < 2:
                continue
            block = vectors[lo:hi]
            sims = block @ block.T
            np.fill_diagonal(sims, 0.0)
            local[lo:hi] = np.maximum(0.0, sims.sum(axis=1) / (hi - lo - 1))
        lam = self.local_weight
        keys = reliab[table.worker_idx] ** lam * local ** (1.0 - lam)
        self.labels_ = _select(table, slices, keys)
        self.local_quality_ = local
        self.skills_ = dict(zip(table.workers, reliab.tolist()))
        self.result_ = AggregationResult(
            labels=self.labels_, skills=self.skills_, trace=Trace(self.n_iter, 0.0)
        )
        return self


class Rover(BaseAggregator):
    """Transition-network fusion applied independently to every task."""

    def __init__(self, tie_seed=0):
        self.tie_seed = tie_seed

    def fit(self, data):
        table = as_sequence_table(data)
        labels = {}
        for lo, hi in _task_slices(table):
            responses = [table.rows[k][2] for k in range(lo, hi)]
            labels[table.rows[lo][0]] = tuple(rover(responses, tie_seed=self.tie_seed))
        self.labels_ = labels
        self.result_ = AggregationResult(labels=labels, trace=Trace(0, 0.0))
        return self


def rasa(table, embedder=None, n_iter=10) -> AggregationResult:
    return Rasa(n_iter=n_iter, embedder=embedder).fit_predict(table)


def hrrasa(table, embedder=None, n_iter=10, local_weight=0.5) -> AggregationResult:
    return Hrrasa(n_iter=n_iter, local_weight=local_weight, embedder=embedder).fit_predict(table)
