"""Independent direct-from-definition implementations used as test oracles.

Everything here is written with plain Python dicts and loops, separately
from the numpy code paths under test.
"""

import math
from collections import Counter, defaultdict
from functools import lru_cache


def mv_oracle(rows):
    """task -> plurality label, ties to the lexicographically smallest."""
    votes = defaultdict(Counter)
    for task, _, label in rows:
        votes[task][label] += 1
    out = {}
    for task, counter in votes.items():
        best = max(counter)
        best_count = -1
        for label in sorted(counter):
            if counter[label] > best_count:
                best, best_count = label, counter[label]
        out[task] = best
    return out


def wawa_oracle(rows):
    """(labels, skills) by the two-pass agreement-with-majority scheme."""
    mv = mv_oracle(rows)
    n = Counter()
    m = Counter()
    for task, worker, label in rows:
        n[worker] += 1
        m[worker] += label == mv[task]
    skills = {w: (m[w] + 1.0) / (n[w] + 2.0) for w in n}
    mass = defaultdict(lambda: defaultdict(float))
    for task, worker, label in rows:
        mass[task][label] += skills[worker]
    labels = {}
    for task, by_label in mass.items():
        best, best_mass = None, -1.0
        for label in sorted(by_label):
            if by_label[label] > best_mass:
                best, best_mass = label, by_label[label]
        labels[task] = best
    return labels, skills


def ds_oracle(rows, n_iter=100, tol=1e-6, smoothing=0.01):
    """Straight-from-formula confusion-matrix EM; returns labels and the
    log-likelihood recorded after every M step."""
    tasks = sorted({t for t, _, _ in rows})
    workers = sorted({w for _, w, _ in rows})
    labels = sorted({l for _, _, l in rows})
    k = len(labels)
    by_task = defaultdict(list)
    for t, w, l in rows:
        by_task[t].append((w, l))
    # init: vote fractions
    q = {}
    for t in tasks:
        counts = Counter(l for _, l in by_task[t])
        total = sum(counts.values())
        q[t] = {c: counts.get(c, 0) / total for c in labels}
    loglik = []
    for _ in range(n_iter):
        # M step
        pi = {c: sum(q[t][c] for t in tasks) / len(tasks) for c in labels}
        conf = {}
        for w in workers:
            conf[w] = {}
            for c in labels:
                raw = {}
                for l in labels:
                    total = 0.0
                    for t in tasks:
                        for (w2, l2) in by_task[t]:
                            if w2 == w and l2 == l:
                                total += q[t][c]
                    raw[l] = smoothing + total
                z = sum(raw.values())
                conf[w][c] = {l: (raw[l] / z if z > 0 else 1.0 / k) for l in labels}
        # log-likelihood and E step
        ll = 0.0
        q_new = {}
        for t in tasks:
            scores = {}
            for c in labels:
                p = pi[c]
                for (w, l) in by_task[t]:
                    p *= conf[w][c][l]
                scores[c] = p
            z = sum(scores.values())
            ll += math.log(z) if z > 0 else float("-inf")
            q_new[t] = {c: (scores[c] / z if z > 0 else 1.0 / k) for c in labels}
        loglik.append(ll)
        delta = max(abs(q_new[t][c] - q[t][c]) for t in tasks for c in labels)
        q = q_new
        if delta < tol:
            break
    out = {}
    for t in tasks:
        best, best_p = None, -1.0
        for c in labels:  # sorted: ties to the smallest
            if q[t][c] > best_p + 1e-15:
                best, best_p = c, q[t][c]
        out[t] = best
    return out, loglik


def alpha_oracle(rows, distance=None):
    """Krippendorff's alpha by explicit ordered-pair counting."""
    if distance is None:
        distance = lambda a, b: 0.0 if a == b else 1.0
    units = defaultdict(list)
    for t, _, l in rows:
        units[t].append(l)
    units = {t: ls for t, ls in units.items() if len(ls) >= 2}
    if not units:
        raise ValueError("no units with two or more responses")
    o = defaultdict(float)
    for ls in units.values():
        n_u = len(ls)
        for i in range(n_u):
            for j in range(n_u):
                if i != j:
                    o[(ls[i], ls[j])] += 1.0 / (n_u - 1)
    labels = sorted({l for pair in o for l in pair} | {l for ls in units.values() for l in ls})
    n_c = {c: sum(o[(c, k)] for k in labels) for c in labels}
    n_total = sum(n_c.values())
    d_o = sum(o[(c, k)] * distance(c, k) for c in labels for k in labels)
    d_e = sum(
        n_c[c] * n_c[k] * distance(c, k) for c in labels for k in labels
    ) / (n_total - 1.0)
    if d_e == 0.0:
        return 1.0
    return 1.0 - d_o / d_e


def agreement_oracle(rows):
    mv = mv_oracle(rows)
    return sum(label == mv[task] for task, _, label in rows) / len(rows)


def edit_distance_oracle(a, b):
    a, b = tuple(a), tuple(b)

    @lru_cache(maxsize=None)
    def d(i, j):
        if i == 0:
            return j
        if j == 0:
            return i
        return min(
            d(i - 1, j - 1) + (a[i - 1] != b[j - 1]),
            d(i - 1, j) + 1,
            d(i, j - 1) + 1,
        )

    return d(len(a), len(b))


def ranks_oracle(values):
    """1-based average ranks computed by pairwise comparison."""
    out = []
    for v in values:
        less = sum(1 for u in values if u < v)
        equal = sum(1 for u in values if u == v)
        out.append(less + (equal + 1) / 2.0)
    return out


def spearman_oracle(scores, truth):
    common = sorted(set(scores) & set(truth))
    a = ranks_oracle([scores[i] for i in common])
    b = ranks_oracle([truth[i] for i in common])
    ma = sum(a) / len(a)
    mb = sum(b) / len(b)
    num = sum((x - ma) * (y - mb) for x, y in zip(a, b))
    da = math.sqrt(sum((x - ma) ** 2 for x in a))
    db = math.sqrt(sum((y - mb) ** 2 for y in b))
    return num / (da * db)


def iou_oracle(a, b):
    inter = union = 0
    for ra, rb in zip(a, b):
        for va, vb in zip(ra, rb):
            inter += bool(va) and bool(vb)
            union += bool(va) or bool(vb)
    return inter / union if union else 1.0
