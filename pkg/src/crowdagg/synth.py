"""Seeded synthetic dataset generators with exact ground truth.

Every generator is deterministic in its seed, emits ids whose
lexicographic order equals their numeric order, and produces tables that
pass data-model validation, so aggregator accuracy is measurable without
any external downloads.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .datamodel import AnnotationTable, MaskSet, PairwiseTable, SequenceTable
from .errors import ValidationError

WORDS = (
    "the", "be", "to", "of", "and", "a", "in", "that", "have", "it",
    "for", "not", "on", "with", "he", "as", "you", "do", "at", "this",
    "but", "his", "by", "from", "they", "we", "say", "her", "she", "or",
    "an", "will", "my", "one", "all", "would", "there", "their", "what",
    "so", "up", "out", "if", "about", "who", "get", "which", "go", "me",
    "when", "make", "can", "like", "time", "no", "just", "him", "know",
    "take", "people", "into", "year", "your", "good", "some", "could",
    "them", "see", "other", "than", "then", "now", "look", "only", "come",
    "its", "over", "think", "also", "back", "after", "use", "two", "how",
    "our", "work", "first", "well", "way", "even", "new", "want", "because",
    "any", "these", "give", "day", "most", "us", "great", "between", "need",
    "large", "often", "important", "long", "thing", "right", "old", "big",
    "high", "different", "small", "next", "early", "young", "last", "own",
    "public", "bad", "same", "able", "state", "every", "school", "still",
    "number", "part", "turn", "real", "leave", "might", "develop", "case",
    "world", "start", "hand", "light", "show", "try", "head", "stand",
    "group", "begin", "seem", "country", "help", "point", "end", "change",
    "play", "study", "follow", "since", "move", "include", "believe",
    "allow", "lead", "live", "hold", "write", "provide", "continue",
)


def _ids(prefix: str, count: int) -> list:
    width = max(4, len(str(max(count - 1, 0))))
    return [f"{prefix}{i:0{width}d}" for i in range(count)]


def _skill_sampler(skill_dist, rng):
    """Accepts ('beta', a, b), ('fixed', v), or a bare float for fixed."""
    if isinstance(skill_dist, (int, float)):
        skill_dist = ("fixed", float(skill_dist))
    kind = skill_dist[0]
    if kind == "beta":
        _, a, b = skill_dist
        return lambda n: rng.beta(a, b, n)
    if kind == "fixed":
        value = float(skill_dist[1])
        return lambda n: np.full(n, value)
    raise ValidationError(f"unknown skill distribution {skill_dist!r}")


def gen_categorical(
    n_tasks,
    n_workers,
    per_task,
    n_labels,
    skill_dist=("beta", 4.0, 1.0),
    model="one-coin",
    seed=0,
):
    """Sample a categorical table plus its exact truth and worker skills.

    True labels are uniform; each task is answered by ``per_task`` distinct
    uniformly chosen workers. Under ``one-coin`` a worker answers correctly
    with probability equal to their skill, otherwise uniformly among the
    wrong labels; under ``confusion`` each worker gets a random
    row-stochastic matrix whose diagonal is their skill.
    """
    if per_task > n_workers:
        raise ValidationError("per_task cannot exceed n_workers")
    if n_tasks < 1 or n_workers < 1 or n_labels < 1 or per_task < 1:
        raise ValidationError("all sizes must be positive")
    if model not in ("one-coin", "confusion"):
        raise ValidationError(f"unknown worker model {model!r}")
    rng = np.random.default_rng(seed)
    tasks = _ids("t", n_tasks)
    workers = _ids("w", n_workers)
    labels = _ids("l", n_labels)
    skills = np.clip(_skill_sampler(skill_dist, rng)(n_workers), 0.0, 1.0)
    confusion = None
    if model == "confusion":
        confusion = np.empty((n_workers, n_labels, n_labels))
        for w in range(n_workers):
            for c in range(n_labels):
                row = np.zeros(n_labels)
                row[c] = skills[w]
                if n_labels > 1:
                    off = rng.dirichlet(np.ones(n_labels - 1)) * (1.0 - skills[w])
                    row[np.arange(n_labels) != c] = off
                else:
                    row[c] = 1.0
                confusion[w, c] = row
    truth_idx = rng.integers(0, n_labels, n_tasks)
    rows = []
    for t in range(n_tasks):
        chosen = rng.choice(n_workers, size=per_task, replace=False)
        for w in chosen:
            c = truth_idx[t]
            if model == "one-coin":
                if n_labels == 1 or rng.random() < skills[w]:
                    answer = c
                else:
                    others = [k for k in range(n_labels) if k != c]
                    answer = others[rng.integers(0, len(others))]
            else:
                answer = rng.choice(n_labels, p=confusion[w, c])
            rows.append((tasks[t], workers[w], labels[answer]))
    table = AnnotationTable(rows)
    truth = {tasks[t]: labels[truth_idx[t]] for t in range(n_tasks)}
    true_skills = dict(zip(workers, skills.tolist()))
    return table, truth, true_skills


def gen_pairwise(n_items, n_workers, n_comparisons, worker_noise=0.0, seed=0):
    """Sample comparisons from latent Normal(0, 1) item scores.

    Each comparison draws a worker and an ordered item pair uniformly;
    with the worker's noise rate the outcome is a fair coin, otherwise the
    left item wins with probability sigmoid(s_left - s_right).
    ``worker_noise`` is one rate for everyone or a per-worker sequence.
    """
    if n_items < 2 or n_workers < 1 or n_comparisons < 0:
        raise ValidationError("need >= 2 items, >= 1 worker, >= 0 comparisons")
    rng = np.random.default_rng(seed)
    items = _ids("i", n_items)
    workers = _ids("w", n_workers)
    noise = np.broadcast_to(np.asarray(worker_noise, dtype=float), (n_workers,))
    if (noise < 0).any() or (noise > 1).any():
        raise ValidationError("worker_noise must lie in [0, 1]")
    scores = rng.normal(0.0, 1.0, n_items)
    rows = []
    for _ in range(n_comparisons):
        w = int(rng.integers(0, n_workers))
        left = int(rng.integers(0, n_items))
        right = int(rng.integers(0, n_items - 1))
        if right >= left:
            right += 1
        if rng.random() < noise[w]:
            left_wins = rng.random() < 0.5
        else:
            p_left = 1.0 / (1.0 + np.exp(scores[right] - scores[left]))
            left_wins = rng.random() < p_left
        winner = items[left] if left_wins else items[right]
        rows.append((workers[w], items[left], items[right], winner))
    table = PairwiseTable(rows)
    truth = dict(zip(items, scores.tolist()))
    return table, truth


def gen_sequence(
    n_tasks, n_workers, token_error_rate, seed=0, length_range=(8, 15)
):
    """Reference sentences from the bundled word list, corrupted per worker.

    Each reference token independently suffers an error with the given
    rate; the error type is uniform over substitution (a different random
    word), deletion, and insertion of a random word after the kept token.
    A response corrupted down to nothing gets one random word so rows stay
    valid.
    """
    if not 0.0 <= token_error_rate <= 1.0:
        raise ValidationError("token_error_rate must lie in [0, 1]")
    lo, hi = length_range
    if lo < 1 or hi < lo:
        raise ValidationError("invalid sentence length range")
    rng = np.random.default_rng(seed)
    tasks = _ids("t", n_tasks)
    workers = _ids("w", n_workers)
    rows = []
    truth = {}
    for t in range(n_tasks):
        length = int(rng.integers(lo, hi + 1))
        reference = [WORDS[rng.integers(0, len(WORDS))] for _ in range(length)]
        truth[tasks[t]] = tuple(reference)
        for w in range(n_workers):
            response = []
            for token in reference:
                if rng.random() < token_error_rate:
                    kind = rng.integers(0, 3)
                    if kind == 0:  # substitution with a different word
                        candidates = [x for x in WORDS if x != token]
                        response.append(candidates[rng.integers(0, len(candidates))])
                    elif kind == 1:  # deletion
                        pass
                    else:  # insertion after the kept token
                        response.append(token)
                        response.append(WORDS[rng.integers(0, len(WORDS))])
                else:
                    response.append(token)
            if not response:
                response.append(WORDS[rng.integers(0, len(WORDS))])
            rows.append((tasks[t], workers[w], tuple(response)))
    return SequenceTable(rows), truth


def _base_shape(shape, grid, rng):
    height, width = grid
    mask = np.zeros((height, width), dtype=np.uint8)
    cy = rng.uniform(0.35, 0.65) * height
    cx = rng.uniform(0.35, 0.65) * width
    ry = rng.uniform(0.15, 0.3) * height
    rx = rng.uniform(0.15, 0.3) * width
    yy, xx = np.mgrid[0:height, 0:width]
    if shape == "ellipse":
        mask[((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0] = 1
    elif shape == "rect":
        mask[(np.abs(yy - cy) <= ry) & (np.abs(xx - cx) <= rx)] = 1
    else:
        raise ValidationError(f"unknown shape {shape!r}")
    return mask


def gen_segmentation(
    n_tasks,
    n_workers,
    shape="ellipse",
    flip_rate=0.1,
    morph_noise=1,
    grid=(64, 64),
    seed=0,
):
    """Random filled shapes per task; workers see dilated/eroded copies
    with independent pixel flips.

    The morphological radius is drawn uniformly from
    [-morph_noise, morph_noise] per response (negative erodes, positive
    dilates, zero leaves the boundary alone).
    """
    if not 0.0 <= flip_rate <= 1.0:
        raise ValidationError("flip_rate must lie in [0, 1]")
    if morph_noise < 0:
        raise ValidationError("morph_noise must be non-negative")
    rng = np.random.default_rng(seed)
    tasks = _ids("t", n_tasks)
    workers = _ids("w", n_workers)
    mask_sets = []
    truth = {}
    for t in range(n_tasks):
        base = _base_shape(shape, grid, rng)
        truth[tasks[t]] = base
        pairs = []
        for w in range(n_workers):
            noisy = base.astype(bool)
            if morph_noise > 0:
                radius = int(rng.integers(-morph_noise, morph_noise + 1))
                if radius > 0:
                    noisy = ndimage.binary_dilation(noisy, iterations=radius)
                elif radius < 0:
                    noisy = ndimage.binary_erosion(noisy, iterations=-radius)
            flips = rng.random(grid) < flip_rate
            noisy = np.logical_xor(noisy, flips)
            pairs.append((workers[w], noisy.astype(np.uint8)))
        mask_sets.append(MaskSet(tasks[t], pairs))
    return mask_sets, truth
