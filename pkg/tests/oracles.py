"""Slow, literal reference implementations used as test oracles."""

import itertools
import math

import numpy as np


def auroc_pairs(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y]
    neg = [s for s, y in zip(scores, labels) if not y]
    wins = 0.0
    for p in pos:
        for n in neg:
            wins += 1.0 if p > n else 0.5 if p == n else 0.0
    return wins / (len(pos) * len(neg))


def auprc_thresholds(scores, labels):
    total_pos = sum(bool(y) for y in labels)
    area, prev_recall = 0.0, 0.0
    for t in sorted(set(scores), reverse=True):
        picked = [y for s, y in zip(scores, labels) if s >= t]
        tp = sum(bool(y) for y in picked)
        recall = tp / total_pos
        area += (recall - prev_recall) * tp / len(picked)
        prev_recall = recall
    return area


def _stable_desc(values):
    return sorted(range(len(values)), key=lambda i: (-values[i], i))


def ap_at_k(scores, labels, k):
    top = [bool(labels[i]) for i in _stable_desc(scores)[:k]]
    hits, total = 0, 0.0
    for rank, is_pos in enumerate(top, start=1):
        if is_pos:
            hits += 1
            total += hits / rank
    return total / hits if hits else 0.0


def _call(p_inc, p_dec, is_inc):
    if p_inc == p_dec:
        return False
    return (p_inc > p_dec) == bool(is_inc)


def cp_at_k(p_inc, p_dec, is_inc, k):
    degree = [abs(a - b) for a, b in zip(p_inc, p_dec)]
    top = _stable_desc(degree)[:k]
    return sum(_call(p_inc[i], p_dec[i], is_inc[i]) for i in top) / len(top)


def auc_polarity_signed(p_inc, p_dec, is_inc):
    calls = [_call(a, b, y) for a, b, y in zip(p_inc, p_dec, is_inc)]
    return (sum(calls) - (len(calls) - sum(calls))) / len(calls)


def transform_c(c):
    return math.log(1 + 2 * math.pi**2 * c) / math.log(2 * math.pi**2 + 1)


OUTCOMES = ("correct", "wrong", "tie")


def polar_instances(max_n=8, seed=0):
    """Every correct/wrong/tie pattern for 1..max_n records, with random degrees and truths."""
    rng = np.random.default_rng(seed)
    for n in range(1, max_n + 1):
        for pattern in itertools.product(OUTCOMES, repeat=n):
            truth = rng.integers(0, 2, n).astype(bool)
            # coarse grid so degree ties occur
            gap = rng.integers(1, 4, n) / 8.0
            base = rng.integers(0, 3, n) / 8.0
            p_inc, p_dec = [], []
            for outcome, t, g, b in zip(pattern, truth, gap, base):
                hi, lo = b + g, b
                if outcome == "tie":
                    p_inc.append(b)
                    p_dec.append(b)
                elif (outcome == "correct") == bool(t):
                    p_inc.append(hi)
                    p_dec.append(lo)
                else:
                    p_inc.append(lo)
                    p_dec.append(hi)
            yield p_inc, p_dec, truth.tolist()


def ranking_instances(max_n=8, seed=0):
    """Every label vector for 1..max_n records, with tie-prone scores."""
    rng = np.random.default_rng(seed)
    for n in range(1, max_n + 1):
        for labels in itertools.product((0, 1), repeat=n):
            yield (rng.integers(0, 4, n) / 4.0).tolist(), list(labels)
