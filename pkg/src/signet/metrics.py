"""Ranking and polarity metrics.

Polar-pair metrics take parallel arrays ``p_increase``, ``p_decrease`` and
``is_increase`` (the true polarity). A pair is called correctly when the
larger of the two probabilities belongs to its true relation; exact ties are
never correct.
"""

from __future__ import annotations

import logging
import math

import numpy as np

from .errors import UndefinedMetricError

log = logging.getLogger(__name__)

C_SCALE = 2.0 * math.pi**2


def _prepare(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    y = np.asarray(labels).reshape(-1).astype(bool)
    if s.shape != y.shape:
        raise ValueError(f"{len(s)} scores but {len(y)} labels")
    if y.all() or not y.any():
        raise UndefinedMetricError("metric needs at least one positive and one negative label")
    return s, y


def average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ascending ranks, tied values sharing their mean rank."""
    order = np.argsort(values, kind="mergesort")
    sorted_vals = values[order]
    ranks = np.empty(len(values))
    boundaries = np.flatnonzero(np.diff(sorted_vals)) + 1
    starts = np.concatenate([[0], boundaries])
    ends = np.concatenate([boundaries, [len(values)]])
    for lo, hi in zip(starts, ends):
        ranks[order[lo:hi]] = (lo + 1 + hi) / 2.0
    return ranks


def auroc(scores, labels) -> float:
    """Area under the ROC curve via the Mann-Whitney rank statistic."""
    s, y = _prepare(scores, labels)
    ranks = average_ranks(s)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    return float((ranks[y].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def auprc(scores, labels) -> float:
    """Average precision: sum over distinct thresholds of (delta recall) * precision."""
    s, y = _prepare(scores, labels)
    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    tp = np.cumsum(y)
    # last index of each block of tied scores
    ends = np.concatenate([np.flatnonzero(np.diff(s)), [len(s) - 1]])
    tp_at = tp[ends]
    precision = tp_at / (ends + 1)
    recall = tp_at / tp[-1]
    prev_recall = np.concatenate([[0.0], recall[:-1]])
    return float(np.sum((recall - prev_recall) * precision))


def macro_micro(records: dict) -> dict[str, float]:
    """Macro (mean over relations with both classes) and pooled micro AUROC/AUPRC.

    ``records`` maps a relation key to ``(scores, labels)``. Relations whose
    labels are single-class are left out of the macro mean; their keys are
    returned under ``"excluded"``.
    """
    valid, excluded = [], []
    pooled_s, pooled_y = [], []
    for key, (scores, labels) in records.items():
        scores = np.asarray(scores, dtype=np.float64)
        labels = np.asarray(labels)
        pooled_s.append(scores)
        pooled_y.append(labels)
        if len(labels) and 0 < labels.astype(bool).sum() < len(labels):
            valid.append((scores, labels))
        else:
            excluded.append(key)
            log.info("relation %s excluded from macro average (single class)", key)
    if not valid:
        raise UndefinedMetricError("no relation has both positive and negative records")
    s = np.concatenate(pooled_s)
    y = np.concatenate(pooled_y)
    return {
        "macro_auroc": float(np.mean([auroc(a, b) for a, b in valid])),
        "micro_auroc": auroc(s, y),
        "macro_auprc": float(np.mean([auprc(a, b) for a, b in valid])),
        "micro_auprc": auprc(s, y),
        "excluded": excluded,
    }


def average_precision_at_k(scores, labels, k: int) -> float:
    """AP over the top ``k`` records (stable order on ties).

    Normalized by the number of positives inside the top ``k``, so a pure
    head scores 1.0 and a head without positives scores 0.0. With fewer than
    ``k`` records all of them are used.
    """
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    y = np.asarray(labels).reshape(-1).astype(bool)
    top = y[np.argsort(-s, kind="mergesort")][:k]
    hits = np.cumsum(top)
    n_hits = int(top.sum())
    if n_hits == 0:
        return 0.0
    ranks = np.arange(1, len(top) + 1)
    return float(np.sum((hits / ranks)[top]) / n_hits)


def polarity_degree(p_increase, p_decrease):
    """Absolute gap between the Increase and Decrease probabilities."""
    return np.abs(np.asarray(p_increase, dtype=np.float64) - np.asarray(p_decrease, dtype=np.float64))


def transform_c(c):
    """Monotone log rescaling of polarity degree onto [0, 1]."""
    arr = np.asarray(c, dtype=np.float64)
    if np.any((arr < 0) | (arr > 1)) or np.any(~np.isfinite(arr)):
        raise ValueError("polarity degree must lie in [0, 1]")
    out = np.log1p(C_SCALE * arr) / np.log1p(C_SCALE)
    return float(out) if np.ndim(c) == 0 else out


def polarity_correct(p_increase, p_decrease, is_increase) -> np.ndarray:
    pi = np.asarray(p_increase, dtype=np.float64)
    pd = np.asarray(p_decrease, dtype=np.float64)
    truth = np.asarray(is_increase, dtype=bool)
    return np.where(truth, pi > pd, pd > pi)


def cp_at_k(p_increase, p_decrease, is_increase, k: int) -> float:
    """Share of correct polarity calls among the ``k`` pairs with largest polarity degree.

    Ties in degree keep input order. With fewer than ``k`` pairs the share is
    taken over all of them.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    correct = polarity_correct(p_increase, p_decrease, is_increase)
    if len(correct) == 0:
        raise UndefinedMetricError("cp_at_k needs at least one polar pair")
    c = polarity_degree(p_increase, p_decrease)
    top = correct[np.argsort(-c, kind="mergesort")][:k]
    return float(top.sum() / len(top))


def auc_polarity(p_increase, p_decrease, is_increase, mode: str = "signed") -> float:
    """Directional polarity score over polar pairs.

    ``signed``: (correct - wrong) / N, in [-1, 1].
    ``accuracy``: correct / N.
    ``literal``: sum of sign(p_inc - p_dec) * y_hat / N with y_hat = 1 only
    for true Increase pairs ranked Increase-first, so only those count.
    """
    correct = polarity_correct(p_increase, p_decrease, is_increase)
    n = len(correct)
    if n == 0:
        raise UndefinedMetricError("auc_polarity needs at least one polar pair")
    if mode == "signed":
        return float((2 * int(correct.sum()) - n) / n)
    if mode == "accuracy":
        return float(correct.sum() / n)
    if mode == "literal":
        pi = np.asarray(p_increase, dtype=np.float64)
        pd = np.asarray(p_decrease, dtype=np.float64)
        y_hat = (pi > pd) & np.asarray(is_increase, dtype=bool)
        return float(np.sum(np.sign(pi - pd) * y_hat) / n)
    raise ValueError(f"unknown auc_polarity mode {mode!r}")


def descending_ranks(values) -> np.ndarray:
    """1-based ranks by descending value; ties keep input order."""
    v = np.asarray(values, dtype=np.float64)
    order = np.argsort(-v, kind="mergesort")
    ranks = np.empty(len(v), dtype=np.int64)
    ranks[order] = np.arange(1, len(v) + 1)
    return ranks
