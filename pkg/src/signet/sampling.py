"""Negative sampling by triple corruption and Must-Link / Cannot-Link pairs."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .graph import N_RELATIONS, HeteroGraph, Relation, Triplet, triplet_array

MAX_ATTEMPTS = 100


class LabeledBatch(NamedTuple):
    triplets: np.ndarray  # (m, 3) int64
    labels: np.ndarray  # (m,) float64, 1 for positives
    collisions: int


def sample_negatives(batch, graph: HeteroGraph, n_per_positive: int, rng: np.random.Generator) -> LabeledBatch:
    """Positives (label 1) followed by ``n_per_positive`` corruptions each (label 0).

    A corruption replaces the head by a random chemical or the tail by a random
    gene with equal probability, and is redrawn while it is a true edge of
    ``graph``. After ``MAX_ATTEMPTS`` failed draws the last candidate is kept
    and counted in ``collisions``.
    """
    if n_per_positive < 1:
        raise ValueError("n_per_positive must be >= 1")
    pos = triplet_array(batch)
    n = len(pos)
    neg = np.empty((n * n_per_positive, 3), dtype=np.int64)
    truth = graph.truth
    n_chem, n_gene = graph.n_chem, graph.n_gene
    collisions = 0
    row = 0
    for h, r, t in pos.tolist():
        for _ in range(n_per_positive):
            for _ in range(MAX_ATTEMPTS):
                if rng.random() < 0.5:
                    cand = (int(rng.integers(n_chem)), r, t)
                else:
                    cand = (h, r, int(rng.integers(n_gene)))
                if (cand[0] * N_RELATIONS + r) * n_gene + cand[2] not in truth:
                    break
            else:
                collisions += 1
            neg[row] = cand
            row += 1
    triplets = np.concatenate([pos, neg])
    labels = np.concatenate([np.ones(n), np.zeros(len(neg))])
    return LabeledBatch(triplets, labels, collisions)


class ConstraintKind(enum.Enum):
    MUST_LINK = "must_link"
    CANNOT_LINK = "cannot_link"


@dataclass(frozen=True)
class ConstraintPair:
    kind: ConstraintKind
    anchor: Triplet  # the observed edge, carrying r_label
    probe: Triplet  # same (head, tail) with r_predict


def build_constraint_pairs(batch, mode: str = "with_cl", rng: np.random.Generator | None = None) -> list[ConstraintPair]:
    """Must-Link pair per polar edge, plus a Cannot-Link pair with the opposite
    relation when ``mode == "with_cl"``. Binding/Affect edges yield nothing.

    ``rng`` is accepted for interface symmetry with the samplers; the
    construction itself is deterministic.
    """
    if mode not in ("with_cl", "without_cl"):
        raise ValueError(f"mode must be 'with_cl' or 'without_cl', got {mode!r}")
    pairs = []
    for h, r, t in triplet_array(batch).tolist():
        rel = Relation(r)
        if not rel.is_polar:
            continue
        anchor = Triplet(h, rel, t)
        pairs.append(ConstraintPair(ConstraintKind.MUST_LINK, anchor, anchor))
        if mode == "with_cl":
            pairs.append(ConstraintPair(ConstraintKind.CANNOT_LINK, anchor, Triplet(h, rel.opposite(), t)))
    return pairs


def constraint_arrays(pairs: list[ConstraintPair]) -> tuple[np.ndarray, np.ndarray]:
    """``(probe_triplets, is_must_link)`` arrays for vectorized scoring."""
    probes = triplet_array([p.probe for p in pairs])
    must = np.array([p.kind is ConstraintKind.MUST_LINK for p in pairs], dtype=bool)
    return probes, must
