"""RGCN refinement layer feeding a basis tensor-decomposition scorer.

The scorer gives ``sigmoid(sum_k a[r, k] * sum(E_i * E_j * R_k))``: K global
factor vectors ``R_k`` mixed per relation by ``a[r, k]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .encoder import glorot
from .errors import ShapeError
from .graph import N_RELATIONS, HeteroGraph, NeighborIndex, Relation, triplet_array


@dataclass(frozen=True)
class DecoderConfig:
    dim: int
    n_bases: int = 4
    n_factors: int = 4
    activation: str = "relu"


def decoder_shapes(config: DecoderConfig, prefix: str = "dec") -> dict[str, tuple[int, ...]]:
    d = config.dim
    return {
        f"{prefix}.bases": (config.n_bases, d, d),
        f"{prefix}.coef": (N_RELATIONS, config.n_bases),
        f"{prefix}.factors": (config.n_factors, d),
        f"{prefix}.mixing": (N_RELATIONS, config.n_factors),
    }


def init_decoder_params(config: DecoderConfig, rng: np.random.Generator, prefix: str = "dec") -> dict[str, np.ndarray]:
    d = config.dim
    return {
        f"{prefix}.bases": glorot(rng, d, d, (config.n_bases, d, d)),
        f"{prefix}.coef": glorot(rng, N_RELATIONS, config.n_bases),
        f"{prefix}.factors": glorot(rng, config.n_factors, d),
        f"{prefix}.mixing": glorot(rng, N_RELATIONS, config.n_factors),
    }


def relation_weights(coef: Tensor, bases: Tensor) -> Tensor:
    """Per-relation matrices ``W_r = sum_b coef[r, b] * bases[b]``."""
    return ad.einsum("rb,bij->rij", coef, bases)


def rgcn_propagate(
    embeddings: Tensor,
    index: NeighborIndex,
    weights: Tensor,
    act,
    relations=tuple(Relation),
) -> Tensor:
    """``act(sum_r sum_{j in N_r(i)} H_j W_r / |N_r(i)|)``; no self connection."""
    n = index.n_nodes
    if embeddings.shape[0] != n:
        raise ShapeError(f"embeddings have {embeddings.shape[0]} rows for {n} nodes")
    if weights.ndim != 3 or weights.shape[1] != embeddings.shape[1]:
        raise ShapeError(f"relation weights {weights.shape} do not match embeddings {embeddings.shape}")
    total = None
    for rel in relations:
        deg = index.degree(rel).astype(np.float64)
        src, dst = index.directed(rel)
        if not len(src):
            continue
        projected = ad.matmul(embeddings, ad.take(weights, int(rel)))
        msg = ad.scatter_add(ad.scale_rows(ad.take(projected, src), 1.0 / deg[dst]), dst, n)
        total = msg if total is None else total + msg
    if total is None:
        total = Tensor(np.zeros((n, weights.shape[2])))
    return act(total)


def rgcn_refine(
    embeddings: Tensor,
    graph: HeteroGraph,
    params: Mapping[str, Tensor],
    config: DecoderConfig,
    prefix: str = "dec",
) -> Tensor:
    weights = relation_weights(params[f"{prefix}.coef"], params[f"{prefix}.bases"])
    return rgcn_propagate(embeddings, graph.neighbor_index, weights, ad.activation(config.activation))


def score_logits(
    refined: Tensor,
    triplets,
    params: Mapping[str, Tensor],
    n_chem: int,
    prefix: str = "dec",
) -> Tensor:
    trip = triplet_array(triplets)
    rel_vectors = ad.matmul(params[f"{prefix}.mixing"], params[f"{prefix}.factors"])
    heads = ad.take(refined, trip[:, 0])
    tails = ad.take(refined, trip[:, 2] + n_chem)
    diag = ad.take(rel_vectors, trip[:, 1])
    return ad.reduce_sum(ad.hadamard(ad.hadamard(heads, tails), diag), axis=1)


def score_batch(refined: Tensor, triplets, params: Mapping[str, Tensor], n_chem: int) -> np.ndarray:
    trip = triplet_array(triplets)
    if len(trip) == 0:
        return np.zeros(0)
    return ad.sigmoid(score_logits(refined, trip, params, n_chem)).value


def score(head: int, relation: Relation, tail: int, refined: Tensor, params: Mapping[str, Tensor], n_chem: int) -> float:
    """Probability of one (chemical, relation, gene) triplet, computed directly."""
    e_i = refined.value[head]
    e_j = refined.value[n_chem + tail]
    mixing = params["dec.mixing"].value[int(relation)]
    factors = params["dec.factors"].value
    logit = sum(mixing[k] * float(np.sum(e_i * e_j * factors[k])) for k in range(len(mixing)))
    return float(ad.sigmoid(Tensor(np.array([logit]))).value[0])

