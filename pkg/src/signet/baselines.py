"""Baseline scorers: RGCN + DistMult, GraphSAGE-style, and TransE.

All three emit logits so they share the BCE / constraint-loss training stack
and the probability-based evaluation with RGCNTD.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .decoder import relation_weights, rgcn_propagate
from .encoder import glorot
from .graph import N_RELATIONS, HeteroGraph, Relation, triplet_array
from .model import LinkModel


def distmult_logits(emb: Tensor, triplets, rel_vectors: Tensor, n_chem: int) -> Tensor:
    """``sum(e_h * w_r * e_t)`` per triplet."""
    trip = triplet_array(triplets)
    heads = ad.take(emb, trip[:, 0])
    tails = ad.take(emb, trip[:, 2] + n_chem)
    diag = ad.take(rel_vectors, trip[:, 1])
    return ad.reduce_sum(ad.hadamard(ad.hadamard(heads, tails), diag), axis=1)


class RgcnModel(LinkModel):
    """Learned input embeddings -> one basis-decomposed RGCN layer -> DistMult."""

    kind = "rgcn"

    @property
    def dim(self) -> int:
        return self.config.hidden_dimensions[-1]

    def param_shapes(self):
        d, b = self.dim, self.config.n_bases
        return {
            "rgcn.emb": (self.n_nodes, d),
            "rgcn.bases": (b, d, d),
            "rgcn.coef": (N_RELATIONS, b),
            "rgcn.rel": (N_RELATIONS, d),
        }

    def init_params(self, rng):
        d, b = self.dim, self.config.n_bases
        return {
            "rgcn.emb": glorot(rng, self.n_nodes, d),
            "rgcn.bases": glorot(rng, d, d, (b, d, d)),
            "rgcn.coef": glorot(rng, N_RELATIONS, b),
            "rgcn.rel": glorot(rng, N_RELATIONS, d),
        }

    def embed(self, graph, params):
        weights = relation_weights(params["rgcn.coef"], params["rgcn.bases"])
        return rgcn_propagate(params["rgcn.emb"], graph.neighbor_index, weights, ad.activation(self.config.activation))

    def logits(self, emb, triplets, params):
        return distmult_logits(emb, triplets, params["rgcn.rel"], self.n_chem)


class GraphSageModel(LinkModel):
    """Mean aggregation over sampled neighbours, then a diagonal bilinear score.

    ``h_i = act(x_i W_self + mean_{j in S(i)} x_j W_neigh)`` where ``S(i)`` is
    a sample of at most ``sage_sample_size`` neighbours, ignoring relation
    types. An empty sample contributes a zero vector. At inference (``rng is
    None``) the full neighbourhood is used.
    """

    kind = "graphsage"

    def __init__(self, config, n_chem, n_gene):
        super().__init__(config, n_chem, n_gene)
        self._aggregation: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None
        self._graph_id: int | None = None

    @property
    def dim(self) -> int:
        return self.config.hidden_dimensions[-1]

    def param_shapes(self):
        d = self.dim
        return {
            "sage.emb": (self.n_nodes, d),
            "sage.self": (d, d),
            "sage.neigh": (d, d),
            "sage.rel": (N_RELATIONS, d),
        }

    def init_params(self, rng):
        d = self.dim
        return {
            "sage.emb": glorot(rng, self.n_nodes, d),
            "sage.self": glorot(rng, d, d),
            "sage.neigh": glorot(rng, d, d),
            "sage.rel": glorot(rng, N_RELATIONS, d),
        }

    @staticmethod
    def neighbourhoods(graph: HeteroGraph) -> list[np.ndarray]:
        index = graph.neighbor_index
        return [
            np.unique(np.concatenate([index.neighbors(rel, i) for rel in Relation]))
            for i in range(graph.n_nodes)
        ]

    def prepare(self, graph, rng=None):
        src, dst, weight = [], [], []
        size = self.config.sage_sample_size
        for i, nbrs in enumerate(self.neighbourhoods(graph)):
            if len(nbrs) == 0:
                continue
            if rng is not None and len(nbrs) > size:
                nbrs = np.sort(rng.choice(nbrs, size=size, replace=False))
            src.append(nbrs)
            dst.append(np.full(len(nbrs), i))
            weight.append(np.full(len(nbrs), 1.0 / len(nbrs)))
        if src:
            self._aggregation = (np.concatenate(src), np.concatenate(dst), np.concatenate(weight))
        else:
            self._aggregation = (np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0))
        self._graph_id = id(graph)

    def embed(self, graph, params):
        if self._aggregation is None or self._graph_id != id(graph):
            self.prepare(graph, None)
        src, dst, weight = self._aggregation
        x = params["sage.emb"]
        out = ad.matmul(x, params["sage.self"])
        if len(src):
            mean = ad.scatter_add(ad.scale_rows(ad.take(x, src), weight), dst, graph.n_nodes)
            out = out + ad.matmul(mean, params["sage.neigh"])
        return ad.activation(self.config.activation)(out)

    def logits(self, emb, triplets, params):
        return distmult_logits(emb, triplets, params["sage.rel"], self.n_chem)


class TransEModel(LinkModel):
    """Translation score mapped to a logit: ``margin - ||e_h + w_r - e_t||``."""

    kind = "transe"

    @property
    def dim(self) -> int:
        return self.config.hidden_dimensions[-1]

    def param_shapes(self):
        return {"transe.ent": (self.n_nodes, self.dim), "transe.rel": (N_RELATIONS, self.dim)}

    def init_params(self, rng):
        return {
            "transe.ent": glorot(rng, self.n_nodes, self.dim),
            "transe.rel": glorot(rng, N_RELATIONS, self.dim),
        }

    def embed(self, graph, params):
        return params["transe.ent"]

    def logits(self, emb, triplets, params):
        trip = triplet_array(triplets)
        heads = ad.take(emb, trip[:, 0])
        tails = ad.take(emb, trip[:, 2] + self.n_chem)
        rels = ad.take(params["transe.rel"], trip[:, 1])
        distance = ad.l2norm_rows(heads + rels - tails)
        return ad.add(self.config.transe_margin, ad.scale(distance, -1.0))


def baseline_score(model: LinkModel, graph: HeteroGraph, params: dict[str, np.ndarray], head: int, relation, tail: int) -> float:
    """Probability of a single triplet under a (baseline) model."""
    return float(model.probabilities(graph, params, [(head, int(relation), tail)])[0])
