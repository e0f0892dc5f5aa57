"""Two-layer relational graph-convolution encoder.

Each layer computes, for every node ``i``::

    h_i' = act( sum_r sum_{j in N_r(i)} h_j W_r / sqrt(|N_r(i)| |N_r(j)|)
                + sum_{r : |N_r(i)| > 0} h_i W_self / |N_r(i)| )

Nodes without neighbours under every relation keep a self path with
coefficient 1. Inputs are one-hot rows, realised as row selection from the
first-layer weights. An optional homogeneous-subgraph branch (chemical-chemical
and/or gene-gene edges) runs two more such layers on top of the
heterogeneous embedding and is concatenated to it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError, ShapeError
from .graph import HeteroGraph, HomoRelation, NeighborIndex, Relation


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape if shape is not None else (fan_in, fan_out))


def rgc_layer(
    features: Tensor | None,
    index: NeighborIndex,
    relations: Sequence,
    weights: Mapping[object, Tensor],
    self_weight: Tensor | None,
    act: Callable[[Tensor], Tensor] = ad.relu,
) -> Tensor:
    """One normalized relational convolution over ``index``.

    ``features=None`` means one-hot node inputs. ``self_weight=None`` applies
    the self term to the raw features, which then must already have the
    output width.
    """
    n = index.n_nodes
    d_in = n if features is None else features.shape[1]
    if features is not None and features.shape[0] != n:
        raise ShapeError(f"features have {features.shape[0]} rows for {n} nodes")
    d_out = None
    for rel in relations:
        w = weights[rel]
        if w.ndim != 2 or w.shape[0] != d_in:
            raise ShapeError(f"weight for {rel} has shape {w.shape}, expected ({d_in}, d_out)")
        if d_out is not None and w.shape[1] != d_out:
            raise ShapeError("relation weights disagree on output width")
        d_out = w.shape[1]
    if self_weight is not None:
        if self_weight.shape[0] != d_in or (d_out is not None and self_weight.shape[1] != d_out):
            raise ShapeError(f"self weight has shape {self_weight.shape}, expected ({d_in}, {d_out})")
        d_out = self_weight.shape[1]
    elif d_out is not None and d_out != d_in:
        raise ShapeError(f"identity self path needs d_in == d_out, got {d_in} and {d_out}")

    total = None
    self_coef = np.zeros(n)
    for rel in relations:
        deg = index.degree(rel).astype(np.float64)
        src, dst = index.directed(rel)
        if len(src):
            projected = weights[rel] if features is None else ad.matmul(features, weights[rel])
            coef = 1.0 / np.sqrt(deg[dst] * deg[src])
            msg = ad.scatter_add(ad.scale_rows(ad.take(projected, src), coef), dst, n)
            total = msg if total is None else total + msg
        nz = deg > 0
        self_coef[nz] += 1.0 / deg[nz]
    self_coef[self_coef == 0] = 1.0

    if self_weight is None:
        if features is None:
            raise ShapeError("one-hot inputs need an explicit self weight")
        self_in = features
    else:
        self_in = self_weight if features is None else ad.matmul(features, self_weight)
    out = ad.scale_rows(self_in, self_coef)
    if total is not None:
        out = total + out
    return act(out)


@dataclass(frozen=True)
class EncoderConfig:
    hidden: tuple[int, int] = (32, 16)
    subgraph: tuple[HomoRelation, ...] = ()
    subgraph_hidden: tuple[int, int] | None = None
    activation: str = "relu"

    @property
    def branch_hidden(self) -> tuple[int, int]:
        return self.subgraph_hidden or (self.hidden[-1], self.hidden[-1])

    @property
    def out_dim(self) -> int:
        return self.hidden[-1] + (self.branch_hidden[-1] if self.subgraph else 0)


def encoder_shapes(config: EncoderConfig, n_nodes: int) -> dict[str, tuple[int, ...]]:
    shapes = {}
    d_in = n_nodes
    for layer, d_out in enumerate(config.hidden):
        for rel in Relation:
            shapes[f"enc{layer}.{rel.label}"] = (d_in, d_out)
        shapes[f"enc{layer}.self"] = (d_in, d_out)
        d_in = d_out
    if config.subgraph:
        for layer, d_out in enumerate(config.branch_hidden):
            for rel in config.subgraph:
                shapes[f"sub{layer}.{rel.value}"] = (d_in, d_out)
            shapes[f"sub{layer}.self"] = (d_in, d_out)
            d_in = d_out
    return shapes


def init_encoder_params(config: EncoderConfig, n_nodes: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
    return {name: glorot(rng, *shape) for name, shape in encoder_shapes(config, n_nodes).items()}


def encode(
    graph: HeteroGraph,
    params: Mapping[str, Tensor],
    config: EncoderConfig,
    features: Tensor | None = None,
) -> Tensor:
    """Node embeddings ``(n_nodes, config.out_dim)`` for the unified node set."""
    for rel in config.subgraph:
        if not graph.has_homo(rel):
            raise ConfigError(f"{rel.value} subgraph enabled but the graph has no {rel.value} edges")
    act = ad.activation(config.activation)
    index = graph.neighbor_index
    h = features
    for layer in range(len(config.hidden)):
        weights = {rel: params[f"enc{layer}.{rel.label}"] for rel in Relation}
        h = rgc_layer(h, index, list(Relation), weights, params[f"enc{layer}.self"], act)
    if not config.subgraph:
        return h
    z = h
    for layer in range(len(config.branch_hidden)):
        weights = {rel: params[f"sub{layer}.{rel.value}"] for rel in config.subgraph}
        z = rgc_layer(z, index, list(config.subgraph), weights, params[f"sub{layer}.self"], act)
    return ad.concat([h, z], axis=1)
