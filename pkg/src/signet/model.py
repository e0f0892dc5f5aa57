"""Model interface shared by RGCNTD and the baselines, plus the RGCNTD model."""

from __future__ import annotations

from typing import Mapping

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .config import TrainConfig
from .decoder import DecoderConfig, decoder_shapes, init_decoder_params, rgcn_refine, score_logits
from .encoder import EncoderConfig, encode, encoder_shapes, init_encoder_params
from .errors import ConfigError
from .graph import HeteroGraph, HomoRelation, triplet_array


class LinkModel:
    """Scores (chemical, relation, gene) triplets from node representations.

    ``embed`` runs the graph part once per step; ``logits`` scores any number
    of triplets against those representations. Parameters live outside the
    model as a ``name -> array`` dict so optimizers and checkpoints can treat
    every model alike.
    """

    kind = ""

    def __init__(self, config: TrainConfig, n_chem: int, n_gene: int):
        self.config = config
        self.n_chem = n_chem
        self.n_gene = n_gene

    @property
    def n_nodes(self) -> int:
        return self.n_chem + self.n_gene

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        raise NotImplementedError

    def init_params(self, rng: np.random.Generator) -> dict[str, np.ndarray]:
        raise NotImplementedError

    def prepare(self, graph: HeteroGraph, rng: np.random.Generator | None = None) -> None:
        """Per-epoch hook (neighbour resampling); ``rng=None`` means inference."""

    def embed(self, graph: HeteroGraph, params: Mapping[str, Tensor]) -> Tensor:
        raise NotImplementedError

    def logits(self, emb: Tensor, triplets, params: Mapping[str, Tensor]) -> Tensor:
        raise NotImplementedError

    def probabilities(self, graph: HeteroGraph, params: Mapping[str, np.ndarray], triplets) -> np.ndarray:
        """Forward-only probabilities, scored in chunks of ``test_batch_size``."""
        trip = triplet_array(triplets)
        tensors = {k: Tensor(v) for k, v in params.items()}
        self.prepare(graph, None)
        emb = self.embed(graph, tensors)
        chunk = self.config.test_batch_size
        out = [ad.sigmoid(self.logits(emb, trip[i : i + chunk], tensors)).value for i in range(0, len(trip), chunk)]
        return np.concatenate(out) if out else np.zeros(0)


class RGCNTD(LinkModel):
    """Relational GCN encoder, RGCN refinement layer, basis tensor-decomposition scorer."""

    kind = "rgcntd"

    def __init__(self, config: TrainConfig, n_chem: int, n_gene: int):
        super().__init__(config, n_chem, n_gene)
        dims = tuple(config.hidden_dimensions)
        subgraph = []
        if config.chem_subgraph:
            subgraph.append(HomoRelation.CHEM_CHEM)
        if config.gene_subgraph:
            subgraph.append(HomoRelation.GENE_GENE)
        self.encoder_config = EncoderConfig(
            hidden=dims[:2],
            subgraph=tuple(subgraph),
            subgraph_hidden=dims[2:4] if len(dims) >= 4 else None,
            activation=config.activation,
        )
        self.decoder_config = DecoderConfig(
            dim=self.encoder_config.out_dim,
            n_bases=config.n_bases,
            n_factors=config.n_factors,
            activation=config.activation,
        )

    def param_shapes(self):
        shapes = encoder_shapes(self.encoder_config, self.n_nodes)
        shapes.update(decoder_shapes(self.decoder_config))
        return shapes

    def init_params(self, rng):
        params = init_encoder_params(self.encoder_config, self.n_nodes, rng)
        params.update(init_decoder_params(self.decoder_config, rng))
        return params

    def embed(self, graph, params):
        z = encode(graph, params, self.encoder_config)
        return rgcn_refine(z, graph, params, self.decoder_config)

    def logits(self, emb, triplets, params):
        return score_logits(emb, triplets, params, self.n_chem)


def build_model(config: TrainConfig, n_chem: int, n_gene: int) -> LinkModel:
    from .baselines import GraphSageModel, RgcnModel, TransEModel

    registry = {cls.kind: cls for cls in (RGCNTD, RgcnModel, GraphSageModel, TransEModel)}
    try:
        cls = registry[config.model]
    except KeyError:
        raise ConfigError(f"unknown model {config.model!r}; valid values: {', '.join(registry)}") from None
    return cls(config, n_chem, n_gene)
