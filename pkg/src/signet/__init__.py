"""Signed chemical-gene link prediction with relational graph convolutions."""

from .config import TrainConfig
from .errors import SignetError
from .graph import HeteroGraph, Relation, generate_synthetic, ingest_tsv, split_edges

__all__ = ["HeteroGraph", "Relation", "SignetError", "TrainConfig", "generate_synthetic", "ingest_tsv", "split_edges"]
__version__ = "0.1.0"
