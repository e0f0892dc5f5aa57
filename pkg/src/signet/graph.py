"""Heterogeneous chemical-gene graph: data model, TSV I/O, splitting, synthetic data.

Chemical-gene edges are stored as an ``(E, 3)`` int64 array of
``(chemical_index, relation, gene_index)`` rows, kept deduplicated and sorted
by ``(relation, head, tail)``. Message passing uses a unified node numbering in
which chemical ``i`` is node ``i`` and gene ``j`` is node ``n_chem + j``.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ConfigError, ParseError, ReferentialError, SchemaError

log = logging.getLogger(__name__)


class NodeKind(enum.Enum):
    CHEMICAL = "chemical"
    GENE = "gene"


class Polarity(enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    NONE = "none"


class Relation(enum.IntEnum):
    """Chemical -> gene relation types. Increase and Decrease are mutually opposite."""

    INCREASE = 0
    DECREASE = 1
    BINDING = 2
    AFFECT = 3

    @property
    def label(self) -> str:
        return self.name.lower()

    @property
    def polarity(self) -> Polarity:
        if self is Relation.INCREASE:
            return Polarity.POSITIVE
        if self is Relation.DECREASE:
            return Polarity.NEGATIVE
        return Polarity.NONE

    @property
    def is_polar(self) -> bool:
        return self.polarity is not Polarity.NONE

    def opposite(self) -> Relation:
        if self is Relation.INCREASE:
            return Relation.DECREASE
        if self is Relation.DECREASE:
            return Relation.INCREASE
        raise ValueError(f"{self.label} has no polarity and therefore no opposite")


class HomoRelation(enum.Enum):
    """Homogeneous subgraph edges, each carrying a single untyped label."""

    CHEM_CHEM = "chem_chem"
    GENE_GENE = "gene_gene"

    @property
    def kind(self) -> NodeKind:
        return NodeKind.CHEMICAL if self is HomoRelation.CHEM_CHEM else NodeKind.GENE


N_RELATIONS = len(Relation)
POLAR_RELATIONS = (Relation.INCREASE, Relation.DECREASE)


class Triplet(NamedTuple):
    head: int
    relation: Relation
    tail: int


def triplet_array(triplets) -> np.ndarray:
    """Coerce a sequence of Triplets (or an (n, 3) array) to an int64 array."""
    if isinstance(triplets, np.ndarray):
        arr = triplets.astype(np.int64, copy=False)
    else:
        arr = np.asarray([[int(x) for x in t] for t in triplets], dtype=np.int64)
    if arr.size == 0:
        return np.zeros((0, 3), dtype=np.int64)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError(f"expected (n, 3) triplets, got shape {arr.shape}")
    return arr


def _canonical(triplets: np.ndarray) -> np.ndarray:
    if len(triplets) == 0:
        return np.zeros((0, 3), dtype=np.int64)
    uniq = np.unique(triplets, axis=0)
    order = np.lexsort((uniq[:, 2], uniq[:, 0], uniq[:, 1]))
    return np.ascontiguousarray(uniq[order])


def _canonical_pairs(pairs: np.ndarray) -> np.ndarray:
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    if len(pairs) == 0:
        return np.zeros((0, 2), dtype=np.int64)
    return np.unique(np.sort(pairs, axis=1), axis=0)


class NeighborIndex:
    """Per-relation CSR adjacency over unified node ids (edges undirected)."""

    def __init__(self, n_nodes: int, undirected: dict[object, np.ndarray]):
        self.n_nodes = n_nodes
        self._indptr: dict[object, np.ndarray] = {}
        self._indices: dict[object, np.ndarray] = {}
        for key, pairs in undirected.items():
            pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
            both = np.concatenate([pairs, pairs[:, ::-1]]) if len(pairs) else pairs
            both = np.unique(both, axis=0) if len(both) else both
            # rows sorted by (receiver, neighbour)
            dst, src = both[:, 0], both[:, 1]
            counts = np.bincount(dst, minlength=n_nodes)
            indptr = np.zeros(n_nodes + 1, dtype=np.int64)
            np.cumsum(counts, out=indptr[1:])
            self._indptr[key] = indptr
            self._indices[key] = np.ascontiguousarray(src)

    @property
    def keys(self) -> list:
        return list(self._indptr)

    def neighbors(self, key, node: int) -> np.ndarray:
        indptr = self._indptr[key]
        return self._indices[key][indptr[node] : indptr[node + 1]]

    def degree(self, key) -> np.ndarray:
        return np.diff(self._indptr[key])

    def directed(self, key) -> tuple[np.ndarray, np.ndarray]:
        """``(src, dst)`` arrays with one row per (receiver, neighbour) entry."""
        indptr = self._indptr[key]
        dst = np.repeat(np.arange(self.n_nodes), np.diff(indptr))
        return self._indices[key], dst


class HeteroGraph:
    """Immutable chemical-gene graph with optional homogeneous subgraphs."""

    def __init__(
        self,
        chemicals: Sequence[str],
        genes: Sequence[str],
        triplets,
        homo_edges: dict[HomoRelation, np.ndarray] | None = None,
        metadata: dict | None = None,
    ):
        self.chemicals = tuple(chemicals)
        self.genes = tuple(genes)
        trip = _canonical(triplet_array(triplets))
        if len(trip):
            if trip[:, 0].min() < 0 or trip[:, 0].max() >= self.n_chem:
                raise ReferentialError("chemical index out of range")
            if trip[:, 2].min() < 0 or trip[:, 2].max() >= self.n_gene:
                raise ReferentialError("gene index out of range")
            if trip[:, 1].min() < 0 or trip[:, 1].max() >= N_RELATIONS:
                raise ParseError("relation code out of range")
        trip.setflags(write=False)
        self.triplets = trip
        self.homo_edges: dict[HomoRelation, np.ndarray] = {}
        for rel, pairs in (homo_edges or {}).items():
            rel = HomoRelation(rel)
            pairs = _canonical_pairs(pairs)
            limit = self.n_chem if rel is HomoRelation.CHEM_CHEM else self.n_gene
            if len(pairs) and pairs.max() >= limit:
                raise ReferentialError(f"{rel.value} edge index out of range")
            if len(pairs):
                pairs.setflags(write=False)
                self.homo_edges[rel] = pairs
        self.metadata = dict(metadata or {})

    @property
    def n_chem(self) -> int:
        return len(self.chemicals)

    @property
    def n_gene(self) -> int:
        return len(self.genes)

    @property
    def n_nodes(self) -> int:
        return self.n_chem + self.n_gene

    @property
    def num_edges(self) -> int:
        return len(self.triplets)

    def edges(self, relation: Relation) -> np.ndarray:
        return self.triplets[self.triplets[:, 1] == int(relation)]

    def edge_counts(self) -> dict[Relation, int]:
        counts = np.bincount(self.triplets[:, 1], minlength=N_RELATIONS) if len(self.triplets) else [0] * N_RELATIONS
        return {rel: int(counts[rel]) for rel in Relation}

    def summary(self) -> dict[str, int]:
        out = {"chemical": self.n_chem, "gene": self.n_gene}
        out.update({rel.label: n for rel, n in self.edge_counts().items()})
        for rel in HomoRelation:
            out[rel.value] = len(self.homo_edges.get(rel, ()))
        return out

    def has_homo(self, rel: HomoRelation) -> bool:
        return rel in self.homo_edges

    def edge_key(self, head, relation, tail):
        """Integer key of a triplet; works elementwise on arrays."""
        return (np.asarray(head) * N_RELATIONS + np.asarray(relation)) * self.n_gene + np.asarray(tail)

    @cached_property
    def truth(self) -> frozenset[int]:
        t = self.triplets
        return frozenset(self.edge_key(t[:, 0], t[:, 1], t[:, 2]).tolist())

    def contains(self, head: int, relation: int, tail: int) -> bool:
        return int(self.edge_key(head, relation, tail)) in self.truth

    def chem_node(self, i):
        return i

    def gene_node(self, j):
        return np.asarray(j) + self.n_chem

    @cached_property
    def neighbor_index(self) -> NeighborIndex:
        undirected: dict[object, np.ndarray] = {}
        for rel in Relation:
            e = self.edges(rel)
            undirected[rel] = np.stack([e[:, 0], e[:, 2] + self.n_chem], axis=1) if len(e) else np.zeros((0, 2), np.int64)
        for rel in HomoRelation:
            pairs = self.homo_edges.get(rel, np.zeros((0, 2), dtype=np.int64))
            undirected[rel] = pairs if rel is HomoRelation.CHEM_CHEM else pairs + self.n_chem
        return NeighborIndex(self.n_nodes, undirected)

    def with_triplets(self, triplets) -> HeteroGraph:
        """Same nodes, subgraphs and metadata; different chemical-gene edges."""
        return HeteroGraph(self.chemicals, self.genes, triplets, self.homo_edges, self.metadata)

    def permuted(self, chem_perm: np.ndarray, gene_perm: np.ndarray) -> HeteroGraph:
        """Relabel nodes: old chemical ``i`` becomes ``chem_perm[i]`` (same for genes)."""
        chem_perm = np.asarray(chem_perm)
        gene_perm = np.asarray(gene_perm)
        chemicals = [None] * self.n_chem
        for old, new in enumerate(chem_perm):
            chemicals[new] = self.chemicals[old]
        genes = [None] * self.n_gene
        for old, new in enumerate(gene_perm):
            genes[new] = self.genes[old]
        t = self.triplets
        trip = np.stack([chem_perm[t[:, 0]], t[:, 1], gene_perm[t[:, 2]]], axis=1)
        homo = {}
        for rel, pairs in self.homo_edges.items():
            perm = chem_perm if rel is HomoRelation.CHEM_CHEM else gene_perm
            homo[rel] = perm[pairs]
        return HeteroGraph(chemicals, genes, trip, homo, self.metadata)


# --- TSV ingestion ----------------------------------------------------------

_KINDS = {"chemical": NodeKind.CHEMICAL, "gene": NodeKind.GENE}
_EDGE_LABELS: dict[str, Relation | HomoRelation] = {r.label: r for r in Relation}
_EDGE_LABELS.update({r.value: r for r in HomoRelation})


def _tsv_rows(path: Path):
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            yield lineno, [c.strip() for c in line.split("\t")]


def ingest_tsv(nodes_path, edges_path) -> HeteroGraph:
    """Load ``nodes.tsv`` (``node_id, kind``) and ``edges.tsv`` (``head, relation, tail``).

    Ids are re-indexed densely per kind in order of first appearance.
    Duplicate edges are collapsed. The graph's ``summary()`` gives node and
    edge counts; ``metadata['duplicates_collapsed']`` counts dropped rows.
    """
    kinds: dict[str, NodeKind] = {}
    index: dict[str, int] = {}
    names: dict[NodeKind, list[str]] = {NodeKind.CHEMICAL: [], NodeKind.GENE: []}
    for lineno, cols in _tsv_rows(Path(nodes_path)):
        if len(cols) != 2:
            raise ParseError(f"{nodes_path}:{lineno}: expected 2 columns, got {len(cols)}")
        node_id, kind_label = cols
        if node_id == "node_id" and kind_label == "kind":
            continue
        kind = _KINDS.get(kind_label.lower())
        if kind is None:
            raise ParseError(f"{nodes_path}:{lineno}: unknown node kind {kind_label!r}")
        if node_id in kinds:
            if kinds[node_id] is not kind:
                raise SchemaError(f"{nodes_path}:{lineno}: node {node_id!r} declared with two kinds")
            continue
        kinds[node_id] = kind
        index[node_id] = len(names[kind])
        names[kind].append(node_id)

    rows: list[tuple[int, int, int]] = []
    homo: dict[HomoRelation, list[tuple[int, int]]] = {r: [] for r in HomoRelation}
    for lineno, cols in _tsv_rows(Path(edges_path)):
        if len(cols) != 3:
            raise ParseError(f"{edges_path}:{lineno}: expected 3 columns, got {len(cols)}")
        head, label, tail = cols
        if (head, label, tail) == ("head_id", "relation", "tail_id"):
            continue
        rel = _EDGE_LABELS.get(label.lower())
        if rel is None:
            raise ParseError(f"{edges_path}:{lineno}: unknown relation label {label!r}")
        for node in (head, tail):
            if node not in kinds:
                raise ReferentialError(f"{edges_path}:{lineno}: unknown node id {node!r}")
        hk, tk = kinds[head], kinds[tail]
        if isinstance(rel, Relation):
            if hk is not NodeKind.CHEMICAL or tk is not NodeKind.GENE:
                raise SchemaError(
                    f"{edges_path}:{lineno}: {rel.label} requires chemical head and gene tail, "
                    f"got {hk.value} -> {tk.value}"
                )
            rows.append((index[head], int(rel), index[tail]))
        else:
            if hk is not rel.kind or tk is not rel.kind:
                raise SchemaError(f"{edges_path}:{lineno}: {rel.value} requires two {rel.kind.value} nodes")
            homo[rel].append((index[head], index[tail]))

    graph = HeteroGraph(
        names[NodeKind.CHEMICAL],
        names[NodeKind.GENE],
        np.asarray(rows, dtype=np.int64).reshape(-1, 3),
        {r: np.asarray(p, dtype=np.int64).reshape(-1, 2) for r, p in homo.items() if p},
    )
    n_rows = len(rows) + sum(len(p) for p in homo.values())
    n_kept = graph.num_edges + sum(len(p) for p in graph.homo_edges.values())
    graph.metadata["duplicates_collapsed"] = n_rows - n_kept
    log.info("ingested %s", graph.summary())
    return graph


def write_tsv(graph: HeteroGraph, directory) -> tuple[Path, Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    nodes_path = directory / "nodes.tsv"
    edges_path = directory / "edges.tsv"
    with open(nodes_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("node_id\tkind\n")
        for name in graph.chemicals:
            fh.write(f"{name}\tchemical\n")
        for name in graph.genes:
            fh.write(f"{name}\tgene\n")
    with open(edges_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("head_id\trelation\ttail_id\n")
        for h, r, t in graph.triplets.tolist():
            fh.write(f"{graph.chemicals[h]}\t{Relation(r).label}\t{graph.genes[t]}\n")
        for rel in HomoRelation:
            names = graph.chemicals if rel is HomoRelation.CHEM_CHEM else graph.genes
            for a, b in graph.homo_edges.get(rel, np.zeros((0, 2), np.int64)).tolist():
                fh.write(f"{names[a]}\t{rel.value}\t{names[b]}\n")
    return nodes_path, edges_path


# --- splitting --------------------------------------------------------------


@dataclass(frozen=True)
class EdgeSplit:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    seed: int
    ratios: tuple[float, float, float]
    warnings: tuple[str, ...] = field(default=())


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def split_edges(graph: HeteroGraph, ratios=(0.8, 0.1, 0.1), seed: int = 0) -> EdgeSplit:
    """Deterministic train/validation/test split, stratified per relation."""
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"split ratios must be three positive fractions summing to 1, got {ratios}")
    rng = np.random.default_rng(seed)
    parts: list[list[np.ndarray]] = [[], [], []]
    warnings = []
    for rel in Relation:
        edges = graph.edges(rel)
        n = len(edges)
        if n == 0:
            continue
        if n < 3:
            msg = f"relation {rel.label} has only {n} edge(s); placed wholly in train"
            log.warning(msg)
            warnings.append(msg)
            parts[0].append(edges)
            continue
        shuffled = edges[rng.permutation(n)]
        n_val = _round_half_up(n * ratios[1])
        n_test = _round_half_up(n * ratios[2])
        n_train = n - n_val - n_test
        parts[0].append(shuffled[:n_train])
        parts[1].append(shuffled[n_train : n_train + n_val])
        parts[2].append(shuffled[n_train + n_val :])
    train, val, test = (_canonical(np.concatenate(p)) if p else np.zeros((0, 3), np.int64) for p in parts)
    return EdgeSplit(train, val, test, seed, ratios, tuple(warnings))


# --- synthetic planted-polarity generator -----------------------------------


def generate_synthetic(
    n_chem: int,
    n_gene: int,
    density: float,
    polarity_signal: float,
    seed: int = 0,
    binding_fraction: float = 0.2,
    homo_density: float = 0.05,
) -> HeteroGraph:
    """Random chemical-gene graph with planted latent signs.

    Each chemical and gene gets a latent sign in {+1, -1}. A ``density``
    fraction of all (chemical, gene) pairs is connected. With probability
    ``polarity_signal`` a pair's relation is Increase when the signs agree and
    Decrease otherwise; else it is uniform over the four relation types. A
    ``binding_fraction`` of pairs additionally carries a Binding edge.
    Homogeneous edges join same-sign nodes with probability ``polarity_signal``
    and random nodes otherwise. Latent signs land in ``metadata``.
    """
    if n_chem < 2 or n_gene < 2:
        raise ConfigError("n_chem and n_gene must both be >= 2")
    if not 0.0 < density <= 1.0:
        raise ConfigError(f"density must be in (0, 1], got {density}")
    if not 0.0 <= polarity_signal <= 1.0:
        raise ConfigError(f"polarity_signal must be in [0, 1], got {polarity_signal}")
    n_pairs = _round_half_up(density * n_chem * n_gene)
    if n_pairs == 0:
        raise ConfigError(f"density {density} yields no edges for {n_chem}x{n_gene} nodes")

    rng = np.random.default_rng(seed)
    chem_signs = rng.choice(np.array([-1, 1]), size=n_chem)
    gene_signs = rng.choice(np.array([-1, 1]), size=n_gene)
    pairs = np.sort(rng.choice(n_chem * n_gene, size=n_pairs, replace=False))
    heads, tails = pairs // n_gene, pairs % n_gene

    planted = np.where(chem_signs[heads] * gene_signs[tails] > 0, int(Relation.INCREASE), int(Relation.DECREASE))
    signal = rng.random(n_pairs) < polarity_signal
    uniform = rng.integers(0, N_RELATIONS, size=n_pairs)
    rels = np.where(signal, planted, uniform)
    bind = rng.random(n_pairs) < binding_fraction

    trip = np.concatenate(
        [
            np.stack([heads, rels, tails], axis=1),
            np.stack([heads[bind], np.full(int(bind.sum()), int(Relation.BINDING)), tails[bind]], axis=1),
        ]
    )

    homo = {}
    for rel, signs in ((HomoRelation.CHEM_CHEM, chem_signs), (HomoRelation.GENE_GENE, gene_signs)):
        n = len(signs)
        m = _round_half_up(homo_density * n * (n - 1) / 2)
        edges = []
        for _ in range(m):
            a = int(rng.integers(n))
            if rng.random() < polarity_signal:
                pool = np.flatnonzero((signs == signs[a]) & (np.arange(n) != a))
            else:
                pool = np.flatnonzero(np.arange(n) != a)
            if len(pool):
                edges.append((a, int(rng.choice(pool))))
        if edges:
            homo[rel] = np.asarray(edges, dtype=np.int64)

    chemicals = [f"C{i:04d}" for i in range(n_chem)]
    genes = [f"G{j:04d}" for j in range(n_gene)]
    metadata = {
        "chem_signs": chem_signs,
        "gene_signs": gene_signs,
        "generator": {
            "n_chem": n_chem,
            "n_gene": n_gene,
            "density": density,
            "polarity_signal": polarity_signal,
            "seed": seed,
            "binding_fraction": binding_fraction,
            "homo_density": homo_density,
        },
    }
    return HeteroGraph(chemicals, genes, trip, homo, metadata)
