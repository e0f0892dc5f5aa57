import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from signet.graph import HeteroGraph, HomoRelation, generate_synthetic

settings.register_profile("signet", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("signet")


def tiny_graph(seed: int = 0, n_chem: int = 3, n_gene: int = 3, n_edges: int = 6, homo: bool = True) -> HeteroGraph:
    """Random small graph touching every relation type at least once when possible."""
    rng = np.random.default_rng(seed)
    rows = set()
    rel_cycle = 0
    while len(rows) < n_edges:
        rows.add((int(rng.integers(n_chem)), rel_cycle % 4, int(rng.integers(n_gene))))
        rel_cycle += 1
    homo_edges = {}
    if homo:
        homo_edges[HomoRelation.CHEM_CHEM] = np.array([[0, 1]])
        homo_edges[HomoRelation.GENE_GENE] = np.array([[1, 2]]) if n_gene > 2 else np.array([[0, 1]])
    chems = [f"c{i}" for i in range(n_chem)]
    genes = [f"g{j}" for j in range(n_gene)]
    return HeteroGraph(chems, genes, np.array(sorted(rows)), homo_edges)


@pytest.fixture
def small_graph():
    return tiny_graph()


@pytest.fixture(scope="session")
def bench_graph():
    return generate_synthetic(50, 50, 0.05, 0.9, seed=0)


def objective_for_grad_check(kind: str, seed: int, cl: bool = True, subgraph: bool = True):
    """(loss closure, initial params) for the full objective on a 6-node graph."""
    from signet.config import TrainConfig
    from signet.model import build_model
    from signet.sampling import build_constraint_pairs, sample_negatives
    from signet.training import total_loss

    graph = tiny_graph(seed, n_chem=3, n_gene=3, n_edges=6)
    config = TrainConfig(
        model=kind,
        hidden_dimensions=(4, 3),
        cl_enabled=cl,
        chem_subgraph=subgraph and kind == "rgcntd",
        gene_subgraph=subgraph and kind == "rgcntd",
        sage_sample_size=2,
        regularization=1e-2,
        seed=seed,
    )
    rng = np.random.default_rng(seed)
    model = build_model(config, graph.n_chem, graph.n_gene)
    params = model.init_params(rng)
    model.prepare(graph, rng)
    labeled = sample_negatives(graph.triplets, graph, 1, rng)
    pairs = build_constraint_pairs(graph.triplets, "with_cl") if cl else []

    def f(p):
        return total_loss(model, graph, labeled, pairs, p, config)[0]

    return f, params
