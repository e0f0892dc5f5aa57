import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import tiny_graph
from signet import autodiff as ad
from signet.autodiff import Tensor
from signet.decoder import (
    DecoderConfig,
    init_decoder_params,
    relation_weights,
    rgcn_propagate,
    rgcn_refine,
    score,
    score_batch,
)
from signet.graph import N_RELATIONS, NeighborIndex, Relation


def _tensors(params):
    return {k: Tensor(v) for k, v in params.items()}


def naive_refine(h, n_nodes, edges_by_rel, weights):
    nbrs = {r: [set() for _ in range(n_nodes)] for r in edges_by_rel}
    for r, pairs in edges_by_rel.items():
        for a, b in pairs:
            nbrs[r][a].add(b)
            nbrs[r][b].add(a)
    out = np.zeros((n_nodes, weights.shape[2]))
    for i in range(n_nodes):
        for r in edges_by_rel:
            for j in nbrs[r][i]:
                out[i] += h[j] @ weights[int(r)] / len(nbrs[r][i])
    return np.maximum(out, 0)


def test_single_neighbour_identity_linear():
    index = NeighborIndex(2, {r: np.array([[0, 1]]) if r is Relation.DECREASE else np.zeros((0, 2)) for r in Relation})
    h = np.array([[1.0, -2.0], [3.0, 4.0]])
    w = np.stack([np.eye(2)] * N_RELATIONS)
    out = rgcn_propagate(Tensor(h), index, Tensor(w), ad.identity).value
    np.testing.assert_array_equal(out, h[::-1])


@settings(max_examples=25)
@given(seed=st.integers(0, 10_000))
def test_refine_matches_naive_loop(seed):
    g = tiny_graph(seed, n_chem=4, n_gene=6, n_edges=12)
    rng = np.random.default_rng(seed)
    cfg = DecoderConfig(dim=3)
    params = init_decoder_params(cfg, rng)
    h = rng.normal(size=(g.n_nodes, 3))
    got = rgcn_refine(Tensor(h), g, _tensors(params), cfg).value
    weights = np.einsum("rb,bij->rij", params["dec.coef"], params["dec.bases"])
    edges = {r: [] for r in Relation}
    for c, r, t in g.triplets.tolist():
        edges[Relation(r)].append((c, g.n_chem + t))
    np.testing.assert_allclose(got, naive_refine(h, g.n_nodes, edges, weights), rtol=1e-12, atol=1e-12)


def test_identity_coefficients_reproduce_free_weights():
    rng = np.random.default_rng(3)
    bases = rng.normal(size=(N_RELATIONS, 3, 3))
    combined = relation_weights(Tensor(np.eye(N_RELATIONS)), Tensor(bases)).value
    np.testing.assert_array_equal(combined, bases)
    g = tiny_graph(1)
    h = Tensor(rng.normal(size=(g.n_nodes, 3)))
    via_basis = rgcn_refine(h, g, {"dec.coef": Tensor(np.eye(N_RELATIONS)), "dec.bases": Tensor(bases)},
                            DecoderConfig(dim=3, n_bases=N_RELATIONS)).value
    direct = rgcn_propagate(h, g.neighbor_index, Tensor(bases), ad.relu).value
    np.testing.assert_array_equal(via_basis, direct)


def _score_params(mixing, factors):
    return {"dec.mixing": Tensor(np.asarray(mixing, float)), "dec.factors": Tensor(np.asarray(factors, float))}


def test_all_ones_scores_sigmoid_of_width():
    refined = Tensor(np.ones((2, 4)))
    params = _score_params(np.ones((N_RELATIONS, 1)), np.ones((1, 4)))
    p = score(0, Relation.INCREASE, 0, refined, params, n_chem=1)
    assert p == 1 / (1 + math.exp(-4))
    assert abs(p - 0.98201379003790845) < 1e-15


def test_zero_mixing_and_zero_embedding_give_half():
    rng = np.random.default_rng(0)
    refined = Tensor(rng.normal(size=(5, 3)))
    zero_mix = _score_params(np.zeros((N_RELATIONS, 2)), rng.normal(size=(2, 3)))
    trip = np.array([[c, r, t] for c in range(2) for r in range(4) for t in range(3)])
    assert np.all(score_batch(refined, trip, zero_mix, 2) == 0.5)
    emb = refined.value.copy()
    emb[0] = 0
    params = _score_params(rng.normal(size=(N_RELATIONS, 2)), rng.normal(size=(2, 3)))
    for t in range(3):
        assert score(0, Relation.BINDING, t, Tensor(emb), params, 2) == 0.5


@settings(max_examples=25)
@given(seed=st.integers(0, 10_000))
def test_symmetric_in_endpoint_embeddings(seed):
    rng = np.random.default_rng(seed)
    emb = rng.normal(size=(4, 3))
    params = _score_params(rng.normal(size=(N_RELATIONS, 4)), rng.normal(size=(4, 3)))
    swapped = emb.copy()
    swapped[[0, 2]] = emb[[2, 0]]  # chemical 0 <-> gene 0 with n_chem = 2
    for rel in Relation:
        a = score(0, rel, 0, Tensor(emb), params, 2)
        b = score(0, rel, 0, Tensor(swapped), params, 2)
        assert a == b
        assert 0 < a < 1


def test_batch_matches_loop():
    rng = np.random.default_rng(7)
    n_chem, n_gene = 10, 12
    emb = Tensor(rng.normal(size=(n_chem + n_gene, 8)))
    params = _score_params(rng.normal(size=(N_RELATIONS, 4)), rng.normal(size=(4, 8)))
    trip = np.column_stack([rng.integers(0, n_chem, 200), rng.integers(0, 4, 200), rng.integers(0, n_gene, 200)])
    batch = score_batch(emb, trip, params, n_chem)
    loop = np.array([score(h, Relation(r), t, emb, params, n_chem) for h, r, t in trip.tolist()])
    assert np.max(np.abs(batch - loop)) < 1e-12
    assert abs(score_batch(emb, trip[:1], params, n_chem)[0] - loop[0]) < 1e-15
    assert score_batch(emb, np.zeros((0, 3), int), params, n_chem).shape == (0,)
