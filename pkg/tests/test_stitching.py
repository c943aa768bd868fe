import numpy as np
import pytest

from subdiff.datasets import barabasi_albert
from subdiff.diffusion import TrainConfig, train
from subdiff.graphs import Graph, normalize_edge
from subdiff.stitching import AmbiguousMatchError, StitchPlan, coalesce, generate_large
from subdiff.subgraphs import (
    Subgraph,
    attach_global_context,
    build_histograms,
    sample_ego_networks,
)

from conftest import complete_graph, path_graph


def translate_edges(rec: Graph, original: Graph):
    """Map the coalesced graph's edges back to original ids via context rows."""
    orig_by_row = {tuple(r): i for i, r in enumerate(original.C)}
    perm = [orig_by_row[tuple(r)] for r in rec.C]
    return frozenset(normalize_edge(perm[u], perm[v]) for u, v in rec.edges)


@pytest.mark.parametrize("builder,k", [
    (lambda: path_graph(10), 2),
    (lambda: complete_graph(6), 2),
    (lambda: barabasi_albert(100, 3, rng=1), 2),
    (lambda: barabasi_albert(60, 2, rng=4), 1),
])
def test_reconstruction_identity(builder, k):
    g = attach_global_context(builder(), 2)
    rec = coalesce(sample_ego_networks(g, k))
    assert rec.n == g.n
    assert translate_edges(rec, g) == g.edges


def test_coalesce_two_copies_is_identity():
    g = attach_global_context(path_graph(6), 2)
    sub = sample_ego_networks(g, 6)[0]  # whole graph
    rec = coalesce([sub, sub])
    assert rec.n == g.n
    assert translate_edges(rec, g) == g.edges


def test_coalesce_disjoint_union():
    s1 = Subgraph(parent_ids=(0, 1), A=np.array([[0, 1], [1, 0]], dtype=np.int8),
                  C=np.array([[0.0], [1.0]]))
    s2 = Subgraph(parent_ids=(0, 1), A=np.array([[0, 1], [1, 0]], dtype=np.int8),
                  C=np.array([[2.0], [3.0]]))
    rec = coalesce([s1, s2])
    assert rec.n == 4
    assert len(rec.edges) == 2


def test_coalesce_triangle_plus_path_shares_one_row():
    tri = Subgraph(parent_ids=(0, 1, 2),
                   A=np.array([[0, 1, 1], [1, 0, 1], [1, 1, 0]], dtype=np.int8),
                   C=np.array([[0.0], [1.0], [2.0]]))
    path = Subgraph(parent_ids=(0, 1),
                    A=np.array([[0, 1], [1, 0]], dtype=np.int8),
                    C=np.array([[2.0], [3.0]]))  # shares row 2.0 with the triangle
    rec = coalesce([tri, path])
    assert rec.n == 4
    assert len(rec.edges) == 4


def test_coalesce_order_independent():
    g = attach_global_context(barabasi_albert(40, 2, rng=7), 2)
    subs = sample_ego_networks(g, 2)
    rng = np.random.default_rng(0)
    base = coalesce(subs)
    for _ in range(3):
        perm = list(rng.permutation(len(subs)))
        other = coalesce([subs[i] for i in perm])
        assert other.edges == base.edges
        assert np.array_equal(other.C, base.C)


def test_coalesce_idempotent():
    g = attach_global_context(path_graph(8), 2)
    rec = coalesce(sample_ego_networks(g, 2))
    again = coalesce([Subgraph(parent_ids=tuple(range(rec.n)),
                               A=rec.adjacency(), C=rec.C)])
    assert again.edges == rec.edges


def test_coalesce_requires_distinct_rows_within_subgraph():
    bad = Subgraph(parent_ids=(0, 1), A=np.array([[0, 1], [1, 0]], dtype=np.int8),
                   C=np.array([[1.0], [1.0]]))
    with pytest.raises(ValueError, match="pairwise distinct"):
        coalesce([bad])


def test_coalesce_epsilon_merges_near_rows():
    s1 = Subgraph(parent_ids=(0, 1), A=np.array([[0, 1], [1, 0]], dtype=np.int8),
                  C=np.array([[0.0], [1.0]]))
    s2 = Subgraph(parent_ids=(0, 1), A=np.array([[0, 1], [1, 0]], dtype=np.int8),
                  C=np.array([[1.0 + 1e-9], [2.0]]))
    rec = coalesce([s1, s2], epsilon=1e-6)
    assert rec.n == 3
    assert len(rec.edges) == 2


def test_coalesce_epsilon_ambiguity_error():
    s1 = Subgraph(parent_ids=(0, 1), A=np.array([[0, 1], [1, 0]], dtype=np.int8),
                  C=np.array([[0.0], [1.0]]))
    s2 = Subgraph(parent_ids=(0, 1), A=np.array([[0, 1], [1, 0]], dtype=np.int8),
                  C=np.array([[0.5], [9.0]]))  # within 0.6 of both 0.0 and 1.0
    with pytest.raises(AmbiguousMatchError, match="0.5"):
        coalesce([s1, s2], epsilon=0.6)


@pytest.fixture(scope="module")
def stitch_model():
    g = attach_global_context(barabasi_albert(30, 2, rng=5), 2)
    subs = sample_ego_networks(g, 1)
    small = [s for s in subs if s.n <= 12]
    cfg = TrainConfig(T=8, layers=1, hidden=8, steps=0, batch=1, seed=0, n_max=12)
    model, _ = train(small, cfg)
    return model


def test_generate_large_node_count_and_coverage(stitch_model):
    plan = StitchPlan(stitch_model.histograms)
    rng = np.random.default_rng(3)
    g = generate_large(stitch_model, plan, rng)
    assert g.n == stitch_model.histograms.context_rows.shape[0]
    assert plan.coverage.all()


def test_generate_large_single_piece_is_that_subgraph():
    # histogram with every size equal to the full row count: one reverse
    # sample covers everything, so the output is exactly that sample
    g = attach_global_context(path_graph(5), 2)
    subs = sample_ego_networks(g, 4)  # every ego net is the whole path
    cfg = TrainConfig(T=6, layers=1, hidden=8, steps=0, batch=1, seed=0, n_max=8)
    model, _ = train(subs, cfg)
    assert set(model.histograms.sizes.tolist()) == {5}
    plan = StitchPlan(model.histograms)
    rng = np.random.default_rng(11)
    from subdiff.diffusion import reverse_sample

    probe_rng = np.random.default_rng(11)
    hist = model.histograms
    size_p = hist.size_counts / hist.size_counts.sum()
    assert int(probe_rng.choice(hist.sizes, p=size_p)) == 5
    weights = hist.context_counts.astype(float) * 10.0
    from subdiff.stitching import _weighted_sample_distinct

    idx = _weighted_sample_distinct(probe_rng, weights, 5)
    expected = reverse_sample(model, 5, hist.context_rows[idx], probe_rng)
    out = generate_large(model, plan, rng)
    assert out.n == 5
    expected_pairs = {
        normalize_edge(int(idx[u]), int(idx[v])) for u, v in expected.edge_set
    }
    # map output edges through its row matrix back to histogram row indices
    row_index = {tuple(r): i for i, r in enumerate(hist.context_rows)}
    got = {normalize_edge(row_index[tuple(out.C[u])], row_index[tuple(out.C[v])])
           for u, v in out.edges}
    assert got == expected_pairs


def test_stitch_plan_requires_context():
    empty = build_histograms([Subgraph(parent_ids=(0, 1),
                                       A=np.array([[0, 1], [1, 0]], dtype=np.int8))])
    with pytest.raises(ValueError, match="context"):
        StitchPlan(empty)
