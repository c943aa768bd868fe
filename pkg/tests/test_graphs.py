import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subdiff.graphs import (
    DisconnectedGraphError,
    Graph,
    assortativity,
    count_triangles_per_node,
    edge_overlap_pct,
    graph_stats,
    laplacian_eigens,
    largest_connected_component,
    load_edge_list,
    permute,
    power_law_exponent,
    save_edge_list,
)

from conftest import complete_graph, cycle_graph, graph_from_edges, path_graph, star_graph


def random_connected_graph(n, p, seed):
    rng = np.random.default_rng(seed)
    edges = {(i, i + 1) for i in range(n - 1)}  # spanning path keeps it connected
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < p:
                edges.add((i, j))
    return graph_from_edges(n, edges)


# ---------------------------------------------------------------------------
# IO
# ---------------------------------------------------------------------------

def test_load_edge_list_symmetrizes_and_drops_self_loops(tmp_path):
    f = tmp_path / "g.edges"
    f.write_text("0 1\n1 0\n2 2\n")
    g = load_edge_list(f)
    assert g.n == 3
    assert g.edges == frozenset({(0, 1)})


def test_load_edge_list_comments_and_blank_lines(tmp_path):
    f = tmp_path / "g.edges"
    f.write_text("# header\n\n0 1\n# tail\n1 2\n")
    g = load_edge_list(f)
    assert g.edges == frozenset({(0, 1), (1, 2)})


@pytest.mark.parametrize("line", ["0", "0 1 2", "a b", "-1 2"])
def test_load_edge_list_rejects_malformed(tmp_path, line):
    f = tmp_path / "g.edges"
    f.write_text(line + "\n")
    with pytest.raises(ValueError):
        load_edge_list(f)


def test_load_edge_list_empty_file_is_empty_graph(tmp_path):
    f = tmp_path / "g.edges"
    f.write_text("")
    g = load_edge_list(f)
    assert g.n == 0 and g.num_edges == 0


def test_save_load_round_trip(tmp_path):
    g = random_connected_graph(12, 0.3, seed=0)
    save_edge_list(g, tmp_path / "g.edges")
    assert load_edge_list(tmp_path / "g.edges").edges == g.edges


def test_graph_validation():
    with pytest.raises(ValueError):
        Graph(n=2, edges=frozenset({(0, 2)}))
    with pytest.raises(ValueError):
        Graph(n=2, edges=frozenset(), labels=np.zeros(3))


# ---------------------------------------------------------------------------
# Connectivity
# ---------------------------------------------------------------------------

def test_lcc_tie_broken_by_smallest_original_id():
    # two disjoint triangles plus an isolated node
    g = graph_from_edges(7, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)])
    lcc, remap = largest_connected_component(g)
    assert lcc.n == 3
    assert remap.tolist() == [0, 1, 2]


def test_lcc_identity_on_connected_graph():
    g = random_connected_graph(10, 0.2, seed=1)
    lcc, remap = largest_connected_component(g)
    assert lcc.n == g.n
    mapped = frozenset((min(remap[u], remap[v]), max(remap[u], remap[v]))
                       for u, v in lcc.edges)
    assert mapped == g.edges


def test_lcc_empty_graph():
    lcc, remap = largest_connected_component(Graph(n=0, edges=frozenset()))
    assert lcc.n == 0 and remap.size == 0


# ---------------------------------------------------------------------------
# Laplacian eigenpairs
# ---------------------------------------------------------------------------

def test_laplacian_eigens_p3():
    vals, vecs = laplacian_eigens(path_graph(3), 1)
    assert vals[0] == pytest.approx(1.0, abs=1e-12)
    expected = np.array([1.0, 0.0, -1.0]) / np.sqrt(2.0)
    assert np.allclose(vecs[:, 0], expected, atol=1e-9)


def test_laplacian_eigens_k4_spectrum():
    vals, _ = laplacian_eigens(complete_graph(4), 3)
    assert np.allclose(vals, [4.0, 4.0, 4.0], atol=1e-9)


def test_laplacian_eigens_star5():
    # star with 4 leaves: nonzero eigenvalues {1, 1, 1, 5}
    vals, _ = laplacian_eigens(star_graph(4), 4)
    assert np.allclose(vals, [1.0, 1.0, 1.0, 5.0], atol=1e-9)


def test_laplacian_eigens_matches_dense_solver():
    g = random_connected_graph(9, 0.35, seed=2)
    lap = np.diag(g.degrees.astype(float)) - g.adjacency(float)
    ref_vals = np.linalg.eigvalsh(lap)
    vals, vecs = laplacian_eigens(g, 4)
    assert np.allclose(vals, ref_vals[1:5], atol=1e-9)
    for j in range(4):
        resid = np.max(np.abs(lap @ vecs[:, j] - vals[j] * vecs[:, j]))
        assert resid <= 1e-8 * max(1.0, vals[j])
        assert np.linalg.norm(vecs[:, j]) == pytest.approx(1.0, abs=1e-10)


def test_laplacian_eigens_sign_convention():
    g = random_connected_graph(8, 0.3, seed=3)
    _, vecs = laplacian_eigens(g, 3)
    for j in range(3):
        nz = np.flatnonzero(np.abs(vecs[:, j]) > 1e-9)
        assert vecs[nz[0], j] > 0


def test_laplacian_eigens_disconnected_error():
    g = graph_from_edges(4, [(0, 1), (2, 3)])
    with pytest.raises(DisconnectedGraphError, match="largest connected component"):
        laplacian_eigens(g, 1)


# ---------------------------------------------------------------------------
# Triangles
# ---------------------------------------------------------------------------

def test_triangles_k4():
    tri = count_triangles_per_node(complete_graph(4))
    assert tri.tolist() == [3, 3, 3, 3]
    assert tri.sum() // 3 == 4


def test_triangles_star_is_zero():
    assert count_triangles_per_node(star_graph(5)).sum() == 0


def test_triangles_match_brute_force_enumeration():
    rng = np.random.default_rng(4)
    edges = {(i, j) for i in range(8) for j in range(i + 1, 8) if rng.random() < 0.5}
    g = graph_from_edges(8, edges)
    expected = np.zeros(8, dtype=int)
    for a, b, c in itertools.combinations(range(8), 3):
        if g.has_edge(a, b) and g.has_edge(b, c) and g.has_edge(a, c):
            expected[[a, b, c]] += 1
    assert count_triangles_per_node(g).tolist() == expected.tolist()


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------

def test_stats_k3():
    s = graph_stats(complete_graph(3))
    assert s.triangle_count == 1
    assert s.transitivity == pytest.approx(1.0)
    assert s.char_path_length == pytest.approx(1.0)


def test_stats_p3():
    s = graph_stats(path_graph(3))
    assert s.char_path_length == pytest.approx(4.0 / 3.0)
    assert s.transitivity == 0.0


def test_stats_require_connected_and_size():
    with pytest.raises(ValueError):
        graph_stats(path_graph(2))
    with pytest.raises(DisconnectedGraphError):
        graph_stats(graph_from_edges(4, [(0, 1), (2, 3)]))


def test_transitivity_and_assortativity_match_brute_force():
    g = random_connected_graph(10, 0.3, seed=5)
    s = graph_stats(g)
    deg = g.degrees
    paths2 = sum(int(d) * (int(d) - 1) // 2 for d in deg)
    tri = 0
    for a, b, c in itertools.combinations(range(g.n), 3):
        if g.has_edge(a, b) and g.has_edge(b, c) and g.has_edge(a, c):
            tri += 1
    assert s.transitivity == pytest.approx(3 * tri / paths2, abs=1e-12)
    xs, ys = [], []
    for u, v in g.edges:
        xs += [deg[u], deg[v]]
        ys += [deg[v], deg[u]]
    xs, ys = np.array(xs, float), np.array(ys, float)
    expected = float(((xs - xs.mean()) * (ys - ys.mean())).mean() / (xs.std() * ys.std()))
    assert s.assortativity == pytest.approx(expected, abs=1e-12)


def test_char_path_length_matches_bfs_oracle():
    g = random_connected_graph(12, 0.25, seed=6)
    from collections import deque

    total, pairs = 0, 0
    for src in range(g.n):
        dist = {src: 0}
        q = deque([src])
        while q:
            u = q.popleft()
            for v in g.neighbor_lists[u]:
                if v not in dist:
                    dist[v] = dist[u] + 1
                    q.append(v)
        for dst in range(src + 1, g.n):
            total += dist[dst]
            pairs += 1
    assert graph_stats(g).char_path_length == pytest.approx(total / pairs, abs=1e-12)


def test_power_law_exponent_formula():
    deg = np.array([1, 2, 2, 3, 5, 8])
    expected = 1.0 + len(deg) / np.sum(np.log(deg / 0.5))
    assert power_law_exponent(deg) == pytest.approx(expected, abs=1e-12)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_stats_invariant_under_permutation(seed):
    g = random_connected_graph(9, 0.3, seed=17)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(g.n)
    assert graph_stats(permute(g, perm)) == graph_stats(g)


def test_edge_overlap_pct_self_is_100():
    g = random_connected_graph(11, 0.3, seed=7)
    assert edge_overlap_pct(g, g) == pytest.approx(100.0)
    assert graph_stats(g, reference=g).edge_overlap_pct == pytest.approx(100.0)


def test_edge_overlap_pct_alignment_uses_degree_order():
    g = star_graph(3)  # center 0
    shifted = permute(g, [3, 0, 1, 2])  # center becomes node 3
    assert edge_overlap_pct(shifted, g) == pytest.approx(100.0)


def test_assortativity_degenerate_is_zero():
    assert assortativity(cycle_graph(5)) == 0.0
