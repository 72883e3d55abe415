import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from probmatch.graphs import (
    FEATURE_DIM,
    AttributedGraph,
    build_aa_graph,
    delaunay_adjacency,
    graph_from_points,
    load_pair,
    save_pair,
    synthesize_pair,
)


def _complete_graph(points):
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    adj = ~np.eye(n, dtype=bool)
    return AttributedGraph(points, np.zeros((n, FEATURE_DIM)), adj)


def _edgeless_graph(points):
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    return AttributedGraph(points, np.zeros((n, FEATURE_DIM)),
                           np.zeros((n, n), dtype=bool))


# ---------------------------------------------------------------------------
# delaunay_adjacency

def test_delaunay_triangle_complete():
    adj, fallback = delaunay_adjacency([[0, 0], [1, 0], [0, 1]])
    assert not fallback
    assert np.array_equal(adj, ~np.eye(3, dtype=bool))


def test_delaunay_unit_square_five_edges():
    adj, fallback = delaunay_adjacency([[0, 0], [1, 0], [1, 1], [0, 1]])
    assert not fallback
    assert np.triu(adj).sum() == 5   # 4 hull edges + exactly one diagonal


def test_delaunay_collinear_fallback():
    adj, fallback = delaunay_adjacency([[0, 0], [0.5, 0.5], [1, 1]])
    assert fallback
    assert np.array_equal(adj, ~np.eye(3, dtype=bool))


def test_delaunay_connected():
    rng = np.random.default_rng(2)
    points = rng.uniform(0, 1, size=(12, 2))
    adj, _ = delaunay_adjacency(points)
    # breadth-first reachability from node 0
    seen = {0}
    frontier = [0]
    while frontier:
        nxt = []
        for i in frontier:
            for j in np.nonzero(adj[i])[0]:
                if j not in seen:
                    seen.add(int(j))
                    nxt.append(int(j))
        frontier = nxt
    assert len(seen) == 12


# ---------------------------------------------------------------------------
# synthesize_pair

def test_synthesize_zero_noise_points_match_under_ground_truth():
    pair = synthesize_pair(6, 0.0, seed=4, translation_max=0.0)
    assert np.allclose(pair.g2.points[pair.ground_truth], pair.g1.points)


def test_synthesize_deterministic():
    a = synthesize_pair(7, 0.02, rotation_max=0.3, seed=9)
    b = synthesize_pair(7, 0.02, rotation_max=0.3, seed=9)
    assert np.array_equal(a.g1.points, b.g1.points)
    assert np.array_equal(a.g2.points, b.g2.points)
    assert np.array_equal(a.g1.features, b.g1.features)
    assert np.array_equal(a.ground_truth, b.ground_truth)


def test_synthesize_ground_truth_valid_permutation():
    pair = synthesize_pair(10, 0.02, seed=1)
    assert sorted(pair.ground_truth.tolist()) == list(range(10))


def test_synthesize_rejects_tiny_and_outliers():
    with pytest.raises(ValueError):
        synthesize_pair(2, 0.0)
    with pytest.raises(ValueError):
        synthesize_pair(5, 0.0, outliers=1)


def test_zero_noise_nearest_neighbor_recovers_ground_truth():
    # recover the rigid transform by Procrustes on the correspondence, then
    # check nearest-neighbor matching of the transformed points is exact
    pair = synthesize_pair(9, 0.0, rotation_max=0.5, seed=12)
    p1 = pair.g1.points
    p2 = pair.g2.points[pair.ground_truth]
    c1, c2 = p1.mean(axis=0), p2.mean(axis=0)
    u, _, vt = np.linalg.svd((p1 - c1).T @ (p2 - c2))
    rot = u @ vt
    moved = (p1 - c1) @ rot + c2
    assert np.abs(moved - p2).max() < 1e-9   # sigma = 0 means exact rigidity
    d = np.linalg.norm(moved[:, None] - pair.g2.points[None], axis=2)
    assert np.array_equal(np.argmin(d, axis=1), pair.ground_truth)


# ---------------------------------------------------------------------------
# build_aa_graph

def test_aa_graph_k3_vs_k3_counts():
    g = _complete_graph([[0, 0], [1, 0], [0, 1]])
    aa = build_aa_graph(g, g)
    assert aa.node_attrs.shape == (9, 2 * FEATURE_DIM)
    assert len(aa.edges) == 18   # 3 x 3 joint edge combinations x 2 pairings


def test_aa_graph_edgeless_has_no_edges():
    g1 = _edgeless_graph([[0, 0], [1, 0], [0, 1]])
    g2 = _complete_graph([[0, 0], [1, 0], [0, 1]])
    aa = build_aa_graph(g1, g2)
    assert len(aa.edges) == 0


def test_aa_graph_single_edge_hand_enumeration():
    adj = np.array([[0, 1], [1, 0]], dtype=bool)
    pts1 = np.array([[0.0, 0.0], [1.0, 0.0]])
    pts2 = np.array([[0.0, 1.0], [1.0, 1.0]])
    g1 = AttributedGraph(pts1, np.zeros((2, FEATURE_DIM)), adj)
    g2 = AttributedGraph(pts2, np.zeros((2, FEATURE_DIM)), adj)
    aa = build_aa_graph(g1, g2)
    # matches: (0,a)=0, (0,b)=1, (1,a)=2, (1,b)=3; expected AA-edges
    # {(0a,1b)} = (0,3) and {(0b,1a)} = (1,2)
    got = {tuple(e) for e in aa.edges.tolist()}
    assert got == {(0, 3), (1, 2)}
    attrs = {tuple(e): a for e, a in zip(aa.edges.tolist(), aa.edge_attrs)}
    assert np.allclose(attrs[(0, 3)], [0, 0, 1, 0, 0, 1, 1, 1])


def test_aa_graph_node_attrs_are_feature_concatenations():
    pair = synthesize_pair(4, 0.01, seed=3)
    aa = build_aa_graph(pair.g1, pair.g2)
    for i in range(4):
        for a in range(4):
            p = i * 4 + a
            expected = np.concatenate([pair.g1.features[i], pair.g2.features[a]])
            assert np.allclose(aa.node_attrs[p], expected)


def test_aa_graph_feature_dim_mismatch():
    g1 = _complete_graph([[0, 0], [1, 0], [0, 1]])
    g2 = AttributedGraph(g1.points, np.zeros((3, FEATURE_DIM + 1)), g1.adjacency)
    with pytest.raises(ValueError):
        build_aa_graph(g1, g2)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(3, 8))
def test_aa_graph_edges_match_double_loop_oracle(seed, n):
    pair = synthesize_pair(n, 0.03, seed=seed)
    aa = build_aa_graph(pair.g1, pair.g2)
    n2 = pair.g2.n
    expected = set()
    for i in range(n):
        for j in range(n):
            for a in range(n2):
                for b in range(n2):
                    if pair.g1.adjacency[i, j] and pair.g2.adjacency[a, b]:
                        p, q = i * n2 + a, j * n2 + b
                        if p < q:
                            expected.add((p, q))
    assert {tuple(e) for e in aa.edges.tolist()} == expected
    m1 = len(pair.g1.edge_list())
    m2 = len(pair.g2.edge_list())
    assert len(aa.edges) == 2 * m1 * m2


# ---------------------------------------------------------------------------
# serialization

def test_pair_round_trip(tmp_path):
    pair = synthesize_pair(6, 0.02, rotation_max=0.2, seed=7)
    path = tmp_path / "pair.json"
    save_pair(pair, path)
    loaded = load_pair(path)
    assert np.allclose(loaded.g1.points, pair.g1.points)
    assert np.allclose(loaded.g2.features, pair.g2.features)
    assert np.array_equal(loaded.g1.adjacency, pair.g1.adjacency)
    assert np.array_equal(loaded.ground_truth, pair.ground_truth)
    assert loaded.meta == pair.meta


def test_pair_load_rejects_unknown_version(tmp_path):
    pair = synthesize_pair(4, 0.0, seed=0)
    path = tmp_path / "pair.json"
    save_pair(pair, path)
    text = path.read_text().replace('"schema_version": 1', '"schema_version": 99')
    path.write_text(text)
    with pytest.raises(ValueError):
        load_pair(path)
