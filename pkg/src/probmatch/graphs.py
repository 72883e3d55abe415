"""Attributed graphs, synthetic benchmark pairs, and the association graph.

Synthetic instances are planar keypoint sets connected by Delaunay
triangulation, with per-node geometric descriptors standing in for image
features. The association graph ("AA-graph") has one node per candidate match
(i, a) and one edge per pair of candidate matches whose underlying graph edges
both exist.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import Delaunay, QhullError

FEATURE_DIM = 8
_N_DIST_BINS = 4
_N_ANGLE_BINS = 4
_LOG_DIST_RANGE = (np.log(5e-3), np.log(1.5))

PAIR_SCHEMA_VERSION = 1


@dataclass
class AttributedGraph:
    points: np.ndarray      # (n, 2) coordinates, unit-square scale
    features: np.ndarray    # (n, d_F) per-node descriptors
    adjacency: np.ndarray   # (n, n) symmetric bool, zero diagonal
    delaunay_fallback: bool = False

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        self.features = np.asarray(self.features, dtype=np.float64)
        self.adjacency = np.asarray(self.adjacency, dtype=bool)
        n = self.n
        if self.adjacency.shape != (n, n):
            raise ValueError("adjacency shape mismatch")
        if np.any(self.adjacency != self.adjacency.T) or np.any(np.diag(self.adjacency)):
            raise ValueError("adjacency must be symmetric with zero diagonal")

    @property
    def n(self) -> int:
        return self.points.shape[0]

    def edge_list(self) -> np.ndarray:
        """Undirected edges as an (m, 2) array with i < j."""
        i, j = np.nonzero(np.triu(self.adjacency, 1))
        return np.stack([i, j], axis=1)


@dataclass
class GraphPair:
    g1: AttributedGraph
    g2: AttributedGraph
    ground_truth: np.ndarray    # ground_truth[i] = matched node of g2
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.ground_truth = np.asarray(self.ground_truth, dtype=np.int64)
        if sorted(self.ground_truth.tolist()) != list(range(self.g2.n)):
            raise ValueError("ground_truth is not a valid permutation")


@dataclass
class AAGraph:
    """Association graph over candidate matches.

    ``edges`` lists undirected AA-edges as (p, q) with p < q, where the flat
    match index is p = i * n2 + a. An AA-edge exists iff both underlying graph
    edges exist.
    """

    n1: int
    n2: int
    node_attrs: np.ndarray   # (n1*n2, 2*d_F)
    edges: np.ndarray        # (m, 2) int
    edge_attrs: np.ndarray   # (m, 8) coordinate concatenations

    @property
    def size(self) -> int:
        return self.n1 * self.n2


def delaunay_adjacency(points: np.ndarray) -> tuple[np.ndarray, bool]:
    """Adjacency of the Delaunay triangulation of 2-D points.

    Degenerate inputs (< 3 points or all collinear) fall back to the complete
    graph; the second return value flags when that happened.
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    adj = np.zeros((n, n), dtype=bool)
    if n < 3:
        fallback = True
    else:
        try:
            tri = Delaunay(points)
            for simplex in tri.simplices:
                for a in range(3):
                    for b in range(a + 1, 3):
                        adj[simplex[a], simplex[b]] = True
                        adj[simplex[b], simplex[a]] = True
            fallback = False
        except QhullError:
            fallback = True
    if fallback:
        adj = ~np.eye(n, dtype=bool)
    return adj, fallback


def geometric_features(points: np.ndarray, adjacency: np.ndarray) -> np.ndarray:
    """Shape-context style descriptor per node, dimension 8.

    Histograms of log-distances and of relative angles to the node's graph
    neighbors; angles are taken relative to the mean neighbor direction, which
    makes the descriptor invariant to global rotation.
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    feats = np.zeros((n, FEATURE_DIM))
    lo, hi = _LOG_DIST_RANGE
    for i in range(n):
        nbrs = np.nonzero(adjacency[i])[0]
        if nbrs.size == 0:
            continue
        offsets = points[nbrs] - points[i]
        dists = np.linalg.norm(offsets, axis=1)
        dists = np.maximum(dists, 1e-9)
        logd = np.clip(np.log(dists), lo, hi - 1e-12)
        dhist, _ = np.histogram(logd, bins=_N_DIST_BINS, range=(lo, hi))
        angles = np.arctan2(offsets[:, 1], offsets[:, 0])
        mean_dir = np.arctan2(np.sin(angles).mean(), np.cos(angles).mean())
        rel = np.mod(angles - mean_dir + np.pi, 2 * np.pi) - np.pi
        ahist, _ = np.histogram(rel, bins=_N_ANGLE_BINS, range=(-np.pi, np.pi))
        feats[i, :_N_DIST_BINS] = dhist / nbrs.size
        feats[i, _N_DIST_BINS:] = ahist / nbrs.size
    return feats


def graph_from_points(points: np.ndarray) -> AttributedGraph:
    """Delaunay-connected attributed graph with geometric descriptors."""
    adj, fallback = delaunay_adjacency(points)
    feats = geometric_features(points, adj)
    return AttributedGraph(points, feats, adj, delaunay_fallback=fallback)


def synthesize_pair(n: int, noise_sigma: float, rotation_max: float = 0.0,
                    seed: int = 0, translation_max: float = 0.05,
                    outliers: int = 0) -> GraphPair:
    """Random matching instance: rigid motion of a point cloud plus noise.

    Graph 1 points are uniform in the unit square; graph 2 applies a random
    rotation bounded by ``rotation_max`` and a random translation bounded by
    ``translation_max``, adds Gaussian noise with standard deviation
    ``noise_sigma``, and shuffles node order. The shuffle is recorded as the
    ground truth. Fully deterministic given ``seed``.
    """
    if n < 3:
        raise ValueError("need at least 3 points")
    if outliers != 0:
        raise ValueError("outlier injection is not supported")
    rng = np.random.default_rng(seed)
    p1 = rng.uniform(0.0, 1.0, size=(n, 2))
    theta = rng.uniform(-rotation_max, rotation_max) if rotation_max > 0 else 0.0
    shift = (rng.uniform(-translation_max, translation_max, size=2)
             if translation_max > 0 else np.zeros(2))
    rot = np.array([[np.cos(theta), -np.sin(theta)],
                    [np.sin(theta), np.cos(theta)]])
    center = p1.mean(axis=0)
    p2 = (p1 - center) @ rot.T + center + shift
    if noise_sigma > 0:
        p2 = p2 + rng.normal(0.0, noise_sigma, size=p2.shape)
    gt = rng.permutation(n)
    p2_shuffled = np.empty_like(p2)
    p2_shuffled[gt] = p2        # g2 node gt[i] is the image of g1 node i
    g1 = graph_from_points(p1)
    g2 = graph_from_points(p2_shuffled)
    meta = {"n": n, "noise_sigma": noise_sigma, "rotation_max": rotation_max,
            "translation_max": translation_max, "seed": seed, "outliers": outliers}
    return GraphPair(g1, g2, gt, meta)


def build_aa_graph(g1: AttributedGraph, g2: AttributedGraph) -> AAGraph:
    """Association graph of a pair of attributed graphs.

    Node attribute for match (i, a) is [f_i; f_a]; edge attribute for the
    AA-edge between (i, a) and (j, b) is [p_i; p_j; p_a; p_b]. Each pair of an
    undirected edge (i, j) in graph 1 and (a, b) in graph 2 contributes the two
    AA-edges ((i,a),(j,b)) and ((i,b),(j,a)).
    """
    if g1.features.shape[1] != g2.features.shape[1]:
        raise ValueError("feature dimensions differ between graphs")
    n1, n2 = g1.n, g2.n
    node_attrs = np.concatenate(
        [np.repeat(g1.features, n2, axis=0), np.tile(g2.features, (n1, 1))], axis=1)

    e1 = g1.edge_list()
    e2 = g2.edge_list()
    if len(e1) == 0 or len(e2) == 0:
        edges = np.zeros((0, 2), dtype=np.int64)
        edge_attrs = np.zeros((0, 8))
        return AAGraph(n1, n2, node_attrs, edges, edge_attrs)

    # Cross every graph-1 edge with every graph-2 edge in both orientations.
    i = np.repeat(e1[:, 0], 2 * len(e2))
    j = np.repeat(e1[:, 1], 2 * len(e2))
    ab = np.concatenate([e2, e2[:, ::-1]], axis=0)
    a = np.tile(ab[:, 0], len(e1))
    b = np.tile(ab[:, 1], len(e1))
    p = i * n2 + a
    q = j * n2 + b
    lo = np.minimum(p, q)
    hi = np.maximum(p, q)
    edges = np.stack([lo, hi], axis=1)
    edge_attrs = np.concatenate(
        [g1.points[i], g1.points[j], g2.points[a], g2.points[b]], axis=1)
    return AAGraph(n1, n2, node_attrs, edges, edge_attrs)


def save_pair(pair: GraphPair, path) -> None:
    """Persist a GraphPair as a versioned JSON document."""
    def graph_doc(g: AttributedGraph) -> dict:
        return {
            "points": g.points.tolist(),
            "features": g.features.tolist(),
            "edges": g.edge_list().tolist(),
            "delaunay_fallback": g.delaunay_fallback,
        }

    doc = {
        "schema_version": PAIR_SCHEMA_VERSION,
        "g1": graph_doc(pair.g1),
        "g2": graph_doc(pair.g2),
        "ground_truth": pair.ground_truth.tolist(),
        "meta": pair.meta,
    }
    with open(path, "w") as f:
        json.dump(doc, f, indent=1, sort_keys=True)
        f.write("\n")


def load_pair(path) -> GraphPair:
    with open(path) as f:
        doc = json.load(f)
    if doc.get("schema_version") != PAIR_SCHEMA_VERSION:
        raise ValueError(f"unsupported schema version {doc.get('schema_version')}")

    def graph_from_doc(d: dict) -> AttributedGraph:
        points = np.asarray(d["points"], dtype=np.float64)
        n = points.shape[0]
        adj = np.zeros((n, n), dtype=bool)
        for i, j in d["edges"]:
            adj[i, j] = adj[j, i] = True
        return AttributedGraph(points, np.asarray(d["features"]), adj,
                               delaunay_fallback=d["delaunay_fallback"])

    return GraphPair(graph_from_doc(doc["g1"]), graph_from_doc(doc["g2"]),
                     np.asarray(doc["ground_truth"], dtype=np.int64), doc["meta"])
