"""Graph matching as a quadratic assignment problem.

Library surface: sparse affinity operators and Sinkhorn/Hungarian primitives
(:mod:`probmatch.linalg`), synthetic keypoint benchmarks and association
graphs (:mod:`probmatch.graphs`), handcrafted affinities
(:mod:`probmatch.affinity`), the probabilistic solver and classical baselines
(:mod:`probmatch.solvers`), the learned predictor with its autodiff engine
(:mod:`probmatch.predictor`, :mod:`probmatch.autodiff`), and the experiment
runner (:mod:`probmatch.bench`).
"""

from .affinity import AffinityConfig, assemble_affinity, objective
from .graphs import (
    AAGraph,
    AttributedGraph,
    GraphPair,
    build_aa_graph,
    delaunay_adjacency,
    load_pair,
    save_pair,
    synthesize_pair,
)
from .linalg import (
    SparseAffinity,
    binary_score,
    hungarian,
    l21_norm,
    perm_matrix,
    sinkhorn,
    spmv,
)
from .solvers import (
    SolveTrace,
    SolverConfig,
    accuracy,
    discretize,
    ipfp,
    probabilistic_solve,
    rrwm,
    spectral_match,
)

__all__ = [
    "AAGraph",
    "AffinityConfig",
    "AttributedGraph",
    "GraphPair",
    "SolveTrace",
    "SolverConfig",
    "SparseAffinity",
    "accuracy",
    "assemble_affinity",
    "binary_score",
    "build_aa_graph",
    "delaunay_adjacency",
    "discretize",
    "hungarian",
    "ipfp",
    "l21_norm",
    "load_pair",
    "objective",
    "perm_matrix",
    "probabilistic_solve",
    "rrwm",
    "save_pair",
    "sinkhorn",
    "spectral_match",
    "spmv",
    "synthesize_pair",
]

__version__ = "0.1.0"
