import itertools

import numpy as np

from probmatch.affinity import objective
from probmatch.linalg import SparseAffinity, perm_matrix


def random_sparse_affinity(rng, n1, n2, density=0.3):
    """Random symmetric nonnegative operator with unary diagonal."""
    size = n1 * n2
    unary = rng.uniform(0.0, 1.0, size=size)
    pairs = []
    for p in range(size):
        for q in range(p + 1, size):
            if rng.uniform() < density:
                v = rng.uniform(0.0, 1.0)
                pairs.append((p, q, v))
                pairs.append((q, p, v))
    return SparseAffinity.from_pairs(n1, n2, unary, pairs)


def brute_force_qap(K):
    """Exhaustive QAP argmax over all permutations; returns (perm, objective)."""
    n = K.n1
    best_perm, best_val = None, -np.inf
    for perm in itertools.permutations(range(n)):
        perm = np.asarray(perm)
        val = objective(K, perm_matrix(perm).ravel())
        if val > best_val:
            best_perm, best_val = perm, val
    return best_perm, best_val


def qap_margin(K):
    """Relative gap between the best and second-best permutation objectives."""
    n = K.n1
    vals = sorted(
        (objective(K, perm_matrix(np.asarray(p)).ravel())
         for p in itertools.permutations(range(n))),
        reverse=True)
    if vals[0] <= 0:
        return 0.0
    return (vals[0] - vals[1]) / vals[0]
