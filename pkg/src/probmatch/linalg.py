"""Numeric substrate: sparse affinity operator, Sinkhorn, Hungarian, binary score.

The affinity operator K is an N x N matrix (N = n1 * n2) with unary node
similarities on its diagonal and pairwise edge agreements off-diagonal. Only
entries gated by joint edge existence are stored. The match (i, a) is encoded
at flat index p = i * n2 + a throughout the package.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment


@dataclass
class SparseAffinity:
    """Sparse symmetric affinity operator.

    ``rows``/``cols``/``vals`` store the off-diagonal entries in directed form:
    every undirected affinity appears twice, once as (p, q) and once as (q, p).
    ``unary`` holds the diagonal.
    """

    n1: int
    n2: int
    unary: np.ndarray
    rows: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    cols: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    vals: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        self.unary = np.asarray(self.unary, dtype=np.float64)
        self.rows = np.asarray(self.rows, dtype=np.int64)
        self.cols = np.asarray(self.cols, dtype=np.int64)
        self.vals = np.asarray(self.vals, dtype=np.float64)
        if self.unary.shape != (self.size,):
            raise ValueError(
                f"unary must have length {self.size}, got {self.unary.shape}"
            )
        if not (self.rows.shape == self.cols.shape == self.vals.shape):
            raise ValueError("rows, cols and vals must have identical shapes")

    @property
    def size(self) -> int:
        return self.n1 * self.n2

    @classmethod
    def from_pairs(cls, n1, n2, unary, pairs):
        """Build from a list of (p, q, value) triples given once per direction."""
        if pairs:
            rows, cols, vals = map(np.asarray, zip(*pairs))
        else:
            rows = cols = vals = ()
        return cls(n1, n2, np.asarray(unary, dtype=np.float64),
                   np.asarray(rows, dtype=np.int64),
                   np.asarray(cols, dtype=np.int64),
                   np.asarray(vals, dtype=np.float64))

    def copy(self) -> "SparseAffinity":
        return SparseAffinity(self.n1, self.n2, self.unary.copy(),
                              self.rows.copy(), self.cols.copy(), self.vals.copy())

    def to_dense(self) -> np.ndarray:
        dense = np.diag(self.unary)
        np.add.at(dense, (self.rows, self.cols), self.vals)
        return dense

    def is_symmetric(self, tol: float = 0.0) -> bool:
        dense = self.to_dense()
        return bool(np.all(np.abs(dense - dense.T) <= tol))


def spmv(K: SparseAffinity, x: np.ndarray) -> np.ndarray:
    """Sparse matrix-vector product y = K x.

    Raises ValueError on a length mismatch.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (K.size,):
        raise ValueError(f"expected vector of length {K.size}, got {x.shape}")
    y = K.unary * x
    if K.rows.size:
        y += np.bincount(K.rows, weights=K.vals * x[K.cols], minlength=K.size)
    return y


def sinkhorn(X: np.ndarray, max_iters: int = 20, tol: float = 1e-9,
             floor: float = 1e-12) -> np.ndarray:
    """Alternating row/column normalization toward the doubly stochastic set.

    Entries are clamped below by ``floor`` before the first pass, so the output
    is strictly positive and the iteration is well defined for inputs with
    zeros. Stops when the largest row/column-sum deviation from 1 drops below
    ``tol``, or after ``max_iters`` passes.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise ValueError("sinkhorn expects a square matrix")
    X = np.maximum(X, floor)
    for _ in range(max_iters):
        X = X / X.sum(axis=1, keepdims=True)
        X = X / X.sum(axis=0, keepdims=True)
        dev = max(np.abs(X.sum(axis=1) - 1.0).max(),
                  np.abs(X.sum(axis=0) - 1.0).max())
        if dev < tol:
            break
    return X


def hungarian(profit: np.ndarray) -> np.ndarray:
    """Permutation maximizing sum_i profit[i, perm[i]].

    Returns the assignment as an index array of length n.
    """
    profit = np.asarray(profit, dtype=np.float64)
    if profit.ndim != 2 or profit.shape[0] != profit.shape[1]:
        raise ValueError("hungarian expects a square profit matrix")
    if not np.all(np.isfinite(profit)):
        raise ValueError("profit matrix must be finite")
    _, cols = linear_sum_assignment(-profit)
    return cols.astype(np.int64)


def perm_matrix(perm: np.ndarray) -> np.ndarray:
    """Dense 0/1 matrix for a permutation given as an index array."""
    n = len(perm)
    P = np.zeros((n, n))
    P[np.arange(n), perm] = 1.0
    return P


def l21_norm(X: np.ndarray) -> float:
    """Sum over columns of the Euclidean norm of each column."""
    X = np.asarray(X, dtype=np.float64)
    return float(np.linalg.norm(X, axis=0).sum())


def binary_score(X: np.ndarray) -> float:
    """Discreteness score of a square soft assignment.

    s = (l21(X) + l21(X^T)) / (2n). Equals 1 exactly for permutation matrices;
    for doubly stochastic X the value lies in [1/sqrt(n), 1].
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise ValueError("binary_score expects a square matrix")
    n = X.shape[0]
    return (l21_norm(X) + l21_norm(X.T)) / (2.0 * n)
