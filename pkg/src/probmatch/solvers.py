"""QAP solvers: the iterative probabilistic solver and learning-free baselines.

The probabilistic solver alternates three steps: propagate assignment
probabilities through the affinity operator (x <- K x), project back toward
the doubly stochastic set with Sinkhorn, and refine the affinities by the
elementwise probability ratio between consecutive iterates. Early stop fires
when the squared change of the assignment vector drops below a threshold.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .linalg import SparseAffinity, binary_score, hungarian, perm_matrix, sinkhorn, spmv


@dataclass
class SolverConfig:
    max_iters: int = 10            # S
    stop_eta: float = 1e-5         # eta
    sinkhorn_iters: int = 20
    sinkhorn_tol: float = 1e-9
    ratio_floor: float = 1e-12
    init_floor: float = 1e-12
    disable_refinement: bool = False   # force all affinity ratios to 1

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.stop_eta <= 0:
            raise ValueError("stop_eta must be positive")


@dataclass
class SolveTrace:
    """Per-iteration record of a probabilistic solve."""

    assignments: list = field(default_factory=list)
    binary_scores: list = field(default_factory=list)
    objectives: list = field(default_factory=list)
    stop_reason: str = "max_iters"
    last_delta_sq: float = float("nan")

    def record(self, X: np.ndarray, K: SparseAffinity):
        from .affinity import objective
        self.assignments.append(X.copy())
        self.binary_scores.append(binary_score(X))
        self.objectives.append(objective(K, X.ravel()))

    def to_json(self) -> str:
        doc = {
            "stop_reason": self.stop_reason,
            "iterations": len(self.assignments) - 1,
            "last_delta_sq": self.last_delta_sq,
            "binary_scores": self.binary_scores,
            "objectives": self.objectives,
            "assignments": [X.tolist() for X in self.assignments],
        }
        return json.dumps(doc, indent=1, sort_keys=True)


def probabilistic_solve(K: SparseAffinity, X_init: np.ndarray,
                        cfg: SolverConfig | None = None):
    """Iterative probabilistic QAP solver.

    Returns the final soft assignment and the full per-iteration trace. The
    input assignment is clamped below by ``cfg.init_floor`` so Sinkhorn and the
    refinement ratios are well defined.
    """
    cfg = cfg or SolverConfig()
    n1, n2 = K.n1, K.n2
    X = np.maximum(np.asarray(X_init, dtype=np.float64), cfg.init_floor)
    trace = SolveTrace()

    if K.unary.max(initial=0.0) == 0.0 and (K.vals.size == 0 or K.vals.max() == 0.0):
        # Degenerate operator: propagation is identically zero. Return the
        # normalized input immediately.
        X = sinkhorn(X, cfg.sinkhorn_iters, cfg.sinkhorn_tol)
        trace.record(X, K)
        trace.stop_reason = "early_stop"
        trace.last_delta_sq = 0.0
        return X, trace

    K_cur = K.copy()
    trace.record(X, K_cur)
    for _ in range(cfg.max_iters):
        x = X.ravel()
        y = spmv(K_cur, x)
        X_new = sinkhorn(y.reshape(n1, n2), cfg.sinkhorn_iters, cfg.sinkhorn_tol)
        trace.record(X_new, K_cur)
        delta_sq = float(((X_new.ravel() - x) ** 2).sum())
        if delta_sq < cfg.stop_eta:
            trace.stop_reason = "early_stop"
            trace.last_delta_sq = delta_sq
            return X_new, trace
        if not cfg.disable_refinement:
            ratio = X_new.ravel() / np.maximum(x, cfg.ratio_floor)
            # Scale row p of the operator by ratio_p (diagonal included).
            K_cur.vals = K_cur.vals * ratio[K_cur.rows]
            K_cur.unary = K_cur.unary * ratio
        X = X_new
    trace.stop_reason = "max_iters"
    trace.last_delta_sq = delta_sq
    return X, trace


def spectral_match(K: SparseAffinity, iters: int = 100) -> np.ndarray:
    """Power iteration approximating the principal eigenvector of K.

    Starts from the uniform vector; the iterate stays nonnegative with unit
    Euclidean norm.
    """
    x = np.full(K.size, 1.0 / np.sqrt(K.size))
    for _ in range(iters):
        y = spmv(K, x)
        norm = np.linalg.norm(y)
        if norm == 0.0:
            return x
        x = y / norm
    return x


def ipfp(K: SparseAffinity, x0: np.ndarray, max_iters: int = 50) -> np.ndarray:
    """Integer projected fixed point iteration.

    Each step discretizes the gradient K x with the Hungarian algorithm and
    line-searches the quadratic objective along the segment toward that
    permutation. The returned point never has a lower objective than x0.
    """
    x = np.asarray(x0, dtype=np.float64).copy()
    n1, n2 = K.n1, K.n2
    for _ in range(max_iters):
        g = spmv(K, x)
        b = perm_matrix(hungarian(g.reshape(n1, n2))).ravel()
        d = b - x
        # f(x + t d) = f(x) + c1 t + c2 t^2 on the symmetric operator.
        c1 = 2.0 * float(np.dot(d, g))
        c2 = float(np.dot(d, spmv(K, d)))
        if c1 <= 1e-12:
            break
        t = 1.0 if c2 >= 0 else min(1.0, -c1 / (2.0 * c2))
        x_new = x + t * d
        gain = c1 * t + c2 * t * t
        if gain <= 1e-12:
            break
        x = x_new
    return x


def rrwm(K: SparseAffinity, alpha: float = 0.2, inflation: float = 30.0,
         max_iters: int = 100) -> np.ndarray:
    """Reweighted random-walk matching.

    The l1-normalized walk step y = Kx / |Kx|_1 is mixed, with weight
    ``alpha``, with a jump vector obtained by exponentiating y (exponent
    ``inflation``) and reprojecting with Sinkhorn. alpha = 0 reduces to plain
    l1-normalized power iteration.
    """
    n1, n2 = K.n1, K.n2
    x = np.full(K.size, 1.0 / K.size)
    for _ in range(max_iters):
        y = spmv(K, x)
        s = y.sum()
        if s == 0.0:
            return x
        y = y / s
        if alpha > 0.0:
            q = np.exp(inflation * y / y.max())
            q = sinkhorn(q.reshape(n1, n2)).ravel()
            q = q / q.sum()
            x_new = (1.0 - alpha) * y + alpha * q
        else:
            x_new = y
        if np.linalg.norm(x_new - x) < 1e-8:
            x = x_new
            break
        x = x_new
    return x


def discretize(X: np.ndarray) -> np.ndarray:
    """Hard assignment: Hungarian on the soft matrix taken as profit."""
    return hungarian(X)


def accuracy(pred: np.ndarray, gt: np.ndarray) -> float:
    """Fraction of nodes assigned to their ground-truth match."""
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise ValueError("permutation length mismatch")
    return float(np.mean(pred == gt))
