"""Deterministic mini-batch subgradient descent for linear hinge-loss models.

One shared core trains any stack of binary max-margin problems over the
same sparse design matrix (one-vs-rest classifiers, cluster routers,
per-cluster label scorers). L2 penalty of strength 1/C in per-sample
scaling (lambda = 1/(C*n)), seeded epoch shuffling, and Polyak averaging
of the iterates. Subgradient steps are not descent steps, so the trainer
keeps the best averaged iterate seen at any epoch boundary (measured by
the full-data objective) and returns that; the reported loss history is
the retained model's objective after each epoch, non-increasing by
construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .textproc import SparseVector


@dataclass(frozen=True)
class SGDParams:
    C: float = 1.0
    epochs: int = 20
    batch_size: int = 64
    eta0: float = 2.0
    seed: int = 0
    fit_intercept: bool = True


def vectors_to_csr(vectors: list[SparseVector], n_features: int) -> sp.csr_matrix:
    """Stack sparse vectors into a CSR design matrix."""
    indptr = np.zeros(len(vectors) + 1, dtype=np.int64)
    for i, v in enumerate(vectors):
        if len(v.ids) and v.ids[-1] >= n_features:
            raise ValueError(f"term id {v.ids[-1]} out of range for {n_features} features")
        indptr[i + 1] = indptr[i] + len(v.ids)
    indices = np.concatenate([v.ids for v in vectors]) if vectors else np.array([], dtype=np.int32)
    data = np.concatenate([v.weights for v in vectors]) if vectors else np.array([])
    return sp.csr_matrix((data, indices, indptr), shape=(len(vectors), n_features))


def hinge_objective(X: sp.csr_matrix, Y: np.ndarray, W: np.ndarray, b: np.ndarray, C: float) -> float:
    """Mean over outputs of (lambda/2)||w||^2 + mean hinge, lambda = 1/(C*n)."""
    n = X.shape[0]
    lam = 1.0 / (C * n)
    margins = Y * (X @ W.T + b)
    hinge = np.maximum(0.0, 1.0 - margins).mean(axis=0)
    reg = 0.5 * lam * (W * W).sum(axis=1)
    return float((reg + hinge).mean())


def train_hinge_ovr(
    X: sp.csr_matrix,
    Y: np.ndarray,
    params: SGDParams = SGDParams(),
) -> tuple[np.ndarray, np.ndarray, list[float]]:
    """Train m binary hinge models jointly on one design matrix.

    X: (n, d) CSR; Y: (n, m) in {-1, +1}. Returns the averaged iterates
    (W: (m, d), b: (m,)) and the per-epoch objective history of the
    averaged iterate.
    """
    n, d = X.shape
    if Y.ndim != 2 or Y.shape[0] != n:
        raise ValueError(f"target shape {Y.shape} does not match {n} samples")
    m = Y.shape[1]
    lam = 1.0 / (params.C * n)

    W = np.zeros((m, d))
    b = np.zeros(m)
    W_avg = np.zeros((m, d))
    b_avg = np.zeros(m)

    rng = np.random.default_rng(params.seed)
    t = 0
    t0 = 1.0 / (lam * params.eta0)
    losses: list[float] = []
    best = np.inf
    W_best, b_best = W_avg, b_avg
    for _ in range(params.epochs):
        order = rng.permutation(n)
        for start in range(0, n, params.batch_size):
            batch = order[start : start + params.batch_size]
            Xb = X[batch]
            Yb = Y[batch]
            t += 1
            eta = 1.0 / (lam * (t0 + t))

            margins = Yb * (Xb @ W.T + b)
            active = (margins < 1.0).astype(np.float64) * Yb  # (B, m)
            # subgradient: lam*W - mean_i active_i * x_i
            W *= 1.0 - eta * lam
            W += (eta / len(batch)) * (Xb.T @ active).T
            if params.fit_intercept:
                b += (eta / len(batch)) * active.sum(axis=0)

            W_avg += (W - W_avg) / t
            b_avg += (b - b_avg) / t
        objective = hinge_objective(X, Y, W_avg, b_avg, params.C)
        if objective < best:
            best = objective
            W_best = W_avg.copy()
            b_best = b_avg.copy()
        losses.append(best)
    return W_best, b_best, losses
