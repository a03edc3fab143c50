"""Gaussian k-nearest-neighbour similarity graphs and their Laplacians."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist


@dataclass(frozen=True)
class SimilarityGraph:
    S: np.ndarray
    D: np.ndarray
    L: np.ndarray

    @classmethod
    def from_similarity(cls, S):
        D = S.sum(axis=1)
        return cls(S, D, np.diag(D) - S)


def pairwise_sq_dists(X):
    """Squared Euclidean distances between the columns of ``X``."""
    # explicit differences: identical columns give exactly 0
    return cdist(X.T, X.T, "sqeuclidean")


def knn_adjacency(d2, k):
    """Boolean union-symmetrized k-NN adjacency; ties broken by lower index."""
    n = d2.shape[0]
    masked = d2.copy()
    np.fill_diagonal(masked, np.inf)
    nbrs = np.argsort(masked, axis=1, kind="stable")[:, :k]
    A = np.zeros((n, n), dtype=bool)
    A[np.repeat(np.arange(n), k), nbrs.ravel()] = True
    return A | A.T


def build_graph(X, k=5, bandwidth="median") -> SimilarityGraph:
    """Similarity graph over the columns of the ``d x n`` matrix ``X``.

    ``bandwidth`` is either ``"median"`` (median distance over kept edges) or
    a positive float sigma. When every kept edge has length zero the kernel
    degenerates and kept edges get similarity 1.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[1]
    if n < 2:
        raise ValueError("a graph needs at least 2 instances")
    if not 1 <= k <= n - 1:
        raise ValueError(f"k must be in [1, {n - 1}], got {k}")

    d2 = pairwise_sq_dists(X)
    A = knn_adjacency(d2, k)
    if bandwidth == "median":
        iu = np.triu_indices(n, 1)
        kept = np.sqrt(d2[iu][A[iu]])
        sigma = float(np.median(kept))
    else:
        sigma = float(bandwidth)
        if sigma < 0:
            raise ValueError("fixed bandwidth must be non-negative")

    if sigma > 0:
        S = np.exp(-d2 / (2.0 * sigma ** 2))
    else:
        S = np.ones((n, n))
    S = np.where(A, S, 0.0)
    # exact symmetry regardless of rounding in d2
    S = 0.5 * (S + S.T)
    np.fill_diagonal(S, 0.0)
    return SimilarityGraph.from_similarity(S)
