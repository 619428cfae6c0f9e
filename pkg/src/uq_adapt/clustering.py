"""k-means mode detection in the reduced space, with label alignment across levels."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import linear_sum_assignment

MAX_ITER = 300
N_INIT = 10


@dataclass(frozen=True)
class ClusterResult:
    assignments: np.ndarray   # (n,) labels in 0..K-1
    centroids: np.ndarray     # (K, k)
    shares: np.ndarray        # (K,) percent
    inertia: float
    restart_inertias: tuple[float, ...] = field(default=(), compare=False)

    @property
    def K(self) -> int:
        return len(self.centroids)

    def relabel(self, perm) -> "ClusterResult":
        """Apply ``perm`` (old label j -> new label perm[j])."""
        perm = np.asarray(perm)
        inv = np.argsort(perm)
        return replace(self, assignments=perm[self.assignments], centroids=self.centroids[inv],
                       shares=self.shares[inv])


def cluster_shares(assignments, K: int | None = None) -> np.ndarray:
    a = np.asarray(assignments)
    K = int(a.max()) + 1 if K is None else K
    if len(a) == 0:
        return np.zeros(K)
    return 100.0 * np.bincount(a, minlength=K) / len(a)


def _sqdist(Z, C):
    # (n, K) squared distances; K is small so a loop over centroids is cheap
    return np.stack([np.sum((Z - c) ** 2, axis=1) for c in C], axis=1)


def kmeans_plusplus(Z, K, rng) -> np.ndarray:
    n = len(Z)
    C = [Z[rng.integers(n)]]
    d2 = np.sum((Z - C[0]) ** 2, axis=1)
    for _ in range(1, K):
        total = d2.sum()
        idx = rng.integers(n) if total <= 0 else rng.choice(n, p=d2 / total)
        C.append(Z[idx])
        d2 = np.minimum(d2, np.sum((Z - Z[idx]) ** 2, axis=1))
    return np.array(C, dtype=float)


def _repair_empty(Z, labels, C, K):
    for c in range(K):
        if np.any(labels == c):
            continue
        largest = np.argmax(np.bincount(labels, minlength=K))
        members = np.flatnonzero(labels == largest)
        far = members[np.argmax(np.sum((Z[members] - C[largest]) ** 2, axis=1))]
        labels[far] = c
        C[c] = Z[far]
        C[largest] = Z[labels == largest].mean(axis=0)
    return labels, C


def lloyd(Z, C, max_iter: int = MAX_ITER):
    """Lloyd iterations from centroids ``C``; returns labels, centroids, inertia history."""
    K = len(C)
    C = C.copy()
    labels = np.argmin(_sqdist(Z, C), axis=1)
    labels, C = _repair_empty(Z, labels, C, K)
    history = []
    for _ in range(max_iter):
        C = np.array([Z[labels == c].mean(axis=0) for c in range(K)])
        d2 = _sqdist(Z, C)
        history.append(float(d2[np.arange(len(Z)), labels].sum()))
        new = np.argmin(d2, axis=1)
        new, C = _repair_empty(Z, new, C, K)
        if np.array_equal(new, labels):
            break
        labels = new
    inertia = float(_sqdist(Z, C)[np.arange(len(Z)), labels].sum())
    history.append(inertia)
    return labels, C, history


def kmeans(Z, K: int, seed=0, n_init: int = N_INIT, max_iter: int = MAX_ITER) -> ClusterResult:
    """Best-of-``n_init`` k-means++ / Lloyd clustering of the rows of ``Z``."""
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    if K < 1 or len(Z) < K:
        raise ValueError(f"need at least K={K} points, got {len(Z)}")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    best, inertias = None, []
    for _ in range(n_init):
        labels, C, hist = lloyd(Z, kmeans_plusplus(Z, K, rng), max_iter)
        inertias.append(hist[-1])
        if best is None or hist[-1] < best[2]:
            best = (labels, C, hist[-1])
    labels, C, inertia = best
    return ClusterResult(labels, C, cluster_shares(labels, K), inertia, tuple(inertias))


def align_labels(prev_centroids, new_centroids) -> np.ndarray:
    """Permutation ``perm`` mapping new label j to the previous label it best matches.

    Minimises the summed centroid distance; exhaustive for K <= 6.
    """
    P = np.atleast_2d(np.asarray(prev_centroids, dtype=float))
    Q = np.atleast_2d(np.asarray(new_centroids, dtype=float))
    if P.shape != Q.shape:
        raise ValueError("centroid sets must have the same shape")
    K = len(P)
    cost = np.sqrt(np.maximum(_sqdist(Q, P), 0.0))   # cost[j, i]: new j vs previous i
    if K <= 6:
        best = min(itertools.permutations(range(K)),
                   key=lambda p: sum(cost[j, p[j]] for j in range(K)))
        return np.array(best)
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(K, dtype=int)
    perm[rows] = cols
    return perm


def order_by_share(result: ClusterResult) -> ClusterResult:
    """Relabel so that label 0 is the largest cluster (stable for ties)."""
    order = np.argsort(-result.shares, kind="stable")
    perm = np.empty(result.K, dtype=int)
    perm[order] = np.arange(result.K)
    return result.relabel(perm)
