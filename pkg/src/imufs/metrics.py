"""External clustering indices and a k-means harness for selected features."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from sklearn.cluster import KMeans
from sklearn.exceptions import ConvergenceWarning


@dataclass(frozen=True)
class Partition:
    assignments: np.ndarray
    sse: Optional[float] = None

    def __post_init__(self):
        a = np.asarray(self.assignments)
        if a.ndim != 1 or a.size < 1:
            raise ValueError("a partition needs at least one assignment")
        if a.min() < 0:
            raise ValueError("cluster ids must be non-negative")
        object.__setattr__(self, "assignments", a.astype(int))

    @property
    def n_clusters(self):
        return int(np.unique(self.assignments).size)

    def __len__(self):
        return self.assignments.size


def _labels(p):
    return p.assignments if isinstance(p, Partition) else np.asarray(p, dtype=int)


def contingency(C, T):
    """Counts ``n_ij`` of samples in cluster ``i`` of C and class ``j`` of T.

    Rows and columns follow the sorted distinct labels; empty ids are dropped.
    """
    c, t = _labels(C), _labels(T)
    if c.shape != t.shape:
        raise ValueError(f"partitions differ in length: {c.size} vs {t.size}")
    _, ci = np.unique(c, return_inverse=True)
    _, ti = np.unique(t, return_inverse=True)
    table = np.zeros((ci.max() + 1, ti.max() + 1), dtype=np.int64)
    np.add.at(table, (ci, ti), 1)
    return table


def nmi(C, T) -> float:
    """Normalized mutual information with geometric-mean normalisation.

    Returns 0 when either partition has a single cluster.
    """
    table = contingency(C, T)
    n = table.sum()
    ni, mj = table.sum(axis=1), table.sum(axis=0)
    hc = float(np.sum(ni * np.log(ni / n)))
    ht = float(np.sum(mj * np.log(mj / n)))
    if hc == 0.0 or ht == 0.0:
        return 0.0
    i, j = np.nonzero(table)
    nij = table[i, j]
    mi = float(np.sum(nij * np.log(n * nij / (ni[i] * mj[j]))))
    return min(1.0, max(0.0, mi / math.sqrt(hc * ht)))


def _comb2(x):
    return x * (x - 1) // 2


def ari(C, T) -> float:
    """Adjusted Rand index.

    When the denominator vanishes (both partitions all singletons, or both a
    single cluster) the result is 1 for identical partitions and 0 otherwise.
    """
    table = contingency(C, T)
    n = int(table.sum())
    index = int(_comb2(table).sum())
    a = int(_comb2(table.sum(axis=1)).sum())
    b = int(_comb2(table.sum(axis=0)).sum())
    pairs = _comb2(n)
    # integer arithmetic scaled by 2*pairs avoids rounding in the expectation
    num = 2 * pairs * index - 2 * a * b
    den = pairs * (a + b) - 2 * a * b
    if den == 0:
        same = (np.count_nonzero(table, axis=0) == 1).all() and (np.count_nonzero(table, axis=1) == 1).all()
        return 1.0 if same else 0.0
    return num / den


def f_measure(C, T) -> float:
    """Mean over clusters of C of the F1 against the best-overlapping class of T.

    Not symmetric in its arguments. Argmax ties go to the lowest class label.
    """
    table = contingency(C, T)
    ni, mj = table.sum(axis=1), table.sum(axis=0)
    best = np.argmax(table, axis=1)
    hits = table[np.arange(table.shape[0]), best]
    P = hits / ni
    R = hits / mj[best]
    return float(np.mean(2 * P * R / (P + R)))


def _sklearn_seed(seed):
    return int(np.random.SeedSequence(seed).generate_state(1)[0])


def kmeans(data, K: int, seed=0, restarts: int = 10) -> Partition:
    """Lloyd's k-means with k-means++ seeding on the columns of ``data``.

    Best of ``restarts`` runs by within-cluster SSE; deterministic in ``seed``.
    """
    X = np.asarray(data, dtype=float).T
    if X.shape[0] < K:
        raise ValueError(f"k-means needs at least K={K} points, got {X.shape[0]}")
    km = KMeans(n_clusters=K, init="k-means++", n_init=restarts, algorithm="lloyd",
                random_state=_sklearn_seed(seed))
    with warnings.catch_warnings():
        # duplicate points can leave fewer distinct centres than K
        warnings.simplefilter("ignore", ConvergenceWarning)
        km.fit(X)
    return Partition(km.labels_, float(km.inertia_))


def stack_selected(views, selected):
    """Row-stack the selected feature rows of every view (``sum_l x N``)."""
    return np.vstack([np.asarray(x)[np.asarray(idx, dtype=int)] for x, idx in zip(views, selected)])


def evaluate_selection(views, selected, labels, K, seed=0, restarts=10):
    """Cluster the instances on the selected features and score against ``labels``."""
    pred = kmeans(stack_selected(views, selected), K, seed=seed, restarts=restarts)
    return {"nmi": nmi(pred, labels), "ari": ari(pred, labels), "f_measure": f_measure(pred, labels)}
