"""Same-class and kNN different-class pair sets over pooled two-view samples.

Pooled indexing puts the rows of view x first, then the rows of view y, so
sample ``i`` of view y has pooled index ``n + i``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

log = logging.getLogger(__name__)


class PairError(ValueError):
    pass


def _canonical(pairs) -> np.ndarray:
    """Sorted, deduplicated ``(i, j)`` rows with ``i < j``."""
    arr = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    arr = np.sort(arr, axis=1)
    if arr.size == 0:
        return arr
    return np.unique(arr, axis=0)


@dataclass(frozen=True)
class PairSets:
    same_pairs: np.ndarray  # m1 x 2, i < j
    diff_pairs: np.ndarray  # m2 x 2, i < j
    k: int

    @property
    def n1(self) -> int:
        return self.same_pairs.shape[0]

    @property
    def n2(self) -> int:
        return self.diff_pairs.shape[0]

    def laplacians(self, size: int) -> tuple[np.ndarray, np.ndarray]:
        """Graph Laplacians ``L`` with ``sum ||h_i - h_j||^2 = tr(H^T L H)``."""
        return _laplacian(self.same_pairs, size), _laplacian(self.diff_pairs, size)

    def dump(self, path) -> Path:
        path = Path(path)
        with open(path, "w") as fh:
            fh.write("i,j,kind\n")
            for kind, arr in (("same", self.same_pairs), ("diff", self.diff_pairs)):
                for i, j in arr:
                    fh.write(f"{i},{j},{kind}\n")
        return path


def _laplacian(pairs: np.ndarray, size: int) -> np.ndarray:
    A = np.zeros((size, size))
    A[pairs[:, 0], pairs[:, 1]] = 1.0
    A[pairs[:, 1], pairs[:, 0]] = 1.0
    return np.diag(A.sum(axis=1)) - A


def pooled_labels(labels) -> np.ndarray:
    labels = np.asarray(labels)
    return np.concatenate([labels, labels])


def build_same_pairs(labels) -> np.ndarray:
    """All unordered pooled index pairs that share a label."""
    labels = np.asarray(labels)
    if labels.shape[0] < 2:
        raise PairError("need at least 2 samples to form pairs")
    out = []
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        i, j = np.triu_indices(idx.size, k=1)
        out.append(np.column_stack([idx[i], idx[j]]))
    return _canonical(np.vstack(out))


def build_diff_pairs(features, labels, k: int) -> np.ndarray:
    """Union over samples of the pairs to their ``k`` nearest foreign-label neighbors.

    Euclidean distance; equidistant neighbors resolve to the lower index.
    """
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels)
    if k < 1:
        raise PairError("k must be >= 1")
    if features.shape[0] != labels.shape[0]:
        raise PairError("one label per feature row required")
    if np.unique(labels).size < 2:
        raise PairError("need at least 2 classes for different-class pairs")
    dist = cdist(features, features, "sqeuclidean")
    out = []
    clamped = False
    for i in range(labels.shape[0]):
        foreign = np.flatnonzero(labels != labels[i])
        kk = k
        if kk > foreign.size:
            kk, clamped = foreign.size, True
        order = np.argsort(dist[i, foreign], kind="stable")[:kk]
        nbrs = foreign[order]
        out.append(np.column_stack([np.full(kk, i), nbrs]))
    if clamped:
        log.warning("k=%d exceeds the available different-label samples for some points; clamped", k)
    return _canonical(np.vstack(out))


def build_pair_sets(features, labels, k: int) -> PairSets:
    """Pair sets for pooled features (view x rows then view y rows)."""
    return PairSets(same_pairs=build_same_pairs(labels),
                    diff_pairs=build_diff_pairs(features, labels, k), k=k)


def margin_terms(hidden, pairs: PairSets) -> tuple[float, float]:
    """Intra-class compactness and kNN inter-class spread of hidden codes."""
    if pairs.n1 == 0 or pairs.n2 == 0:
        raise PairError("empty pair set; the dataset is degenerate")
    hidden = np.asarray(hidden, dtype=float)
    ds = hidden[pairs.same_pairs[:, 0]] - hidden[pairs.same_pairs[:, 1]]
    dd = hidden[pairs.diff_pairs[:, 0]] - hidden[pairs.diff_pairs[:, 1]]
    g1 = np.sum(ds * ds) / (2.0 * pairs.n1)
    g2 = np.sum(dd * dd) / (2.0 * pairs.n2)
    return float(g1), float(g2)
