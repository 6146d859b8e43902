"""Rank-1 cross-view recognition and embedding diagnostics."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from .dataset import ViewDataset
from .trainer import NetworkModel, embed

METRICS = ("cosine", "euclidean")


@dataclass(frozen=True)
class EvalReport:
    accuracy_xy: float  # gallery view x, probe view y
    accuracy_yx: float
    mean_accuracy: float
    per_class_hits: dict = field(default_factory=dict)  # hits over both directions

    def csv_rows(self) -> list[tuple[str, float]]:
        return [("x->y", self.accuracy_xy), ("y->x", self.accuracy_yx), ("mean", self.mean_accuracy)]

    def write_csv(self, path) -> Path:
        path = Path(path)
        with open(path, "w") as fh:
            fh.write("direction,accuracy\n")
            for name, acc in self.csv_rows():
                fh.write(f"{name},{acc!r}\n")
        return path

    def write_json(self, path) -> Path:
        path = Path(path)
        d = asdict(self)
        d["per_class_hits"] = {str(k): v for k, v in sorted(self.per_class_hits.items())}
        path.write_text(json.dumps(d, indent=2, sort_keys=True) + "\n")
        return path


def _distances(gallery, probe, metric):
    if metric == "euclidean":
        return cdist(probe, gallery, "euclidean")
    if metric != "cosine":
        raise ValueError(f"metric must be one of {METRICS}")
    gn = np.linalg.norm(gallery, axis=1)
    pn = np.linalg.norm(probe, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        sim = (probe @ gallery.T) / np.outer(pn, gn)
    dist = 1.0 - sim
    # zero vectors sit at maximal distance from everything
    dist[~np.isfinite(dist)] = np.inf
    return dist


def nearest_labels(gallery, gallery_labels, probe, metric="cosine"):
    """Label of the nearest gallery row per probe; ``-1`` when every distance is infinite."""
    gallery = np.asarray(gallery, dtype=float)
    probe = np.asarray(probe, dtype=float)
    gallery_labels = np.asarray(gallery_labels)
    if gallery.shape[0] == 0:
        raise ValueError("empty gallery")
    if gallery.shape[1] != probe.shape[1]:
        raise ValueError(f"feature widths differ: gallery {gallery.shape[1]}, probe {probe.shape[1]}")
    dist = _distances(gallery, probe, metric)
    best = np.argmin(dist, axis=1)  # first minimum: lowest gallery index wins ties
    pred = gallery_labels[best].copy()
    pred[~np.isfinite(dist[np.arange(len(best)), best])] = -1
    return pred


def rank1(gallery, gallery_labels, probe, probe_labels, metric="cosine") -> float:
    pred = nearest_labels(gallery, gallery_labels, probe, metric)
    return float(np.mean(pred == np.asarray(probe_labels)))


def evaluate_embeddings(ex, ey, labels, metric="cosine") -> EvalReport:
    labels = np.asarray(labels)
    pred_xy = nearest_labels(ex, labels, ey, metric)
    pred_yx = nearest_labels(ey, labels, ex, metric)
    acc_xy = float(np.mean(pred_xy == labels))
    acc_yx = float(np.mean(pred_yx == labels))
    hits = Counter()
    for pred in (pred_xy, pred_yx):
        for lab in labels[pred == labels]:
            hits[int(lab)] += 1
    per_class = {int(c): hits.get(int(c), 0) for c in np.unique(labels)}
    return EvalReport(acc_xy, acc_yx, (acc_xy + acc_yx) / 2.0, per_class)


def cross_view_eval(model: NetworkModel, data: ViewDataset, metric="cosine", depth=None) -> EvalReport:
    te = data.test
    if te.n == 0:
        raise ValueError("test split is empty")
    ex = embed(model, te.view_x, "x", depth)
    ey = embed(model, te.view_y, "y", depth)
    return evaluate_embeddings(ex, ey, te.labels, metric)


def gap_ratio(ex, ey, labels) -> float:
    """Mean same-class over mean different-class cross-view Euclidean distance."""
    labels = np.asarray(labels)
    dist = cdist(ex, ey, "euclidean")
    same = labels[:, None] == labels[None, :]
    if same.all() or not same.any():
        raise ValueError("gap ratio needs both same- and different-class pairs")
    return float(dist[same].mean() / dist[~same].mean())


def _knn_sets(m, k):
    dist = cdist(m, m, "sqeuclidean")
    np.fill_diagonal(dist, np.inf)
    order = np.argsort(dist, axis=1, kind="stable")
    return order[:, :k]


def neighbor_preservation(original, embedded, max_k: int) -> np.ndarray:
    """Entry ``k-1``: fraction of samples whose k nearest original-space
    neighbors are all among their k nearest embedded-space neighbors."""
    original = np.asarray(original, dtype=float)
    embedded = np.asarray(embedded, dtype=float)
    n = original.shape[0]
    if embedded.shape[0] != n:
        raise ValueError("original and embedded need equal row counts")
    if not 1 <= max_k < n:
        raise ValueError(f"max_k must lie in [1, {n - 1}]")
    a = _knn_sets(original, max_k)
    b = _knn_sets(embedded, max_k)
    out = np.empty(max_k)
    for k in range(1, max_k + 1):
        ok = [set(a[i, :k]) <= set(b[i, :k]) for i in range(n)]
        out[k - 1] = np.mean(ok)
    return out
