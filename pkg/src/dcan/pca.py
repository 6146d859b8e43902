"""PCA front end: projection to the common input width plus max-abs scaling."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

# Scaled training data lands in [-TARGET_RANGE, TARGET_RANGE], inside tanh's range.
TARGET_RANGE = 0.9


class DegenerateDataError(ValueError):
    pass


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # d x r, orthonormal columns
    scale: float
    explained_variance: np.ndarray

    @property
    def input_dim(self) -> int:
        return self.mean.shape[0]

    @property
    def dim(self) -> int:
        return self.components.shape[1]


def fit_pca(data, r: int) -> PcaModel:
    data = np.asarray(data, dtype=float)
    n, d = data.shape
    if n < 2:
        raise DegenerateDataError("PCA needs at least 2 rows")
    if not 1 <= r <= min(n - 1, d):
        raise ValueError(f"r={r} must lie in [1, min(n-1, d)] = [1, {min(n - 1, d)}]")
    mean = data.mean(axis=0)
    centered = data - mean
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    comps = vt[:r].T.copy()
    # deterministic sign: largest-magnitude entry of each column is positive
    idx = np.argmax(np.abs(comps), axis=0)
    signs = np.sign(comps[idx, np.arange(r)])
    signs[signs == 0] = 1.0
    comps *= signs
    max_abs = np.max(np.abs(centered @ comps))
    if not max_abs > 0:
        raise DegenerateDataError("training data has zero variance in the retained subspace")
    return PcaModel(mean=mean, components=comps, scale=float(max_abs / TARGET_RANGE),
                    explained_variance=s[:r] ** 2 / (n - 1))


def transform(model: PcaModel, data) -> np.ndarray:
    data = np.asarray(data, dtype=float)
    if data.ndim != 2 or data.shape[1] != model.input_dim:
        raise ValueError(f"expected {model.input_dim} columns, got shape {data.shape}")
    return (data - model.mean) @ model.components / model.scale


def inverse_transform(model: PcaModel, features) -> np.ndarray:
    return model.mean + model.scale * np.asarray(features, dtype=float) @ model.components.T


def project_2d(features, labels, out_path, views=None) -> Path:
    """Write the 2-D principal projection of pooled features as plot data.

    ``views`` tags each row; by default the first half of the rows is view
    ``x`` and the second half view ``y``.
    """
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels)
    if features.ndim != 2 or features.shape[1] < 2 or features.shape[0] < 3:
        raise ValueError("project_2d needs at least 3 rows and 2 columns")
    if labels.shape[0] != features.shape[0]:
        raise ValueError("one label per feature row required")
    if views is None:
        half = features.shape[0] // 2
        views = ["x"] * half + ["y"] * (features.shape[0] - half)
    model = fit_pca(features, 2)
    coords = (features - model.mean) @ model.components
    out_path = Path(out_path)
    with open(out_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["pc1", "pc2", "label", "view"])
        for (p1, p2), lab, v in zip(coords, labels, views):
            w.writerow([repr(float(p1)), repr(float(p2)), int(lab), v])
    return out_path
