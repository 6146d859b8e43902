"""Paired two-view datasets: loading, synthetic generation and input corruption."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

SPLITS = ("train", "test")
CORRUPTION_KINDS = ("mask_zero", "gaussian")


class DatasetError(ValueError):
    """Raised when dataset files or arrays violate the two-view contract."""


@dataclass(frozen=True)
class ViewDataset:
    view_x: np.ndarray
    view_y: np.ndarray
    labels: np.ndarray
    split: np.ndarray = field(default=None)

    def __post_init__(self):
        x = np.asarray(self.view_x, dtype=float)
        y = np.asarray(self.view_y, dtype=float)
        labels = np.asarray(self.labels)
        if x.ndim != 2 or y.ndim != 2:
            raise DatasetError("views must be 2-D matrices")
        if x.shape != y.shape:
            raise DatasetError(f"view shape mismatch: view_x {x.shape} vs view_y {y.shape}")
        if labels.ndim != 1 or labels.shape[0] != x.shape[0]:
            raise DatasetError(f"expected {x.shape[0]} labels, got {labels.shape[0]}")
        if labels.size and not np.issubdtype(labels.dtype, np.integer):
            raise DatasetError("labels must be integers")
        if labels.size and labels.min() < 0:
            raise DatasetError("labels must be >= 0")
        for name, m in (("view_x", x), ("view_y", y)):
            bad = np.argwhere(~np.isfinite(m))
            if bad.size:
                r, c = bad[0]
                raise DatasetError(f"{name}: non-finite entry at (row {r}, col {c})")
        split = self.split
        if split is None:
            split = np.full(x.shape[0], "train")
        split = np.asarray(split).astype(str)
        if split.shape != labels.shape:
            raise DatasetError("split tags must match the sample count")
        unknown = set(split.tolist()) - set(SPLITS)
        if unknown:
            raise DatasetError(f"unknown split tags: {sorted(unknown)}")
        for arr in (x, y, labels, split):
            arr.setflags(write=False)
        object.__setattr__(self, "view_x", x)
        object.__setattr__(self, "view_y", y)
        object.__setattr__(self, "labels", labels.astype(np.int64))
        object.__setattr__(self, "split", split)

    @property
    def n(self) -> int:
        return self.view_x.shape[0]

    @property
    def d(self) -> int:
        return self.view_x.shape[1]

    def subset(self, which: str) -> "ViewDataset":
        mask = self.split == which
        return ViewDataset(self.view_x[mask], self.view_y[mask], self.labels[mask], self.split[mask])

    @property
    def train(self) -> "ViewDataset":
        return self.subset("train")

    @property
    def test(self) -> "ViewDataset":
        return self.subset("test")


@dataclass(frozen=True)
class CorruptionSpec:
    """Corruption process applied to layer inputs.

    ``rate`` is the masking probability for ``mask_zero`` and the noise
    standard deviation for ``gaussian``.
    """

    kind: str = "mask_zero"
    rate: float = 0.03
    draws: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.kind not in CORRUPTION_KINDS:
            raise ValueError(f"unknown corruption kind {self.kind!r}")
        if self.kind == "mask_zero" and not 0.0 <= self.rate <= 1.0:
            raise ValueError("mask rate must lie in [0, 1]")
        if self.kind == "gaussian" and self.rate < 0:
            raise ValueError("gaussian sigma must be >= 0")
        if self.draws < 1:
            raise ValueError("draws must be >= 1")

    def with_seed(self, seed: int) -> "CorruptionSpec":
        return replace(self, seed=int(seed))


# --------------------------------------------------------------------------
# loading

def _read_matrix(path: Path) -> np.ndarray:
    rows = []
    with open(path, newline="") as fh:
        for r, rec in enumerate(csv.reader(fh)):
            if not rec or all(not s.strip() for s in rec):
                continue
            row = []
            for c, tok in enumerate(rec):
                try:
                    v = float(tok)
                except ValueError:
                    raise DatasetError(f"{path}: unparseable value {tok!r} at (row {r}, col {c})") from None
                if not math.isfinite(v):
                    kind = "NaN" if math.isnan(v) else "Inf"
                    raise DatasetError(f"{path}: {kind} entry at (row {r}, col {c})")
                row.append(v)
            if rows and len(row) != len(rows[0]):
                raise DatasetError(
                    f"{path}: row {r} has {len(row)} columns, expected {len(rows[0])}")
            rows.append(row)
    if not rows:
        raise DatasetError(f"{path}: empty matrix file")
    return np.array(rows, dtype=float)


def _read_tokens(path: Path) -> list[str]:
    with open(path) as fh:
        return [line.strip() for line in fh if line.strip()]


def _read_labels(path: Path) -> np.ndarray:
    out = []
    for r, tok in enumerate(_read_tokens(path)):
        try:
            out.append(int(tok))
        except ValueError:
            raise DatasetError(f"{path}: non-integer label {tok!r} at row {r}") from None
    return np.array(out, dtype=np.int64)


def load_dataset(path_x, path_y, path_labels, path_split=None) -> ViewDataset:
    """Load a two-view dataset from headerless CSV matrices and a label file.

    Without a split file every sample is tagged ``train``.
    """
    x = _read_matrix(Path(path_x))
    y = _read_matrix(Path(path_y))
    if x.shape != y.shape:
        raise DatasetError(f"view shape mismatch: {path_x} is {x.shape}, {path_y} is {y.shape}")
    labels = _read_labels(Path(path_labels))
    if labels.shape[0] != x.shape[0]:
        raise DatasetError(f"{path_labels}: {labels.shape[0]} labels for {x.shape[0]} rows")
    split = None
    if path_split is not None:
        split = _read_tokens(Path(path_split))
        if len(split) != x.shape[0]:
            raise DatasetError(f"{path_split}: {len(split)} split tags for {x.shape[0]} rows")
    return ViewDataset(x, y, labels, split)


def save_dataset(data: ViewDataset, directory) -> dict[str, Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {
        "x": directory / "view_x.csv",
        "y": directory / "view_y.csv",
        "labels": directory / "labels.txt",
        "split": directory / "split.txt",
    }
    for key in ("x", "y"):
        m = data.view_x if key == "x" else data.view_y
        with open(paths[key], "w") as fh:
            for row in m:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")
    paths["labels"].write_text("".join(f"{int(v)}\n" for v in data.labels))
    paths["split"].write_text("".join(f"{s}\n" for s in data.split))
    return paths


# --------------------------------------------------------------------------
# synthetic generator

def generate_synthetic(classes: int = 20, per_class: int = 10, ambient_dim: int = 50,
                       view_warp_seed: int = 7, noise_sigma: float = 0.1,
                       latent_dim: int = 5, warp_gain: float = 3.0, warp: bool = True) -> ViewDataset:
    """Two-view data with a nonlinear relation between the views.

    Class centers lie on the unit sphere of a random ``latent_dim``-dimensional
    subspace of the ambient space. A latent sample is its class center plus
    isotropic jitter inside that subspace. View x is the latent sample plus
    ambient jitter. View y applies a fixed random orthogonal rotation of the
    ambient space to the latent sample, squashes it element-wise with
    ``tanh(warp_gain * .)``, rescales it to unit RMS row norm and adds fresh
    ambient jitter. ``warp=False`` replaces the warp by the identity.

    The first ``ceil(classes / 2)`` class ids form the train split, the rest
    the test split.
    """
    if classes < 2 or per_class < 2 or ambient_dim < 4:
        raise ValueError("need classes >= 2, per_class >= 2 and ambient_dim >= 4")
    if not 1 <= latent_dim <= ambient_dim:
        raise ValueError("latent_dim must lie in [1, ambient_dim]")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be >= 0")
    rng = np.random.default_rng(view_warp_seed)
    centers = rng.standard_normal((classes, latent_dim))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    basis, _ = np.linalg.qr(rng.standard_normal((ambient_dim, latent_dim)))
    q, r = np.linalg.qr(rng.standard_normal((ambient_dim, ambient_dim)))
    rotation = q * np.sign(np.diag(r))

    labels = np.repeat(np.arange(classes), per_class)
    n = labels.size
    latent = (centers[labels] + noise_sigma * rng.standard_normal((n, latent_dim))) @ basis.T
    view_x = latent + noise_sigma * rng.standard_normal((n, ambient_dim))
    if warp:
        warped = np.tanh(warp_gain * latent @ rotation.T)
        warped /= np.sqrt(np.mean(np.sum(warped ** 2, axis=1)))
    else:
        warped = latent
    view_y = warped + noise_sigma * rng.standard_normal((n, ambient_dim))

    n_train = (classes + 1) // 2
    split = np.where(labels < n_train, "train", "test")
    return ViewDataset(view_x, view_y, labels, split)


# --------------------------------------------------------------------------
# corruption

def corrupt(m: np.ndarray, spec: CorruptionSpec, draw_index: int, stream: int = 0) -> np.ndarray:
    """Return one corrupted copy of ``m``.

    The draw is a pure function of ``(spec.seed, draw_index, stream)``;
    ``stream`` separates the two views so they get independent masks.
    """
    if not 0 <= draw_index < spec.draws:
        raise ValueError(f"draw_index {draw_index} outside [0, {spec.draws})")
    m = np.asarray(m, dtype=float)
    rng = np.random.default_rng([int(spec.seed), int(stream), int(draw_index)])
    if spec.kind == "mask_zero":
        keep = rng.random(m.shape) >= spec.rate
        return np.where(keep, m, 0.0)
    return m + spec.rate * rng.standard_normal(m.shape)
