"""Regularized linear CCA baseline."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class SingularCovarianceError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class CcaModel:
    proj_x: np.ndarray  # d_x x r
    proj_y: np.ndarray  # d_y x r
    correlations: np.ndarray
    reg: float
    mean_x: np.ndarray
    mean_y: np.ndarray


def _inv_sqrt(cov, name):
    w, v = np.linalg.eigh(cov)
    if w.min() <= 1e-12 * max(w.max(), 1e-300):
        raise SingularCovarianceError(
            f"{name} covariance is singular (min eigenvalue {w.min():.3g}); pass reg > 0")
    return (v / np.sqrt(w)) @ v.T


def fit_cca(x, y, r: int, reg: float = 1e-4) -> CcaModel:
    """Canonical directions via the SVD of the whitened cross-covariance.

    Each auto-covariance gets ``reg * trace(C)/dim`` added to its diagonal.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.shape[0]
    if y.shape[0] != n:
        raise ValueError("views need equal row counts")
    if n < 2:
        raise ValueError("CCA needs at least 2 rows")
    if not 1 <= r <= min(x.shape[1], y.shape[1]):
        raise ValueError(f"r must lie in [1, {min(x.shape[1], y.shape[1])}]")
    if reg < 0:
        raise ValueError("reg must be >= 0")
    mx, my = x.mean(axis=0), y.mean(axis=0)
    xc, yc = x - mx, y - my
    cxx = xc.T @ xc / (n - 1)
    cyy = yc.T @ yc / (n - 1)
    cxy = xc.T @ yc / (n - 1)
    cxx += reg * np.trace(cxx) / cxx.shape[0] * np.eye(cxx.shape[0])
    cyy += reg * np.trace(cyy) / cyy.shape[0] * np.eye(cyy.shape[0])
    wx, wy = _inv_sqrt(cxx, "x"), _inv_sqrt(cyy, "y")
    u, s, vt = np.linalg.svd(wx @ cxy @ wy)
    return CcaModel(proj_x=wx @ u[:, :r], proj_y=wy @ vt[:r].T, correlations=s[:r],
                    reg=reg, mean_x=mx, mean_y=my)


def cca_embed(model: CcaModel, samples, view: str) -> np.ndarray:
    if view == "x":
        mean, proj = model.mean_x, model.proj_x
    elif view == "y":
        mean, proj = model.mean_y, model.proj_y
    else:
        raise ValueError(f"view must be 'x' or 'y', got {view!r}")
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[1] != mean.shape[0]:
        raise ValueError(f"expected {mean.shape[0]} columns, got shape {samples.shape}")
    return (samples - mean) @ proj
