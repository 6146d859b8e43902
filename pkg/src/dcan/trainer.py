"""Greedy layer-wise training of the coupled network and cross-view embedding."""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import pca as pca_mod
from .dataset import ViewDataset
from .layer import LayerParams, encode, init_params, read_layer, write_layer
from .lbfgs import LINE_SEARCH_FAILED, LbfgsConfig, minimize
from .objective import LayerObjective, ObjectiveConfig
from .pairs import build_pair_sets, pooled_labels

log = logging.getLogger(__name__)

FORMAT_HEADER = "DCAN v1"
# Where the kNN different-class graph is built: once on the network input
# ("input") or afresh on every layer's input features ("layer").
PAIR_SOURCES = ("input", "layer")


@dataclass(frozen=True)
class TrainConfig:
    num_layers: int = 2
    width_step: int = 10
    pca_dim: int = 100
    widths: tuple | None = None  # explicit [input, hidden_1, ...] override
    objective: ObjectiveConfig = field(default_factory=ObjectiveConfig)
    lbfgs: LbfgsConfig = field(default_factory=LbfgsConfig)
    knn_k: int = 10
    gain: float = 1.0
    seed: int = 0
    pair_source: str = "input"

    def __post_init__(self):
        if self.widths is not None:
            widths = tuple(int(w) for w in self.widths)
            if len(widths) < 2 or min(widths) < 1:
                raise ValueError("explicit widths need >= 2 positive entries")
            object.__setattr__(self, "widths", widths)
            object.__setattr__(self, "num_layers", len(widths) - 1)
        if not 1 <= self.num_layers <= 4:
            raise ValueError("num_layers must lie in [1, 4]")
        if self.widths is None and self.pca_dim - self.num_layers * self.width_step < 1:
            raise ValueError("pca_dim - num_layers * width_step must be >= 1")
        if self.knn_k < 1 or not self.gain > 0:
            raise ValueError("knn_k must be >= 1 and gain > 0")
        if self.pair_source not in PAIR_SOURCES:
            raise ValueError(f"pair_source must be one of {PAIR_SOURCES}")

    def layer_widths(self, pca_dim: int | None = None) -> list[int]:
        if self.widths is not None:
            return list(self.widths)
        top = self.pca_dim if pca_dim is None else pca_dim
        widths = [top - i * self.width_step for i in range(self.num_layers + 1)]
        if widths[-1] < 1:
            raise ValueError(f"width schedule {widths} reaches zero")
        return widths


@dataclass
class NetworkModel:
    pca: pca_mod.PcaModel
    layers: list
    widths: list
    hyper: dict
    # per-layer optimizer summaries; not serialized
    history: list = field(default_factory=list, compare=False)

    def __post_init__(self):
        if not self.layers:
            raise ValueError("a network needs at least one layer")
        for i, p in enumerate(self.layers):
            if (p.d_in, p.hidden) != (self.widths[i], self.widths[i + 1]):
                raise ValueError(f"layer {i} shape {p.hidden}x{p.d_in} disagrees with widths {self.widths}")

    @property
    def depth(self) -> int:
        return len(self.layers)

    def truncated(self, depth: int) -> "NetworkModel":
        """The same network cut after ``depth`` layers."""
        if not 1 <= depth <= self.depth:
            raise ValueError(f"depth must lie in [1, {self.depth}]")
        return NetworkModel(self.pca, self.layers[:depth], self.widths[:depth + 1],
                            dict(self.hyper), self.history[:depth])


def _derive_seed(*keys: int) -> int:
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])


def train_layer(fx, fy, labels, d_out: int, cfg: TrainConfig, layer_index: int, pairs=None):
    """Fit one coupled layer on clean features ``fx``, ``fy``.

    ``pairs`` defaults to pair sets built on ``fx``/``fy`` themselves.
    Returns ``(params, OptimResult)``.
    """
    if pairs is None:
        pairs = build_pair_sets(np.vstack([fx, fy]), pooled_labels(labels), cfg.knn_k)
    corruption = cfg.objective.corruption.with_seed(
        _derive_seed(cfg.objective.corruption.seed, layer_index))
    obj_cfg = replace(cfg.objective, corruption=corruption)
    objective = LayerObjective(fx, fy, pairs, obj_cfg, hidden=d_out, gain=cfg.gain)
    p0 = init_params(fx.shape[1], d_out, cfg.gain, _derive_seed(cfg.seed, layer_index))
    res = minimize(objective, p0.flatten(), cfg.lbfgs)
    return objective.params(res.solution), res


def resolve_widths(cfg: TrainConfig, n_rows: int, d: int) -> list[int]:
    """Layer widths, with the input width clamped to the PCA rank of ``n_rows x d`` data."""
    widths = cfg.layer_widths()
    max_dim = min(n_rows - 1, d)
    if widths[0] > max_dim:
        if cfg.widths is not None:
            raise ValueError(f"input width {widths[0]} exceeds the available PCA rank {max_dim}")
        log.warning("pca_dim %d exceeds available rank %d; clamping", widths[0], max_dim)
        widths = cfg.layer_widths(max_dim)
    return widths


def train(data: ViewDataset, cfg: TrainConfig = TrainConfig()) -> NetworkModel:
    """Greedy layer-wise training on the train split of ``data``."""
    tr = data.train
    if tr.n == 0 or np.unique(tr.labels).size < 2:
        raise ValueError("training split needs samples from at least 2 classes")
    pooled_rows = np.vstack([tr.view_x, tr.view_y])
    widths = resolve_widths(cfg, *pooled_rows.shape)
    pca = pca_mod.fit_pca(pooled_rows, widths[0])
    fx = pca_mod.transform(pca, tr.view_x)
    fy = pca_mod.transform(pca, tr.view_y)

    pairs = None
    if cfg.pair_source == "input":
        # Built once: on aligned deeper features the kNN graph turns half
        # cross-view and stops coupling the views.
        pairs = build_pair_sets(np.vstack([fx, fy]), pooled_labels(tr.labels), cfg.knn_k)
    layers, history = [], []
    for l in range(len(widths) - 1):
        params, res = train_layer(fx, fy, tr.labels, widths[l + 1], cfg, l, pairs)
        layers.append(params)
        history.append({"layer": l, "initial_value": res.initial_value, "final_value": res.final_value,
                        "iterations": res.iterations, "status": res.status,
                        "final_grad_norm": res.final_grad_norm, "result": res})
        log.info("layer %d: f %.6g -> %.6g in %d iterations (%s)", l, res.initial_value,
                 res.final_value, res.iterations, res.status)
        if res.status == LINE_SEARCH_FAILED:
            log.warning("layer %d: line search failed; keeping the last good iterate", l)
        fx, fy = encode(params, fx, "x"), encode(params, fy, "y")

    hyper = {"lambda": cfg.objective.lam, "gamma": cfg.objective.gamma, "k": cfg.knn_k, "gain": cfg.gain}
    return NetworkModel(pca=pca, layers=layers, widths=widths, hyper=hyper, history=history)


def embed(model: NetworkModel, samples, view: str, depth: int | None = None) -> np.ndarray:
    """PCA-transform raw samples, then encode cleanly through the layers of ``view``."""
    h = pca_mod.transform(model.pca, samples)
    for p in model.layers[:depth]:
        h = encode(p, h, view)
    return h


# --------------------------------------------------------------------------
# persistence

def _fmt(v) -> str:
    return repr(float(v))


def dumps_model(model: NetworkModel) -> str:
    out = io.StringIO()
    out.write(FORMAT_HEADER + "\n")
    pm = model.pca
    out.write(f"pca {pm.input_dim} {pm.dim}\n")
    out.write(f"scale {_fmt(pm.scale)}\n")
    out.write("mean\n" + " ".join(_fmt(v) for v in pm.mean) + "\n")
    out.write("explained_variance\n" + " ".join(_fmt(v) for v in pm.explained_variance) + "\n")
    out.write("components\n")
    for row in pm.components:
        out.write(" ".join(_fmt(v) for v in row) + "\n")
    out.write("hyper " + " ".join(f"{k}={model.hyper[k]!r}" for k in sorted(model.hyper)) + "\n")
    out.write("widths " + " ".join(str(w) for w in model.widths) + "\n")
    out.write(f"layers {model.depth}\n")
    for i, p in enumerate(model.layers):
        write_layer(out, p, i)
    return out.getvalue()


def save_model(model: NetworkModel, path) -> Path:
    path = Path(path)
    path.write_text(dumps_model(model))
    return path


def _expect(lines, tag):
    parts = next(lines).split()
    if not parts or parts[0] != tag:
        raise ValueError(f"model file: expected {tag!r} line")
    return parts[1:]


def loads_model(text: str) -> NetworkModel:
    lines = iter(ln.strip() for ln in text.splitlines())
    try:
        if next(lines) != FORMAT_HEADER:
            raise ValueError(f"model file: missing {FORMAT_HEADER!r} header")
        d, r = (int(v) for v in _expect(lines, "pca"))
        scale = float(_expect(lines, "scale")[0])
        _expect(lines, "mean")
        mean = np.array(next(lines).split(), dtype=float)
        _expect(lines, "explained_variance")
        ev = np.array(next(lines).split(), dtype=float)
        _expect(lines, "components")
        comps = np.array([next(lines).split() for _ in range(d)], dtype=float).reshape(d, r)
        hyper = {}
        for tok in _expect(lines, "hyper"):
            k, v = tok.split("=", 1)
            hyper[k] = int(v) if k == "k" else float(v)
        widths = [int(w) for w in _expect(lines, "widths")]
        depth = int(_expect(lines, "layers")[0])
        layers = [read_layer(lines, i) for i in range(depth)]
    except StopIteration:
        raise ValueError("model file is truncated") from None
    pm = pca_mod.PcaModel(mean=mean, components=comps, scale=scale, explained_variance=ev)
    return NetworkModel(pca=pm, layers=layers, widths=widths, hyper=hyper)


def load_model(path) -> NetworkModel:
    return loads_model(Path(path).read_text())
