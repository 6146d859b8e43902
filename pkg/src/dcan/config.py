"""Flat ``key = value`` run configuration shared by every command.

Precedence, lowest to highest: built-in defaults, the config file, the
``DCAN_OUTPUT_DIR`` environment variable (``output.dir`` only), then
``--set key=value`` flags.
"""

from __future__ import annotations

import os
from pathlib import Path

from .dataset import CORRUPTION_KINDS, CorruptionSpec
from .evaluation import METRICS
from .lbfgs import LbfgsConfig
from .objective import ObjectiveConfig
from .trainer import PAIR_SOURCES, TrainConfig

ENV_OUTPUT_DIR = "DCAN_OUTPUT_DIR"
CONFIG_ECHO = "config.txt"


class ConfigError(ValueError):
    """Unknown key, malformed line or badly typed value."""


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _choice(*options):
    def parse(text):
        if text not in options:
            raise ValueError(f"expected one of {list(options)}, got {text!r}")
        return text
    return parse


def _widths(text: str):
    text = text.strip()
    if not text:
        return ()
    return tuple(int(t) for t in text.replace(",", " ").split())


# key -> (parser, default, help)
SCHEMA = {
    "data.source": (_choice("synthetic", "files"), "synthetic", "synthetic generator or CSV files"),
    "data.x": (str, "", "view x CSV (source=files)"),
    "data.y": (str, "", "view y CSV (source=files)"),
    "data.labels": (str, "", "label file (source=files)"),
    "data.split": (str, "", "optional split file; empty tags everything train"),
    "data.classes": (int, 20, "synthetic: number of classes"),
    "data.per_class": (int, 10, "synthetic: samples per class and view"),
    "data.ambient_dim": (int, 50, "synthetic: feature width of each view"),
    "data.seed": (int, 7, "synthetic: generator seed"),
    "data.noise": (float, 0.1, "synthetic: jitter standard deviation"),
    "data.latent_dim": (int, 5, "synthetic: dimension of the shared class subspace"),
    "data.warp_gain": (float, 3.0, "synthetic: tanh gain of the view-y warp"),
    "data.warp": (_bool, True, "synthetic: warp view y (false keeps it linear)"),
    "pca.dim": (int, 100, "network input width; clamped to the available rank"),
    "train.layers": (int, 2, "number of coupled layers, 1..4"),
    "train.width_step": (int, 10, "width decrease per layer"),
    "train.widths": (_widths, (), "explicit width list overriding pca.dim/width_step"),
    "train.lambda": (float, 0.2, "reconstruction weight"),
    "train.gamma": (float, 1e-4, "weight decay"),
    "train.k": (int, 10, "different-class neighbors per sample"),
    "train.gain": (float, 1.0, "tanh gain a in tanh(a z)"),
    "train.seed": (int, 0, "weight initialization seed"),
    "train.pairs": (_choice(*PAIR_SOURCES), "input", "features the kNN pair graph is built on"),
    "corruption.kind": (_choice(*CORRUPTION_KINDS), "mask_zero", "input corruption process"),
    "corruption.rate": (float, 0.03, "mask probability or gaussian sigma"),
    "corruption.draws": (int, 1, "fixed corruption draws per layer"),
    "corruption.seed": (int, 0, "corruption seed"),
    "lbfgs.memory": (int, 10, "stored curvature pairs"),
    "lbfgs.max_iters": (int, 400, "iteration cap per layer"),
    "lbfgs.grad_tol": (float, 1e-5, "max-abs gradient stopping tolerance"),
    "eval.metric": (_choice(*METRICS), "cosine", "rank-1 matching metric"),
    "eval.depth": (int, 0, "layers used for embedding; 0 means all"),
    "cca.dim": (int, 0, "CCA width; 0 means the final network width"),
    "cca.reg": (float, 1e-4, "CCA covariance ridge"),
    "output.dir": (str, "out", "directory for every written file"),
}


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return " ".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


class RunConfig:
    """Typed view over the flat key space; ``cfg["train.k"]`` etc."""

    def __init__(self, values: dict | None = None):
        self._values = {k: spec[1] for k, spec in SCHEMA.items()}
        for k, v in (values or {}).items():
            self.set(k, v)

    def set(self, key: str, value) -> None:
        if key not in SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        parser = SCHEMA[key][0]
        if isinstance(value, str):
            try:
                value = parser(value.strip())
            except ValueError as exc:
                raise ConfigError(f"{key}: {exc}") from None
        self._values[key] = value

    def __getitem__(self, key: str):
        return self._values[key]

    def items(self):
        return sorted(self._values.items())

    @property
    def output_dir(self) -> Path:
        return Path(self["output.dir"])

    def dumps(self) -> str:
        return "".join(f"{k} = {_format(v)}\n" for k, v in self.items())

    def echo(self) -> Path:
        out = self.output_dir
        out.mkdir(parents=True, exist_ok=True)
        path = out / CONFIG_ECHO
        path.write_text(self.dumps())
        return path

    def train_config(self) -> TrainConfig:
        corruption = CorruptionSpec(kind=self["corruption.kind"], rate=self["corruption.rate"],
                                    draws=self["corruption.draws"], seed=self["corruption.seed"])
        objective = ObjectiveConfig(lam=self["train.lambda"], gamma=self["train.gamma"],
                                    corruption=corruption)
        lbfgs = LbfgsConfig(memory=self["lbfgs.memory"], max_iters=self["lbfgs.max_iters"],
                            grad_tol=self["lbfgs.grad_tol"])
        return TrainConfig(num_layers=self["train.layers"], width_step=self["train.width_step"],
                           pca_dim=self["pca.dim"], widths=self["train.widths"] or None,
                           objective=objective, lbfgs=lbfgs, knn_k=self["train.k"],
                           gain=self["train.gain"], seed=self["train.seed"],
                           pair_source=self["train.pairs"])


def parse_lines(lines, origin="<config>") -> dict[str, str]:
    out = {}
    for num, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{origin}:{num}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"{origin}:{num}: unknown config key {key!r}")
        out[key] = value
    return out


def load_config(path=None, overrides=(), environ=None) -> RunConfig:
    """Build the effective config from a file, the environment and ``key=value`` overrides."""
    environ = os.environ if environ is None else environ
    cfg = RunConfig()
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        for k, v in parse_lines(path.read_text().splitlines(), str(path)).items():
            cfg.set(k, v)
    if environ.get(ENV_OUTPUT_DIR):
        cfg.set("output.dir", environ[ENV_OUTPUT_DIR])
    for k, v in parse_lines(overrides, "--set").items():
        cfg.set(k, v)
    return cfg


def describe() -> str:
    """Every key with its default, for ``--help``."""
    width = max(len(k) for k in SCHEMA)
    return "\n".join(f"  {k:<{width}}  {_format(d):<10} {h}" for k, (_, d, h) in SCHEMA.items())
