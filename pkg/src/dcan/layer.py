"""One coupled layer: per-view tied-weight encoder/decoder with a gain tanh."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

VIEWS = ("x", "y")
# Flattening and serialization order of the trainable arrays.
PARAM_ORDER = ("W_x", "b_x", "c_x", "W_y", "b_y", "c_y")


@dataclass(frozen=True)
class LayerParams:
    W_x: np.ndarray  # h x d_in
    W_y: np.ndarray
    b_x: np.ndarray  # h
    b_y: np.ndarray
    c_x: np.ndarray  # d_in
    c_y: np.ndarray
    gain: float = 1.0

    def __post_init__(self):
        for name in PARAM_ORDER:
            arr = np.array(getattr(self, name), dtype=float)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite entries")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        h, d = self.W_x.shape
        if self.W_y.shape != (h, d):
            raise ValueError(f"W_x {self.W_x.shape} and W_y {self.W_y.shape} differ")
        for v in VIEWS:
            if getattr(self, "b_" + v).shape != (h,):
                raise ValueError(f"b_{v} must have length {h}")
            if getattr(self, "c_" + v).shape != (d,):
                raise ValueError(f"c_{v} must have length {d}")
        if not self.gain > 0:
            raise ValueError("gain must be positive")

    @property
    def d_in(self) -> int:
        return self.W_x.shape[1]

    @property
    def hidden(self) -> int:
        return self.W_x.shape[0]

    @property
    def size(self) -> int:
        return 2 * (self.W_x.size + self.hidden + self.d_in)

    def view(self, view: str):
        """Return ``(W, b, c)`` for one view."""
        if view not in VIEWS:
            raise ValueError(f"view must be one of {VIEWS}, got {view!r}")
        return getattr(self, "W_" + view), getattr(self, "b_" + view), getattr(self, "c_" + view)

    def flatten(self) -> np.ndarray:
        return np.concatenate([getattr(self, name).ravel() for name in PARAM_ORDER])

    @classmethod
    def unflatten(cls, theta, d_in: int, h: int, gain: float) -> "LayerParams":
        theta = np.asarray(theta, dtype=float)
        sizes = {"W": h * d_in, "b": h, "c": d_in}
        shapes = {"W": (h, d_in), "b": (h,), "c": (d_in,)}
        if theta.size != 2 * sum(sizes.values()):
            raise ValueError(f"expected {2 * sum(sizes.values())} parameters, got {theta.size}")
        out, pos = {}, 0
        for name in PARAM_ORDER:
            k = name[0]
            out[name] = theta[pos:pos + sizes[k]].reshape(shapes[k])
            pos += sizes[k]
        return cls(gain=gain, **out)


def activate(z, gain: float = 1.0) -> np.ndarray:
    """Gain-parameterized hyperbolic tangent, ``tanh(gain * z)``."""
    return np.tanh(gain * np.asarray(z, dtype=float))


def activate_grad(s, gain: float = 1.0) -> np.ndarray:
    """Derivative of :func:`activate` expressed through its output ``s``."""
    return gain * (1.0 - s * s)


def encode(params: LayerParams, x_tilde, view: str) -> np.ndarray:
    W, b, _ = params.view(view)
    x_tilde = np.asarray(x_tilde, dtype=float)
    if x_tilde.ndim != 2 or x_tilde.shape[1] != params.d_in:
        raise ValueError(f"encode expects {params.d_in} columns, got shape {x_tilde.shape}")
    return activate(x_tilde @ W.T + b, params.gain)


def decode(params: LayerParams, h, view: str) -> np.ndarray:
    W, _, c = params.view(view)
    h = np.asarray(h, dtype=float)
    if h.ndim != 2 or h.shape[1] != params.hidden:
        raise ValueError(f"decode expects {params.hidden} columns, got shape {h.shape}")
    return activate(h @ W + c, params.gain)


def init_params(d_in: int, h: int, gain: float = 1.0, seed: int = 0) -> LayerParams:
    """Glorot-uniform weights, independent per view; zero biases."""
    if d_in < 1 or h < 1:
        raise ValueError("d_in and h must be >= 1")
    rng = np.random.default_rng(seed)
    r = np.sqrt(6.0 / (d_in + h))
    W_x = rng.uniform(-r, r, size=(h, d_in))
    W_y = rng.uniform(-r, r, size=(h, d_in))
    zh, zd = np.zeros(h), np.zeros(d_in)
    return LayerParams(W_x=W_x, W_y=W_y, b_x=zh, b_y=zh, c_x=zd, c_y=zd, gain=gain)


# --------------------------------------------------------------------------
# text serialization: dims header, then gain, W_x, b_x, c_x, W_y, b_y, c_y

def _fmt(v: float) -> str:
    return repr(float(v))


def write_layer(fh, params: LayerParams, index: int) -> None:
    fh.write(f"layer {index} {params.hidden} {params.d_in}\n")
    fh.write(f"gain {_fmt(params.gain)}\n")
    for name in PARAM_ORDER:
        arr = getattr(params, name)
        fh.write(f"{name}\n")
        rows = arr if arr.ndim == 2 else arr[None, :]
        for row in rows:
            fh.write(" ".join(_fmt(v) for v in row) + "\n")


def read_layer(lines, index: int) -> LayerParams:
    """Parse one layer section from an iterator of stripped lines."""
    header = next(lines).split()
    if len(header) != 4 or header[0] != "layer" or int(header[1]) != index:
        raise ValueError(f"bad layer header {' '.join(header)!r}, expected layer {index}")
    h, d = int(header[2]), int(header[3])
    tag, gain = next(lines).split()
    if tag != "gain":
        raise ValueError("expected gain line")
    out = {}
    for name in PARAM_ORDER:
        if next(lines) != name:
            raise ValueError(f"expected section {name}")
        nrows = h if name.startswith("W") else 1
        rows = [np.array(next(lines).split(), dtype=float) for _ in range(nrows)]
        arr = np.vstack(rows)
        out[name] = arr if name.startswith("W") else arr[0]
    params = LayerParams(gain=float(gain), **out)
    if params.W_x.shape != (h, d) or params.c_x.shape != (d,):
        raise ValueError(f"layer {index} arrays do not match header dims {h}x{d}")
    return params
