"""Layer training objective and its back-propagated gradient.

value = lam * (recon_x + recon_y) + (g1 - g2) + gamma * ridge

recon_v   mean over fixed corruption draws of sum_i 1/2 ||decode(encode(v~_i)) - v_i||^2
g1, g2    margin terms on the hidden codes of the clean inputs
ridge     1/2 ||W_x||_F^2 + 1/2 ||W_y||_F^2
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import CorruptionSpec, corrupt
from .layer import LayerParams, activate, activate_grad, init_params
from .pairs import PairError, PairSets, build_pair_sets, pooled_labels


class DivergedError(FloatingPointError):
    """Objective value or gradient became non-finite."""


@dataclass(frozen=True)
class ObjectiveConfig:
    lam: float = 0.2
    gamma: float = 1e-4
    corruption: CorruptionSpec = field(default_factory=CorruptionSpec)
    # Test switches: isolate the margin or reconstruction path.
    use_margin: bool = True
    use_recon: bool = True

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lam must be > 0")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")


@dataclass(frozen=True)
class ObjectiveEvaluation:
    value: float
    gradient: np.ndarray
    parts: dict


class LayerObjective:
    """Objective over the flat parameter vector of one coupled layer.

    Corruption draws, pair Laplacians and the data are fixed at construction
    so repeated calls are deterministic.
    """

    def __init__(self, x, y, pairs: PairSets, cfg: ObjectiveConfig, hidden: int, gain: float = 1.0):
        self.x = np.asarray(x, dtype=float)
        self.y = np.asarray(y, dtype=float)
        if self.x.shape != self.y.shape:
            raise ValueError(f"view shapes differ: {self.x.shape} vs {self.y.shape}")
        self.n, self.d_in = self.x.shape
        self.hidden = hidden
        self.gain = gain
        self.cfg = cfg
        self.pairs = pairs
        spec = cfg.corruption
        self.x_draws = [corrupt(self.x, spec, c, stream=0) for c in range(spec.draws)]
        self.y_draws = [corrupt(self.y, spec, c, stream=1) for c in range(spec.draws)]
        if cfg.use_margin:
            if pairs.n1 == 0 or pairs.n2 == 0:
                raise PairError("empty pair set; the dataset is degenerate")
            if max(pairs.same_pairs.max(), pairs.diff_pairs.max()) >= 2 * self.n:
                raise ValueError("pair index outside the pooled sample range")
            L_same, L_diff = pairs.laplacians(2 * self.n)
            # d(g1 - g2)/dH = M @ H for pooled hidden codes H
            self.margin_op = L_same / pairs.n1 - L_diff / pairs.n2

    @property
    def size(self) -> int:
        return 2 * (self.hidden * self.d_in + self.hidden + self.d_in)

    def params(self, theta) -> LayerParams:
        return LayerParams.unflatten(theta, self.d_in, self.hidden, self.gain)

    def _recon(self, W, b, c, clean, draws):
        a = self.gain
        total, gW, gb, gc = 0.0, np.zeros_like(W), np.zeros_like(b), np.zeros_like(c)
        for xt in draws:
            H = activate(xt @ W.T + b, a)
            R = activate(H @ W + c, a)
            diff = R - clean
            total += 0.5 * np.sum(diff * diff)
            dU = diff * activate_grad(R, a)
            gc += dU.sum(axis=0)
            gW += H.T @ dU  # decoder role
            dZ = (dU @ W.T) * activate_grad(H, a)
            gb += dZ.sum(axis=0)
            gW += dZ.T @ xt  # encoder role
        k = len(draws)
        return total / k, gW / k, gb / k, gc / k

    def evaluate_parts(self, theta):
        """Return ``(value, gradient, parts)`` without finiteness checks."""
        p = self.params(theta)
        cfg = self.cfg
        a = self.gain
        grads = {name: np.zeros_like(getattr(p, name)) for name in ("W_x", "b_x", "c_x", "W_y", "b_y", "c_y")}
        parts = {"recon_x": 0.0, "recon_y": 0.0, "g1": 0.0, "g2": 0.0, "ridge": 0.0}

        if cfg.use_recon:
            for v, clean, draws in (("x", self.x, self.x_draws), ("y", self.y, self.y_draws)):
                W, b, c = p.view(v)
                r, gW, gb, gc = self._recon(W, b, c, clean, draws)
                parts["recon_" + v] = r
                grads["W_" + v] += cfg.lam * gW
                grads["b_" + v] += cfg.lam * gb
                grads["c_" + v] += cfg.lam * gc

        margin = 0.0
        if cfg.use_margin:
            Hx = activate(self.x @ p.W_x.T + p.b_x, a)
            Hy = activate(self.y @ p.W_y.T + p.b_y, a)
            H = np.vstack([Hx, Hy])
            sp, dp = self.pairs.same_pairs, self.pairs.diff_pairs
            ds = H[sp[:, 0]] - H[sp[:, 1]]
            dd = H[dp[:, 0]] - H[dp[:, 1]]
            parts["g1"] = float(np.sum(ds * ds) / (2.0 * self.pairs.n1))
            parts["g2"] = float(np.sum(dd * dd) / (2.0 * self.pairs.n2))
            margin = parts["g1"] - parts["g2"]
            dH = self.margin_op @ H
            for v, clean, Hv, dHv in (("x", self.x, Hx, dH[:self.n]), ("y", self.y, Hy, dH[self.n:])):
                dZ = dHv * activate_grad(Hv, a)
                grads["W_" + v] += dZ.T @ clean
                grads["b_" + v] += dZ.sum(axis=0)

        parts["ridge"] = 0.5 * (np.sum(p.W_x ** 2) + np.sum(p.W_y ** 2))
        grads["W_x"] += cfg.gamma * p.W_x
        grads["W_y"] += cfg.gamma * p.W_y

        value = cfg.lam * (parts["recon_x"] + parts["recon_y"]) + margin + cfg.gamma * parts["ridge"]
        gradient = np.concatenate([grads[k].ravel() for k in ("W_x", "b_x", "c_x", "W_y", "b_y", "c_y")])
        return float(value), gradient, parts

    def __call__(self, theta):
        value, gradient, _ = self.evaluate_parts(theta)
        return value, gradient


def evaluate(params: LayerParams, x, y, pairs: PairSets, cfg: ObjectiveConfig) -> ObjectiveEvaluation:
    obj = LayerObjective(x, y, pairs, cfg, hidden=params.hidden, gain=params.gain)
    if obj.d_in != params.d_in:
        raise ValueError(f"inputs have {obj.d_in} columns, layer expects {params.d_in}")
    with np.errstate(invalid="ignore", over="ignore"):
        value, gradient, parts = obj.evaluate_parts(params.flatten())
    if not (np.isfinite(value) and np.all(np.isfinite(gradient))):
        raise DivergedError("objective diverged: non-finite value or gradient")
    return ObjectiveEvaluation(value=value, gradient=gradient, parts=parts)


@dataclass(frozen=True)
class GradCheckReport:
    max_rel_err: float
    worst_coordinate: int
    step: float

    def csv_line(self) -> str:
        return f"{self.max_rel_err!r},{self.worst_coordinate},{self.step!r}"


def grad_check(params: LayerParams, x, y, pairs: PairSets, cfg: ObjectiveConfig,
               step: float = 1e-5, fn=None) -> GradCheckReport:
    """Compare the analytic gradient with central differences on every coordinate.

    Relative error per coordinate is ``|g_a - g_fd| / max(1, |g_a|, |g_fd|)``.
    ``fn`` overrides the ``theta -> (value, gradient)`` callable under test.
    """
    if not step > 0:
        raise ValueError("step must be > 0")
    if fn is None:
        fn = LayerObjective(x, y, pairs, cfg, hidden=params.hidden, gain=params.gain)
    theta = params.flatten()
    _, g_a = fn(theta)
    g_fd = np.empty_like(theta)
    for i in range(theta.size):
        e = theta.copy()
        e[i] += step
        f_plus = fn(e)[0]
        e[i] = theta[i] - step
        f_minus = fn(e)[0]
        g_fd[i] = (f_plus - f_minus) / (2.0 * step)
    rel = np.abs(g_a - g_fd) / np.maximum(1.0, np.maximum(np.abs(g_a), np.abs(g_fd)))
    worst = int(np.argmax(rel))
    return GradCheckReport(max_rel_err=float(rel[worst]), worst_coordinate=worst, step=step)


def small_instance(seed: int, n: int = 12, d_in: int = 7, h: int = 5, k: int = 2, classes: int = 3,
                   cfg: ObjectiveConfig | None = None):
    """Random layer problem for gradient checks: ``(params, x, y, pairs, cfg)``.

    Inputs and weights are drawn inside the tanh-friendly range so no unit saturates.
    """
    rng = np.random.default_rng(seed)
    x = rng.uniform(-0.9, 0.9, (n, d_in))
    y = rng.uniform(-0.9, 0.9, (n, d_in))
    labels = np.arange(n) % classes
    pairs = build_pair_sets(np.vstack([x, y]), pooled_labels(labels), k)
    params = init_params(d_in, h, 1.0, seed)
    params = LayerParams(W_x=params.W_x, W_y=params.W_y, b_x=0.1 * rng.standard_normal(h),
                         b_y=0.1 * rng.standard_normal(h), c_x=0.1 * rng.standard_normal(d_in),
                         c_y=0.1 * rng.standard_normal(d_in))
    if cfg is None:
        cfg = ObjectiveConfig(corruption=CorruptionSpec(seed=seed))
    return params, x, y, pairs, cfg
