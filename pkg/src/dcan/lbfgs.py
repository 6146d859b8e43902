"""Limited-memory BFGS with a strong-Wolfe line search.

The line search follows the bracketing/zoom scheme of Nocedal & Wright
(Algorithms 3.5 and 3.6) with safeguarded cubic interpolation.
"""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

CONVERGED = "converged"
MAX_ITERS = "max_iters"
LINE_SEARCH_FAILED = "line_search_failed"


@dataclass(frozen=True)
class LbfgsConfig:
    memory: int = 10
    max_iters: int = 400
    grad_tol: float = 1e-5
    c1: float = 1e-4
    c2: float = 0.9
    max_line_search: int = 25

    def __post_init__(self):
        if self.memory < 1:
            raise ValueError("memory must be >= 1")
        if not 0 < self.c1 < self.c2 < 1:
            raise ValueError("need 0 < c1 < c2 < 1")
        if self.max_iters < 0 or self.max_line_search < 1:
            raise ValueError("max_iters must be >= 0 and max_line_search >= 1")


@dataclass(frozen=True)
class TraceRow:
    iter: int
    f: float
    grad_norm: float
    step_len: float
    # extras for diagnostics: previous value, directional derivative, step size
    f_prev: float
    gtd: float
    alpha: float


@dataclass
class OptimResult:
    solution: np.ndarray
    final_value: float
    final_grad_norm: float
    iterations: int
    status: str
    initial_value: float = float("nan")
    trace: list = field(default_factory=list)

    def write_trace(self, path) -> Path:
        path = Path(path)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iter", "f", "grad_norm", "step_len"])
            for row in self.trace:
                w.writerow([row.iter, repr(row.f), repr(row.grad_norm), repr(row.step_len)])
        return path


def _cubic_min(x1, f1, g1, x2, f2, g2, lo, hi):
    """Minimizer of the cubic interpolating two points, clamped to [lo, hi]."""
    d1 = g1 + g2 - 3.0 * (f1 - f2) / (x1 - x2)
    d2_sq = d1 * d1 - g1 * g2
    if d2_sq >= 0 and np.isfinite(d2_sq):
        d2 = np.sqrt(d2_sq)
        if x1 <= x2:
            t = x2 - (x2 - x1) * ((g2 + d2 - d1) / (g2 - g1 + 2.0 * d2))
        else:
            t = x1 - (x1 - x2) * ((g1 + d2 - d1) / (g1 - g2 + 2.0 * d2))
        if np.isfinite(t):
            return min(max(t, lo), hi)
    return 0.5 * (lo + hi)


def _finite(f, g) -> bool:
    return bool(np.isfinite(f) and np.all(np.isfinite(g)))


def strong_wolfe(fun, x, f0, g0, d, alpha, c1=1e-4, c2=0.9, max_evals=25):
    """Find a step satisfying the strong Wolfe conditions along ``d``.

    Returns ``(alpha, f, g)`` or ``None`` when no step with sufficient
    decrease was found within ``max_evals`` function evaluations. If the
    budget runs out inside the zoom phase, the best sufficient-decrease
    point seen so far is returned.
    """
    gtd0 = float(g0 @ d)
    prev = (0.0, f0, g0, gtd0)
    evals = 0
    bracket = None
    while evals < max_evals:
        f, g = fun(x + alpha * d)
        evals += 1
        if not _finite(f, g):
            bracket = (prev, (alpha, np.inf, None, np.nan))
            break
        gtd = float(g @ d)
        cur = (alpha, f, g, gtd)
        if f > f0 + c1 * alpha * gtd0 or (evals > 1 and f >= prev[1]):
            bracket = (prev, cur)
            break
        if abs(gtd) <= -c2 * gtd0:
            return alpha, f, g
        if gtd >= 0:
            bracket = (cur, prev)
            break
        lo_ext, hi_ext = alpha + 0.01 * (alpha - prev[0]), 10.0 * alpha
        nxt = _cubic_min(prev[0], prev[1], prev[3], alpha, f, gtd, lo_ext, hi_ext)
        prev, alpha = cur, nxt
    if bracket is None:
        # budget exhausted while extrapolating; prev satisfies sufficient decrease
        return (prev[0], prev[1], prev[2]) if prev[0] > 0 else None

    lo, hi = bracket  # lo: lowest value satisfying sufficient decrease so far
    while evals < max_evals:
        a_lo, a_hi = lo[0], hi[0]
        left, right = min(a_lo, a_hi), max(a_lo, a_hi)
        width = right - left
        if width * np.max(np.abs(d)) < 1e-14:
            break
        if np.isfinite(hi[1]) and np.isfinite(hi[3]):
            a = _cubic_min(a_lo, lo[1], lo[3], a_hi, hi[1], hi[3], left, right)
        else:
            a = 0.5 * (left + right)
        # keep the trial away from the bracket ends
        a = min(max(a, left + 0.1 * width), right - 0.1 * width)
        f, g = fun(x + a * d)
        evals += 1
        if not _finite(f, g):
            hi = (a, np.inf, None, np.nan)
            continue
        gtd = float(g @ d)
        cur = (a, f, g, gtd)
        if f > f0 + c1 * a * gtd0 or f >= lo[1]:
            hi = cur
            continue
        if abs(gtd) <= -c2 * gtd0:
            return a, f, g
        if gtd * (a_hi - a_lo) >= 0:
            hi = lo
        lo = cur
    if lo[0] > 0:
        return lo[0], lo[1], lo[2]
    return None


def _two_loop(g, S, Y, rho):
    q = g.copy()
    alphas = []
    for s, y, r in zip(reversed(S), reversed(Y), reversed(rho)):
        a = r * (s @ q)
        alphas.append(a)
        q -= a * y
    if S:
        s, y = S[-1], Y[-1]
        q *= (s @ y) / (y @ y)
    for (s, y, r), a in zip(zip(S, Y, rho), reversed(alphas)):
        b = r * (y @ q)
        q += (a - b) * s
    return q


def minimize(f: Callable, x0, cfg: LbfgsConfig = LbfgsConfig()) -> OptimResult:
    """Minimize ``f: x -> (value, gradient)`` starting from ``x0``."""
    x = np.array(x0, dtype=float)
    fx, g = f(x)
    g = np.asarray(g, dtype=float)
    if not _finite(fx, g):
        raise ValueError("objective is not finite at the starting point")
    f_init = float(fx)
    S, Y, rho = deque(maxlen=cfg.memory), deque(maxlen=cfg.memory), deque(maxlen=cfg.memory)
    trace = []
    status = MAX_ITERS
    it = 0
    gnorm = float(np.max(np.abs(g))) if g.size else 0.0
    while True:
        if gnorm <= cfg.grad_tol:
            status = CONVERGED
            break
        if it >= cfg.max_iters:
            break
        d = -_two_loop(g, list(S), list(Y), list(rho))
        gtd = float(g @ d)
        if not gtd < 0:
            S.clear(), Y.clear(), rho.clear()
            d = -g
            gtd = float(g @ d)
        alpha0 = min(1.0, 1.0 / np.sum(np.abs(g))) if not S else 1.0
        ls = strong_wolfe(f, x, fx, g, d, alpha0, cfg.c1, cfg.c2, cfg.max_line_search)
        if ls is None:
            status = LINE_SEARCH_FAILED
            break
        alpha, f_new, g_new = ls
        s = alpha * d
        y = g_new - g
        sy = float(s @ y)
        if sy > 1e-10 * np.linalg.norm(s) * np.linalg.norm(y):
            S.append(s)
            Y.append(y)
            rho.append(1.0 / sy)
        it += 1
        trace.append(TraceRow(it, float(f_new), float(np.max(np.abs(g_new))),
                              float(np.linalg.norm(s)), float(fx), gtd, float(alpha)))
        x = x + s
        fx, g = float(f_new), g_new
        gnorm = float(np.max(np.abs(g)))
    return OptimResult(solution=x, final_value=float(fx), final_grad_norm=gnorm,
                       iterations=it, status=status, initial_value=f_init, trace=trace)
