"""Monotone gradient ascent with backtracking line search."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = ["AscentResult", "gradient_ascent"]


@dataclass
class AscentResult:
    x: np.ndarray
    value: float
    converged: bool
    # rows of (iteration, objective, gradient norm, accepted step size)
    trace: list[tuple[int, float, float, float]] = field(default_factory=list)


def gradient_ascent(
    f: Callable[[np.ndarray], float],
    g: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    max_iters: int = 5000,
    tol: float = 1e-8,
    gtol: float = 0.0,
    step0: float = 1e-2,
    armijo: float = 1e-4,
    project: Callable[[np.ndarray], np.ndarray] | None = None,
) -> AscentResult:
    """Maximize ``f`` by steps along its gradient.

    Each trial step length comes from the Barzilai-Borwein formula and is
    halved until the Armijo condition holds, so the objective never decreases.
    Stops when the relative improvement of an accepted step drops below
    ``tol``, the gradient norm drops below ``gtol``, or after ``max_iters``.
    Infeasible points should make ``f`` return ``-inf``.
    """
    x = np.array(x0, dtype=float)
    if project is not None:
        x = project(x)
    fx = f(x)
    if not math.isfinite(fx):
        raise ValueError(f"objective is not finite at the starting point ({fx})")
    gx = g(x)
    gnorm = float(np.linalg.norm(gx))
    trace = [(0, fx, gnorm, 0.0)]
    step = step0
    x_prev = g_prev = None
    for it in range(1, max_iters + 1):
        if gnorm <= gtol or gnorm == 0.0:
            return AscentResult(x, fx, True, trace)
        if x_prev is not None:
            dx, dg = x - x_prev, gx - g_prev
            curv = -float(dx @ dg)
            if curv > 0 and math.isfinite(curv):
                step = float(dx @ dx) / curv
            else:
                step *= 2.0
        sq = gnorm * gnorm
        while True:
            x_new = x + step * gx
            if project is not None:
                x_new = project(x_new)
            f_new = f(x_new)
            if math.isfinite(f_new) and f_new >= fx + armijo * step * sq:
                break
            step *= 0.5
            if step * gnorm < 1e-300 or step < 1e-30:
                # no ascent possible at floating-point resolution
                return AscentResult(x, fx, True, trace)
        improvement = (f_new - fx) / max(abs(fx), 1.0)
        x_prev, g_prev = x, gx
        x, fx = x_new, f_new
        gx = g(x)
        gnorm = float(np.linalg.norm(gx))
        trace.append((it, fx, gnorm, step))
        if improvement < tol:
            return AscentResult(x, fx, True, trace)
    return AscentResult(x, fx, False, trace)
