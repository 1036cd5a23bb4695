"""Limited-memory BFGS with Armijo backtracking and restart on curvature failure."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np


@dataclass
class LbfgsResult:
    x: np.ndarray
    f: float
    g: np.ndarray
    iters: int
    evals: int
    restarts: int
    status: str  # "gradient", "stalled", "max_iter"


def lbfgs(fun, x0, max_iter=500, memory=10, g_tol=1e-8, f_tol=1e-12, c1=1e-4, max_backtrack=40):
    """Minimize ``fun`` (returns value, gradient) from ``x0``.

    Stops when ‖g‖_∞ ≤ g_tol·max(1, |f|), when the relative decrease stays below
    f_tol for 10 consecutive iterations, or after ``max_iter`` iterations.
    """
    x = np.array(x0, dtype=float)
    f, g = fun(x)
    evals, restarts, flat = 1, 0, 0
    S, Y = deque(maxlen=memory), deque(maxlen=memory)
    status = "max_iter"
    it = 0
    for it in range(1, max_iter + 1):
        if np.max(np.abs(g)) <= g_tol * max(1.0, abs(f)):
            status = "gradient"
            it -= 1
            break
        d = -_two_loop(g, S, Y)
        slope = float(g @ d)
        if not slope < 0:
            S.clear(), Y.clear()
            restarts += 1
            d, slope = -g, -float(g @ g)
        step = 1.0 if S else min(1.0, 1.0 / max(np.linalg.norm(g), 1e-300))
        accepted = False
        for _ in range(max_backtrack):
            xn = x + step * d
            fn, gn = fun(xn)
            evals += 1
            if np.isfinite(fn) and fn <= f + c1 * step * slope:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            if S:
                S.clear(), Y.clear()
                restarts += 1
                continue
            status = "stalled"
            break
        s, y = xn - x, gn - g
        if float(s @ y) > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            S.append(s)
            Y.append(y)
        flat = flat + 1 if f - fn <= f_tol * max(1.0, abs(f)) else 0
        x, f, g = xn, fn, gn
        if flat >= 10:
            status = "stalled"
            break
    return LbfgsResult(x, float(f), g, it, evals, restarts, status)


def _two_loop(g, S, Y):
    q = g.copy()
    alphas = []
    for s, y in zip(reversed(S), reversed(Y)):
        rho = 1.0 / float(y @ s)
        a = rho * float(s @ q)
        alphas.append((a, rho, s, y))
        q -= a * y
    if S:
        q *= float(S[-1] @ Y[-1]) / float(Y[-1] @ Y[-1])
    for a, rho, s, y in reversed(alphas):
        b = rho * float(y @ q)
        q += (a - b) * s
    return q
