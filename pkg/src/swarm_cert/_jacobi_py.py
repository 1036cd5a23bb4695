"""Pure NumPy Jacobi eigensolver used when the compiled kernel is unavailable.

Rotations are applied in round-robin (parallel) order: each round touches
disjoint index pairs, so the whole round is one vectorized update.
"""
import numpy as np


def _round_robin(n):
    """Disjoint pair schedule covering every (p, q) once per sweep."""
    m = n + (n % 2)
    idx = list(range(m))
    rounds = []
    for _ in range(m - 1):
        pairs = [(idx[k], idx[m - 1 - k]) for k in range(m // 2)]
        pairs = [(min(p, q), max(p, q)) for p, q in pairs if p < n and q < n]
        if pairs:
            rounds.append((np.array([p for p, _ in pairs]), np.array([q for _, q in pairs])))
        idx = [idx[0]] + [idx[-1]] + idx[1:-1]
    return rounds


def jacobi_eigh(a_in, tol_rel=1e-12, max_sweeps=60):
    """Same contract as the compiled kernel: (values, vectors, sweeps), unsorted."""
    a = np.array(a_in, dtype=float, copy=True)
    n = a.shape[0]
    v = np.eye(n)
    if n == 1:
        return np.diag(a).copy(), v, 0
    thresh = tol_rel * np.linalg.norm(a)
    rounds = _round_robin(n)
    iu = np.triu_indices(n, 1)
    sweep = 0
    while sweep < max_sweeps:
        if np.sqrt(2.0 * np.sum(a[iu] ** 2)) <= thresh:
            break
        sweep += 1
        for P, Q in rounds:
            apq = a[P, Q]
            live = apq != 0.0
            if not np.any(live):
                continue
            safe = np.where(live, apq, 1.0)
            theta = (a[Q, Q] - a[P, P]) / (2.0 * safe)
            t = np.sign(theta) / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
            t = np.where(theta == 0.0, 1.0, t)
            t = np.where(live, t, 0.0)
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            ap, aq = a[:, P].copy(), a[:, Q].copy()
            a[:, P] = c * ap - s * aq
            a[:, Q] = s * ap + c * aq
            ap, aq = a[P, :].copy(), a[Q, :].copy()
            a[P, :] = c[:, None] * ap - s[:, None] * aq
            a[Q, :] = s[:, None] * ap + c[:, None] * aq
            a[P, Q] = 0.0
            a[Q, P] = 0.0
            vp, vq = v[:, P].copy(), v[:, Q].copy()
            v[:, P] = c * vp - s * vq
            v[:, Q] = s * vp + c * vq
    return np.diag(a).copy(), v, sweep
