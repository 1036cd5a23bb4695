"""Certificate eigenvalue λ4(K-hat) of sampled swarm positions and its gradient."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import linalg
from ..certificate import eigenvalue_bound, helmert_complement, k_hat_from_positions, pair_bearings

MULTIPLICITY_TOL = 1e-9


def psi(x):
    """ψ(x) = max(x, 0)³ and its derivative."""
    m = np.maximum(x, 0.0)
    return m**3, 3 * m**2


@dataclass
class Lambda4:
    value: float
    grad: np.ndarray  # (n_t, N, 3) wrt sampled positions
    gap: float  # λ5 - λ4 on the complement
    multiple: bool  # λ4 not simple; grad is a subgradient


def lambda4_and_grad(positions, graph):
    """λ4(K-hat) and ∂λ4/∂p for sampled positions (n_t, N, 3).

    With u the unit eigenvector (orthogonal to 1⊗I3), λ4 = Σ_edges Σ_t s², where
    s = φᵀ(u_i − u_j) and φ = (p_j − p_i)/d. Hence
    ∂λ4/∂p_i = −2 s (I − φφᵀ)(u_i − u_j)/d and ∂λ4/∂p_j is its negative.
    """
    P = np.asarray(positions, dtype=float)
    n_t, n = P.shape[:2]
    K = k_hat_from_positions(P, graph).k
    H = helmert_complement(n)
    e = linalg.sym_eig(H.T @ K @ H)
    lam = float(e.values[0])
    gap = float(e.values[1] - e.values[0]) if len(e.values) > 1 else np.inf
    multiple = gap <= MULTIPLICITY_TOL * max(1.0, abs(lam))
    u = (H @ e.vectors[:, 0]).reshape(n, 3)
    G = np.zeros_like(P)
    edges, phi = pair_bearings(P, graph)
    for (i, j), f in zip(edges, phi):
        w = u[i] - u[j]
        d = np.linalg.norm(P[:, j] - P[:, i], axis=1)
        s = f @ w
        gi = -2 * s[:, None] * (w - s[:, None] * f) / d[:, None]
        G[:, i] += gi
        G[:, j] -= gi
    return Lambda4(lam, G, gap, bool(multiple))


def certifiability_penalty(positions, graph, xi_max, margin=0.0):
    """P_c = ψ((1 + margin)·B − λ4) with B = 2 d_max n_t √(2ξ² + ξ³).

    Returns:
        (P_c, ∂P_c/∂positions, Lambda4, B)
    """
    P = np.asarray(positions, dtype=float)
    B = eigenvalue_bound(graph, max(P.shape[0], 1), xi_max)
    l4 = lambda4_and_grad(P, graph)
    if B == 0.0:
        # K-hat is PSD by construction, so λ4 >= 0 holds up to round-off
        return 0.0, np.zeros_like(P), l4, 0.0
    val, dval = psi((1.0 + margin) * B - l4.value)
    return float(val), -dval * l4.grad, l4, float(B)
