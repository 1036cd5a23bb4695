"""Certifiable rotation estimation from mutual bearings, plus translation recovery.

Cost: f(Θ) = Tr(M ΘᵀΘ) = Σ ||R_i g_ij + R_j g_ji||² over matched bearing pairs,
Θ = [R_1 ... R_N]. The convex relaxation min Tr(MZ), Z ⪰ 0, Z_ii = I3 is
solved with a low-rank factorization Z = YᵀY (Burer-Monteiro) on products of
Stiefel manifolds, with a rank staircase driven by the dual certificate.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import linalg
from .certificate import blocks, certificate_eigenvalue, certificate_from_solution, lambda_star
from .errors import ConvergenceError, InvalidInputError, RankDeficiencyError
from .model import MatchedPair, Pose, match_records

log = logging.getLogger(__name__)

RANK_TOL = 1e-6
CERT_TOL = 1e-9
# certificate eigenvalues at or below this (relative to ||M||_F) mean the optimum is not unique
DEGEN_TOL = 1e-8


@dataclass
class DataMatrix:
    n_robots: int
    m: np.ndarray
    record_count: int
    dropped: int = 0

    @property
    def scale(self):
        return max(1.0, float(np.linalg.norm(self.m)))


@dataclass
class RelaxationSolution:
    z: np.ndarray
    primal_value: float
    dual_value: float
    gap: float
    rank_estimate: int
    rank_ratio: float
    dual_bound: float
    sdp_gap: float
    rotations: np.ndarray  # rounded, polished, gauge-fixed
    p: int
    iterations: int
    history: list = field(default_factory=list)

    @property
    def tight(self):
        return self.rank_estimate == 3


@dataclass
class EstimationResult:
    rotations: np.ndarray
    translations: Optional[np.ndarray]
    distances: list
    certified: bool
    certificate_eigenvalue: float
    residual: float
    gap: float
    rank_flag: bool
    negative_distances: list = field(default_factory=list)
    dropped_records: int = 0
    translation_error: Optional[str] = None
    degenerate: bool = False

    def to_json(self):
        return {
            "rotations": [[float(v) for v in R.ravel()] for R in self.rotations],
            "translations": None if self.translations is None else [[float(v) for v in t] for t in self.translations],
            "distances": [{"i": i, "j": j, "t": float(t), "d": float(d)} for i, j, t, d in self.distances],
            "certified": bool(self.certified),
            "certificate_eigenvalue": float(self.certificate_eigenvalue),
            "residual": float(self.residual),
            "gap": float(self.gap),
            "rank_flag": bool(self.rank_flag),
            "degenerate": bool(self.degenerate),
        }


# ---------------------------------------------------------------------------
# data matrix


def assemble_data_matrix(data, n_robots, graph=None) -> DataMatrix:
    """M = Σ y yᵀ with y holding g_ij in block i and g_ji in block j.

    Args:
        data: BearingRecords (paired internally by time) or MatchedPairs.
        n_robots: N.
        graph: optional VisibilityGraph; pairs on non-edges are rejected.
    """
    data = list(data)
    if n_robots < 1:
        raise InvalidInputError("need at least one robot")
    if data and not isinstance(data[0], MatchedPair):
        pairs, dropped = match_records(data)
    else:
        pairs, dropped = data, 0
    Mb = np.zeros((n_robots, n_robots, 3, 3))
    for p in pairs:
        if not (0 <= p.i < n_robots and 0 <= p.j < n_robots):
            raise InvalidInputError(f"pair ({p.i}, {p.j}) outside [0, {n_robots})")
        if graph is not None and not graph.has_edge(p.i, p.j):
            raise InvalidInputError(f"pair ({p.i}, {p.j}) is not an edge of the visibility graph")
    if pairs:
        I = np.array([p.i for p in pairs])
        J = np.array([p.j for p in pairs])
        w = np.array([p.weight for p in pairs])[:, None, None]
        gij = np.array([p.g_ij for p in pairs])
        gji = np.array([p.g_ji for p in pairs])
        # y yᵀ contributes g_ij g_ijᵀ, g_ij g_jiᵀ, g_ji g_ijᵀ, g_ji g_jiᵀ
        np.add.at(Mb, (I, I), w * np.einsum("ka,kb->kab", gij, gij))
        np.add.at(Mb, (J, J), w * np.einsum("ka,kb->kab", gji, gji))
        np.add.at(Mb, (I, J), w * np.einsum("ka,kb->kab", gij, gji))
        np.add.at(Mb, (J, I), w * np.einsum("ka,kb->kab", gji, gij))
    M = Mb.transpose(0, 2, 1, 3).reshape(3 * n_robots, 3 * n_robots)
    return DataMatrix(n_robots, 0.5 * (M + M.T), len(pairs), dropped)


def _mat(m):
    return m.m if isinstance(m, DataMatrix) else np.asarray(m, dtype=float)


def cost(m, rotations):
    """Tr(M ΘᵀΘ) for rotations of shape (N, 3, 3)."""
    R = np.asarray(rotations, dtype=float)
    Theta = np.hstack(list(R))
    return float(np.trace(_mat(m) @ Theta.T @ Theta))


# ---------------------------------------------------------------------------
# low-rank relaxation solver


def _polar(B):
    """Orthonormal factor of the p x 3 matrix B (B (BᵀB)^{-1/2}), rank-safe."""
    e = linalg.sym_eig(B.T @ B)
    s = np.sqrt(np.maximum(e.values, 0.0))
    top = s[-1]
    if top == 0.0:
        Q = np.zeros_like(B)
        Q[:3, :3] = np.eye(3)
        return Q
    cols = []
    for k in range(2, -1, -1):
        if s[k] > 1e-12 * top:
            cols.append(B @ e.vectors[:, k] / s[k])
        else:
            # complete with a direction orthogonal to the previous columns
            r = np.random.default_rng(k).standard_normal(B.shape[0])
            for c in cols:
                r -= c * (c @ r)
            cols.append(r / np.linalg.norm(r))
    U = np.column_stack(cols)  # p x 3, columns matched to eigvecs in reverse
    return U @ e.vectors[:, ::-1].T


def _stiefel_cost(Mb, Y):
    n = Mb.shape[0]
    Yb = Y.reshape(Y.shape[0], n, 3).transpose(1, 0, 2)  # (n, p, 3)
    return float(np.einsum("iab,ijbc,jac->", Yb, Mb, Yb))


def _bcm(Mb, Y, sweeps, rel_tol):
    """Block-coordinate minimization: Y_i <- -polar(Σ_{j≠i} Y_j M_ji). Monotone."""
    n = Mb.shape[0]
    p = Y.shape[0]
    Yb = [Y[:, 3 * i:3 * i + 3].copy() for i in range(n)]
    f_prev = _stiefel_cost(Mb, Y)
    hist = [f_prev]
    done = 0
    scale = max(1.0, float(np.abs(Mb).sum()))
    for _ in range(sweeps):
        for i in range(n):
            B = np.zeros((p, 3))
            for j in range(n):
                if j != i:
                    B += Yb[j] @ Mb[j, i]
            if np.any(B):
                Yb[i] = -_polar(B)
        done += 1
        Y = np.hstack(Yb)
        f = _stiefel_cost(Mb, Y)
        hist.append(f)
        if f_prev - f <= rel_tol * max(scale, abs(f_prev)):
            break
        f_prev = f
    return np.hstack(Yb), hist, done


def _spectral_init(M, n):
    """Rows from the bottom-3 eigenvectors of M, blocks snapped to St(3,3)."""
    e = linalg.sym_eig(M)
    Y = e.vectors[:, :3].T * np.sqrt(n)
    for i in range(n):
        Y[:, 3 * i:3 * i + 3] = _polar(Y[:, 3 * i:3 * i + 3]) if np.any(Y[:, 3 * i:3 * i + 3]) else np.eye(3)
    return Y


def _dual_matrix(Mb, Y):
    """S = M - blockdiag(sym(Σ_j M_ij Y_jᵀ Y_i)) for a factor Y (p x 3N)."""
    n = Mb.shape[0]
    Yb = Y.reshape(Y.shape[0], n, 3).transpose(1, 0, 2)
    L = np.einsum("ijab,jcb,icd->iad", Mb, Yb, Yb)
    L = 0.5 * (L + L.transpose(0, 2, 1))
    S = Mb.copy()
    for i in range(n):
        S[i, i] -= L[i]
    return S.transpose(0, 2, 1, 3).reshape(3 * n, 3 * n), L


def round_factor(Y):
    """Rotations from a factor whose Gram matrix is Z: top-3 rows, per-block SO(3) projection.

    Returns:
        (rotations (N, 3, 3) gauge-fixed to R_0 = I, any_ambiguous)
    """
    n = Y.shape[1] // 3
    Z = Y.T @ Y
    return round_z(Z)


def _factor3(Z):
    """Top-3 factor Y (3 x 3N) with Y^T Y ≈ Z."""
    e = linalg.sym_eig(Z)
    lam = np.maximum(e.values[-3:][::-1], 0.0)
    return np.sqrt(lam)[:, None] * e.vectors[:, -3:][:, ::-1].T


def _gauge(R):
    return np.einsum("ab,ibc->iac", R[0].T, R)


def round_z(Z):
    """Round a Gram matrix to SO(3)^N with R_0 = I.

    The factor's third row has a sign ambiguity; it is chosen so that most
    blocks have positive determinant.

    Returns:
        (rotations, any_ambiguous)
    """
    n = Z.shape[0] // 3
    Y = _factor3(Z)
    dets = [np.linalg.det(Y[:, 3 * i:3 * i + 3]) for i in range(n)]
    if sum(d < 0 for d in dets) > n / 2:
        Y[2] = -Y[2]
    R = np.zeros((n, 3, 3))
    amb = False
    for i in range(n):
        if np.any(Y[:, 3 * i:3 * i + 3]):
            R[i], a = linalg.project_so3(Y[:, 3 * i:3 * i + 3])
        else:
            R[i], a = np.eye(3), True
        amb = amb or a
    return _gauge(R), amb


def _rot_gradient(Mb, R):
    """Euclidean-to-tangent data for left perturbations exp(ŵ_i) R_i."""
    K = np.einsum("iab,ijbc,jdc->ijad", R, Mb, R)
    C = K.sum(axis=1)
    g = 2.0 * np.stack([C[:, 1, 2] - C[:, 2, 1], C[:, 2, 0] - C[:, 0, 2], C[:, 0, 1] - C[:, 1, 0]], axis=1)
    return g, K, C


_E = [linalg.hat(e) for e in np.eye(3)]


def _rot_hessian(K, C):
    n = K.shape[0]
    H = np.zeros((3 * n, 3 * n))
    # X(K)[a, b] = Tr(ê_a K ê_b)
    X = np.einsum("aij,xyjk,bki->xyab", np.array(_E), K, np.array(_E))
    for i in range(n):
        for j in range(n):
            H[3 * i:3 * i + 3, 3 * j:3 * j + 3] = -X[i, j]
        Ci = C[i]
        H[3 * i:3 * i + 3, 3 * i:3 * i + 3] += 0.5 * (Ci + Ci.T) - np.trace(Ci) * np.eye(3)
    H = 2.0 * H
    return 0.5 * (H + H.T)


def _retract(R, w):
    return np.array([linalg.so3_exp(w[3 * i:3 * i + 3]) @ R[i] for i in range(len(R))])


def polish_rotations(M, rotations, iters=50):
    """Riemannian Newton on SO(3)^N with a modified-Hessian and backtracking."""
    M = _mat(M)
    R = np.array(rotations, dtype=float)
    n = R.shape[0]
    Mb = blocks(M, n)
    f = cost(M, R)
    tol = 1e-13 * max(1.0, np.linalg.norm(M))
    for _ in range(iters):
        g_blocks, K, C = _rot_gradient(Mb, R)
        g = g_blocks.ravel()
        if np.linalg.norm(g) <= tol:
            break
        H = _rot_hessian(K, C)
        e = linalg.sym_eig(H)
        lam = np.abs(e.values)
        floor = 1e-10 * max(1.0, lam.max())
        inv = np.where(lam > floor, 1.0 / np.maximum(lam, floor), 0.0)
        step = -(e.vectors * inv) @ (e.vectors.T @ g)
        if step @ g >= 0:
            step = -g
        t = 1.0
        improved = False
        while t > 1e-10:
            Rn = _retract(R, t * step)
            fn = cost(M, Rn)
            if fn <= f - 1e-4 * t * abs(step @ g) or (fn < f and t < 1.0):
                improved = True
                break
            t *= 0.5
        if not improved:
            break
        R, f = Rn, fn
    # steps may drift along the global gauge when the data leave it loosely pinned
    return _gauge(R)


def _block_candidates(y):
    """Rotations near a 3x3 block: the polar factor, or every single-axis sign fix of a reflection."""
    if not np.any(y):
        return [np.eye(3)]
    U, _, V = linalg.svd3(y)
    if np.linalg.det(U @ V.T) > 0:
        return [U @ V.T]
    # smallest singular direction first; the others matter when singular values tie
    return [U @ np.diag(d) @ V.T for d in ([1.0, 1.0, -1.0], [1.0, -1.0, 1.0], [-1.0, 1.0, 1.0])]


def _round_best(M, Z):
    """Round Z to SO(3)^N, resolving sign ambiguities by cost, then polish.

    Both signs of the factor's third row are tried, and blocks that project to
    a reflection try each single-axis fix. These ties are real when the data
    leave a direction unconstrained (e.g. an O(3) optimum of a planar problem),
    where the default choice can reflect an in-plane axis.

    Returns:
        (rotations gauge-fixed to R_0 = I, cost)
    """
    n = Z.shape[0] // 3
    best = None
    for flip in (False, True):
        Y = _factor3(Z)
        if flip:
            Y[2] = -Y[2]
        cands = [_block_candidates(Y[:, 3 * i:3 * i + 3]) for i in range(n)]
        R = np.array([c[0] for c in cands])
        f = cost(M, R)
        for _ in range(2):
            for i in range(n):
                for c in cands[i][1:] + cands[i][:1]:
                    Rt = R.copy()
                    Rt[i] = c
                    ft = cost(M, Rt)
                    if ft < f - 1e-15 * max(1.0, abs(f)):
                        R, f = Rt, ft
        R = polish_rotations(M, _gauge(R))
        f = cost(M, R)
        if best is None or f < best[1]:
            best = (R, f)
    return best


def solve_relaxation(m, tol=1e-8, max_outer=500, p_max=None, seed=0) -> RelaxationSolution:
    """Solve min Tr(MZ) s.t. Z ⪰ 0, Z_ii = I3 by a Riemannian staircase.

    Each level runs block-coordinate descent on St(p,3)^N. When the factor is
    (numerically) rank 3, its rounding is polished by Newton on SO(3)^N.
    Optimality is certified by S = M - Λ(Y) ⪰ 0; otherwise the factor is
    lifted to p+1 along the most negative eigenvector of S.

    Raises:
        ConvergenceError: the outer budget is exhausted before the relative
            gap between Tr(MZ) and the dual bound Tr(Λ) + 3N·min(λ_min(S), 0)
            drops below ``tol``. ``best`` carries the best solution so far.
    """
    M = _mat(m)
    n = M.shape[0] // 3
    if n < 1 or M.shape != (3 * n, 3 * n):
        raise InvalidInputError("data matrix must be 3N x 3N")
    Mb = blocks(M, n)
    scale = max(1.0, float(np.linalg.norm(M)))
    p_max = p_max or 3 * n
    rng = np.random.default_rng(seed)

    Y = _spectral_init(M, n) if np.any(M) else np.tile(np.eye(3), (1, n))
    history = [_stiefel_cost(Mb, Y)]
    used = 0
    best = None
    while True:
        p = Y.shape[0]
        budget = max_outer - used
        Y, hist, k = _bcm(Mb, Y, min(budget, 200), 1e-12)
        used += k
        history.extend(hist[1:])
        # rank-3 shortcut: round + Newton polish gives an exactly stationary point
        R, fR = _round_best(M, Y.T @ Y)
        if fR <= history[-1] + 1e-12 * scale:
            Y = np.vstack([np.hstack(list(R)), np.zeros((p - 3, 3 * n))])
            history.append(fR)
        S, L = _dual_matrix(Mb, Y)
        e = linalg.sym_eig(S)
        lam_min = float(e.values[0])
        primal = history[-1]
        dual_bound = float(np.trace(L, axis1=1, axis2=2).sum()) + 3 * n * min(lam_min, 0.0)
        sdp_gap = (primal - dual_bound) / max(1.0, abs(primal))
        best = (Y, primal, dual_bound, sdp_gap, used)
        if sdp_gap <= tol:
            break
        if used >= max_outer:
            raise ConvergenceError(
                f"relaxation did not reach gap {tol:g} within {max_outer} steps (gap {sdp_gap:.3e})",
                best=_package(M, Y, primal, dual_bound, sdp_gap, used, history),
            )
        if lam_min < -CERT_TOL * scale and p < p_max:
            Y = _escape(Mb, Y, e.vectors[:, 0], rng)
            history.append(_stiefel_cost(Mb, Y))
        elif k == 0:
            used += 1
    Y, primal, dual_bound, sdp_gap, used = best
    return _package(M, Y, primal, dual_bound, sdp_gap, used, history)


def _escape(Mb, Y, v, rng):
    """Lift Y to p+1 rows along eigenvector v of S, backtracking until the cost drops."""
    n = Mb.shape[0]
    f0 = _stiefel_cost(Mb, Y)
    Yp = np.vstack([Y, np.zeros((1, 3 * n))])
    eps = 1.0
    while eps > 1e-8:
        Yt = Yp.copy()
        Yt[-1] += eps * v
        for i in range(n):
            Yt[:, 3 * i:3 * i + 3] = _polar(Yt[:, 3 * i:3 * i + 3])
        if _stiefel_cost(Mb, Yt) < f0:
            return Yt
        eps *= 0.5
    Yt = Yp.copy()
    Yt[-1] += 1e-3 * rng.standard_normal(3 * n)
    for i in range(n):
        Yt[:, 3 * i:3 * i + 3] = _polar(Yt[:, 3 * i:3 * i + 3])
    return Yt


def _package(M, Y, primal, dual_bound, sdp_gap, used, history):
    n = M.shape[0] // 3
    Z = Y.T @ Y
    Z = 0.5 * (Z + Z.T)
    for i in range(n):
        Z[3 * i:3 * i + 3, 3 * i:3 * i + 3] = np.eye(3)
    ev = linalg.sym_eig(Z).values[::-1]
    ratio = float(ev[3] / ev[2]) if len(ev) > 3 and ev[2] > 0 else 0.0
    rank = 3 + int(np.sum(ev[3:] > RANK_TOL * ev[2])) if len(ev) > 3 else len(ev)
    R, fR = _round_best(M, Z)
    dual = fR  # Tr(Λ*) at the rounded solution equals the rounded cost
    primal = float(np.trace(M @ Z))
    return RelaxationSolution(
        z=Z, primal_value=primal, dual_value=dual, gap=primal - dual, rank_estimate=rank,
        rank_ratio=ratio, dual_bound=dual_bound, sdp_gap=sdp_gap, rotations=R, p=Y.shape[0],
        iterations=used, history=history,
    )


def recover_rotations(sol, rank_tol=RANK_TOL):
    """Round Z to SO(3)^N with R_0 = I.

    Returns:
        (rotations, higher_rank_flag)
    """
    Z = sol.z if isinstance(sol, RelaxationSolution) else np.asarray(sol, dtype=float)
    ev = linalg.sym_eig(Z).values[::-1]
    flag = bool(len(ev) > 3 and ev[3] > rank_tol * ev[2])
    R, _ = round_z(Z)
    return R, flag


def refine_local(theta0, m, max_iter=1000):
    """Riemannian gradient descent on SO(3)^N with Armijo backtracking.

    Returns:
        (rotations, cost history). The cost history is non-increasing.
    """
    M = _mat(m)
    R = np.array(theta0, dtype=float)
    n = R.shape[0]
    Mb = blocks(M, n)
    f = cost(M, R)
    hist = [f]
    tol = 1e-10 * max(1.0, np.linalg.norm(M))
    step0 = 1.0 / max(1e-12, 4.0 * np.abs(M).sum() / max(n, 1))
    t = step0
    for _ in range(max_iter):
        g_blocks, _, _ = _rot_gradient(Mb, R)
        g = g_blocks.ravel()
        gn2 = float(g @ g)
        if np.sqrt(gn2) <= tol:
            break
        t = min(4.0 * t, 1.0)
        while True:
            Rn = _retract(R, -t * g)
            fn = cost(M, Rn)
            if fn <= f - 1e-4 * t * gn2:
                break
            t *= 0.5
            if t < 1e-16:
                return R, hist
        R, f = Rn, fn
        hist.append(f)
    return R, hist


# ---------------------------------------------------------------------------
# translations


def recover_translations(rotations, pairs, weights=None):
    """Least-squares translations (t_0 = 0) and per-pair distances.

    Per pair the residual is
        e = d (R_i g_ij - R_j g_ji) / 2 - (t_j - t_i) - (R_j t_jτ - R_i t_iτ),
    weighted by a scalar per pair. Distances are eliminated per pair, the
    reduced normal equations solved, and distances back-substituted.

    Returns:
        (translations (N, 3), distances list of (i, j, t, d), negative list)

    Raises:
        RankDeficiencyError: with ``deficit`` the unconstrained dimension.
    """
    R = np.asarray(rotations, dtype=float)
    n = R.shape[0]
    pairs = list(pairs)
    dim = 3 * (n - 1)
    if not pairs:
        raise RankDeficiencyError("no usable bearing pairs", dim)
    I = np.array([p.i for p in pairs])
    J = np.array([p.j for p in pairs])
    w = np.array([p.weight for p in pairs]) if weights is None else np.asarray(weights, dtype=float)
    gij = np.array([p.g_ij for p in pairs])
    gji = np.array([p.g_ji for p in pairs])
    a = 0.5 * (np.einsum("kab,kb->ka", R[I], gij) - np.einsum("kab,kb->ka", R[J], gji))
    c = np.einsum("kab,kb->ka", R[J], np.array([p.odom_j.t for p in pairs])) - np.einsum(
        "kab,kb->ka", R[I], np.array([p.odom_i.t for p in pairs]))
    aa = np.einsum("ka,ka->k", a, a)
    ok = aa > 1e-24
    P = np.eye(3)[None] - np.einsum("ka,kb->kab", a, a) / np.where(ok, aa, 1.0)[:, None, None]
    P = w[:, None, None] * P * ok[:, None, None]
    Pc = np.einsum("kab,kb->ka", P, c)
    # B x = t_j - t_i with t_0 = 0; accumulate Bᵀ P B and -Bᵀ P c blockwise
    Hb = np.zeros((n, n, 3, 3))
    np.add.at(Hb, (J, J), P)
    np.add.at(Hb, (I, I), P)
    np.add.at(Hb, (I, J), -P)
    np.add.at(Hb, (J, I), -P)
    rb = np.zeros((n, 3))
    np.add.at(rb, J, -Pc)
    np.add.at(rb, I, Pc)
    H = Hb[1:, 1:].transpose(0, 2, 1, 3).reshape(dim, dim)
    rhs = rb[1:].ravel()
    if dim:
        e = linalg.sym_eig(H)
        thr = 1e-10 * max(1.0, float(np.abs(e.values).max()))
        deficit = int(np.sum(e.values <= thr))
        if deficit:
            raise RankDeficiencyError(f"translation system has {deficit} unconstrained direction(s)", deficit)
        x = e.vectors @ ((e.vectors.T @ rhs) / e.values)
    else:
        x = np.zeros(0)
    t = np.vstack([np.zeros(3), x.reshape(n - 1, 3)])
    rel = t[J] - t[I] + c
    d = np.einsum("ka,ka->k", a, rel) / np.where(ok, aa, 1.0)
    dists, neg = [], []
    for k, p in enumerate(pairs):
        if not ok[k]:
            continue
        dists.append((p.i, p.j, p.time, float(d[k])))
        if d[k] < 0:
            neg.append(dists[-1])
    return t, dists, neg


# ---------------------------------------------------------------------------
# drivers


def estimate(records, n_robots, graph=None, tol=1e-8, weights=None, max_outer=500) -> EstimationResult:
    """Full pipeline: pair, assemble, relax, round, certify, recover translations."""
    pairs, dropped = match_records(records, weights)
    return estimate_pairs(pairs, n_robots, graph, tol, dropped, max_outer)


def estimate_pairs(pairs, n_robots, graph=None, tol=1e-8, dropped=0, max_outer=500) -> EstimationResult:
    if not pairs:
        raise InvalidInputError("no matched bearing pairs")
    dm = assemble_data_matrix(pairs, n_robots, graph)
    dm.dropped = dropped
    sol = solve_relaxation(dm, tol=tol, max_outer=max_outer)
    R = sol.rotations
    rank_flag = sol.rank_ratio > RANK_TOL
    K = certificate_from_solution(dm.m, R)
    lam = certificate_eigenvalue(K)
    certified = (not rank_flag) and lam >= -CERT_TOL * dm.scale
    t = dists = None
    neg, terr = [], None
    try:
        t, dists, neg = recover_translations(R, pairs)
    except RankDeficiencyError as e:
        terr = str(e)
        dists = []
    return EstimationResult(
        rotations=R, translations=t, distances=dists, certified=bool(certified),
        certificate_eigenvalue=lam, residual=cost(dm.m, R), gap=sol.gap, rank_flag=bool(rank_flag),
        negative_distances=neg, dropped_records=dropped, translation_error=terr,
        degenerate=bool(lam <= DEGEN_TOL * dm.scale),
    )


@dataclass
class WindowOutcome:
    """Result of one sliding-window solve. ``poses`` is None when no estimate is available."""

    poses: Optional[list]
    result: Optional[EstimationResult]
    reason: str = ""


def sliding_window_localize(records, n_robots, window, graph=None, tol=1e-8) -> WindowOutcome:
    """Estimate common-frame poses at the window end from records inside [t_s, t_e].

    Odometry is re-based to each robot's first pose in the window, so the
    returned pose of robot i is T_i* (T_i^odom(t_s))⁻¹ T_i^odom(t_e), expressed in
    robot 0's frame at t_s.

    Args:
        records: BearingRecords (or raw buffers via model.attach_odometry first).
        window: (t_s, t_e).
    """
    ts, te = window
    inside = [r for r in records if ts <= r.time <= te]
    if not inside:
        raise InvalidInputError(f"no records in window [{ts}, {te}]")
    pairs, dropped = match_records(inside)
    if not pairs:
        return WindowOutcome(None, None, "no matched pairs")
    first, last = {}, {}
    for p in sorted(pairs, key=lambda q: q.time):
        for rid, od in ((p.i, p.odom_i), (p.j, p.odom_j)):
            first.setdefault(rid, od)
            last[rid] = od
    if len(first) < n_robots:
        return WindowOutcome(None, None, "some robots unobserved")
    based = []
    for p in pairs:
        oi = first[p.i].inverse() @ p.odom_i
        oj = first[p.j].inverse() @ p.odom_j
        based.append(MatchedPair(p.i, p.j, p.time, first[p.i].R.T @ p.g_ij, first[p.j].R.T @ p.g_ji, oi, oj, p.weight))
    res = estimate_pairs(based, n_robots, graph, tol, dropped)
    if res.rank_flag:
        return WindowOutcome(None, res, "relaxation solution is not rank 3")
    if res.degenerate:
        return WindowOutcome(None, res, "degenerate motion: optimum is not unique")
    if res.translations is None:
        return WindowOutcome(None, res, res.translation_error or "translations unavailable")
    poses = []
    for i in range(n_robots):
        Ti = Pose.trusted(res.rotations[i], res.translations[i])
        poses.append(Ti @ first[i].inverse() @ last[i])
    return WindowOutcome(poses, res, "" if res.certified else "uncertified")
