"""Certificate matrices K (from a solution) and K-hat (from trajectories).

K has the columns of ``1_N ⊗ I3`` in its nullspace at any stationary point.
The certificate eigenvalue is the smallest eigenvalue of K on the orthogonal
complement of that nullspace; a solution is certified when it is >= 0.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import DegeneracyError, InvalidInputError
from .model import perturb_bounded


@dataclass
class CertificateMatrix:
    k: np.ndarray
    source: str
    n_robots: int


def blocks(M, n):
    """View a 3n x 3n matrix as an (n, n, 3, 3) block array."""
    return M.reshape(n, 3, n, 3).transpose(0, 2, 1, 3)


def from_blocks(B):
    n = B.shape[0]
    return B.transpose(0, 2, 1, 3).reshape(3 * n, 3 * n)


def helmert_complement(n):
    """Orthonormal basis (3n x 3(n-1)) of the complement of ``1_n ⊗ I3``."""
    H = np.zeros((n, n - 1))
    for k in range(1, n):
        H[:k, k - 1] = 1.0 / np.sqrt(k * (k + 1))
        H[k, k - 1] = -k / np.sqrt(k * (k + 1))
    return np.kron(H, np.eye(3))


def _sym(A):
    return 0.5 * (A + np.swapaxes(A, -1, -2))


def _rot_array(rotations):
    R = np.asarray(rotations, dtype=float)
    if R.ndim != 3 or R.shape[1:] != (3, 3):
        raise InvalidInputError("rotations must have shape (N, 3, 3)")
    return R


def lambda_star(M, rotations):
    """Closed-form multipliers Λ_i = Σ_j M_ij R_jᵀ R_i.

    Returns:
        (blocks (N, 3, 3) symmetrized, symmetry defect) where the defect is
        max_i ||Λ_i - Λ_iᵀ||_F before symmetrization. A nonzero defect means
        ``rotations`` is not a stationary point.
    """
    R = _rot_array(rotations)
    n = R.shape[0]
    Mb = blocks(np.asarray(M, dtype=float), n)
    # Λ_i = Σ_j M_ij R_j^T R_i
    L = np.einsum("ijab,jcb,icd->iad", Mb, R, R)
    defect = float(np.max(np.linalg.norm(L - np.swapaxes(L, 1, 2), axis=(1, 2)))) if n else 0.0
    return _sym(L), defect


def certificate_from_solution(M, rotations, check=False) -> CertificateMatrix:
    """K = D (M - Λ) Dᵀ with D = blockdiag(R_i).

    With ``check=True`` the blockwise form (K_ij = R_i M_ij R_jᵀ, K_ii = -Σ_j K_ij)
    is built as well and compared to 1e-10.
    """
    R = _rot_array(rotations)
    n = R.shape[0]
    M = np.asarray(M, dtype=float)
    L, _ = lambda_star(M, R)
    S = M.copy()
    for i in range(n):
        S[3 * i:3 * i + 3, 3 * i:3 * i + 3] -= L[i]
    D = np.zeros((3 * n, 3 * n))
    for i in range(n):
        D[3 * i:3 * i + 3, 3 * i:3 * i + 3] = R[i]
    K = D @ S @ D.T
    K = 0.5 * (K + K.T)
    if check:
        K2 = _blockwise_k(M, R)
        err = np.abs(K - K2).max()
        if err > 1e-10 * max(1.0, np.linalg.norm(K)):
            raise AssertionError(f"certificate paths disagree by {err:.3e}")
    return CertificateMatrix(K, "from_solution", n)


def _blockwise_k(M, R):
    n = R.shape[0]
    Kb = np.einsum("iab,ijbc,jdc->ijad", R, blocks(M, n), R)
    for i in range(n):
        Kb[i, i] = 0.0
    off = Kb.sum(axis=1)
    for i in range(n):
        Kb[i, i] = -_sym(off[i])
    return from_blocks(Kb)


def pair_bearings(positions, graph):
    """Unit bearings φ_ij(t) for every edge at every sample.

    Args:
        positions: (T, N, 3) sampled positions.
        graph: VisibilityGraph.

    Returns:
        (edges list, phi array (E, T, 3)).
    """
    P = np.asarray(positions, dtype=float)
    edges = sorted(graph.edges)
    if not edges:
        return edges, np.zeros((0, P.shape[0], 3))
    I = np.array([e[0] for e in edges])
    J = np.array([e[1] for e in edges])
    d = P[:, J, :] - P[:, I, :]  # (T, E, 3)
    dist = np.linalg.norm(d, axis=2)
    bad = np.argwhere(dist <= 1e-6)
    if len(bad):
        t, e = bad[0]
        raise DegeneracyError(f"robots {edges[e]} coincide at sample {t}")
    return edges, np.transpose(d / dist[..., None], (1, 0, 2))


def k_hat_from_positions(positions, graph, gram_check=False) -> CertificateMatrix:
    """K-hat from ground-truth bearings: K_ij = -Σ_t φφᵀ, K_ii = -Σ_j K_ij."""
    P = np.asarray(positions, dtype=float)
    n = P.shape[1]
    edges, phi = pair_bearings(P, graph)
    Kb = np.zeros((n, n, 3, 3))
    for (i, j), f in zip(edges, phi):
        G = f.T @ f
        Kb[i, j] -= G
        Kb[j, i] -= G
        Kb[i, i] += G
        Kb[j, j] += G
    K = from_blocks(Kb)
    if gram_check:
        K2 = k_hat_gram(P, graph)
        err = np.abs(K - K2).max()
        if err > 1e-10 * max(1.0, np.linalg.norm(K)):
            raise AssertionError(f"K-hat paths disagree by {err:.3e}")
    return CertificateMatrix(K, "from_trajectories", n)


def k_hat_gram(positions, graph):
    """Σ_s v_s v_sᵀ with v_s = (e_i - e_j) ⊗ φ_s; the Gram form of K-hat."""
    P = np.asarray(positions, dtype=float)
    n = P.shape[1]
    edges, phi = pair_bearings(P, graph)
    V = []
    for (i, j), f in zip(edges, phi):
        v = np.zeros((f.shape[0], 3 * n))
        v[:, 3 * i:3 * i + 3] = f
        v[:, 3 * j:3 * j + 3] = -f
        V.append(v)
    if not V:
        return np.zeros((3 * n, 3 * n))
    V = np.vstack(V)
    return V.T @ V


def noisy_k(phi_ij, phi_ji, edges, n):
    """K from measured world-frame bearings: K_ij = Σ φ_ij φ_jiᵀ, K_ii = -sym(Σ_j K_ij)."""
    Kb = np.zeros((n, n, 3, 3))
    for (i, j), a, b in zip(edges, phi_ij, phi_ji):
        C = a.T @ b
        Kb[i, j] += C
        Kb[j, i] += C.T
    off = Kb.sum(axis=1)
    for i in range(n):
        Kb[i, i] = -_sym(off[i])
    return from_blocks(Kb)


def _kmat(k):
    return k.k if isinstance(k, CertificateMatrix) else np.asarray(k, dtype=float)


def certificate_eigenvalue(k, return_vector=False):
    """Smallest eigenvalue of K restricted to the complement of ``1_N ⊗ I3``.

    Args:
        k: CertificateMatrix or (3N, 3N) array.
        return_vector: also return the minimizing unit vector in R^{3N}.
    """
    K = _kmat(k)
    n = K.shape[0] // 3
    if n < 2:
        return (0.0, np.zeros(K.shape[0])) if return_vector else 0.0
    P = helmert_complement(n)
    e = linalg.sym_eig(P.T @ K @ P)
    lam = float(e.values[0])
    if return_vector:
        return lam, P @ e.vectors[:, 0]
    return lam


def certificate_eigenvalue_shift(k, mu=None):
    """λ_1(K + μ N Nᵀ) with N = 1_N ⊗ I3 and μ = 1 + 2||K||_F by default."""
    K = _kmat(k)
    n = K.shape[0] // 3
    if mu is None:
        mu = 1.0 + 2.0 * np.linalg.norm(K)
    Nm = np.kron(np.ones((n, 1)), np.eye(3))
    return float(linalg.sym_eig(K + mu * Nm @ Nm.T).values[0])


def _sample_positions(trajs, sample_times=None):
    """(T, N, 3) positions from an array or from per-robot trajectory objects."""
    if isinstance(trajs, np.ndarray) and trajs.ndim == 3:
        return np.asarray(trajs, dtype=float)
    if sample_times is None:
        raise InvalidInputError("sample_times required for trajectory objects")
    times = np.asarray(sample_times, dtype=float)
    cols = []
    for tr in trajs:
        if hasattr(tr, "positions"):
            cols.append(np.asarray(tr.positions(times), dtype=float))
        else:
            cols.append(np.array([tr.eval(t, 0) for t in times]))
    return np.stack(cols, axis=1)


def certificate_from_trajectories(trajs, graph, sample_times=None, gram_check=False) -> CertificateMatrix:
    """K-hat from trajectories sampled at ``sample_times``.

    Args:
        trajs: (T, N, 3) positions, or per-robot objects with ``positions(times)``
            or ``eval(t, order)``.
        graph: VisibilityGraph.
        sample_times: sample instants (ignored when positions are given).
        gram_check: also build the Gram form and compare.
    """
    return k_hat_from_positions(_sample_positions(trajs, sample_times), graph, gram_check)


# -- perturbation of one bearing pair ------------------------------------------

@dataclass
class PerturbationDecomposition:
    """Split of ΔQ_s for one bearing pair into two rank-2 eigen-factors.

    ``w1``/``w2`` are the two parts (ΔQ_s = w1 + w2) and ``v_k``/``u_k`` satisfy
    ``w_k v_k = v_k diag(u_k)``. ``reconstruction_error`` measures the
    congruence form ||v1 U1 v1ᵀ + v2 U2 v2ᵀ - ΔQ_s||_F; ``similarity_error``
    the similarity form with v_k⁻¹ (nan when a factor is singular).
    """

    v1: np.ndarray
    v2: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    reconstruction_error: float
    dq: np.ndarray
    w1: np.ndarray
    w2: np.ndarray
    eigen_residual: float
    similarity_error: float


def q_block(a, b):
    """6x6 pair block [[-a bᵀ, a bᵀ], [b aᵀ, -b aᵀ]] for bearings a = φ_ij, b = φ_ji."""
    A = np.outer(a, b)
    return np.block([[-A, A], [A.T, -A.T]])


def _any_perp(v):
    e = np.zeros(3)
    e[int(np.argmin(np.abs(v)))] = 1.0
    u = np.cross(v, e)
    return u / np.linalg.norm(u)


def _factor(top, bot, delta, xi, cross, first_is_bearing):
    """Columns of one eigen-factor and its eigenvalues."""
    dring = delta / xi if xi > 0 else np.zeros(3)
    if np.linalg.norm(cross) <= 1e-14:
        cross = _any_perp(top if first_is_bearing else bot)
    V = np.zeros((6, 6))
    if first_is_bearing:
        V[:, 0] = np.r_[top, -dring]
        V[:, 1] = np.r_[top, dring]
        s = float(delta @ top)
    else:
        V[:, 0] = np.r_[-dring, bot]
        V[:, 1] = np.r_[dring, bot]
        s = float(delta @ bot)
    V[:, 2] = np.r_[cross, -cross]
    V[:3, 3:] = np.eye(3)
    V[3:, 3:] = np.eye(3)
    u = np.zeros(6)
    if xi > 0:
        u[0] = -xi - s
        u[1] = xi - s
    return V, u


def perturbation_decomposition(phi_hat_ij, delta_ij, delta_ji) -> PerturbationDecomposition:
    """Eigen-factors of the bearing-pair perturbation ΔQ_s.

    With φ_ij = φ̂_ij + δ_ij and φ_ji = -φ̂_ij + δ_ji, ΔQ_s = Q_s - Q̂_s splits
    into w1 (terms in δ_ji) and w2 (terms in δ_ij). Each has two nonzero
    eigenvalues, u1 = (-ξ_ji - δ_jiᵀφ̂_ij, ξ_ji - δ_jiᵀφ̂_ij) and
    u2 = (-ξ_ij - δ_ijᵀφ_ji, ξ_ij - δ_ijᵀφ_ji); the rest of each spectrum is 0.

    Args:
        phi_hat_ij: unit true bearing from i to j.
        delta_ij, delta_ji: perturbations of the two measured bearings.
    """
    ph = np.asarray(phi_hat_ij, dtype=float)
    if abs(np.linalg.norm(ph) - 1.0) > 1e-9:
        raise InvalidInputError("phi_hat_ij must be a unit vector")
    d_ij = np.asarray(delta_ij, dtype=float)
    d_ji = np.asarray(delta_ji, dtype=float)
    p_ij = ph + d_ij
    p_ji = -ph + d_ji
    dq = q_block(p_ij, p_ji) - q_block(ph, -ph)

    A1 = np.outer(ph, d_ji)
    w1 = np.block([[-A1, A1], [A1.T, -A1.T]])
    A2 = np.outer(d_ij, p_ji)
    w2 = np.block([[-A2, A2], [A2.T, -A2.T]])

    xi_ij = float(np.linalg.norm(d_ij))
    xi_ji = float(np.linalg.norm(d_ji))
    v1, u1 = _factor(ph, None, d_ji, xi_ji, np.cross(ph, d_ji), True)
    v2, u2 = _factor(None, p_ji, d_ij, xi_ij, np.cross(d_ij, p_ji), False)

    congr = v1 @ np.diag(u1) @ v1.T + v2 @ np.diag(u2) @ v2.T
    rec = float(np.linalg.norm(congr - dq))
    res = max(float(np.linalg.norm(w1 @ v1 - v1 * u1)), float(np.linalg.norm(w2 @ v2 - v2 * u2)))
    sim = np.nan
    if xi_ij > 0 and xi_ji > 0 and min(abs(np.linalg.det(v1)), abs(np.linalg.det(v2))) > 1e-12:
        S = v1 @ np.diag(u1) @ np.linalg.inv(v1) + v2 @ np.diag(u2) @ np.linalg.inv(v2)
        sim = float(np.linalg.norm(S - dq))
    return PerturbationDecomposition(v1, v2, u1, u2, rec, dq, w1, w2, res, sim)


# -- noise bound ---------------------------------------------------------------

def eigenvalue_bound(graph, samples_T, xi_max):
    """Certificate eigenvalue bound B = 2 d_max T sqrt(2ξ² + ξ³).

    If λ4(K-hat) >= B, every bounded perturbation of size <= ξ keeps K PSD.
    """
    if not 0 <= xi_max < 2:
        raise InvalidInputError("xi_max must lie in [0, 2)")
    if samples_T < 1:
        raise InvalidInputError("samples_T must be >= 1")
    return 2.0 * graph.d_max * samples_T * np.sqrt(2 * xi_max**2 + xi_max**3)


def _noisy_k_batch(phi, edges, n, xi, rng, draws):
    """K for ``draws`` independent bounded-noise draws around true bearings ``phi``."""
    pij = perturb_bounded(np.broadcast_to(phi, (draws,) + phi.shape), xi, rng)
    pji = perturb_bounded(np.broadcast_to(-phi, (draws,) + phi.shape), xi, rng)
    C = np.einsum("deta,detb->deab", pij, pji)
    Kb = np.zeros((draws, n, n, 3, 3))
    for e, (i, j) in enumerate(edges):
        Kb[:, i, j] += C[:, e]
        Kb[:, j, i] += np.swapaxes(C[:, e], 1, 2)
    off = Kb.sum(axis=2)
    for i in range(n):
        Kb[:, i, i] = -_sym(off[:, i])
    return Kb.transpose(0, 1, 3, 2, 4).reshape(draws, 3 * n, 3 * n)


def perturbation_spectral_radius(positions, graph, xi, draws, rng):
    """max |λ(ΔK)| for ``draws`` bounded-noise draws, ΔK = K - K-hat.

    Returns:
        array of length ``draws``.
    """
    P = np.asarray(positions, dtype=float)
    n = P.shape[1]
    edges, phi = pair_bearings(P, graph)
    Kh = k_hat_from_positions(P, graph).k
    out = np.empty(draws)
    chunk = 256
    for s in range(0, draws, chunk):
        m = min(chunk, draws - s)
        Ks = _noisy_k_batch(phi, edges, n, xi, rng, m)
        for k in range(m):
            ev = linalg.sym_eigvals(Ks[k] - Kh)
            out[s + k] = max(abs(ev[0]), abs(ev[-1]))
    return out


# -- degeneration ----------------------------------------------------------------

COPLANAR_TOL = 1e-7
DEGEN_REL_TOL = 1e-8
MAX_EXHAUSTIVE = 8


@dataclass
class DegenerationReport:
    """Outcome of the degeneration check.

    mechanism is ``pairwise_coplanar`` (two robots moving in a plane),
    ``partition_condition`` (a coplanar subset containing a robot with no
    neighbours outside it), ``numeric_only`` (λ4 vanishes without a structural
    witness) or None when not degenerate. ``witness`` holds ``coplanar``,
    ``rest``, ``robot`` and the plane ``normal`` for the structural cases.
    """

    degenerate: bool
    mechanism: Optional[str]
    witness: Optional[dict]
    lambda4: float
    k_norm: float = 0.0


def plane_normal(vectors, tol=COPLANAR_TOL):
    """Normal ζ of the plane containing all rows of ``vectors``, or None.

    The rows are coplanar when σ3 <= tol·σ1; σ3 is measured directly as
    ||A ζ|| for the smallest Gram eigenvector ζ.
    """
    A = np.asarray(vectors, dtype=float).reshape(-1, 3)
    if len(A) == 0:
        return None
    e = linalg.sym_eig(A.T @ A)
    s1 = np.sqrt(max(e.values[-1], 0.0))
    if s1 == 0.0:
        return None
    z = e.vectors[:, 0]
    s3 = np.linalg.norm(A @ z)
    return z if s3 <= tol * s1 else None


def _all_pair_bearings(P):
    n = P.shape[1]
    out = {}
    for i in range(n):
        for j in range(i + 1, n):
            d = P[:, j] - P[:, i]
            r = np.linalg.norm(d, axis=1)
            keep = r > 1e-6
            out[(i, j)] = d[keep] / r[keep, None]
    return out


def detect_degeneration(trajs, graph, sample_times=None) -> DegenerationReport:
    """Check whether λ4(K-hat) vanishes and look for a structural reason.

    The numeric test is λ4 <= 1e-8·||K-hat||_F. Structural witnesses are
    searched exhaustively over robot subsets (N <= 8): a subset V_c whose
    relative bearings span at most a plane, containing a robot whose
    neighbours all lie inside V_c.
    """
    P = _sample_positions(trajs, sample_times)
    n = P.shape[1]
    K = k_hat_from_positions(P, graph).k
    kn = float(np.linalg.norm(K))
    lam = certificate_eigenvalue(K)
    numeric = lam <= DEGEN_REL_TOL * kn
    witness = None
    mech = None
    if n <= MAX_EXHAUSTIVE:
        witness = _partition_witness(P, graph)
    if witness is not None:
        mech = "pairwise_coplanar" if n == 2 else "partition_condition"
    elif numeric:
        mech = "numeric_only"
    if not numeric:
        # a structural witness forces λ4 = 0; report it only if numerics agree
        witness, mech = None, None
    return DegenerationReport(bool(numeric), mech, witness, float(lam), kn)


def _partition_witness(P, graph):
    from itertools import combinations

    n = P.shape[1]
    pb = _all_pair_bearings(P)
    nbrs = [set(graph.neighbors(i)) for i in range(n)]
    for size in range(2, n + 1):
        for sub in combinations(range(n), size):
            members = set(sub)
            anchors = [i for i in sub if nbrs[i] and nbrs[i] <= members]
            if not anchors:
                continue
            rows = [pb[(a, b)] for a, b in combinations(sub, 2)]
            z = plane_normal(np.vstack(rows))
            if z is None:
                continue
            return {"coplanar": sorted(members), "rest": sorted(set(range(n)) - members), "robot": anchors[0], "normal": z}
    return None


# -- empirical noise sweep -------------------------------------------------------

@dataclass
class SweepCurve:
    """Mean certificate eigenvalue versus bearing noise magnitude."""

    xi: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    frac_certified: np.ndarray
    crossing: Optional[float]
    lambda4: float

    def to_csv(self):
        lines = ["xi,mean_cert_eig,stddev,frac_certified"]
        for row in zip(self.xi, self.mean, self.std, self.frac_certified):
            lines.append(",".join(f"{v:.12g}" for v in row))
        return "\n".join(lines) + "\n"


def empirical_noise_sweep(trajs, graph, xi_grid, trials, rng, sample_times=None) -> SweepCurve:
    """Certificate eigenvalue of K rebuilt from bounded-noise bearings.

    For every ξ in the grid, ``trials`` draws perturb both bearings of every
    edge at every sample; K is assembled at the true rotations and its
    certificate eigenvalue recorded. ``crossing`` is the noise magnitude where
    the mean first drops below zero (linear interpolation between grid
    points), or None if it never does.
    """
    from .parallel import child_rngs, pmap

    xi_grid = np.asarray(xi_grid, dtype=float)
    if xi_grid.size == 0 or trials < 1:
        raise InvalidInputError("need a nonempty xi grid and trials >= 1")
    P = _sample_positions(trajs, sample_times)
    n = P.shape[1]
    edges, phi = pair_bearings(P, graph)
    Kh = k_hat_from_positions(P, graph).k
    lam4 = certificate_eigenvalue(Kh)
    tol = 1e-9 * max(1.0, float(np.linalg.norm(Kh)))
    rngs = child_rngs(rng, len(xi_grid))

    def one(args):
        xi, g = args
        Ks = _noisy_k_batch(phi, edges, n, xi, g, trials)
        return np.array([certificate_eigenvalue(K) for K in Ks])

    vals = pmap(one, list(zip(xi_grid, rngs)))
    mean = np.array([v.mean() for v in vals])
    std = np.array([v.std() for v in vals])
    frac = np.array([np.mean(v >= -tol) for v in vals])
    crossing = None
    for k, m in enumerate(mean):
        if m < -tol:
            if k == 0:
                crossing = float(xi_grid[0])
            else:
                x0, x1, m0 = xi_grid[k - 1], xi_grid[k], max(mean[k - 1], 0.0)
                crossing = float(x0 + (x1 - x0) * m0 / (m0 - m))
            break
    return SweepCurve(xi_grid, mean, std, frac, crossing, lam4)
