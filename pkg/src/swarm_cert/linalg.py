"""Small dense linear algebra: symmetric eigensolver, 3x3 SVD, SO(3) helpers, 3D hull.

The symmetric eigensolver is a cyclic Jacobi method. A compiled kernel is
used when it was built; set ``SWARM_CERT_PURE=1`` to force the NumPy
fallback (used by the kernel benchmark and the parity tests).
"""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import _jacobi_py
from .errors import DegeneracyError, InvalidInputError

try:
    if os.environ.get("SWARM_CERT_PURE", "") not in ("", "0"):
        raise ImportError("pure backend forced")
    from . import _jacobi as _jacobi_c

    _kernel = _jacobi_c.jacobi_eigh
    BACKEND = "cython"
except ImportError:
    _jacobi_c = None
    _kernel = _jacobi_py.jacobi_eigh
    BACKEND = "python"

MAX_EIG_DIM = 192
JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 60


def kernels():
    """Available Jacobi kernels keyed by backend name."""
    out = {"python": _jacobi_py.jacobi_eigh}
    if _jacobi_c is not None:
        out["cython"] = _jacobi_c.jacobi_eigh
    return out


@dataclass
class EigenDecomposition:
    """Eigenvalues ascending with matching orthonormal eigenvector columns."""

    values: np.ndarray
    vectors: np.ndarray
    sweeps: int = 0


def as_symmetric(a, name="matrix"):
    """Validate a square finite array and return its exact symmetric part."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise InvalidInputError(f"{name} must be a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return 0.5 * (a + a.T)


def sym_eig(a, kernel=None) -> EigenDecomposition:
    """Full eigendecomposition of a symmetric matrix by cyclic Jacobi sweeps.

    Args:
        a: (n, n) symmetric array, n <= 192. The symmetric part is used.
        kernel: optional override of the Jacobi kernel (for benchmarks).

    Returns:
        EigenDecomposition with ascending values.
    """
    a = as_symmetric(a)
    if a.shape[0] > MAX_EIG_DIM:
        raise InvalidInputError(f"dimension {a.shape[0]} exceeds {MAX_EIG_DIM}")
    vals, vecs, sweeps = (kernel or _kernel)(a, JACOBI_TOL, JACOBI_MAX_SWEEPS)
    order = np.argsort(vals, kind="stable")
    return EigenDecomposition(vals[order], vecs[:, order], int(sweeps))


def sym_eigvals(a) -> np.ndarray:
    return sym_eig(a).values


def _unit_orthogonal(cols):
    """A unit vector orthogonal to the given (already orthonormal) columns."""
    if len(cols) == 2:
        return np.cross(cols[0], cols[1])
    if not cols:
        return np.array([1.0, 0.0, 0.0])
    u = cols[0]
    e = np.zeros(3)
    e[int(np.argmin(np.abs(u)))] = 1.0
    w = e - u * (u @ e)
    return w / np.linalg.norm(w)


def svd3(a):
    """SVD of a 3x3 matrix through the eigendecomposition of ``a.T @ a``.

    Returns:
        (U, sigma, V) with ``a = U @ diag(sigma) @ V.T`` and sigma descending.
    """
    a = np.asarray(a, dtype=float)
    if a.shape != (3, 3):
        raise InvalidInputError(f"svd3 expects a 3x3 matrix, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError("svd3 input has non-finite entries")
    eig = sym_eig(a.T @ a)
    V = eig.vectors[:, ::-1].copy()
    if np.linalg.det(V) < 0:
        V[:, 2] = -V[:, 2]
    B = a @ V
    scale = max(1.0, np.linalg.norm(a))
    cols = []
    sigma = np.zeros(3)
    for i in range(3):
        r = B[:, i].copy()
        for u in cols:
            r -= u * (u @ r)
        nr = np.linalg.norm(r)
        if nr > 1e-13 * scale:
            u = r / nr
        else:
            # repeated zero singular values: complete the basis
            u = _unit_orthogonal(cols)
        s = u @ B[:, i]
        if s < 0:
            u = -u
            s = -s
        cols.append(u)
        sigma[i] = s
    U = np.column_stack(cols)
    order = np.argsort(-sigma, kind="stable")
    return U[:, order], sigma[order], V[:, order]


def project_so3(y, tol=1e-10):
    """Nearest rotation to ``y`` in Frobenius norm.

    Returns:
        (R, ambiguous). ``ambiguous`` is set when the nearest rotation is not
        unique (rank <= 1, or a reflection with a repeated smallest singular
        value); R is still a valid rotation in that case.
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (3, 3) or not np.all(np.isfinite(y)):
        raise InvalidInputError("project_so3 expects a finite 3x3 matrix")
    if not np.any(y):
        raise InvalidInputError("project_so3 of the zero matrix is undefined")
    U, s, V = svd3(y)
    d = 1.0 if np.linalg.det(U @ V.T) > 0 else -1.0
    R = U @ np.diag([1.0, 1.0, d]) @ V.T
    ambiguous = bool(s[1] <= tol * s[0] or (d < 0 and s[1] - s[2] <= tol * s[0]))
    return R, ambiguous


def hat(w):
    """Skew-symmetric matrix with ``hat(w) @ x == cross(w, x)``."""
    return np.array([[0.0, -w[2], w[1]], [w[2], 0.0, -w[0]], [-w[1], w[0], 0.0]])


def vee(S):
    return np.array([S[2, 1], S[0, 2], S[1, 0]])


def so3_exp(w):
    """Rodrigues exponential map."""
    w = np.asarray(w, dtype=float)
    th = np.linalg.norm(w)
    K = hat(w)
    if th < 1e-8:
        return np.eye(3) + K + 0.5 * K @ K
    return np.eye(3) + np.sin(th) / th * K + (1 - np.cos(th)) / th**2 * K @ K


def so3_log(R):
    """Rotation vector of R (angle in [0, pi])."""
    c = np.clip(0.5 * (np.trace(R) - 1.0), -1.0, 1.0)
    th = np.arccos(c)
    if th < 1e-8:
        return vee(R - R.T) * 0.5
    if np.pi - th < 1e-6:
        # near pi: axis from the symmetric part
        B = 0.5 * (R + np.eye(3))
        k = int(np.argmax(np.diag(B)))
        axis = B[:, k] / np.sqrt(max(B[k, k], 1e-300))
        axis /= np.linalg.norm(axis)
        if vee(R - R.T) @ axis < 0:
            axis = -axis
        return th * axis
    return th / (2 * np.sin(th)) * vee(R - R.T)


def rotation_angle(Ra, Rb):
    """Geodesic angle between two rotations, radians."""
    return float(np.arccos(np.clip(0.5 * (np.trace(Ra.T @ Rb) - 1.0), -1.0, 1.0)))


def rot_z(yaw):
    c, s = np.cos(yaw), np.sin(yaw)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def yaw_of(R):
    return float(np.arctan2(R[1, 0], R[0, 0]))


def random_rotation(rng):
    """Haar-uniform rotation from a normalized Gaussian quaternion."""
    q = rng.standard_normal(4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


# ---------------------------------------------------------------------------
# convex hull


@dataclass
class HullFace:
    normal: np.ndarray
    point: np.ndarray
    vertices: tuple


def _plane(pts, a, b, c):
    n = np.cross(pts[b] - pts[a], pts[c] - pts[a])
    nn = np.linalg.norm(n)
    if nn == 0.0:
        return None
    return n / nn


def convex_hull_3d(points):
    """Incremental quickhull.

    Args:
        points: (n, 3) array, n >= 4, not all coplanar.

    Returns:
        list of HullFace (triangles) with outward unit normals.

    Raises:
        DegeneracyError: collinear or coplanar input.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise InvalidInputError("convex_hull_3d expects an (n, 3) array")
    if not np.all(np.isfinite(pts)):
        raise InvalidInputError("convex_hull_3d input has non-finite entries")
    if pts.shape[0] < 4:
        raise DegeneracyError("need at least 4 points")
    bbox = float(np.linalg.norm(pts.max(0) - pts.min(0)))
    eps = 1e-10 * bbox
    if bbox == 0.0:
        raise DegeneracyError("all points coincide")

    # initial simplex from extreme points
    i0 = int(np.argmin(pts[:, 0]))
    i1 = int(np.argmax(np.linalg.norm(pts - pts[i0], axis=1)))
    d01 = pts[i1] - pts[i0]
    if np.linalg.norm(d01) <= eps:
        raise DegeneracyError("all points coincide")
    d01 = d01 / np.linalg.norm(d01)
    rel = pts - pts[i0]
    line_dist = np.linalg.norm(rel - np.outer(rel @ d01, d01), axis=1)
    i2 = int(np.argmax(line_dist))
    if line_dist[i2] <= eps:
        raise DegeneracyError("points are collinear")
    n012 = _plane(pts, i0, i1, i2)
    plane_dist = rel @ n012
    i3 = int(np.argmax(np.abs(plane_dist)))
    if abs(plane_dist[i3]) <= eps:
        raise DegeneracyError("points are coplanar")

    centroid = pts[[i0, i1, i2, i3]].mean(0)
    faces = {}  # id -> [a, b, c, normal]
    edges = {}  # directed edge -> face id
    outside = {}
    next_id = [0]

    def add_face(a, b, c):
        n = _plane(pts, a, b, c)
        if n is None:
            n = np.zeros(3)
        fid = next_id[0]
        next_id[0] += 1
        faces[fid] = (a, b, c, n)
        edges[(a, b)] = fid
        edges[(b, c)] = fid
        edges[(c, a)] = fid
        outside[fid] = []
        return fid

    def remove_face(fid):
        a, b, c, _ = faces.pop(fid)
        for e in ((a, b), (b, c), (c, a)):
            if edges.get(e) == fid:
                del edges[e]
        return outside.pop(fid)

    simplex = [i0, i1, i2, i3]
    for a, b, c in ((i0, i1, i2), (i0, i1, i3), (i0, i2, i3), (i1, i2, i3)):
        n = _plane(pts, a, b, c)
        if n @ (centroid - pts[a]) > 0:
            b, c = c, b
        add_face(a, b, c)

    def assign(cands, fids):
        if len(cands) == 0:
            return
        cands = np.asarray(cands)
        fids = list(fids)
        N = np.array([faces[f][3] for f in fids])
        A = np.array([pts[faces[f][0]] for f in fids])
        dist = pts[cands] @ N.T - np.sum(N * A, axis=1)[None, :]
        best = np.argmax(dist, axis=1)
        for k, p in enumerate(cands):
            if dist[k, best[k]] > eps:
                outside[fids[best[k]]].append(int(p))

    rest = [i for i in range(len(pts)) if i not in simplex]
    assign(rest, list(faces))

    def expand():
        pending = [f for f in faces if outside[f]]
        while pending:
            fid = pending.pop()
            if fid not in faces or not outside[fid]:
                continue
            a0, b0, c0, n0 = faces[fid]
            cand = outside[fid]
            d = pts[cand] @ n0 - n0 @ pts[a0]
            p = cand[int(np.argmax(d))]
            # visible set by flood fill across shared edges
            visible = {fid}
            stack = [fid]
            while stack:
                f = stack.pop()
                a, b, c, _ = faces[f]
                for u, v in ((a, b), (b, c), (c, a)):
                    g = edges.get((v, u))
                    if g is None or g in visible:
                        continue
                    ga, _, _, gn = faces[g]
                    if gn @ (pts[p] - pts[ga]) > eps:
                        visible.add(g)
                        stack.append(g)
            horizon = []
            for f in visible:
                a, b, c, _ = faces[f]
                for u, v in ((a, b), (b, c), (c, a)):
                    if edges.get((v, u)) not in visible:
                        horizon.append((u, v))
            freed = []
            for f in visible:
                freed.extend(remove_face(f))
            new = [add_face(u, v, p) for u, v in horizon]
            freed = [q for q in freed if q != p]
            assign(freed, new)
            pending.extend(f for f in new if outside[f])

    expand()
    # safety net: any point still outside some face gets reinserted
    for _ in range(10):
        fids = list(faces)
        N = np.array([faces[f][3] for f in fids])
        A = np.array([pts[faces[f][0]] for f in fids])
        dist = pts @ N.T - np.sum(N * A, axis=1)[None, :]
        bad = np.where(dist.max(1) > eps)[0]
        if len(bad) == 0:
            break
        assign(bad, fids)
        expand()

    return [HullFace(n.copy(), pts[a].copy(), (a, b, c)) for a, b, c, n in faces.values()]


def hull_halfspaces(faces):
    """(A, b) with rows n_k and offsets n_k . a_k so that the hull is A x <= b."""
    A = np.array([f.normal for f in faces])
    b = np.array([f.normal @ f.point for f in faces])
    return A, b
