import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from swarm_cert import linalg
from swarm_cert.errors import DegeneracyError, InvalidInputError


def cubic_roots_sym3(A):
    """Closed-form eigenvalues of a symmetric 3x3 via the trigonometric cubic."""
    q = np.trace(A) / 3.0
    p1 = A[0, 1] ** 2 + A[0, 2] ** 2 + A[1, 2] ** 2
    p2 = (A[0, 0] - q) ** 2 + (A[1, 1] - q) ** 2 + (A[2, 2] - q) ** 2 + 2 * p1
    p = np.sqrt(p2 / 6.0)
    B = (A - q * np.eye(3)) / p
    r = np.clip(np.linalg.det(B) / 2.0, -1.0, 1.0)
    phi = np.arccos(r) / 3.0
    e1 = q + 2 * p * np.cos(phi)
    e3 = q + 2 * p * np.cos(phi + 2 * np.pi / 3)
    return np.sort([e1, 3 * q - e1 - e3, e3])


def random_sym(rng, n):
    A = rng.standard_normal((n, n))
    return A + A.T


def test_sym_eig_identity_and_diagonal():
    e = linalg.sym_eig(np.eye(3))
    assert np.allclose(e.values, 1.0)
    assert np.allclose(e.vectors.T @ e.vectors, np.eye(3))
    e = linalg.sym_eig(np.diag([3.0, 1.0, 2.0]))
    assert np.allclose(e.values, [1.0, 2.0, 3.0])


def test_sym_eig_matches_cubic_roots():
    rng = np.random.default_rng(3)
    for _ in range(50):
        A = random_sym(rng, 3)
        assert np.allclose(linalg.sym_eig(A).values, cubic_roots_sym3(A), atol=1e-8, rtol=0)


@pytest.mark.parametrize("name", list(linalg.kernels()))
@pytest.mark.parametrize("n", [1, 2, 5, 12, 31, 64])
def test_sym_eig_residual_invariants(name, n):
    rng = np.random.default_rng(n)
    A = random_sym(rng, n)
    e = linalg.sym_eig(A, kernel=linalg.kernels()[name])
    V, lam = e.vectors, e.values
    assert np.all(np.diff(lam) >= 0)
    assert np.abs(V.T @ V - np.eye(n)).max() <= 1e-10
    assert np.abs(A @ V - V * lam).max() <= 1e-8 * max(1.0, np.linalg.norm(A))


def test_sym_eig_backends_agree():
    ks = linalg.kernels()
    if len(ks) < 2:
        pytest.skip("compiled kernel not built")
    rng = np.random.default_rng(11)
    A = random_sym(rng, 24)
    a = linalg.sym_eig(A, kernel=ks["python"]).values
    b = linalg.sym_eig(A, kernel=ks["cython"]).values
    assert np.allclose(a, b, atol=1e-10)


def test_sym_eig_rejects_nonfinite():
    A = np.eye(3)
    A[0, 1] = np.nan
    with pytest.raises(InvalidInputError):
        linalg.sym_eig(A)


def test_sym_eig_rejects_oversize():
    with pytest.raises(InvalidInputError):
        linalg.sym_eig(np.eye(193))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 10), st.integers(0, 2**31 - 1))
def test_sym_eig_orthogonal_similarity_invariance(n, seed):
    rng = np.random.default_rng(seed)
    A = random_sym(rng, n)
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    a = linalg.sym_eig(A).values
    b = linalg.sym_eig(Q @ A @ Q.T).values
    assert np.allclose(a, b, atol=1e-8)


def test_svd3_trivial_cases():
    _, s, _ = linalg.svd3(np.eye(3))
    assert np.allclose(s, 1.0)
    _, s, _ = linalg.svd3(np.diag([2.0, 0.0, 0.0]))
    assert np.allclose(s, [2.0, 0.0, 0.0])


@pytest.mark.parametrize(
    "A",
    [
        np.zeros((3, 3)),
        np.diag([1.0, 1.0, 0.0]),
        np.diag([2.0, 2.0, 5.0]),
        np.outer([1.0, 2.0, 3.0], [3.0, 1.0, 0.0]),
        -np.eye(3),
    ],
)
def test_svd3_repeated_and_rank_deficient(A):
    U, s, V = linalg.svd3(A)
    assert np.all(s >= 0) and np.all(np.diff(s) <= 1e-15)
    assert np.abs(U.T @ U - np.eye(3)).max() < 1e-12
    assert np.abs(V.T @ V - np.eye(3)).max() < 1e-12
    assert np.abs(U @ np.diag(s) @ V.T - A).max() <= 1e-10 * max(1.0, np.linalg.norm(A))


def test_svd3_random_against_eig_oracle():
    rng = np.random.default_rng(5)
    for _ in range(100):
        A = rng.standard_normal((3, 3)) * rng.uniform(0.1, 10)
        U, s, V = linalg.svd3(A)
        assert np.abs(U @ np.diag(s) @ V.T - A).max() <= 1e-10 * max(1.0, np.linalg.norm(A))
        lam = linalg.sym_eig(A.T @ A).values[::-1]
        assert np.allclose(s**2, lam, atol=1e-9 * max(1.0, lam[0]))


def test_project_so3_fixed_point_and_scale():
    rng = np.random.default_rng(7)
    R = linalg.random_rotation(rng)
    P, amb = linalg.project_so3(R)
    assert np.allclose(P, R, atol=1e-12) and not amb
    P, _ = linalg.project_so3(5 * np.eye(3))
    assert np.allclose(P, np.eye(3))


def test_project_so3_output_is_rotation():
    rng = np.random.default_rng(8)
    for _ in range(50):
        R, _ = linalg.project_so3(rng.standard_normal((3, 3)))
        assert np.abs(R.T @ R - np.eye(3)).max() < 1e-10
        assert abs(np.linalg.det(R) - 1.0) < 1e-10


def test_project_so3_ambiguity_flag():
    R, amb = linalg.project_so3(np.diag([1.0, 1.0, -1.0]))
    assert amb
    assert abs(np.linalg.det(R) - 1.0) < 1e-12
    _, amb = linalg.project_so3(np.diag([3.0, 0.0, 0.0]))
    assert amb
    with pytest.raises(InvalidInputError):
        linalg.project_so3(np.zeros((3, 3)))


def test_project_so3_beats_sampled_rotations():
    rng = np.random.default_rng(9)
    Y = rng.standard_normal((3, 3))
    R, _ = linalg.project_so3(Y)
    ours = np.linalg.norm(Y - R)
    best, best_R = np.inf, None
    for _ in range(10):
        q = rng.standard_normal((100_000, 4))
        q /= np.linalg.norm(q, axis=1, keepdims=True)
        w, x, y, z = q.T
        Rs = np.stack(
            [
                1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
                2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
                2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y),
            ],
            axis=1,
        ).reshape(-1, 3, 3)
        d = np.linalg.norm((Rs - Y).reshape(-1, 9), axis=1)
        k = int(np.argmin(d))
        if d[k] < best:
            best, best_R = d[k], Rs[k]
    assert ours <= best + 1e-12
    assert linalg.rotation_angle(R, best_R) < 0.1


def test_hull_cube():
    pts = np.array([[x, y, z] for x in (0, 1) for y in (0, 1) for z in (0, 1)], float)
    faces = linalg.convex_hull_3d(pts)
    assert len(faces) == 12
    normals = {tuple(np.round(f.normal, 9)) for f in faces}
    expected = {tuple(s * e) for s in (1.0, -1.0) for e in np.eye(3)}
    assert normals == expected


def test_hull_tetrahedron():
    pts = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], float)
    faces = linalg.convex_hull_3d(pts)
    assert len(faces) == 4
    centroid = pts.mean(0)
    for f in faces:
        assert f.normal @ (centroid - f.point) < 0


def test_hull_sphere_membership():
    rng = np.random.default_rng(4)
    pts = rng.standard_normal((200, 3))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    faces = linalg.convex_hull_3d(pts)
    A, b = linalg.hull_halfspaces(faces)
    assert np.max(pts @ A.T - b) <= 1e-9
    # every sphere point is extreme, so every point is a vertex
    verts = {v for f in faces for v in f.vertices}
    assert len(verts) == 200
    # Euler: triangulated sphere with V vertices has 2V - 4 faces
    assert len(faces) == 2 * 200 - 4


def test_hull_interior_points_dropped():
    rng = np.random.default_rng(12)
    pts = np.vstack([rng.uniform(-1, 1, (500, 3)), np.array([[x, y, z] for x in (-2, 2) for y in (-2, 2) for z in (-2, 2)])])
    faces = linalg.convex_hull_3d(pts)
    verts = {v for f in faces for v in f.vertices}
    assert verts == set(range(500, 508))


def test_hull_degenerate_input():
    with pytest.raises(DegeneracyError):
        linalg.convex_hull_3d(np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0], [2, 3, 0]], float))
    with pytest.raises(DegeneracyError):
        linalg.convex_hull_3d(np.array([[0, 0, 0], [1, 1, 1], [2, 2, 2], [3, 3, 3]], float))


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_hull_permutation_invariance(seed):
    rng = np.random.default_rng(seed)
    pts = rng.standard_normal((60, 3))
    perm = rng.permutation(60)
    f1 = linalg.convex_hull_3d(pts)
    f2 = linalg.convex_hull_3d(pts[perm])
    key = lambda faces, idx: {frozenset(idx[v] for v in f.vertices) for f in faces}
    assert key(f1, np.arange(60)) == key(f2, perm)


def test_so3_exp_log_roundtrip():
    rng = np.random.default_rng(2)
    for _ in range(50):
        w = rng.standard_normal(3)
        w *= rng.uniform(0, np.pi - 1e-3) / np.linalg.norm(w)
        assert np.allclose(linalg.so3_log(linalg.so3_exp(w)), w, atol=1e-9)
