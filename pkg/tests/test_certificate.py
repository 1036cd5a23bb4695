import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from swarm_cert import certificate as C
from swarm_cert import estimator as E
from swarm_cert import sim
from swarm_cert.errors import DegeneracyError, InvalidInputError
from swarm_cert.model import MatchedPair, Pose, VisibilityGraph, perturb_bounded


def _nullcols(n):
    return np.kron(np.ones((n, 1)), np.eye(3))


def _unit(rng):
    v = rng.standard_normal(3)
    return v / np.linalg.norm(v)


def figure_eight_pair(n_t=40, z=1.0):
    t = np.linspace(0, 2 * np.pi, n_t)
    P = np.zeros((n_t, 2, 3))
    P[:, 0] = np.c_[np.sin(t), np.sin(2 * t) / 2, np.full(n_t, z)]
    P[:, 1] = np.c_[3 + np.cos(t), 0.5 * np.sin(t), np.full(n_t, z)]
    return P


def partition_case(rng, n_t=40):
    """Robots 0,1,2 in a common plane; 3,4 free; robot 0 sees only 1 and 2."""
    P = rng.uniform(-3, 3, (n_t, 5, 3))
    P[:, :3, 2] = 0.5
    g = VisibilityGraph(5, frozenset({(0, 1), (0, 2), (1, 2), (1, 3), (2, 4), (3, 4), (1, 4)}))
    return P, g


# -- K from solutions ---------------------------------------------------------------

def test_certificate_zero_matrix():
    R = np.stack([np.eye(3)] * 3)
    K = C.certificate_from_solution(np.zeros((9, 9)), R, check=True)
    assert not K.k.any() and K.source == "from_solution"


def test_certificate_ground_truth_psd_and_nullspace():
    sc, tr = sim.synthetic_scenario(4, 20, seed=3)
    dm = E.assemble_data_matrix(sc.records, 4)
    R, _ = tr.relative()
    K = C.certificate_from_solution(dm.m, R, check=True)
    assert np.allclose(K.k, K.k.T)
    assert np.linalg.norm(K.k @ _nullcols(4)) <= 1e-9 * np.linalg.norm(K.k)
    assert C.certificate_eigenvalue(K) >= -1e-9


def test_certificate_collinear_noise_goes_negative():
    # δ_ji = 1.5 φ̂ and δ_ij = -0.5 φ̂ give φ_ij = φ_ji = φ̂/2, so K = -K-hat/4
    rng = np.random.default_rng(5)
    P = rng.uniform(-3, 3, (15, 3, 3))
    g = VisibilityGraph.complete(3)
    edges, phi = C.pair_bearings(P, g)
    R = np.stack([np.eye(3)] * 3)
    pairs = []
    for (i, j), f in zip(edges, phi):
        for k in range(len(f)):
            p_ij = f[k] - 0.5 * f[k]
            p_ji = -f[k] + 1.5 * f[k]
            pairs.append(MatchedPair(i, j, float(k), p_ij, p_ji, Pose.identity(), Pose.identity()))
    M = E.assemble_data_matrix(pairs, 3).m
    K = C.certificate_from_solution(M, R, check=True)
    assert C.certificate_eigenvalue(K) < 0
    # the noisy_k path builds the same matrix from world-frame bearings
    K2 = C.noisy_k(0.5 * phi, 0.5 * phi, edges, 3)
    assert np.abs(K.k - K2).max() <= 1e-10


# -- K-hat from trajectories ------------------------------------------------------------

def test_k_hat_axis_bearings_rank_one():
    P = np.zeros((6, 2, 3))
    P[:, 1, 0] = np.where(np.arange(6) % 2, 2.0, -2.0)
    K = C.certificate_from_trajectories(P, VisibilityGraph.complete(2), gram_check=True)
    assert np.linalg.matrix_rank(K.k, tol=1e-9) == 1
    assert abs(C.certificate_eigenvalue(K)) <= 1e-12


def test_k_hat_spanning_bearings_positive():
    P = np.zeros((3, 2, 3))
    P[:, 1] = np.eye(3)
    assert C.certificate_eigenvalue(C.certificate_from_trajectories(P, VisibilityGraph.complete(2))) > 0


def test_k_hat_scale_invariant_and_gram():
    rng = np.random.default_rng(0)
    P = rng.uniform(-2, 2, (25, 4, 3))
    g = VisibilityGraph.cycle(4)
    K1 = C.certificate_from_trajectories(P, g, gram_check=True)
    K2 = C.certificate_from_trajectories(10 * P, g)
    assert np.abs(K1.k - K2.k).max() <= 1e-12
    assert np.linalg.norm(K1.k @ _nullcols(4)) <= 1e-9 * np.linalg.norm(K1.k)


def test_k_hat_coincident_robots_error():
    P = np.zeros((4, 3, 3))
    P[:, 1] = [1.0, 0, 0]
    P[:, 2] = [0, 1.0, 0]
    P[2, 2] = P[2, 0]
    with pytest.raises(DegeneracyError, match=r"\(0, 2\).*sample 2"):
        C.certificate_from_trajectories(P, VisibilityGraph.complete(3))


def test_k_hat_from_trajectory_objects():
    class Line:
        def __init__(self, a, b):
            self.a, self.b = np.asarray(a, float), np.asarray(b, float)

        def eval(self, t, order=0):
            return self.a + t * self.b

    trajs = [Line([0, 0, 0], [1, 0, 0]), Line([0, 3, 0], [0, 0, 1]), Line([2, 0, 1], [0, 1, 1])]
    times = np.linspace(0, 2, 9)
    P = np.stack([np.array([tr.eval(t) for t in times]) for tr in trajs], axis=1)
    g = VisibilityGraph.complete(3)
    assert np.allclose(C.certificate_from_trajectories(trajs, g, times).k, C.certificate_from_trajectories(P, g).k)
    with pytest.raises(InvalidInputError):
        C.certificate_from_trajectories(trajs, g)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(2, 6))
def test_k_hat_always_psd(seed, n):
    rng = np.random.default_rng(seed)
    P = rng.uniform(-3, 3, (int(rng.integers(1, 20)), n, 3))
    K = C.certificate_from_trajectories(P, VisibilityGraph.complete(n))
    assert C.certificate_eigenvalue(K) >= -1e-9 * np.linalg.norm(K.k)


# -- certificate eigenvalue ------------------------------------------------------------------

def test_certificate_eigenvalue_zero_and_coplanar():
    assert C.certificate_eigenvalue(np.zeros((9, 9))) == 0.0
    K = C.certificate_from_trajectories(figure_eight_pair(), VisibilityGraph.complete(2))
    assert abs(C.certificate_eigenvalue(K)) <= 1e-9


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_certificate_eigenvalue_matches_shift(seed):
    # the two definitions coincide whenever 1 ⊗ I3 spans part of the nullspace of K
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 6))
    K = C.certificate_from_trajectories(rng.uniform(-3, 3, (10, n, 3)), VisibilityGraph.complete(n)).k
    lam, v = C.certificate_eigenvalue(K, return_vector=True)
    assert abs(lam - C.certificate_eigenvalue_shift(K)) <= 1e-8 * max(1, np.linalg.norm(K))
    assert abs(v @ K @ v - lam) <= 1e-9 * max(1, np.linalg.norm(K))
    assert np.abs(_nullcols(n).T @ v).max() <= 1e-10


def test_certificate_eigenvalue_matches_shift_at_solution():
    from swarm_cert.model import NoiseModel
    for seed in range(3):
        sc, _ = sim.synthetic_scenario(4, 15, noise=NoiseModel("bounded", xi=0.1, seed=seed), seed=seed)
        dm = E.assemble_data_matrix(sc.records, 4)
        res = E.estimate(sc.records, 4)
        K = C.certificate_from_solution(dm.m, res.rotations, check=True)
        assert abs(C.certificate_eigenvalue(K) - C.certificate_eigenvalue_shift(K)) <= 1e-8 * max(1, np.linalg.norm(K.k))


# -- perturbation decomposition -----------------------------------------------------------------

def test_perturbation_zero():
    d = C.perturbation_decomposition([0, 0, 1.0], np.zeros(3), np.zeros(3))
    assert not d.dq.any() and not d.u1.any() and not d.u2.any()
    assert d.reconstruction_error == 0.0 and d.eigen_residual == 0.0


def test_perturbation_collinear_has_no_positive_eigenvalue():
    ph = np.array([0.0, 0.6, 0.8])
    d = C.perturbation_decomposition(ph, np.array([0.1, 0.0, 0.0]), 0.3 * ph)
    assert np.all(d.u1 <= 1e-15)
    ev = np.linalg.eigvals(d.w1)
    assert np.all(ev.real <= 1e-12)
    assert np.isclose(np.sort(ev.real)[0], -0.6)


def test_perturbation_rejects_non_unit():
    with pytest.raises(InvalidInputError):
        C.perturbation_decomposition([0, 0, 2.0], np.zeros(3), np.zeros(3))


def test_perturbation_eigen_relation_random_trials():
    # oracle: ΔQ_s rebuilt directly from the four bearings, independent of the split
    rng = np.random.default_rng(11)
    worst_split = worst_eig = worst_sim = worst_u = 0.0
    for _ in range(10_000):
        ph = _unit(rng)
        xi_ij, xi_ji = rng.uniform(0, 0.3, 2)
        p_ij = perturb_bounded(ph, xi_ij, rng)
        p_ji = perturb_bounded(-ph, xi_ji, rng)
        d = C.perturbation_decomposition(ph, p_ij - ph, p_ji + ph)
        A, Ah = np.outer(p_ij, p_ji), -np.outer(ph, ph)
        dq = np.block([[-(A - Ah), A - Ah], [(A - Ah).T, -(A - Ah).T]])
        worst_split = max(worst_split, np.abs(d.w1 + d.w2 - dq).max(), np.abs(d.dq - dq).max())
        worst_eig = max(worst_eig, d.eigen_residual)
        worst_sim = max(worst_sim, d.similarity_error)
        u1 = [-xi_ji - (p_ji + ph) @ ph, xi_ji - (p_ji + ph) @ ph]
        u2 = [-xi_ij - (p_ij - ph) @ p_ji, xi_ij - (p_ij - ph) @ p_ji]
        worst_u = max(worst_u, np.abs(d.u1[:2] - u1).max(), np.abs(d.u2[:2] - u2).max())
    assert worst_split <= 1e-14
    assert worst_eig <= 1e-10
    assert worst_sim <= 1e-10
    assert worst_u <= 1e-12


def test_perturbation_spectrum_signature():
    rng = np.random.default_rng(2)
    ph = _unit(rng)
    d = C.perturbation_decomposition(ph, perturb_bounded(ph, 0.2, rng) - ph, perturb_bounded(-ph, 0.1, rng) + ph)
    for w, u in ((d.w1, d.u1), (d.w2, d.u2)):
        ev = np.sort(np.linalg.eigvals(w).real)
        assert np.allclose(ev, np.sort(u), atol=1e-12)
        assert u[0] < 0 < u[1]


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.0, 1.9))
def test_unit_preserving_perturbation_identity(seed, xi):
    rng = np.random.default_rng(seed)
    ph = _unit(rng)
    delta = perturb_bounded(ph, xi, rng) - ph
    assert abs(ph @ delta + xi**2 / 2) <= 1e-12
    assert abs(np.linalg.norm(delta) - xi) <= 1e-12


# -- noise bound ----------------------------------------------------------------------------------

def test_eigenvalue_bound_values():
    assert C.eigenvalue_bound(VisibilityGraph.star(6), 50, 0.0) == 0.0
    assert C.eigenvalue_bound(VisibilityGraph.star(4), 100, 0.05) == pytest.approx(42.95346318982906, abs=1e-12)
    b5 = C.eigenvalue_bound(VisibilityGraph.cycle(5), 10, 0.1)
    b9 = C.eigenvalue_bound(VisibilityGraph.cycle(9), 10, 0.1)
    assert b5 == b9 == pytest.approx(4 * 10 * np.sqrt(0.021))
    assert C.eigenvalue_bound(VisibilityGraph.complete(5), 7, 0.1) == C.eigenvalue_bound(VisibilityGraph.star(5), 7, 0.1)
    with pytest.raises(InvalidInputError):
        C.eigenvalue_bound(VisibilityGraph.star(3), 0, 0.1)
    with pytest.raises(InvalidInputError):
        C.eigenvalue_bound(VisibilityGraph.star(3), 5, 2.0)


def test_bound_holds_and_weyl_consistency():
    rng = np.random.default_rng(3)
    P = rng.uniform(-3, 3, (20, 4, 3))
    g = VisibilityGraph.star(4)
    B = C.eigenvalue_bound(g, 20, 0.1)
    r = C.perturbation_spectral_radius(P, g, 0.1, 500, rng)
    assert r.max() <= B
    lam4 = C.certificate_eigenvalue(C.certificate_from_trajectories(P, g))
    edges, phi = C.pair_bearings(P, g)
    for _ in range(50):
        K = C.noisy_k(perturb_bounded(phi, 0.1, rng), perturb_bounded(-phi, 0.1, rng), edges, 4)
        dk = K - C.k_hat_from_positions(P, g).k
        rad = np.abs(np.linalg.eigvalsh(dk)).max()
        assert C.certificate_eigenvalue_shift(K) >= lam4 - rad - 1e-9


# -- degeneration ---------------------------------------------------------------------------------

def test_degeneration_planar_pair():
    rep = C.detect_degeneration(figure_eight_pair(), VisibilityGraph.complete(2))
    assert rep.degenerate and rep.mechanism == "pairwise_coplanar"
    assert abs(abs(rep.witness["normal"][2]) - 1) <= 1e-9
    assert rep.lambda4 <= 1e-8 * rep.k_norm


def test_degeneration_partition_case():
    P, g = partition_case(np.random.default_rng(4))
    rep = C.detect_degeneration(P, g)
    assert rep.degenerate and rep.mechanism == "partition_condition"
    assert rep.witness["coplanar"] == [0, 1, 2] and rep.witness["rest"] == [3, 4]
    assert rep.witness["robot"] == 0
    assert abs(abs(rep.witness["normal"][2]) - 1) <= 1e-9


def test_partition_needs_isolated_robot():
    # same geometry, but every coplanar robot also sees a free robot
    P, _ = partition_case(np.random.default_rng(4))
    g = VisibilityGraph(5, frozenset({(0, 1), (0, 2), (1, 2), (0, 3), (1, 3), (2, 4), (3, 4)}))
    rep = C.detect_degeneration(P, g)
    assert not rep.degenerate and rep.lambda4 > 1e-4 * rep.k_norm


def test_degeneration_generic_3d():
    P = np.random.default_rng(6).uniform(-3, 3, (40, 3, 3))
    rep = C.detect_degeneration(P, VisibilityGraph.complete(3))
    assert not rep.degenerate and rep.mechanism is None
    assert rep.lambda4 > 1e-4 * rep.k_norm


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_structural_positive_implies_numeric(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 6))
    P = rng.uniform(-3, 3, (15, n, 3))
    k = int(rng.integers(2, n + 1))
    P[:, :k, 2] = rng.uniform(-1, 1)
    edges = {(a, b) for a in range(k) for b in range(a + 1, k)}
    edges |= {(a, b) for a in range(1, n) for b in range(max(a + 1, k), n)}
    g = VisibilityGraph(n, frozenset(edges))
    rep = C.detect_degeneration(P, g)
    assert rep.degenerate
    assert rep.mechanism in ("pairwise_coplanar", "partition_condition")
    assert rep.lambda4 <= 1e-8 * rep.k_norm


def test_plane_normal():
    assert C.plane_normal(np.zeros((0, 3))) is None
    z = C.plane_normal([[1, 0, 0], [0, 1, 0], [1, 1, 0]])
    assert np.allclose(np.abs(z), [0, 0, 1])
    assert C.plane_normal(np.eye(3)) is None


# -- noise sweep ------------------------------------------------------------------------------------

def test_sweep_grid_zero_is_lambda4():
    P = np.random.default_rng(8).uniform(-3, 3, (20, 3, 3))
    g = VisibilityGraph.complete(3)
    cur = C.empirical_noise_sweep(P, g, [0.0], 5, np.random.default_rng(0))
    lam4 = C.certificate_eigenvalue(C.certificate_from_trajectories(P, g))
    assert abs(cur.mean[0] - lam4) <= 1e-12 * max(1, abs(lam4))
    assert cur.std[0] <= 1e-9 and cur.frac_certified[0] == 1.0
    assert cur.crossing is None


def test_sweep_degenerate_has_no_resistance():
    cur = C.empirical_noise_sweep(figure_eight_pair(), VisibilityGraph.complete(2), [0.0, 0.01, 0.05], 40,
                                  np.random.default_rng(1))
    assert abs(cur.mean[0]) <= 1e-9
    assert cur.mean[1] < 0 and cur.mean[2] < cur.mean[1]
    assert cur.crossing is not None and cur.crossing <= 0.01


def test_sweep_csv_and_determinism():
    P = np.random.default_rng(9).uniform(-3, 3, (10, 3, 3))
    g = VisibilityGraph.complete(3)
    a = C.empirical_noise_sweep(P, g, [0.0, 0.1, 0.5], 10, np.random.default_rng(42)).to_csv()
    b = C.empirical_noise_sweep(P, g, [0.0, 0.1, 0.5], 10, np.random.default_rng(42)).to_csv()
    assert a == b
    lines = a.strip().split("\n")
    assert lines[0] == "xi,mean_cert_eig,stddev,frac_certified" and len(lines) == 4
    with pytest.raises(InvalidInputError):
        C.empirical_noise_sweep(P, g, [], 10, np.random.default_rng(0))
