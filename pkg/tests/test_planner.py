import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from swarm_cert.certificate import eigenvalue_bound, k_hat_from_positions
from swarm_cert.errors import InfeasiblePlanError, InvalidInputError, UnreachableError
from swarm_cert.model import VisibilityGraph
from swarm_cert.planner import (ObstacleField, PlannerConfig, SwarmProblem, build_star_polytope, certifiability_penalty,
                                lambda4_and_grad, lbfgs, optimize_swarm, plan_swarm, psi, random_field,
                                raycast_waypoints, search_center_path)
from swarm_cert.planner.polytope import flip, flip_jacobian
from swarm_cert.trajectory import BoundaryState

BIG = ((-10, -10, -10), (10, 10, 10))


def wall_with_gap():
    # wall x ∈ [2, 2.4] spanning y, z except a gap around y ∈ [2, 4]
    return ObstacleField([], [((2, -8, -8), (2.4, 2, 8)), ((2, 4, -8), (2.4, 8, 8))], BIG)


def random_problem(rng, N=3, M=4, cfg=None, with_field=True):
    cfg = cfg or PlannerConfig(xi_max=0.1, v_max=0.5, a_max=0.5, d_r=3.0, d_s=1.0, d_v=1.0)
    field = ObstacleField([((2, 2, 0), 1.0)], [((4, -1, -1), (5, 1, 1))], BIG) if with_field else ObstacleField()
    starts = [BoundaryState.rest(rng.normal(size=3) * 2) for _ in range(N)]
    ends = [BoundaryState.rest(rng.normal(size=3) * 2 + [6, 0, 0]) for _ in range(N)]
    centers = np.linspace([-1, -3, 0], [7, -3, 0], M + 1)
    polys = [build_star_polytope(field, c, 2.0) for c in centers]
    pr = SwarmProblem(starts, ends, M, VisibilityGraph.complete(N), cfg, field, polys)
    W = rng.normal(size=(N, M - 1, 3)) * 2 + np.linspace(0, 6, M + 1)[1:-1, None] * [1, 0, 0]
    return pr, pr.pack(W, rng.uniform(1, 2, M) * 1.5)


def central_fd(f, x, h=1e-6):
    g = np.zeros_like(x)
    for k in range(len(x)):
        e = np.zeros_like(x)
        e[k] = h
        g[k] = (f(x + e) - f(x - e)) / (2 * h)
    return g


# -- obstacle field ------------------------------------------------------------------

def test_field_distance_values_and_gradient():
    f = ObstacleField([((0, 0, 0), 1.0)], [((3, -1, -1), (5, 1, 1))], BIG)
    d, g = f.distance(np.array([[0, 0, 2.0], [2.0, 0, 0], [4, 0, 0.5], [6, 2, 1]]), grad=True)
    # the point (2,0,0) is 1 from the sphere and 1 from the box face; the box wins ties only if strictly closer
    assert np.allclose(d, [1.0, 1.0, -0.5, np.sqrt(2)])
    assert np.allclose(g[0], [0, 0, 1]) and np.allclose(g[2], [0, 0, 1])
    rng = np.random.default_rng(0)
    for p in rng.uniform(-3, 7, (30, 3)):
        fd = central_fd(lambda q: float(f.distance(q[None])[0]), p)
        assert np.allclose(fd, f.distance(p[None], grad=True)[1][0], atol=1e-5)


def test_field_validation_and_surface_sampling():
    with pytest.raises(InvalidInputError):
        ObstacleField([((9.5, 0, 0), 1.0)], [], BIG)
    with pytest.raises(InvalidInputError):
        ObstacleField([], [((1, 1, 1), (0, 2, 2))], BIG)
    f = ObstacleField([((0, 0, 0), 1.0)], [((3, -1, -1), (4, 1, 1))], BIG)
    pts = f.surface_points([0, 0, 0], 10.0, 0.1)
    assert np.allclose(np.abs(f.distance(pts)), 0.0, atol=1e-9)
    assert len(f.surface_points([0, 0, 0], 10.0, 0.1)) > len(f.surface_points([0, 0, 0], 10.0, 0.3))
    assert len(f.surface_points([-8, -8, -8], 1.0)) == 0
    assert ObstacleField.from_json(f.to_json()).to_json() == f.to_json()


# -- center path search -------------------------------------------------------------------

def test_search_empty_field_is_straight():
    path = search_center_path(ObstacleField(bounds=BIG), [0, 0, 0], [5, 1, 2])
    assert len(path) == 2 and np.allclose(path[1], [5, 1, 2])


def test_search_wall_gap():
    f = wall_with_gap()
    a, b = np.array([0.0, 0, 0]), np.array([5.0, 0, 0])
    path = search_center_path(f, a, b, grid_res=0.5, clearance=0.3)
    length = sum(np.linalg.norm(np.diff(path, axis=0), axis=1))
    assert length >= np.linalg.norm(b - a)
    for p, q in zip(path[:-1], path[1:]):
        assert f.segment_free(p, q, clearance=0.3, step=0.01)
    # where the polyline crosses the wall plane x = 2.2, it is inside the gap
    for p, q in zip(path[:-1], path[1:]):
        if (p[0] - 2.2) * (q[0] - 2.2) < 0:
            y = p[1] + (q[1] - p[1]) * (2.2 - p[0]) / (q[0] - p[0])
            assert 2.0 <= y <= 4.0


def test_search_random_field_collision_free():
    rng = np.random.default_rng(4)
    start, goal = np.array([2.0, 2.0, 2.0]), np.array([28.0, 48.0, 2.0])
    f = random_field(rng, 50, keep_clear=[start, goal])
    path = search_center_path(f, start, goal, grid_res=0.5, clearance=0.3)
    assert np.allclose(path[0], start) and np.allclose(path[-1], goal)
    for p, q in zip(path[:-1], path[1:]):
        assert f.segment_free(p, q, clearance=0.3, step=0.01)


def test_search_errors():
    box = ObstacleField([], [((-3, -3, -3), (3, 3, -2)), ((-3, -3, 2), (3, 3, 3)), ((-3, -3, -2), (-2, 3, 2)),
                             ((2, -3, -2), (3, 3, 2)), ((-2, -3, -2), (2, -2, 2)), ((-2, 2, -2), (2, 3, 2))],
                        ((-5, -5, -5), (5, 5, 5)))
    with pytest.raises(UnreachableError):
        search_center_path(box, [0, 0, 0], [4, 4, 4], grid_res=0.5, clearance=0.3)
    with pytest.raises(InvalidInputError):
        search_center_path(box, [2.5, 0, 0], [4, 4, 4])


# -- star polytopes ----------------------------------------------------------------------------

def test_flip_jacobian_matches_fd():
    rng = np.random.default_rng(1)
    c = rng.normal(size=3)
    for p in rng.normal(size=(10, 3)) * 2:
        J = np.stack([central_fd(lambda q: flip(q, c, 1.7)[k], p) for k in range(3)])
        assert np.allclose(J, flip_jacobian(p, c, 1.7), atol=1e-6)


def test_polytope_free_space_contains_ball():
    r = 2.0
    P = build_star_polytope(ObstacleField(bounds=BIG), [1, 2, 3], r)
    rng = np.random.default_rng(2)
    u = rng.normal(size=(2000, 3))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    pts = np.array([1, 2, 3]) + u * rng.uniform(0, 0.9 * r, (2000, 1))
    assert P.contains(pts).all()
    assert P.contains(np.array([[1.0, 2, 3]]))[0]
    assert not P.contains(np.array([1, 2, 3]) + 2.05 * r * u[:50]).any()


def test_polytope_wall_rejects_far_side():
    f = ObstacleField([], [((1.0, -3, -3), (1.2, 3, 3))], BIG)
    P = build_star_polytope(f, [0, 0, 0], 2.0)
    rng = np.random.default_rng(3)
    x = rng.uniform(-4, 4, (5000, 3))
    inside = P.contains(x)
    assert not np.any(inside & (x[:, 0] > 1.0) & (np.abs(x[:, 1]) < 2.5 * x[:, 0] / 4) & (np.abs(x[:, 2]) < 2.5 * x[:, 0] / 4))
    for p in x[inside][:400]:
        assert f.segment_free(np.zeros(3), p)


def test_polytope_center_in_obstacle():
    f = ObstacleField([((0, 0, 0), 1.0)], [], BIG)
    with pytest.raises(InvalidInputError):
        build_star_polytope(f, [0, 0, 0.5], 2.0)


def test_raycast_free_ball_and_opposite_directions():
    r, margin = 2.0, 0.2
    P = build_star_polytope(ObstacleField(bounds=BIG), [0, 0, 0], r)
    res = raycast_waypoints([P], [[0, 1.0, 0], [0, -1.0, 0]], margin=margin, d_r=1.0)
    w = res.waypoints[:, 0]
    assert abs(w[0, 1] - (1.9 * r - margin)) <= 0.02 * r
    assert abs(np.linalg.norm(w[0] - w[1]) - 2 * (1.9 * r - margin)) <= 0.04 * r
    assert not res.fallback.any() and res.spacing_violations == []


def test_raycast_toward_wall_and_fallback():
    f = ObstacleField([], [((1.0, -3, -3), (1.2, 3, 3))], BIG)
    P = build_star_polytope(f, [0, 0, 0], 2.0)
    res = raycast_waypoints([P], [[1.0, 0, 0]], margin=0.2)
    assert 0.6 <= res.waypoints[0, 0, 0] <= 0.81
    Q = build_star_polytope(f, [0.85, 0, 0], 2.0)
    res = raycast_waypoints([Q], [[1.0, 0, 0]], margin=0.2)
    assert res.fallback[0, 0]
    with pytest.raises(InvalidInputError):
        raycast_waypoints([P], [[2.0, 0, 0]])


# -- penalties ----------------------------------------------------------------------------------

def test_penalties_zero_for_slow_separated_swarm():
    cfg = PlannerConfig()
    starts = np.array([[0, 0, 0], [0, 3, 0], [0, 0, 3.0]])
    pr = SwarmProblem([BoundaryState.rest(p) for p in starts], [BoundaryState.rest(p + [4, 0, 0]) for p in starts], 3,
                      VisibilityGraph.complete(3), cfg, ObstacleField(bounds=BIG))
    W = np.array([[p + [4 * k / 3, 0, 0] for k in (1, 2)] for p in starts])
    ev = pr.evaluate(pr.pack(W, [4.0, 4.0, 4.0]))
    assert all(ev.terms[k] == 0 for k in "dsrvc")


def test_speed_penalty_and_time_stretch_direction():
    cfg = PlannerConfig(v_max=1.0)
    a, b = BoundaryState.rest([0, 0, 0]), BoundaryState.rest([10, 0, 0])
    pr = SwarmProblem([a, BoundaryState.rest([0, 5, 0])], [b, BoundaryState.rest([10, 5, 0])], 2,
                      VisibilityGraph.complete(2), cfg)
    # rest-to-rest quintic peak speed is 1.875 L/T: T = 4.7 gives ≈ 2 v_max
    x = pr.pack(np.array([[[5, 0, 0]], [[5, 5, 0]]]), [2.35, 2.35])
    ev = pr.evaluate(x, per_term=True)
    assert ev.terms["d"] > 0
    stretch = np.zeros_like(x)
    stretch[pr.N * (pr.M - 1) * 3] = 1.0
    assert ev.term_grads["d"] @ stretch < 0
    fd = (pr.evaluate(x + 1e-6 * stretch).terms["d"] - pr.evaluate(x - 1e-6 * stretch).terms["d"]) / 2e-6
    assert fd < 0


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_penalty_gradients_match_finite_differences(seed):
    pr, x = random_problem(np.random.default_rng(seed))
    ev = pr.evaluate(x, per_term=True)
    for name in ("jerk", "d", "s", "r", "v", "c"):
        assert ev.terms[name] > 0, name
        fd = central_fd(lambda z: pr.evaluate(z).terms[name], x)
        assert np.abs(fd - ev.term_grads[name]).max() <= 1e-4 * np.abs(fd).max(), name
    fd = central_fd(lambda z: pr.evaluate(z).f, x)
    assert np.abs(fd - ev.grad).max() <= 1e-4 * np.abs(fd).max()


# -- certificate penalty ---------------------------------------------------------------------------

def test_psi():
    v, d = psi(np.array([-1.0, 0.0, 2.0]))
    assert np.allclose(v, [0, 0, 8]) and np.allclose(d, [0, 0, 12])


def test_parallel_straight_swarm_has_zero_lambda4():
    t = np.linspace(0, 10, 100)[:, None]
    P = np.stack([t * [1, 0, 0] + o for o in ([0, 0, 0], [0, 2, 0], [0, 0, 2])], axis=1)
    g = VisibilityGraph.complete(3)
    pc, _, l4, B = certifiability_penalty(P, g, 0.05)
    assert abs(l4.value) <= 1e-9 * np.linalg.norm(k_hat_from_positions(P, g).k)
    assert B == pytest.approx(eigenvalue_bound(g, 100, 0.05))
    assert pc == pytest.approx(B**3, rel=1e-6)


def test_penalty_vanishes_above_bound():
    rng = np.random.default_rng(6)
    P = rng.normal(size=(50, 3, 3)) * 3
    g = VisibilityGraph.complete(3)
    pc, grad, l4, B = certifiability_penalty(P, g, 0.001)
    assert l4.value >= B and pc == 0.0 and not grad.any()


@pytest.mark.parametrize("seed", range(5))
def test_lambda4_gradient_fd(seed):
    rng = np.random.default_rng(seed)
    n = 3 + seed % 3
    P = rng.normal(size=(12, n, 3)) * 2
    g = VisibilityGraph.complete(n) if seed % 2 else VisibilityGraph.star(n)
    l4 = lambda4_and_grad(P, g)
    assert not l4.multiple
    fd = central_fd(lambda z: lambda4_and_grad(z.reshape(P.shape), g).value, P.ravel()).reshape(P.shape)
    assert np.abs(fd - l4.grad).max() <= 1e-4 * np.abs(fd).max()


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.2, 5.0))
def test_lambda4_translation_and_scale_invariance(seed, s):
    rng = np.random.default_rng(seed)
    P = rng.normal(size=(10, 4, 3)) * 2
    g = VisibilityGraph.complete(4)
    l4 = lambda4_and_grad(P, g)
    assert abs(lambda4_and_grad(P + rng.normal(size=3) * 5, g).value - l4.value) <= 1e-9 * max(1, abs(l4.value))
    c = P.mean(axis=1, keepdims=True)
    assert abs(lambda4_and_grad(c + s * (P - c), g).value - l4.value) <= 1e-9 * max(1, abs(l4.value))
    assert np.abs(l4.grad.sum(axis=1)).max() <= 1e-8 * max(1, np.abs(l4.grad).max())


def test_multiplicity_flag():
    # an isotropic regular-simplex swarm tumbling through symmetric attitudes has repeated eigenvalues
    tet = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float)
    P = np.stack([tet, tet[:, [1, 2, 0]], tet[:, [2, 0, 1]]])
    assert lambda4_and_grad(P, VisibilityGraph.complete(4)).multiple


# -- quasi-Newton ---------------------------------------------------------------------------------

def test_lbfgs_rosenbrock():
    def f(x):
        a, b = x
        return (1 - a) ** 2 + 100 * (b - a * a) ** 2, np.array([-2 * (1 - a) - 400 * a * (b - a * a), 200 * (b - a * a)])

    res = lbfgs(f, [-1.2, 1.0], max_iter=500, g_tol=1e-10)
    assert np.allclose(res.x, [1, 1], atol=1e-6) and res.status == "gradient"


def test_lbfgs_quadratic_exact():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(20, 20))
    H = A @ A.T + np.eye(20)
    b = rng.normal(size=20)
    res = lbfgs(lambda x: (0.5 * x @ H @ x - b @ x, H @ x - b), np.zeros(20), max_iter=2000, g_tol=1e-12)
    assert np.allclose(res.x, np.linalg.solve(H, b), atol=1e-8)


# -- config ----------------------------------------------------------------------------------------

def test_config_validation_and_json():
    cfg = PlannerConfig(xi_max=0.05, weights={"c": 3.0})
    assert cfg.weights["c"] == 3.0 and cfg.weights["d"] == 10.0
    assert PlannerConfig.from_json(cfg.to_json()) == cfg
    for bad in ({"v_max": 0}, {"alpha": 0.5}, {"xi_max": -0.1}, {"xi_max": 2.0}, {"weights": {"q": 1.0}},
                {"weights": {"c": 0.0}}):
        with pytest.raises(InvalidInputError):
            PlannerConfig(**bad)
    with pytest.raises(InvalidInputError):
        PlannerConfig.from_json({"vmax": 1.0})


# -- optimizer -------------------------------------------------------------------------------------

def test_noise_free_solution_matches_min_jerk_plus_time():
    # with penalties inactive the optimum is a rest-to-rest quintic per robot:
    # J = 720 ΣL²/T⁵, so J + w T is minimized at T = (3600 ΣL² / w)^(1/6)
    cfg = PlannerConfig(xi_max=0.0, v_max=50.0, a_max=50.0, max_iter=3000)
    starts = np.array([[0, 0, 0], [0, 4, 0], [0, 0, 4.0]])
    L = np.array([6.0, 7.0, 5.0])
    goals = starts + L[:, None] * [1, 0, 0]
    pr = SwarmProblem([BoundaryState.rest(p) for p in starts], [BoundaryState.rest(p) for p in goals], 3,
                      VisibilityGraph.complete(3), cfg)
    W = np.array([[s + (g - s) * k / 3 for k in (1, 2)] for s, g in zip(starts, goals)])
    plan = optimize_swarm(pr, pr.pack(W + 0.3, [2.0, 3.0, 4.0]))
    S = float(np.sum(L**2))
    T = (3600 * S) ** (1 / 6)
    best = 720 * S / T**5 + T
    got = plan.report.jerk + plan.report.total_time
    assert abs(got - best) <= 1e-6 * best
    assert plan.report.success and all(v == 0 for v in plan.report.penalties.values())


def test_infeasible_plan_raises_with_report():
    cfg = PlannerConfig(xi_max=0.0, v_max=0.05, a_max=0.05, rounds=2, max_iter=30, time_weight=1e4)
    a = [BoundaryState.rest([0, 0, 0]), BoundaryState.rest([0, 3, 0])]
    b = [BoundaryState.rest([20, 0, 0]), BoundaryState.rest([20, 3, 0])]
    pr = SwarmProblem(a, b, 2, VisibilityGraph.complete(2), cfg)
    with pytest.raises(InfeasiblePlanError) as ei:
        optimize_swarm(pr, pr.pack(np.array([[[10, 0, 0]], [[10, 3, 0]]]), [2.0, 2.0]))
    assert ei.value.report is not None and ei.value.report.penalties["d"] > 0


def test_obstacle_course_plan_is_validated():
    field = ObstacleField([((4.0, 0.5, 0.0), 0.8)], [((8.0, -3.0, -3.0), (8.6, -1.0, 3.0))], BIG)
    starts = np.array([[0.0, 0, 0], [0, 1.5, 0], [0, -1.5, 0]])
    goals = starts + [12, 0, 0]
    cfg = PlannerConfig(xi_max=0.0, d_s=0.3, max_iter=300)
    plan = plan_swarm(field, starts, goals, cfg)
    assert plan.report.success
    tt = np.linspace(0, plan.splines[0].total_duration, 2000)
    P = np.stack([s.positions(tt) for s in plan.splines], axis=1)
    assert field.distance(P).min() > 0.0
    for a in range(3):
        for b in range(a + 1, 3):
            assert np.linalg.norm(P[:, a] - P[:, b], axis=1).min() >= cfg.d_r * 0.98
    # visibility: every other robot stays inside the polytope assigned to its piece
    T = plan.splines[0].durations
    starts_t = np.r_[0, np.cumsum(T)]
    for k, t in enumerate(tt):
        j = min(np.searchsorted(starts_t, t, side="right") - 1, len(T) - 1)
        poly = plan.polytopes[j if t - starts_t[j] < 0.5 * T[j] else j + 1]
        assert poly.contains(P[k, 1:]).all()


def test_plan_rejects_bad_inputs():
    with pytest.raises(InvalidInputError):
        plan_swarm(ObstacleField(bounds=BIG), np.zeros((1, 3)), np.ones((1, 3)), PlannerConfig())
    with pytest.raises(InvalidInputError):
        plan_swarm(ObstacleField(bounds=BIG), np.zeros((2, 3)), np.ones((2, 3)), PlannerConfig())
