"""End-to-end planning: center path, visibility polytopes, raycast waypoints, backend."""
from __future__ import annotations

import numpy as np

from ..errors import InvalidInputError
from ..linalg import so3_exp, so3_log
from ..model import VisibilityGraph
from ..trajectory import BoundaryState
from .backend import SwarmProblem, optimize_swarm
from .config import PlannerConfig
from .field import ObstacleField
from .polytope import build_star_polytope, raycast_waypoints
from .search import resample_path, search_center_path

# Integer windings (about z, x, y) of the direction schedule used when a noise
# tolerance is requested. Coplanar or rigidly translating formations have
# λ4(K-hat) ≈ 0, so the raycast directions tumble to spread bearings over the
# sphere and the backend only has to refine. Integer windings close the loop:
# the schedule returns to the start orientation at T_f.
TUMBLE_WINDINGS = (1, 3, 3)


def tumble(t, tf, windings=TUMBLE_WINDINGS):
    a, b, c = 2 * np.pi * np.asarray(windings, dtype=float) / tf
    return so3_exp([0, 0, a * t]) @ so3_exp([b * t, 0, 0]) @ so3_exp([0, c * t, 0])


def tumble_rate(windings=TUMBLE_WINDINGS, samples=200):
    """Peak angular speed of the tumble times T_f (dimensionless)."""
    h = 1e-6
    ts = np.linspace(0.0, 1.0 - h, samples)
    return max(np.linalg.norm(so3_log(tumble(t + h, 1.0, windings) @ tumble(t, 1.0, windings).T)) / h for t in ts)


def direction_schedule(base, times, windings=TUMBLE_WINDINGS):
    """(R, K, 3) directions: ``base`` rotated by the tumble at each time."""
    base = np.asarray(base, dtype=float)
    times = np.asarray(times, dtype=float)
    tf = times[-1] if times[-1] > 0 else 1.0
    return np.stack([base @ tumble(t, tf, windings).T for t in times], axis=1)


def initial_guess(field: ObstacleField, starts, goals, cfg: PlannerConfig, center=0, windings=TUMBLE_WINDINGS):
    """Frontend: returns (M, center waypoints (M+1, 3), polytopes, raycast waypoints (N, M+1, 3), durations)."""
    starts = np.asarray(starts, dtype=float)
    goals = np.asarray(goals, dtype=float)
    N = len(starts)
    path = search_center_path(field, starts[center], goals[center], cfg.grid_res, cfg.d_s)
    length = float(np.sum(np.linalg.norm(np.diff(np.asarray(path), axis=0), axis=1)))
    tf = max(length / (0.5 * cfg.v_max), 4 * cfg.piece_time)
    if cfg.xi_max > 0:
        # keep the tumbling speed of the formation within 0.6 v_max
        tf = max(tf, tumble_rate(windings) * cfg.formation_radius / (0.6 * cfg.v_max))
    M = max(2, int(round(tf / cfg.piece_time)))
    cw = _resample_count(path, M)
    polys = [build_star_polytope(field, c, cfg.polytope_radius) for c in cw]
    others = [i for i in range(N) if i != center]
    off = starts[others] - starts[center]
    nrm = np.linalg.norm(off, axis=1)
    if np.any(nrm < 1e-9):
        raise InvalidInputError("non-center robots must not start at the center robot's position")
    base = off / nrm[:, None]
    times = np.linspace(0.0, tf, M + 1)
    dirs = direction_schedule(base, times, windings) if cfg.xi_max > 0 else np.broadcast_to(base[:, None], (len(others), M + 1, 3))
    ray = raycast_waypoints(polys, dirs, margin=cfg.d_v, d_r=cfg.d_r)
    W = np.zeros((N, M + 1, 3))
    W[center] = cw
    radius = np.minimum(np.linalg.norm(ray.waypoints - cw[None], axis=-1), cfg.formation_radius)
    W[others] = cw[None] + radius[..., None] * dirs
    W[:, 0], W[:, -1] = starts, goals
    return M, cw, polys, W, np.full(M, tf / M)


def _resample_count(path, M):
    P = np.asarray(path, dtype=float)
    fine = resample_path(P, max(1e-3, float(np.sum(np.linalg.norm(np.diff(P, axis=0), axis=1))) / (50 * M)))
    s = np.r_[0.0, np.cumsum(np.linalg.norm(np.diff(fine, axis=0), axis=1))]
    q = np.linspace(0.0, s[-1], M + 1)
    return np.stack([np.interp(q, s, fine[:, k]) for k in range(3)], axis=1)


def plan_swarm(field, starts, goals, cfg: PlannerConfig, graph=None, center=0, raise_on_failure=True,
               use_polytopes=True, windings=TUMBLE_WINDINGS):
    """Plan rest-to-rest trajectories for a swarm.

    Args:
        field: ObstacleField (may be empty).
        starts, goals: (N, 3) positions.
        cfg: PlannerConfig.
        graph: VisibilityGraph for K-hat; defaults to the complete graph.
        center: index of the center robot that carries the visibility polytopes.

    Returns:
        SwarmPlan (splines, report, x) with ``plan.polytopes`` attached.
    """
    starts = np.asarray(starts, dtype=float)
    goals = np.asarray(goals, dtype=float)
    if starts.shape != goals.shape or starts.ndim != 2 or starts.shape[1] != 3 or len(starts) < 2:
        raise InvalidInputError("starts and goals must be matching (N, 3) arrays with N >= 2")
    N = len(starts)
    graph = graph or VisibilityGraph.complete(N)
    M, cw, polys, W, T = initial_guess(field, starts, goals, cfg, center, windings)
    problem = SwarmProblem([BoundaryState.rest(p) for p in starts], [BoundaryState.rest(p) for p in goals], M,
                           graph, cfg, field, polys if use_polytopes else None, center)
    x0 = problem.pack(W[:, 1:-1], T)
    plan = optimize_swarm(problem, x0, raise_on_failure=raise_on_failure)
    plan.polytopes = polys
    plan.center_path = cw
    return plan
