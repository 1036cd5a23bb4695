"""Synthetic swarm scenarios: ground-truth motion, bearing records, noise and drift."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .linalg import random_rotation, rot_z, so3_exp
from .model import BearingRecord, DriftModel, NoiseModel, Pose, Scenario, VisibilityGraph, apply_drift, perturb_bearing, true_bearing


@dataclass
class Truth:
    """Ground truth of a synthetic run."""

    initial: list  # Pose per robot
    odometry: list  # per robot, list of Pose (true local odometry) per time
    times: np.ndarray

    def world(self, i, k):
        return self.initial[i] @ self.odometry[i][k]

    def positions(self):
        """(T, N, 3) world positions."""
        return np.array([[self.world(i, k).t for i in range(len(self.initial))] for k in range(len(self.times))])

    def relative(self, gauge=0):
        """Gauge-fixed truth: rotations R_g^T R_i and translations R_g^T (t_i - t_g)."""
        G = self.initial[gauge]
        R = np.array([G.R.T @ T.R for T in self.initial])
        t = np.array([G.R.T @ (T.t - G.t) for T in self.initial])
        return R, t


def random_motion(n_robots, times, rng, extent=3.0, planar=False, speed=1.0):
    """Smooth random local odometry: sums of sinusoids, with slowly turning attitude."""
    T = len(times)
    odo = []
    for _ in range(n_robots):
        freqs = rng.uniform(0.2, 1.0, size=(3, 3))
        phases = rng.uniform(0, 2 * np.pi, size=(3, 3))
        amps = rng.uniform(0.3, 1.0, size=(3, 3)) * extent / 3.0
        pos = np.zeros((T, 3))
        for a in range(3):
            for k in range(3):
                pos[:, a] += amps[a, k] * (np.sin(speed * freqs[a, k] * times + phases[a, k]) - np.sin(phases[a, k]))
        if planar:
            pos[:, 2] = 0.0
        w = rng.standard_normal(3) * 0.3
        if planar:
            w[:2] = 0.0
        poses = [Pose.trusted(so3_exp(w * t), p) for t, p in zip(times, pos)]
        odo.append(poses)
    return odo


def random_initial_poses(n_robots, rng, spread=4.0, planar=False):
    out = []
    for _ in range(n_robots):
        if planar:
            R = rot_z(rng.uniform(-np.pi, np.pi))
            t = np.append(rng.uniform(-spread, spread, 2), 0.0)
        else:
            R = random_rotation(rng)
            t = rng.uniform(-spread, spread, 3)
        out.append(Pose(R, t))
    return out


def make_records(truth: Truth, graph: VisibilityGraph, noise: NoiseModel = None, rng=None, odometry=None, renormalize=True):
    """Bearing records for every edge, both directions, at every time.

    Args:
        truth: ground-truth motion.
        graph: which pairs see each other.
        noise: bearing noise model (None for exact bearings).
        odometry: optional per-robot odometry to report instead of the truth
            (e.g. drifted). Bearings are always measured in the true body frame.
        renormalize: gaussian-noise bearings are rescaled to unit length so
            they are valid records.
    """
    rng = rng if rng is not None else np.random.default_rng(0 if noise is None else noise.seed)
    odo = truth.odometry if odometry is None else odometry
    recs = []
    for k, t in enumerate(truth.times):
        W = [truth.world(i, k) for i in range(len(truth.initial))]
        for i, j in sorted(graph.edges):
            for a, b in ((i, j), (j, i)):
                if np.linalg.norm(W[b].t - W[a].t) <= 1e-6:
                    continue
                bear = true_bearing(W[a].t, W[b].t, W[a].R)
                if noise is not None:
                    bear = perturb_bearing(bear, noise, rng)
                    if noise.kind == "gaussian" and renormalize:
                        bear = bear / np.linalg.norm(bear)
                recs.append(BearingRecord(a, b, float(t), bear, odo[a][k], odo[b][k]))
    return recs


def synthetic_scenario(n_robots, n_times=30, dt=0.2, graph=None, noise=None, seed=0, planar=False, extent=3.0):
    """A random swarm: initial poses, smooth motion, full bearing records.

    Returns:
        (Scenario, Truth)
    """
    rng = np.random.default_rng(seed)
    graph = graph or VisibilityGraph.complete(n_robots)
    times = np.arange(n_times) * dt
    truth = Truth(random_initial_poses(n_robots, rng, planar=planar), random_motion(n_robots, times, rng, extent, planar), times)
    recs = make_records(truth, graph, noise, np.random.default_rng(seed + 1))
    return Scenario(truth.initial, graph, recs, noise), truth


def perturb_in_plane(records, xi, rng):
    """Bounded bearing noise that stays in the horizontal plane.

    Each bearing is yawed by ±2 asin(xi / 2) in its observer's frame, so a
    horizontal bearing moves by exactly ``xi``. With planar motion and yaw-only
    attitudes the perturbed data remain a planar problem.
    """
    if not 0 <= xi < 2:
        raise InvalidInputError("xi must lie in [0, 2)")
    ang = 2.0 * np.arcsin(xi / 2.0) * rng.choice([-1.0, 1.0], size=len(records))
    return [BearingRecord(r.observer, r.target, r.time, rot_z(a) @ r.bearing, r.odom_observer, r.odom_target)
            for r, a in zip(records, ang)]


def drifted_odometry(truth: Truth, model: DriftModel, rng, disturbed):
    """Apply random-walk drift to the robots listed in ``disturbed``."""
    out = []
    for i, odo in enumerate(truth.odometry):
        if i not in disturbed:
            out.append(odo)
            continue
        P = np.array([T.t for T in odo])
        v = np.r_[np.linalg.norm(np.diff(P, axis=0), axis=1) / model.dt, 0.0]
        yaw = np.unwrap([np.arctan2(T.R[1, 0], T.R[0, 0]) for T in odo])
        om = np.r_[np.diff(yaw) / model.dt, 0.0]
        out.append(apply_drift(odo, v, om, model, rng)[0])
    return out


def truth_from_trajectories(splines, dt, rng, attitudes=None):
    """Ground truth that follows planned trajectories, sampled at t = αΔt (α ≥ 1).

    Each robot gets a fixed random body attitude (or ``attitudes[i]``); its
    initial pose sits at the first sample and odometry is the displacement
    expressed in the body frame.
    """
    from .trajectory import sample_positions

    P, n_t = sample_positions(splines, dt)
    if n_t < 1:
        raise InvalidInputError("trajectories shorter than one sample interval")
    times = np.arange(1, n_t + 1) * dt
    n = P.shape[1]
    Rs = [random_rotation(rng) for _ in range(n)] if attitudes is None else [np.asarray(R, dtype=float) for R in attitudes]
    initial = [Pose(Rs[i], P[0, i]) for i in range(n)]
    odo = [[Pose.trusted(np.eye(3), Rs[i].T @ (P[k, i] - P[0, i])) for k in range(n_t)] for i in range(n)]
    return Truth(initial, odo, times)
