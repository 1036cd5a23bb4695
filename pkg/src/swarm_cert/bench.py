"""Monte-Carlo benchmark harness: seeded experiments that emit deterministic CSV.

Every row carries the seed and a build identifier. Per-trial random streams
are derived from (seed, experiment, grid indices, trial) so results do not
depend on the worker count or completion order.
"""
from __future__ import annotations

import csv
import io
import os
import subprocess
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

from . import __version__
from .certificate import empirical_noise_sweep
from .errors import InvalidInputError
from .estimator import assemble_data_matrix, estimate, refine_local, sliding_window_localize
from .linalg import random_rotation, rotation_angle, so3_exp
from .model import DriftModel, NoiseModel, Pose, VisibilityGraph, match_records
from .parallel import pmap
from .sim import Truth, drifted_odometry, make_records, truth_from_trajectories
from .trajectory import BoundaryState, fit_min_jerk

EXPERIMENTS = ("optimality", "certifiability", "accuracy", "noise_sweep", "planner_compare", "long_nav")
DEFAULT_XI = (0.0, 0.01, 0.02, 0.05, 0.1, 0.2)
SUCCESS_TOL = 1e-3  # gauge-fixed Frobenius distance for "recovered"
G_FLOOR = 1e-300
ENV_BUILD_ID = "SWARM_CERT_BUILD_ID"
_CODES = {name: k for k, name in enumerate(EXPERIMENTS)}


@lru_cache(maxsize=1)
def build_id():
    """``<version>+g<short sha>`` of the source checkout, or ``<version>+nogit``."""
    env = os.environ.get(ENV_BUILD_ID)
    if env:
        return env
    try:
        sha = subprocess.run(["git", "rev-parse", "--short=12", "HEAD"], cwd=os.path.dirname(__file__),
                             capture_output=True, text=True, timeout=5, check=True).stdout.strip()
    except (OSError, subprocess.SubprocessError):
        sha = ""
    return f"{__version__}+g{sha}" if sha else f"{__version__}+nogit"


@dataclass
class BenchmarkSpec:
    """What to run. ``xi_grid`` is the bearing-noise grid; ``xi_max_grid`` the planner grid."""

    experiment: str
    n_robots: tuple = (3,)
    trials: int = 10
    xi_grid: tuple = DEFAULT_XI
    xi_max_grid: tuple = (0.0, 0.05)
    seed: int = 0
    samples: int = 1000  # candidate rotation sets per certifiability trial
    out_dir: Optional[str] = None
    long_nav: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise InvalidInputError(f"unknown experiment {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        if int(self.trials) < 1:
            raise InvalidInputError("trials must be >= 1")
        self.n_robots = tuple(int(n) for n in np.atleast_1d(self.n_robots))
        if not self.n_robots or min(self.n_robots) < 2:
            raise InvalidInputError("n_robots must be a nonempty list of values >= 2")
        self.xi_grid = tuple(float(x) for x in self.xi_grid)
        self.xi_max_grid = tuple(float(x) for x in self.xi_max_grid)
        if not self.xi_grid or not self.xi_max_grid:
            raise InvalidInputError("noise grids must be nonempty")
        if any(not 0 <= x < 2 for x in self.xi_grid + self.xi_max_grid):
            raise InvalidInputError("noise magnitudes must lie in [0, 2)")
        if self.samples < 1:
            raise InvalidInputError("samples must be >= 1")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidInputError("seed must be a 64-bit unsigned integer")


def trial_rng(spec: BenchmarkSpec, *keys):
    return np.random.default_rng([int(spec.seed), _CODES[spec.experiment], *(int(k) for k in keys)])


# ---------------------------------------------------------------------------
# errors


@dataclass
class ErrorMetrics:
    e_t: float  # mean translation error, m (nan when translations are unavailable)
    e_r: float  # mean rotation angle error, rad
    re_t: float  # relative translation error over edges and times
    re_r: float  # relative rotation error over edges and times


def _poses(x):
    if hasattr(x, "rotations"):
        return np.asarray(x.rotations, dtype=float), None if x.translations is None else np.asarray(x.translations, dtype=float)
    R, t = x
    return np.asarray(R, dtype=float), None if t is None else np.asarray(t, dtype=float)


def evaluate_errors(est, gt, odometry=None, edges=None) -> ErrorMetrics:
    """Absolute and relative pose errors of a gauge-aligned estimate.

    Args:
        est: EstimationResult or (rotations, translations).
        gt: (rotations (N,3,3), translations (N,3)), same gauge as ``est``.
        odometry: optional per-robot lists of Pose; relative errors then cover
            every instant, with the pose at k being initial ∘ odometry[k].
        edges: pairs used for relative errors (default: all pairs).
    """
    Re, te = _poses(est)
    Rg, tg = _poses(gt)
    n = len(Rg)
    if Re.shape != Rg.shape:
        raise InvalidInputError("estimate and ground truth have different robot counts")
    e_r = float(np.mean([rotation_angle(Rg[i], Re[i]) for i in range(n)]))
    e_t = float(np.mean(np.linalg.norm(te - tg, axis=1))) if te is not None and tg is not None else float("nan")
    edges = sorted(edges) if edges is not None else [(i, j) for i in range(n) for j in range(i + 1, n)]
    n_k = 1 if odometry is None else len(odometry[0])
    rt, rr = [], []
    for k in range(n_k):
        O = [Pose.identity() if odometry is None else odometry[i][k] for i in range(n)]
        for i, j in edges:
            Rgi, Rgj = Rg[i] @ O[i].R, Rg[j] @ O[j].R
            Rei, Rej = Re[i] @ O[i].R, Re[j] @ O[j].R
            rr.append(rotation_angle(Rgi.T @ Rgj, Rei.T @ Rej))
            if te is not None and tg is not None:
                pg = Rgi.T @ ((tg[j] + Rg[j] @ O[j].t) - (tg[i] + Rg[i] @ O[i].t))
                pe = Rei.T @ ((te[j] + Re[j] @ O[j].t) - (te[i] + Re[i] @ O[i].t))
                rt.append(float(np.linalg.norm(pg - pe)))
    re_r = float(np.mean(rr)) if rr else 0.0
    re_t = float(np.mean(rt)) if rt else float("nan")
    return ErrorMetrics(e_t, e_r, re_t, re_r)


# ---------------------------------------------------------------------------
# random swarm trajectories


def random_truth(n_robots, rng, n_waypoints=10, cube=10.0, min_spacing=1.0, n_samples=20, piece_time=2.0,
                 spin=0.3, max_tries=200):
    """Random swarm run: minimum-jerk curves through waypoints uniform in a cube.

    Curves are redrawn until every pair keeps ``min_spacing`` at all samples.
    Attitudes start Haar-random and turn at a constant random rate (std ``spin``
    rad/s per axis) so odometry carries rotation as well as translation.
    """
    T = np.full(n_waypoints + 1, piece_time)
    total = float(T.sum())
    times = np.linspace(total / n_samples, total, n_samples)
    for _ in range(max_tries):
        P = []
        for _ in range(n_robots):
            wp = rng.uniform(0.0, cube, size=(n_waypoints + 2, 3))
            s = fit_min_jerk(BoundaryState.rest(wp[0]), BoundaryState.rest(wp[-1]), wp[1:-1], T)
            P.append(s.positions(times))
        P = np.stack(P, axis=1)
        d = np.linalg.norm(P[:, :, None] - P[:, None], axis=-1)
        d[:, np.arange(n_robots), np.arange(n_robots)] = np.inf
        if d.min() >= min_spacing:
            break
    else:
        raise InvalidInputError(f"no {n_robots}-robot draw kept {min_spacing} m spacing in {max_tries} tries")
    R0 = [random_rotation(rng) for _ in range(n_robots)]
    w = rng.standard_normal((n_robots, 3)) * spin
    initial = [Pose(R0[i], P[0, i]) for i in range(n_robots)]
    t0 = times[0]
    odo = [[Pose.trusted(so3_exp(w[i] * (t - t0)), R0[i].T @ (P[k, i] - P[0, i])) for k, t in enumerate(times)]
           for i in range(n_robots)]
    return Truth(initial, odo, times)


def formation_truth(n_robots, rng, route_waypoints=22, route_cube=40.0, piece_time=20.0, dt=0.5, spacing=4.0,
                    wobble=1.0, wobble_time=2.0, spin=0.1):
    """Long run: the swarm follows a shared random route (waypoints uniform in a
    ``route_cube`` cube) with fixed per-robot offsets ``spacing`` apart plus an
    independent minimum-jerk wobble of amplitude ``wobble`` so the relative
    bearings keep changing.
    """
    total = route_waypoints * piece_time
    n_t = int(round(total / dt))
    times = np.arange(1, n_t + 1) * dt
    wp = rng.uniform(0.0, route_cube, size=(route_waypoints + 1, 3))
    route = fit_min_jerk(BoundaryState.rest(wp[0]), BoundaryState.rest(wp[-1]), wp[1:-1],
                         np.full(route_waypoints, piece_time)).positions(times)
    from .planner.field import fibonacci_sphere

    off = fibonacci_sphere(max(n_robots, 2))[:n_robots] * spacing / np.sqrt(2)
    m = int(round(total / wobble_time))
    P = np.empty((n_t, n_robots, 3))
    for i in range(n_robots):
        q = rng.uniform(-wobble, wobble, size=(m + 1, 3))
        q[0] = q[-1] = 0.0
        w = fit_min_jerk(BoundaryState.rest(q[0]), BoundaryState.rest(q[-1]), q[1:-1], np.full(m, wobble_time))
        P[:, i] = route + off[i] + w.positions(times)
    R0 = [random_rotation(rng) for _ in range(n_robots)]
    w = rng.standard_normal((n_robots, 3)) * spin
    initial = [Pose(R0[i], P[0, i]) for i in range(n_robots)]
    odo = [[Pose.trusted(so3_exp(w[i] * (t - times[0])), R0[i].T @ (P[k, i] - P[0, i])) for k, t in enumerate(times)]
           for i in range(n_robots)]
    return Truth(initial, odo, times)


def _gauge_distance(Ra, Rb):
    """‖Θ_a − Θ_b‖_F after anchoring both to robot 0."""
    A = np.asarray(Ra)
    B = np.asarray(Rb)
    A = np.einsum("ji,njk->nik", A[0], A)
    B = np.einsum("ji,njk->nik", B[0], B)
    return float(np.linalg.norm(A - B))


def batch_cost(M, rotations):
    """f(Θ) = Tr(M ΘᵀΘ) for a batch of rotation sets (S, N, 3, 3)."""
    R = np.asarray(rotations, dtype=float)
    S, n = R.shape[:2]
    Theta = R.transpose(0, 2, 1, 3).reshape(S, 3, 3 * n)
    return np.einsum("sai,ij,saj->s", Theta, M, Theta)


# ---------------------------------------------------------------------------
# experiments


def _rows_to_csv(header, rows, spec):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(header) + ["seed", "build_id"])
    for r in rows:
        w.writerow([_fmt(v) for v in r] + [int(spec.seed), build_id()])
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.10g}"
    return "" if v is None else v


def run_optimality(spec: BenchmarkSpec):
    """Noise-free recovery rate per swarm size, with local refinement for contrast.

    CSV: n_robots, trials, success_rate, degenerate, local_success_rate.
    Degenerate trials (optimum not unique) are excluded from the success rate.
    """
    rows = []
    for n in spec.n_robots:
        def one(k, n=n):
            rng = trial_rng(spec, n, k)
            truth = random_truth(n, rng)
            graph = VisibilityGraph.complete(n)
            recs = make_records(truth, graph)
            res = estimate(recs, n, graph)
            Rg, _ = truth.relative()
            ok = _gauge_distance(res.rotations, Rg) <= SUCCESS_TOL
            M = assemble_data_matrix(match_records(recs)[0], n, graph).m
            R0 = np.array([random_rotation(rng) for _ in range(n)])
            Rl, _ = refine_local(R0, M)
            return ok, res.degenerate, _gauge_distance(Rl, Rg) <= SUCCESS_TOL

        out = pmap(one, range(spec.trials))
        nondeg = [o for o in out if not o[1]]
        rate = np.mean([o[0] for o in nondeg]) if nondeg else float("nan")
        rows.append((n, spec.trials, rate, sum(o[1] for o in out), np.mean([o[2] for o in out])))
    return _rows_to_csv(("n_robots", "trials", "success_rate", "degenerate", "local_success_rate"), rows, spec)


def sample_candidates(rotations, rng, count, local_scale=0.3):
    """Candidate rotation sets with robot 0 fixed at I: half Haar-random, half near ``rotations``."""
    R = np.asarray(rotations, dtype=float)
    R = np.einsum("ji,njk->nik", R[0], R)
    n = len(R)
    out = np.empty((count, n, 3, 3))
    out[:, 0] = np.eye(3)
    n_far = count // 2
    for s in range(count):
        for i in range(1, n):
            if s < n_far:
                out[s, i] = random_rotation(rng)
            else:
                w = rng.standard_normal(3)
                out[s, i] = so3_exp(w / np.linalg.norm(w) * rng.uniform(0.0, local_scale)) @ R[i]
    return out


def certifiability_trial(records, n, graph, rng, samples):
    """(certified, min g, h at the min, count g < 1) for one estimate."""
    res = estimate(records, n, graph)
    M = assemble_data_matrix(match_records(records)[0], n, graph).m
    f_star = batch_cost(M, res.rotations[None])[0]
    C = sample_candidates(res.rotations, rng, samples)
    g = batch_cost(M, C) / max(f_star, G_FLOOR)
    ref = np.einsum("ji,njk->nik", res.rotations[0], res.rotations)
    k = int(np.argmin(g))
    h = float(np.linalg.norm(C[k] - ref))
    return res.certified, float(g[k]), h, int(np.sum(g < 1.0))


def run_certifiability(spec: BenchmarkSpec):
    """Sampling check of certified optimality.

    CSV: xi, n_robots, trials, certified, certified_violations, uncertified,
    uncertified_counterexamples, min_g_certified, h_at_min_g.
    """
    rows = []
    for a, xi in enumerate(spec.xi_grid):
        for n in spec.n_robots:
            def one(k, n=n, a=a, xi=xi):
                rng = trial_rng(spec, a, n, k)
                truth = random_truth(n, rng)
                graph = VisibilityGraph.complete(n)
                recs = make_records(truth, graph, NoiseModel("bounded", xi=xi), rng)
                return certifiability_trial(recs, n, graph, rng, spec.samples)

            out = pmap(one, range(spec.trials))
            cert = [o for o in out if o[0]]
            unc = [o for o in out if not o[0]]
            best = min(cert, key=lambda o: o[1]) if cert else None
            rows.append((xi, n, spec.trials, len(cert), sum(o[3] > 0 for o in cert), len(unc),
                         sum(o[3] > 0 for o in unc), best[1] if best else None, best[2] if best else None))
    return _rows_to_csv(("xi", "n_robots", "trials", "certified", "certified_violations", "uncertified",
                         "uncertified_counterexamples", "min_g_certified", "h_at_min_g"), rows, spec)


def run_accuracy(spec: BenchmarkSpec):
    """Mean errors per (ξ, N). CSV: xi, n_robots, trials, e_t, e_r, re_t, re_r, frac_certified."""
    rows = []
    for a, xi in enumerate(spec.xi_grid):
        for n in spec.n_robots:
            def one(k, n=n, a=a, xi=xi):
                rng = trial_rng(spec, a, n, k)
                truth = random_truth(n, rng)
                graph = VisibilityGraph.complete(n)
                recs = make_records(truth, graph, NoiseModel("bounded", xi=xi), rng)
                res = estimate(recs, n, graph)
                return evaluate_errors(res, truth.relative(), truth.odometry), res.certified

            out = pmap(one, range(spec.trials))
            m = [o[0] for o in out]
            rows.append((xi, n, spec.trials, np.nanmean([e.e_t for e in m]), np.mean([e.e_r for e in m]),
                         np.nanmean([e.re_t for e in m]), np.mean([e.re_r for e in m]), np.mean([o[1] for o in out])))
    return _rows_to_csv(("xi", "n_robots", "trials", "e_t", "e_r", "re_t", "re_r", "frac_certified"), rows, spec)


def free_space_formation(n, radius=1.5, travel=10.0):
    """Starts and goals for an N-robot formation: a center robot plus N−1 spread directions."""
    if n < 2:
        raise InvalidInputError("need at least two robots")
    if n == 2:
        dirs = np.array([[0.0, 1.0, 0.0]])
    elif n == 3:
        dirs = np.array([[0.0, 1.0, 0.0], [0.0, 0.5, np.sqrt(3) / 2]])
    elif n == 5:
        dirs = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]]) / np.sqrt(3)
    else:
        from .planner.field import fibonacci_sphere

        dirs = fibonacci_sphere(n - 1)
    starts = np.vstack([np.zeros(3), radius * dirs])
    return starts, starts + np.array([travel, 0.0, 0.0])


def _plan(n, xi_max):
    from .planner import ObstacleField, PlannerConfig, plan_swarm

    starts, goals = free_space_formation(n)
    field_ = ObstacleField()
    return plan_swarm(field_, starts, goals, PlannerConfig(xi_max=xi_max), raise_on_failure=False)


def planned_estimation_trial(plan, xi, rng, dt=0.1, graph=None):
    """Estimate along planned trajectories under bounded noise ``xi``; returns (result, truth)."""
    truth = truth_from_trajectories(plan.splines, dt, rng)
    n = len(plan.splines)
    graph = graph or VisibilityGraph.complete(n)
    recs = make_records(truth, graph, NoiseModel("bounded", xi=xi), rng)
    return estimate(recs, n, graph), truth


def run_noise_sweep(spec: BenchmarkSpec):
    """Certificate eigenvalue and errors versus noise, for plans at each ξ_max.

    CSV: n_robots, xi_max, xi, mean_cert_eig, stddev, frac_certified, e_t, e_r,
    crossing, lambda4, bound_B, plan_success.
    """
    rows = []
    for n in spec.n_robots:
        for b, xi_max in enumerate(spec.xi_max_grid):
            plan = _plan(n, xi_max)
            graph = VisibilityGraph.complete(n)
            curve = empirical_noise_sweep(plan.splines, graph, spec.xi_grid, spec.trials, trial_rng(spec, n, b, 0))
            for a, xi in enumerate(spec.xi_grid):
                def one(k, a=a, b=b, xi=xi):
                    res, truth = planned_estimation_trial(plan, xi, trial_rng(spec, n, b, a + 1, k))
                    return evaluate_errors(res, truth.relative())

                errs = pmap(one, range(spec.trials))
                rows.append((n, xi_max, xi, curve.mean[a], curve.std[a], curve.frac_certified[a],
                             np.nanmean([e.e_t for e in errs]), np.mean([e.e_r for e in errs]), curve.crossing,
                             plan.report.lambda4, plan.report.bound_B, plan.report.success))
    return _rows_to_csv(("n_robots", "xi_max", "xi", "mean_cert_eig", "stddev", "frac_certified", "e_t", "e_r",
                         "crossing", "lambda4", "bound_B", "plan_success"), rows, spec)


def run_planner_compare(spec: BenchmarkSpec):
    """Certificate-blind (ξ_max = 0) against certificate-aware plans.

    CSV: n_robots, xi_max, success, lambda4, bound_B, crossing, jerk, total_time, iters.
    Wall time is left out so the CSV stays byte-identical across reruns.
    """
    rows = []
    grid = sorted(set((0.0,) + spec.xi_max_grid))
    for n in spec.n_robots:
        for b, xi_max in enumerate(grid):
            plan = _plan(n, xi_max)
            curve = empirical_noise_sweep(plan.splines, VisibilityGraph.complete(n), spec.xi_grid, spec.trials,
                                          trial_rng(spec, n, b))
            r = plan.report
            rows.append((n, xi_max, r.success, r.lambda4, r.bound_B, curve.crossing, r.jerk, r.total_time, r.iters))
    return _rows_to_csv(("n_robots", "xi_max", "success", "lambda4", "bound_B", "crossing", "jerk", "total_time",
                         "iters"), rows, spec)


# -- long navigation ------------------------------------------------------------

LONG_NAV_DEFAULTS = dict(sigma_p=0.1, sigma_theta=0.01, route_waypoints=22, piece_time=20.0, dt=0.5,
                         window=10.0, stride=20.0, disturbed=(1, 2), xi=0.0)


@dataclass
class LongNavRow:
    time: float
    robot: int
    raw_pos_err: float
    aligned_pos_err: float
    raw_yaw_err: float
    aligned_yaw_err: float
    status: str


def long_nav_run(n_robots, rng, sigma_p=0.1, sigma_theta=0.01, route_waypoints=22, piece_time=20.0, dt=0.5,
                 window=10.0, stride=20.0, disturbed=(1, 2), xi=0.0):
    """Sliding-window alignment against raw drifted odometry over a long run.

    Robot 0 keeps exact odometry and anchors the gauge. Every ``stride``
    seconds the window ending then is solved; the estimated relative pose
    fixes an anchor X_i with Ŵ_i(τ) = X_i ∘ O_i(τ), where O_i is the drifted
    odometry. When a window yields no estimate the previous anchor is kept.
    Errors are evaluated at each window end against the true world pose; the
    raw estimate uses the known initial pose with drifted odometry.

    Returns:
        (list of LongNavRow, path length of the longest disturbed robot in m)
    """
    truth = formation_truth(n_robots, rng, route_waypoints=route_waypoints, piece_time=piece_time, dt=dt)
    disturbed = tuple(d for d in disturbed if 0 < d < n_robots)
    odo = drifted_odometry(truth, DriftModel(sigma_p, sigma_theta, dt), rng, set(disturbed))
    graph = VisibilityGraph.complete(n_robots)
    recs = make_records(truth, graph, NoiseModel("bounded", xi=xi) if xi > 0 else None, rng, odometry=odo)
    times = truth.times
    index = {float(t): k for k, t in enumerate(times)}
    anchors = {i: truth.initial[i] for i in disturbed}
    rows = []
    t_end = times[0] + stride
    while t_end <= times[-1] + 1e-9:
        ts = t_end - window
        inside = [r for r in recs if ts - 1e-9 <= r.time <= t_end + 1e-9]
        out = sliding_window_localize(inside, n_robots, (ts, t_end), graph)
        ks = int(np.argmin(np.abs(times - out_start(inside, ts))))
        ke = index.get(float(t_end), int(np.argmin(np.abs(times - t_end))))
        W0s = truth.initial[0] @ truth.odometry[0][ks]
        status = "ok" if out.poses is not None else out.reason
        for i in disturbed:
            if out.poses is not None:
                anchors[i] = (W0s @ out.poses[i]) @ odo[i][ke].inverse()
            true_w = truth.world(i, ke)
            raw = truth.initial[i] @ odo[i][ke]
            al = anchors[i] @ odo[i][ke]
            rows.append(LongNavRow(float(times[ke]), i, float(np.linalg.norm(raw.t - true_w.t)),
                                   float(np.linalg.norm(al.t - true_w.t)), rotation_angle(raw.R, true_w.R),
                                   rotation_angle(al.R, true_w.R), status))
        t_end += stride
    P = truth.positions()
    length = max(float(np.sum(np.linalg.norm(np.diff(P[:, i], axis=0), axis=1))) for i in disturbed) if disturbed else 0.0
    return rows, length


def out_start(records, ts):
    """Time of the first record at or after ``ts`` (the window's re-basing instant)."""
    return min((r.time for r in records if r.time >= ts - 1e-9), default=ts)


def run_long_nav(spec: BenchmarkSpec):
    """CSV: time, robot, raw_pos_err, aligned_pos_err, raw_yaw_err, aligned_yaw_err, status."""
    kw = dict(LONG_NAV_DEFAULTS)
    unknown = set(spec.long_nav) - set(kw)
    if unknown:
        raise InvalidInputError(f"unknown long_nav options: {sorted(unknown)}")
    kw.update(spec.long_nav)
    rows = []
    for n in spec.n_robots:
        for k in range(spec.trials):
            res, _ = long_nav_run(n, trial_rng(spec, n, k), **kw)
            rows += [(n, k, r.time, r.robot, r.raw_pos_err, r.aligned_pos_err, r.raw_yaw_err, r.aligned_yaw_err,
                      r.status) for r in res]
    return _rows_to_csv(("n_robots", "trial", "time", "robot", "raw_pos_err", "aligned_pos_err", "raw_yaw_err",
                         "aligned_yaw_err", "status"), rows, spec)


RUNNERS = {
    "optimality": run_optimality,
    "certifiability": run_certifiability,
    "accuracy": run_accuracy,
    "noise_sweep": run_noise_sweep,
    "planner_compare": run_planner_compare,
    "long_nav": run_long_nav,
}


def run(spec: BenchmarkSpec):
    """Run an experiment; writes ``<out_dir>/<experiment>.csv`` when out_dir is set. Returns the CSV text."""
    text = RUNNERS[spec.experiment](spec)
    if spec.out_dir:
        os.makedirs(spec.out_dir, exist_ok=True)
        with open(os.path.join(spec.out_dir, f"{spec.experiment}.csv"), "w") as f:
            f.write(text)
    return text
