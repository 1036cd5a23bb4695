"""Swarm data model: poses, bearing records, visibility graphs, noise and drift.

Robot ids are 0-based integers. Positions are meters, times seconds, angles
radians. A robot's world pose at time t is its (unknown) initial pose
composed with its local odometry: ``T_i(t) = T_i ∘ T_i^odom(t)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DegeneracyError, InvalidInputError, ScenarioParseError
from .linalg import rot_z

SCENARIO_VERSION = "v1"


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform x -> R x + t."""

    R: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.R, dtype=float).reshape(3, 3)
        t = np.asarray(self.t, dtype=float).reshape(3)
        if not (np.all(np.isfinite(R)) and np.all(np.isfinite(t))):
            raise InvalidInputError("pose has non-finite entries")
        if np.abs(R.T @ R - np.eye(3)).max() > 1e-9 or abs(np.linalg.det(R) - 1.0) > 1e-9:
            raise InvalidInputError("pose rotation is not in SO(3)")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "t", t)

    @staticmethod
    def trusted(R, t):
        """Build without validation; for products of poses that are already valid."""
        p = object.__new__(Pose)
        object.__setattr__(p, "R", np.asarray(R, dtype=float))
        object.__setattr__(p, "t", np.asarray(t, dtype=float))
        return p

    @staticmethod
    def identity():
        return Pose.trusted(np.eye(3), np.zeros(3))

    def __matmul__(self, other: "Pose") -> "Pose":
        return Pose.trusted(self.R @ other.R, self.R @ other.t + self.t)

    def inverse(self) -> "Pose":
        return Pose.trusted(self.R.T, -self.R.T @ self.t)

    def apply(self, x):
        return self.R @ np.asarray(x, dtype=float) + self.t

    def __eq__(self, other):
        return isinstance(other, Pose) and np.array_equal(self.R, other.R) and np.array_equal(self.t, other.t)

    def to_json(self):
        return {"R": [float(v) for v in self.R.ravel()], "t": [float(v) for v in self.t]}


@dataclass(frozen=True, eq=False)
class BearingRecord:
    """Robot ``observer`` sees ``target`` along ``bearing`` (observer body frame) at ``time``."""

    observer: int
    target: int
    time: float
    bearing: np.ndarray
    odom_observer: Pose
    odom_target: Pose

    def __post_init__(self):
        b = np.asarray(self.bearing, dtype=float).reshape(3)
        if not np.all(np.isfinite(b)):
            raise InvalidInputError("bearing has non-finite entries")
        if abs(np.linalg.norm(b) - 1.0) > 1e-9:
            raise InvalidInputError(f"bearing norm {np.linalg.norm(b):.6g} is not 1")
        if self.observer == self.target:
            raise InvalidInputError("observer and target must differ")
        object.__setattr__(self, "bearing", b)

    def __eq__(self, other):
        return (
            isinstance(other, BearingRecord)
            and (self.observer, self.target, self.time) == (other.observer, other.target, other.time)
            and np.array_equal(self.bearing, other.bearing)
            and self.odom_observer == other.odom_observer
            and self.odom_target == other.odom_target
        )


@dataclass(frozen=True)
class VisibilityGraph:
    """Undirected graph of intervisible robot pairs, edges stored as (i, j) with i < j."""

    n_robots: int
    edges: frozenset

    def __post_init__(self):
        norm = set()
        for e in self.edges:
            i, j = int(e[0]), int(e[1])
            if i == j:
                raise InvalidInputError(f"self-loop on robot {i}")
            if not (0 <= i < self.n_robots and 0 <= j < self.n_robots):
                raise InvalidInputError(f"edge {(i, j)} outside [0, {self.n_robots})")
            norm.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", frozenset(norm))

    @staticmethod
    def complete(n):
        return VisibilityGraph(n, frozenset((i, j) for i in range(n) for j in range(i + 1, n)))

    @staticmethod
    def star(n, center=0):
        return VisibilityGraph(n, frozenset((center, j) for j in range(n) if j != center))

    @staticmethod
    def cycle(n):
        return VisibilityGraph(n, frozenset((i, (i + 1) % n) for i in range(n)))

    def neighbors(self, i):
        return sorted({b if a == i else a for a, b in self.edges if i in (a, b)})

    def degree(self, i):
        return len(self.neighbors(i))

    @property
    def d_max(self):
        return max((self.degree(i) for i in range(self.n_robots)), default=0)

    def has_edge(self, i, j):
        return (min(i, j), max(i, j)) in self.edges

    def is_connected(self):
        if self.n_robots == 0:
            return False
        seen, stack = {0}, [0]
        while stack:
            for k in self.neighbors(stack.pop()):
                if k not in seen:
                    seen.add(k)
                    stack.append(k)
        return len(seen) == self.n_robots


@dataclass(frozen=True)
class NoiseModel:
    """Bearing noise: additive gaussian (per-axis std ``sigma``) or unit-preserving chord ``xi``."""

    kind: str = "bounded"
    sigma: float = 0.0
    xi: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("gaussian", "bounded"):
            raise InvalidInputError(f"unknown noise kind {self.kind!r}")
        if not self.sigma >= 0:
            raise InvalidInputError("sigma must be >= 0")
        if not 0 <= self.xi < 2:
            raise InvalidInputError("xi must lie in [0, 2)")

    def to_json(self):
        d = {"kind": self.kind, "seed": int(self.seed)}
        if self.kind == "gaussian":
            d["sigma"] = float(self.sigma)
        else:
            d["xi"] = float(self.xi)
        return d


@dataclass(frozen=True)
class DriftModel:
    """Random-walk odometry drift. Units: m/sqrt(m) for position, rad/sqrt(rad) for yaw."""

    sigma_p: float = 0.0
    sigma_theta: float = 0.0
    dt: float = 0.1

    def __post_init__(self):
        if self.sigma_p < 0 or self.sigma_theta < 0:
            raise InvalidInputError("drift scales must be >= 0")
        if self.dt <= 0:
            raise InvalidInputError("dt must be > 0")


def true_bearing(p_i, p_j, frame_rotation=None):
    """Unit direction from p_i to p_j expressed in the frame ``frame_rotation``."""
    d = np.asarray(p_j, dtype=float) - np.asarray(p_i, dtype=float)
    n = np.linalg.norm(d)
    if n <= 1e-9:
        raise DegeneracyError("coincident positions have no bearing")
    R = np.eye(3) if frame_rotation is None else np.asarray(frame_rotation, dtype=float)
    return R.T @ (d / n)


def perpendicular_unit(b, rng):
    """Uniformly random unit vector orthogonal to unit ``b``."""
    e = np.zeros(3)
    e[int(np.argmin(np.abs(b)))] = 1.0
    u = np.cross(b, e)
    u /= np.linalg.norm(u)
    w = np.cross(b, u)
    a = rng.uniform(0.0, 2 * np.pi)
    return np.cos(a) * u + np.sin(a) * w


def perturb_bearing(b, model: NoiseModel, rng):
    """Apply one draw of the bearing noise model.

    gaussian: ``b + eps`` with eps ~ N(0, sigma^2 I), not renormalized.
    bounded: rotate ``b`` by ``2 asin(xi / 2)`` about a random perpendicular
    axis, so the result is unit and exactly ``xi`` away from ``b``.
    """
    b = np.asarray(b, dtype=float)
    if model.kind == "gaussian":
        return b + model.sigma * rng.standard_normal(3)
    if not 0 <= model.xi < 2:
        raise InvalidInputError("xi must lie in [0, 2)")
    if model.xi == 0.0:
        return b.copy()
    ang = 2.0 * np.arcsin(model.xi / 2.0)
    u = perpendicular_unit(b, rng)
    # rotation about axis k = b x u moves b toward u within their plane
    return np.cos(ang) * b + np.sin(ang) * u


def perturb_bounded(b, xi, rng):
    """Vectorized bounded-noise draw for an (..., 3) stack of unit bearings.

    Each bearing is rotated by ``2 asin(xi / 2)`` toward a uniformly random
    perpendicular direction, so ``||out - b|| = xi`` exactly.
    """
    b = np.asarray(b, dtype=float)
    if not 0 <= xi < 2:
        raise InvalidInputError("xi must lie in [0, 2)")
    if xi == 0.0:
        return b.copy()
    flat = b.reshape(-1, 3)
    g = rng.standard_normal(flat.shape)
    g -= np.sum(g * flat, axis=1, keepdims=True) * flat
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    ang = 2.0 * np.arcsin(xi / 2.0)
    return (np.cos(ang) * flat + np.sin(ang) * g).reshape(b.shape)


def apply_drift(odometry, v, omega, model: DriftModel, rng):
    """Corrupt an odometry series with cumulative position and yaw random walks.

    b_p(k+1) = b_p(k) + sigma_p sqrt(v_k dt) n_k, n_k ~ N(0, I3), and the yaw
    bias likewise with |omega_k|. Pose k becomes (Rz(b_theta) R_k, t_k + b_p).

    Returns:
        (drifted poses, position biases (n, 3), yaw biases (n,)).
    """
    n = len(odometry)
    v = np.asarray(v, dtype=float)
    omega = np.asarray(omega, dtype=float)
    if len(v) != n or len(omega) != n:
        raise InvalidInputError("odometry, speed and yaw-rate series differ in length")
    bp = np.zeros((n, 3))
    bth = np.zeros(n)
    if n > 1:
        step_p = model.sigma_p * np.sqrt(np.maximum(v[:-1], 0.0) * model.dt)
        step_th = model.sigma_theta * np.sqrt(np.abs(omega[:-1]) * model.dt)
        bp[1:] = np.cumsum(step_p[:, None] * rng.standard_normal((n - 1, 3)), axis=0)
        bth[1:] = np.cumsum(step_th * rng.standard_normal(n - 1))
    if not bth.any() and not bp.any():
        return list(odometry), bp, bth
    Rz = np.zeros((n, 3, 3))
    Rz[:, 0, 0] = Rz[:, 1, 1] = np.cos(bth)
    Rz[:, 1, 0] = np.sin(bth)
    Rz[:, 0, 1] = -Rz[:, 1, 0]
    Rz[:, 2, 2] = 1.0
    R = Rz @ np.array([T.R for T in odometry])
    t = np.array([T.t for T in odometry]) + bp
    return [Pose.trusted(R[k], t[k]) for k in range(n)], bp, bth


# ---------------------------------------------------------------------------
# time matching


@dataclass(frozen=True, eq=False)
class MatchedPair:
    """Both directions of one intervisible pair at (approximately) one instant."""

    i: int
    j: int
    time: float
    g_ij: np.ndarray  # R_i^odom b_ij, in robot i's odometry frame
    g_ji: np.ndarray
    odom_i: Pose
    odom_j: Pose
    weight: float = 1.0


def _threshold(times):
    if len(times) < 2:
        return 1e-9
    return 0.5 * float(np.median(np.diff(np.sort(times))))


def match_records(records, weights=None):
    """Pair each record (i, j) with the nearest-in-time record (j, i).

    Matching is one-to-one; a pair is accepted when the timestamps differ by
    at most half the median sampling interval of the reverse stream.

    Returns:
        (pairs, dropped) with ``dropped`` the number of records left unpaired.
    """
    streams = {}
    for r in records:
        streams.setdefault((r.observer, r.target), []).append(r)
    for s in streams.values():
        s.sort(key=lambda r: r.time)
    pairs = []
    used = set()
    for (i, j), fwd in sorted(streams.items()):
        if i > j:
            continue
        rev = streams.get((j, i), [])
        if not rev:
            continue
        rt = np.array([r.time for r in rev])
        thr = _threshold(rt)
        w = 1.0 if weights is None else float(weights.get((i, j), 1.0))
        for r in fwd:
            k = int(np.argmin(np.abs(rt - r.time)))
            if abs(rt[k] - r.time) > thr or (j, i, k) in used:
                continue
            used.add((j, i, k))
            q = rev[k]
            pairs.append(
                MatchedPair(
                    i, j, r.time,
                    r.odom_observer.R @ r.bearing,
                    q.odom_observer.R @ q.bearing,
                    r.odom_observer, r.odom_target, w,
                )
            )
    dropped = len(records) - 2 * len(pairs)
    return pairs, dropped


def attach_odometry(bearing_buffers, odom_buffers):
    """Turn raw buffers into BearingRecords by nearest-time odometry lookup.

    Args:
        bearing_buffers: {(i, j): [(t, unit bearing), ...]}.
        odom_buffers: {i: [(t, Pose), ...]} sorted by time.

    Returns:
        (records, dropped) where dropped counts bearings with no odometry
        sample within half the median odometry interval.
    """
    odo = {}
    for i, buf in odom_buffers.items():
        ts = np.array([t for t, _ in buf])
        odo[i] = (ts, [p for _, p in buf], _threshold(ts))
    out, dropped = [], 0
    for (i, j), buf in bearing_buffers.items():
        if i not in odo or j not in odo:
            dropped += len(buf)
            continue
        for t, b in buf:
            hit = []
            for k in (i, j):
                ts, poses, thr = odo[k]
                m = int(np.argmin(np.abs(ts - t)))
                hit.append(poses[m] if abs(ts[m] - t) <= thr else None)
            if hit[0] is None or hit[1] is None:
                dropped += 1
                continue
            out.append(BearingRecord(i, j, float(t), b, hit[0], hit[1]))
    return out, dropped


# ---------------------------------------------------------------------------
# scenario file


@dataclass(eq=False)
class Scenario:
    """Everything needed to rerun an estimation: truth, graph, records, noise."""

    robots: list  # initial poses, index = robot id
    graph: VisibilityGraph
    records: list = field(default_factory=list)
    noise: Optional[NoiseModel] = None
    trajectories: Optional[dict] = None

    @property
    def n_robots(self):
        return len(self.robots)

    def __eq__(self, other):
        return (
            isinstance(other, Scenario)
            and self.robots == other.robots
            and self.graph == other.graph
            and self.records == other.records
            and self.noise == other.noise
            and self.trajectories == other.trajectories
        )

    def to_json(self):
        doc = {
            "version": SCENARIO_VERSION,
            "robots": [{"id": k, "initial_pose": p.to_json()} for k, p in enumerate(self.robots)],
            "graph": {"edges": [list(e) for e in sorted(self.graph.edges)]},
            "records": [
                {
                    "i": r.observer,
                    "j": r.target,
                    "t": float(r.time),
                    "b": [float(x) for x in r.bearing],
                    "odom_i": r.odom_observer.to_json(),
                    "odom_j": r.odom_target.to_json(),
                }
                for r in self.records
            ],
        }
        if self.noise is not None:
            doc["noise"] = self.noise.to_json()
        if self.trajectories is not None:
            doc["trajectories"] = self.trajectories
        return doc

    def save(self, path):
        with open(path, "w") as f:
            json.dump(self.to_json(), f)

    @staticmethod
    def load(path):
        with open(path) as f:
            try:
                doc = json.load(f)
            except json.JSONDecodeError as e:
                raise ScenarioParseError("$", f"invalid JSON: {e}") from e
        return Scenario.from_json(doc)

    @staticmethod
    def from_json(doc):
        return _parse_scenario(doc)


def _get(obj, key, path, kind=None):
    if not isinstance(obj, dict) or key not in obj:
        raise ScenarioParseError(path, f"missing field {key!r}")
    v = obj[key]
    if kind is not None and not isinstance(v, kind):
        raise ScenarioParseError(f"{path}.{key}", f"expected {getattr(kind, '__name__', kind)}")
    return v


def _floats(v, n, path):
    if not isinstance(v, list) or len(v) != n:
        raise ScenarioParseError(path, f"expected a list of {n} numbers")
    out = []
    for k, x in enumerate(v):
        if isinstance(x, bool) or not isinstance(x, (int, float)):
            raise ScenarioParseError(f"{path}[{k}]", "expected a number")
        if not np.isfinite(x):
            raise ScenarioParseError(f"{path}[{k}]", "non-finite number")
        out.append(float(x))
    return np.array(out)


def _pose(v, path):
    R = _floats(_get(v, "R", path), 9, f"{path}.R").reshape(3, 3)
    t = _floats(_get(v, "t", path), 3, f"{path}.t")
    try:
        return Pose(R, t)
    except InvalidInputError as e:
        raise ScenarioParseError(path, str(e)) from e


def _parse_scenario(doc):
    if not isinstance(doc, dict):
        raise ScenarioParseError("$", "top level must be an object")
    ver = doc.get("version")
    if ver != SCENARIO_VERSION:
        raise ScenarioParseError("$.version", f"unsupported version {ver!r}")
    robots_raw = _get(doc, "robots", "$", list)
    if len(robots_raw) < 1:
        raise ScenarioParseError("$.robots", "need at least one robot")
    robots = [None] * len(robots_raw)
    for k, rb in enumerate(robots_raw):
        path = f"$.robots[{k}]"
        rid = _get(rb, "id", path, int)
        if not 0 <= rid < len(robots_raw) or robots[rid] is not None:
            raise ScenarioParseError(f"{path}.id", "ids must be a permutation of 0..N-1")
        robots[rid] = _pose(_get(rb, "initial_pose", path), f"{path}.initial_pose")
    n = len(robots)
    edges_raw = _get(_get(doc, "graph", "$", dict), "edges", "$.graph", list)
    edges = []
    for k, e in enumerate(edges_raw):
        path = f"$.graph.edges[{k}]"
        if not (isinstance(e, list) and len(e) == 2 and all(isinstance(x, int) for x in e)):
            raise ScenarioParseError(path, "expected [i, j]")
        if e[0] == e[1] or not all(0 <= x < n for x in e):
            raise ScenarioParseError(path, "invalid robot pair")
        edges.append(tuple(e))
    graph = VisibilityGraph(n, frozenset(edges))
    records = []
    for k, r in enumerate(_get(doc, "records", "$", list)):
        path = f"$.records[{k}]"
        i = _get(r, "i", path, int)
        j = _get(r, "j", path, int)
        if not (0 <= i < n and 0 <= j < n) or i == j:
            raise ScenarioParseError(path, f"invalid robot pair ({i}, {j})")
        t = _floats([_get(r, "t", path)], 1, f"{path}.t")[0]
        b = _floats(_get(r, "b", path), 3, f"{path}.b")
        if abs(np.linalg.norm(b) - 1.0) > 1e-9:
            raise ScenarioParseError(f"{path}.b", f"bearing norm {np.linalg.norm(b):.6g} is not 1 (record {k})")
        records.append(
            BearingRecord(i, j, float(t), b, _pose(_get(r, "odom_i", path), f"{path}.odom_i"), _pose(_get(r, "odom_j", path), f"{path}.odom_j"))
        )
    noise = None
    if "noise" in doc:
        nz = _get(doc, "noise", "$", dict)
        kind = _get(nz, "kind", "$.noise", str)
        seed = _get(nz, "seed", "$.noise", int)
        try:
            if kind == "gaussian":
                noise = NoiseModel("gaussian", sigma=float(_get(nz, "sigma", "$.noise")), seed=seed)
            elif kind == "bounded":
                noise = NoiseModel("bounded", xi=float(_get(nz, "xi", "$.noise")), seed=seed)
            else:
                raise ScenarioParseError("$.noise.kind", f"unknown kind {kind!r}")
        except InvalidInputError as e:
            if isinstance(e, ScenarioParseError):
                raise
            raise ScenarioParseError("$.noise", str(e)) from e
    traj = doc.get("trajectories")
    if traj is not None and not isinstance(traj, dict):
        raise ScenarioParseError("$.trajectories", "expected an object")
    return Scenario(robots, graph, records, noise, traj)
