"""Penalty-based swarm trajectory optimization.

Decision vector x = [interior waypoints (N, M-1, 3), log T_f, duration logits τ (M)].
All robots share the piece durations T = T_f · softmax(τ), so one interpolation
system serves every robot and the K-hat samples t = αΔt are synchronized.
Integral penalties use ``samples_per_piece`` quadrature points per piece
(weight T_j/K); the certificate penalty uses the global samples αΔt.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..errors import InfeasiblePlanError, InvalidInputError, SwarmCertError
from ..trajectory import DEG, BoundaryState, MinJerkSystem, QuinticSpline, basis, sample_count
from .certifiability import certifiability_penalty, psi
from .config import PENALTIES, PlannerConfig


@dataclass
class Limits:
    """Effective limits used inside the objective (possibly tightened)."""

    v_max: float
    a_max: float
    d_s: float
    d_r: float
    d_v: float
    bound_margin: float

    @staticmethod
    def from_config(cfg: PlannerConfig, tighten=0.0):
        return Limits(cfg.v_max * (1 - tighten), cfg.a_max * (1 - tighten), cfg.d_s * (1 + tighten),
                      cfg.d_r * (1 + tighten), cfg.d_v * (1 + tighten), tighten)


@dataclass
class Evaluation:
    f: float
    grad: np.ndarray
    terms: dict  # name -> value (unweighted)
    term_grads: dict = field(default_factory=dict)  # name -> gradient wrt x (unweighted)
    lambda4: float = 0.0
    bound: float = 0.0
    multiple: bool = False
    n_t: int = 0


class SwarmProblem:
    """Objective of the swarm optimizer.

    Args:
        starts, ends: per-robot BoundaryState.
        n_pieces: M.
        graph: VisibilityGraph for K-hat.
        cfg: PlannerConfig.
        field: optional ObstacleField for P_s.
        polytopes: optional list of M+1 StarPolytope (one per center waypoint) for P_v.
        center: index of the center robot (exempt from P_v).
    """

    def __init__(self, starts, ends, n_pieces, graph, cfg: PlannerConfig, field=None, polytopes=None, center=0):
        self.N = len(starts)
        if len(ends) != self.N or graph.n_robots != self.N:
            raise InvalidInputError("starts, ends and graph must describe the same robots")
        if n_pieces < 1:
            raise InvalidInputError("need at least one piece")
        if polytopes is not None and len(polytopes) != n_pieces + 1:
            raise InvalidInputError(f"need {n_pieces + 1} polytopes, got {len(polytopes)}")
        self.M = int(n_pieces)
        self.graph = graph
        self.cfg = cfg
        self.field = None if field is None or field.empty else field
        self.polytopes = polytopes
        self.center = center
        self.start = np.concatenate([s.stack() for s in starts], axis=1)  # (3, 3N)
        self.end = np.concatenate([s.stack() for s in ends], axis=1)
        self.weights = dict(cfg.weights)
        self.limits = Limits.from_config(cfg)
        K = cfg.samples_per_piece
        self.kappa = (np.arange(K) + 0.5) / K
        # polytope index per quadrature point: nearest waypoint of the piece
        self.poly_index = np.array([[j if k < 0.5 else j + 1 for k in self.kappa] for j in range(self.M)])
        self.pairs = [(i, j) for i in range(self.N) for j in range(i + 1, self.N)]
        self.others = [i for i in range(self.N) if i != center]

    # -- packing -------------------------------------------------------------
    @property
    def size(self):
        return self.N * (self.M - 1) * 3 + 1 + self.M

    def pack(self, waypoints, durations):
        W = np.asarray(waypoints, dtype=float).reshape(self.N, self.M - 1, 3)
        T = np.asarray(durations, dtype=float)
        return np.concatenate([W.ravel(), [np.log(T.sum())], np.log(T / T.sum())])

    def unpack(self, x):
        n = self.N * (self.M - 1) * 3
        W = x[:n].reshape(self.N, self.M - 1, 3)
        tf = np.exp(x[n])
        tau = x[n + 1:]
        w = np.exp(tau - tau.max())
        w /= w.sum()
        return W, tf * w, tf, w

    def splines(self, x):
        W, T, _, _ = self.unpack(x)
        sysm = MinJerkSystem(T)
        C = sysm.solve(self.start, self.end, np.transpose(W, (1, 0, 2)).reshape(self.M - 1, 3 * self.N))
        Cr = C.reshape(self.M, DEG, self.N, 3)
        return [QuinticSpline(Cr[:, :, i, :], T) for i in range(self.N)]

    # -- evaluation ----------------------------------------------------------
    def evaluate(self, x, per_term=False, limits=None):
        lim = limits or self.limits
        W, T, tf, wsm = self.unpack(x)
        sysm = MinJerkSystem(T)
        Q = np.transpose(W, (1, 0, 2)).reshape(self.M - 1, 3 * self.N)
        C = sysm.solve(self.start, self.end, Q)
        Cr = C.reshape(self.M, DEG, 3 * self.N)
        acc = {}  # name -> [value, gC, gT]

        J, gCj, gTj = sysm.jerk_cost_and_grad(C)
        acc["jerk"] = [J, gCj, gTj]

        # quadrature samples
        K = len(self.kappa)
        S = T[:, None] * self.kappa[None, :]  # (M, K)
        B = [basis(S, k) for k in range(4)]  # (M, K, 6)
        D = [np.einsum("mkc,mcd->mkd", B[k], Cr).reshape(self.M, K, self.N, 3) for k in range(4)]
        wq = T / K

        def integral(name, g, dg, order):
            # g (M, K, N), dg (M, K, N, 3) wrt the derivative of given order
            val = float(np.sum(wq[:, None, None] * g))
            gx = (wq[:, None, None, None] * dg).reshape(self.M, K, 3 * self.N)
            gC = np.einsum("mkc,mkd->mcd", B[order], gx).reshape(DEG * self.M, 3 * self.N)
            gT = np.sum(g, axis=(1, 2)) / K
            gT += np.einsum("k,mkd->m", self.kappa, gx * D[order + 1].reshape(self.M, K, 3 * self.N))
            acc[name] = [val, gC, gT]

        # P_d: speed and acceleration excess on squared norms
        vv = np.sum(D[1] ** 2, axis=-1)
        aa = np.sum(D[2] ** 2, axis=-1)
        pv, dpv = psi(vv - lim.v_max**2)
        pa, dpa = psi(aa - lim.a_max**2)
        integral("d_v", pv, 2 * dpv[..., None] * D[1], 1)
        integral("d_a", pa, 2 * dpa[..., None] * D[2], 2)
        acc["d"] = _merge(acc.pop("d_v"), acc.pop("d_a"))

        if self.field is not None:
            dist, gd = self.field.distance(D[0], grad=True)
            ps, dps = psi(lim.d_s - dist)
            integral("s", ps, -dps[..., None] * gd, 0)
        else:
            acc["s"] = [0.0, 0.0, 0.0]

        if self.pairs:
            I = np.array([p[0] for p in self.pairs])
            Jx = np.array([p[1] for p in self.pairs])
            diff = D[0][:, :, I] - D[0][:, :, Jx]
            dist = np.linalg.norm(diff, axis=-1)
            pr, dpr = psi(lim.d_r - dist)
            gpair = -dpr[..., None] * diff / np.maximum(dist, 1e-12)[..., None]
            g = np.zeros((self.M, K, self.N))
            dg = np.zeros((self.M, K, self.N, 3))
            np.add.at(dg, (slice(None), slice(None), I), gpair)
            np.add.at(dg, (slice(None), slice(None), Jx), -gpair)
            # integrate once per pair: put pair values on robot I
            np.add.at(g, (slice(None), slice(None), I), pr)
            integral("r", g, dg, 0)
        else:
            acc["r"] = [0.0, 0.0, 0.0]

        if self.polytopes is not None:
            g = np.zeros((self.M, K, self.N))
            dg = np.zeros((self.M, K, self.N, 3))
            for pi, poly in enumerate(self.polytopes):
                mask = self.poly_index == pi
                if not np.any(mask):
                    continue
                L, gL = poly.lse(D[0][mask][:, self.others], self.cfg.alpha, grad=True)
                pv_, dpv_ = psi(lim.d_v - L)
                rows = np.nonzero(mask)
                for col, i in enumerate(self.others):
                    g[rows[0], rows[1], i] = pv_[:, col]
                    dg[rows[0], rows[1], i] = -dpv_[:, col, None] * gL[:, col]
            integral("v", g, dg, 0)
        else:
            acc["v"] = [0.0, 0.0, 0.0]

        # P_c on the global samples t = αΔt
        n_t = sample_count(tf, self.cfg.dt)
        lam4, bound, multiple = 0.0, 0.0, False
        if n_t >= 1:
            starts = np.r_[0.0, np.cumsum(T)]
            t = np.minimum(np.arange(1, n_t + 1) * self.cfg.dt, starts[-1])
            m = np.clip(np.searchsorted(starts, t, side="right") - 1, 0, self.M - 1)
            s = t - starts[m]
            B0 = basis(s, 0)
            P = np.einsum("tc,tcd->td", B0, Cr[m]).reshape(n_t, self.N, 3)
            pc, gP, l4, bound = certifiability_penalty(P, self.graph, self.cfg.xi_max, lim.bound_margin)
            lam4, multiple = l4.value, l4.multiple
            gPf = gP.reshape(n_t, 3 * self.N)
            gC = np.zeros((self.M, DEG, 3 * self.N))
            np.add.at(gC, m, B0[:, :, None] * gPf[:, None, :])
            vel = np.einsum("tc,tcd->td", basis(s, 1), Cr[m])
            # moving earlier breakpoints shifts the local time: ∂s/∂T_k = -1 for k < m
            dvel = np.sum(gPf * vel, axis=1)
            gT = np.zeros(self.M)
            for k in range(self.M):
                gT[k] = -np.sum(dvel[m > k])
            acc["c"] = [pc, gC.reshape(DEG * self.M, 3 * self.N), gT]
        else:
            acc["c"] = [0.0, 0.0, 0.0]

        weights = {"jerk": 1.0, **self.weights}
        total = sum(weights[k] * acc[k][0] for k in acc) + self.cfg.time_weight * tf
        terms = {k: acc[k][0] for k in acc}

        def to_x(gC, gT):
            gC = np.broadcast_to(gC, C.shape) if np.ndim(gC) == 0 else gC
            gT = np.broadcast_to(gT, (self.M,)) if np.ndim(gT) == 0 else gT
            gq, lam = sysm.adjoint(gC)
            gT = gT + sysm.duration_coupling(lam, C)
            gW = np.transpose(gq.reshape(self.M - 1, self.N, 3), (1, 0, 2)).ravel()
            g_logtf = float(gT @ T)
            g_tau = tf * wsm * (gT - float(wsm @ gT))
            return np.concatenate([gW, [g_logtf], g_tau])

        gC_tot = sum(weights[k] * np.asarray(acc[k][1]) for k in acc)
        gT_tot = sum(weights[k] * np.asarray(acc[k][2]) for k in acc)
        grad = to_x(gC_tot, gT_tot)
        grad[self.N * (self.M - 1) * 3] += self.cfg.time_weight * tf
        term_grads = {}
        if per_term:
            term_grads = {k: to_x(np.asarray(acc[k][1], dtype=float), np.asarray(acc[k][2], dtype=float))
                          for k in acc}
        return Evaluation(float(total), grad, terms, term_grads, lam4, bound, multiple, n_t)


def _merge(a, b):
    return [a[0] + b[0], a[1] + b[1], a[2] + b[2]]


# ---------------------------------------------------------------------------
# optimization driver


@dataclass
class PlanReport:
    lambda4: float
    bound_B: float
    penalties: dict
    iters: int
    wall_time_s: float
    success: bool
    jerk: float
    total_time: float
    n_t: int
    multiple: bool = False
    rounds: int = 0

    def to_json(self):
        return {"lambda4": self.lambda4, "bound_B": self.bound_B, "penalties": dict(self.penalties),
                "iters": self.iters, "wall_time_s": self.wall_time_s, "success": self.success,
                "jerk": self.jerk, "total_time": self.total_time, "n_t": self.n_t,
                "lambda4_multiple": self.multiple, "rounds": self.rounds}


@dataclass
class SwarmPlan:
    splines: list
    report: PlanReport
    x: np.ndarray = None
    polytopes: list = None
    center_path: np.ndarray = None


HARD = ("d", "s", "r", "c")


def optimize_swarm(problem: SwarmProblem, x0, raise_on_failure=True) -> SwarmPlan:
    """Minimize jerk + w_T·T_f + weighted penalties by L-BFGS with weight continuation.

    Each round optimizes with limits tightened by ``cfg.tighten``; after a
    round, the weight of every penalty still positive at the true limits grows
    10x. Success means P_d = P_s = P_r = P_c = 0 at the true limits; P_v is a
    soft visibility term and is reported only.

    Raises:
        InfeasiblePlanError: hard penalties remain after all rounds (the
            exception carries the report).
    """
    from .lbfgs import lbfgs

    cfg = problem.cfg
    t0 = time.perf_counter()
    tight = Limits.from_config(cfg, cfg.tighten)
    x = np.asarray(x0, dtype=float)
    iters = 0
    rounds = 0
    for rounds in range(1, cfg.rounds + 1):
        res = lbfgs(lambda z: _fg(problem, z, tight), x, max_iter=cfg.max_iter)
        x, iters = res.x, iters + res.iters
        ev = problem.evaluate(x)
        bad = [k for k in HARD if ev.terms[k] > 0]
        if not bad:
            break
        for k in bad:
            problem.weights[k] *= 10.0
    ev = problem.evaluate(x)
    success = all(ev.terms[k] == 0 for k in HARD)
    report = PlanReport(ev.lambda4, ev.bound, {k: ev.terms[k] for k in PENALTIES}, iters,
                        time.perf_counter() - t0, success, ev.terms["jerk"], float(np.exp(x[-problem.M - 1])),
                        ev.n_t, ev.multiple, rounds)
    plan = SwarmPlan(problem.splines(x), report, x)
    if not success and raise_on_failure:
        bad = {k: ev.terms[k] for k in HARD if ev.terms[k] > 0}
        raise InfeasiblePlanError(f"hard penalties remain after {rounds} rounds: {bad}", report)
    return plan


def _fg(problem, x, limits):
    try:
        ev = problem.evaluate(x, limits=limits)
    except SwarmCertError:
        return np.inf, np.zeros_like(x)
    return ev.f, ev.grad
