"""Piecewise-quintic minimum-jerk trajectories.

A trajectory with M pieces is fixed by its boundary states (position,
velocity, acceleration at both ends), M-1 interior waypoints and M piece
durations. The minimum-jerk interpolant is the piecewise quintic that is C⁴ at
interior waypoints; its 6M coefficients solve one linear system whose matrix
depends only on the durations, so robots sharing durations share the system.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np

from .errors import InvalidInputError

DEG = 6  # coefficients per piece


@dataclass(frozen=True)
class BoundaryState:
    position: np.ndarray
    velocity: np.ndarray
    acceleration: np.ndarray

    def __post_init__(self):
        for name in ("position", "velocity", "acceleration"):
            v = np.asarray(getattr(self, name), dtype=float).reshape(3)
            if not np.all(np.isfinite(v)):
                raise InvalidInputError(f"boundary {name} must be finite")
            object.__setattr__(self, name, v)

    @staticmethod
    def rest(p):
        return BoundaryState(p, np.zeros(3), np.zeros(3))

    def stack(self):
        return np.stack([self.position, self.velocity, self.acceleration])

    def to_json(self):
        return {"p": self.position.tolist(), "v": self.velocity.tolist(), "a": self.acceleration.tolist()}

    @staticmethod
    def from_json(d):
        return BoundaryState(d["p"], d["v"], d["a"])


def basis(t, order=0):
    """Row d^order/dt^order [1, t, ..., t^5] evaluated at t (scalar or array)."""
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape + (DEG,))
    for k in range(order, DEG):
        out[..., k] = factorial(k) / factorial(k - order) * t ** (k - order)
    return out


def _jerk_gram(T):
    """Q with ∫_0^T ||p'''||² dt = Σ_dims cᵀ Q c for one piece."""
    Q = np.zeros((DEG, DEG))
    for a in range(3, DEG):
        for b in range(3, DEG):
            ca = factorial(a) / factorial(a - 3)
            cb = factorial(b) / factorial(b - 3)
            p = a + b - 5
            Q[a, b] = ca * cb * T**p / p
    return Q


def _jerk_gram_batch(T):
    T = np.asarray(T, dtype=float)
    Q = np.zeros((len(T), DEG, DEG))
    for a in range(3, DEG):
        for b in range(3, DEG):
            ca = factorial(a) / factorial(a - 3)
            cb = factorial(b) / factorial(b - 3)
            p = a + b - 5
            Q[:, a, b] = ca * cb * T**p / p
    return Q


@dataclass
class QuinticSpline:
    """Piecewise quintic p(t); coeffs[j, k] multiplies (t - t_j)^k on piece j."""

    coeffs: np.ndarray  # (M, 6, 3)
    durations: np.ndarray  # (M,)

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        self.durations = np.asarray(self.durations, dtype=float)
        if self.coeffs.ndim != 3 or self.coeffs.shape[1:] != (DEG, 3) or len(self.coeffs) != len(self.durations):
            raise InvalidInputError("coeffs must be (M, 6, 3) with M durations")
        if len(self.durations) == 0 or np.any(self.durations <= 0):
            raise InvalidInputError("durations must be positive")
        self._starts = np.r_[0.0, np.cumsum(self.durations)]

    @property
    def n_pieces(self):
        return len(self.durations)

    @property
    def total_duration(self):
        return float(self._starts[-1])

    @property
    def breakpoints(self):
        return self._starts.copy()

    def _locate(self, t):
        t = np.asarray(t, dtype=float)
        tol = 1e-9 * max(1.0, self.total_duration)
        if np.any(t < -tol) or np.any(t > self.total_duration + tol):
            raise InvalidInputError(f"time outside [0, {self.total_duration}]")
        j = np.clip(np.searchsorted(self._starts, t, side="right") - 1, 0, self.n_pieces - 1)
        return j, t - self._starts[j]

    def eval(self, t, order=0):
        """Derivative of the given order (0..3, higher also allowed) at time t."""
        if order < 0:
            raise InvalidInputError("order must be >= 0")
        j, s = self._locate(float(t))
        return basis(s, order) @ self.coeffs[j]

    def evaluate(self, times, order=0):
        """Vectorized ``eval``: (len(times), 3)."""
        j, s = self._locate(times)
        return np.einsum("tk,tkd->td", basis(s, order), self.coeffs[j])

    def positions(self, times):
        return self.evaluate(times, 0)

    def jerk_cost(self):
        return float(sum(np.trace(c.T @ _jerk_gram(T) @ c) for c, T in zip(self.coeffs, self.durations)))

    def boundary(self, end=False):
        t = self.total_duration if end else 0.0
        return BoundaryState(*(self.eval(t, k) for k in range(3)))

    def waypoints(self):
        """Interior joint positions, (M-1, 3)."""
        return np.array([self.eval(t) for t in self._starts[1:-1]]).reshape(-1, 3)

    def to_json(self):
        return {
            "durations": self.durations.tolist(),
            "waypoints": self.waypoints().tolist(),
            "start": self.boundary().to_json(),
            "end": self.boundary(end=True).to_json(),
        }

    @staticmethod
    def from_json(d):
        return fit_min_jerk(BoundaryState.from_json(d["start"]), BoundaryState.from_json(d["end"]),
                            np.asarray(d["waypoints"], dtype=float).reshape(-1, 3), d["durations"])


class MinJerkSystem:
    """The 6M x 6M interpolation system for fixed durations.

    Row layout: 3 start conditions, then per interior joint j the waypoint
    conditions (end of piece j, start of piece j+1) and continuity of orders
    1..4, then 3 end conditions. Right-hand sides for several trajectories
    are solved at once (one column per robot coordinate).
    """

    def __init__(self, durations):
        T = np.asarray(durations, dtype=float)
        if T.ndim != 1 or len(T) == 0:
            raise InvalidInputError("need at least one duration")
        if np.any(~np.isfinite(T)) or np.any(T <= 0):
            raise InvalidInputError("durations must be positive and finite")
        self.T = T
        self.M = len(T)
        # end-of-piece basis rows for orders 0..5: (M, 6, DEG)
        self._end = np.stack([basis(T, k) for k in range(DEG)], axis=1)
        self.A = self._build(T, self._end)
        # an explicit inverse is adequate at these sizes and is reused by the adjoint
        try:
            self.Ainv = np.linalg.inv(self.A)
        except np.linalg.LinAlgError:
            raise InvalidInputError("interpolation system is singular (degenerate durations)") from None
        cond = np.abs(self.A).sum(axis=0).max() * np.abs(self.Ainv).sum(axis=0).max()
        if not np.isfinite(cond) or cond > 1e14:
            raise InvalidInputError("interpolation system is singular (degenerate durations)")

    @staticmethod
    def _build(T, end=None):
        M = len(T)
        if end is None:
            end = np.stack([basis(T, k) for k in range(DEG)], axis=1)
        zero = np.stack([basis(0.0, k) for k in range(5)])
        A = np.zeros((DEG * M, DEG * M))
        A[:3, :DEG] = zero[:3]
        for j in range(M - 1):
            r = 3 + 6 * j
            cj, cn = slice(DEG * j, DEG * j + DEG), slice(DEG * (j + 1), DEG * (j + 2))
            A[r, cj] = end[j, 0]
            A[r + 1, cn] = zero[0]
            A[r + 2:r + 6, cj] = end[j, 1:5]
            A[r + 2:r + 6, cn] = -zero[1:5]
        A[-3:, DEG * (M - 1):] = end[-1, :3]
        return A

    def rhs(self, start, end, waypoints):
        """Right-hand sides; start/end (3, D) stacked p,v,a rows; waypoints (M-1, D)."""
        start = np.asarray(start, dtype=float)
        D = start.shape[1]
        b = np.zeros((DEG * self.M, D))
        b[:3] = start
        for j in range(self.M - 1):
            b[3 + 6 * j] = waypoints[j]
            b[4 + 6 * j] = waypoints[j]
        b[-3:] = end
        return b

    def solve(self, start, end, waypoints):
        """Coefficient matrix (6M, D)."""
        return self.Ainv @ self.rhs(start, end, waypoints)

    def adjoint(self, grad_c):
        """λ = A⁻ᵀ ∂F/∂c; returns (grad wrt waypoints (M-1, D), λ)."""
        lam = self.Ainv.T @ grad_c
        gq = np.array([lam[3 + 6 * j] + lam[4 + 6 * j] for j in range(self.M - 1)]).reshape(self.M - 1, -1)
        return gq, lam

    def duration_coupling(self, lam, C):
        """-λᵀ (∂A/∂T_j) c for every j, summed over columns: (M,)."""
        M = self.M
        Cr = C.reshape(M, DEG, -1)
        # derivatives of orders 1..5 at the end of every piece: (M, 5, D)
        dend = np.einsum("mkc,mcd->mkd", self._end[:, 1:], Cr)
        out = np.zeros(M)
        if M > 1:
            L = lam[3:3 + 6 * (M - 1)].reshape(M - 1, 6, -1)
            # waypoint row (order 0 -> 1) then continuity rows of orders 1..4 (-> 2..5)
            out[:-1] -= np.sum(L[:, 0] * dend[:-1, 0], axis=-1)
            out[:-1] -= np.sum(L[:, 2:6] * dend[:-1, 1:5], axis=(1, 2))
        out[-1] -= np.sum(lam[-3:] * dend[-1, :3])
        return out

    def jerk_cost_and_grad(self, C):
        """Σ ∫||p'''||² over all columns; gradients wrt C and T (explicit part)."""
        Cr = C.reshape(self.M, DEG, -1)
        Q = _jerk_gram_batch(self.T)
        Qc = np.einsum("mab,mbd->mad", Q, Cr)
        J = float(np.sum(Cr * Qc))
        jerk_end = np.einsum("mc,mcd->md", self._end[:, 3], Cr)
        return J, (2 * Qc).reshape(C.shape), np.sum(jerk_end**2, axis=1)


def fit_min_jerk(start: BoundaryState, end: BoundaryState, waypoints, durations) -> QuinticSpline:
    """Minimum-jerk piecewise quintic through ``waypoints`` at cumulative times.

    Args:
        start, end: boundary states.
        waypoints: (M-1, 3) interior waypoints.
        durations: M positive piece durations.
    """
    T = np.asarray(durations, dtype=float).reshape(-1)
    q = np.asarray(waypoints, dtype=float).reshape(-1, 3)
    if len(q) != len(T) - 1:
        raise InvalidInputError(f"{len(T)} durations need {len(T) - 1} waypoints, got {len(q)}")
    sys_ = MinJerkSystem(T)
    C = sys_.solve(start.stack(), end.stack(), q)
    return QuinticSpline(C.reshape(len(T), DEG, 3), T)


def sample_count(total, dt):
    if dt <= 0:
        raise InvalidInputError("dt must be positive")
    return int(np.floor(total / dt + 1e-9))


def sample_positions(splines, dt):
    """Positions of every robot at t = αΔt, α = 1..n_t, n_t = int(T_f/Δt).

    Returns:
        (positions (n_t, N, 3), n_t)
    """
    if dt <= 0:
        raise InvalidInputError("dt must be positive")
    tf = [s.total_duration for s in splines]
    if max(tf) - min(tf) > 1e-9 * max(1.0, max(tf)):
        raise InvalidInputError("all robots must share the same total duration")
    n_t = sample_count(tf[0], dt)
    times = np.minimum(np.arange(1, n_t + 1) * dt, tf[0])
    P = np.stack([s.positions(times) for s in splines], axis=1) if n_t else np.zeros((0, len(splines), 3))
    return P, n_t
