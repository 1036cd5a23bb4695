"""Star-convex visibility polytopes built by sphere flipping plus a convex hull.

Obstacle surface points around a center p_c are mapped through
f(p) = (2r/‖p−p_c‖ − 1)(p − p_c), which sends near points far and far points
near. The convex hull H of the flipped cloud (plus p_c's own origin and a
synthetic sphere that closes the far field) marks the visible points: the
segment p_c→p is free when f(p) lies on or beyond the hull boundary, i.e. when
some face satisfies n_kᵀ f(p) − b_k ≥ 0. The visible set along a ray u is the
interval ‖p − p_c‖ ≤ 2r − h(u), where h(u) is where the ray leaves H.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInputError
from ..linalg import convex_hull_3d, hull_halfspaces
from .field import ObstacleField, fibonacci_sphere

BOUND_FACTOR = 1.9
SURFACE_SPACING = 0.1


def flip(points, center, r):
    """Sphere flip of (..., 3) points about ``center`` with radius 2r."""
    v = np.asarray(points, dtype=float) - center
    rho = np.linalg.norm(v, axis=-1, keepdims=True)
    return (2 * r / np.maximum(rho, 1e-12) - 1.0) * v


def flip_jacobian(points, center, r):
    """∂f/∂p for (..., 3) points: (2r/ρ − 1) I − 2r v vᵀ/ρ³."""
    v = np.asarray(points, dtype=float) - center
    rho = np.maximum(np.linalg.norm(v, axis=-1), 1e-12)
    J = (2 * r / rho - 1.0)[..., None, None] * np.eye(3)
    return J - (2 * r / rho**3)[..., None, None] * v[..., :, None] * v[..., None, :]


@dataclass
class StarPolytope:
    center: np.ndarray
    normals: np.ndarray  # (K, 3) outward unit normals of the flipped hull
    offsets: np.ndarray  # (K,) n_k · a_k
    flip_radius: float

    def d_values(self, points):
        """d_k(p) = n_kᵀ f(p) − b_k, shape (..., K)."""
        return flip(points, self.center, self.flip_radius) @ self.normals.T - self.offsets

    def contains(self, points, margin=0.0):
        """Visible from the center: max_k d_k ≥ margin, or the point is the center itself.

        Points at or beyond the flip sphere (‖p − p_c‖ ≥ 2r) are never members.
        """
        P = np.asarray(points, dtype=float)
        rho = np.linalg.norm(P - self.center, axis=-1)
        vis = (self.d_values(P).max(axis=-1) >= margin) & (rho < 2 * self.flip_radius)
        return (rho <= 1e-12) | vis

    def lse(self, points, alpha, grad=False):
        """Smooth max L = log Σ e^{α d_k}/α and optionally ∂L/∂p (..., 3)."""
        P = np.asarray(points, dtype=float)
        d = self.d_values(P)
        m = d.max(axis=-1, keepdims=True)
        e = np.exp(alpha * (d - m))
        s = e.sum(axis=-1, keepdims=True)
        L = (m + np.log(s) / alpha)[..., 0]
        if not grad:
            return L
        w = e / s
        gf = w @ self.normals  # ∂L/∂f
        J = flip_jacobian(P, self.center, self.flip_radius)
        return L, np.einsum("...a,...ab->...b", gf, J)

    def ray_limit(self, u):
        """Largest visible distance along unit direction u: 2r − h(u)."""
        u = np.asarray(u, dtype=float)
        nu = self.normals @ u
        pos = nu > 1e-12
        if not np.any(pos):
            return 2 * self.flip_radius
        h = float(np.min(self.offsets[pos] / nu[pos]))
        return 2 * self.flip_radius - h

    def to_json(self):
        return {"center": self.center.tolist(), "normals": self.normals.tolist(),
                "offsets": self.offsets.tolist(), "flip_radius": self.flip_radius}


def build_star_polytope(field: ObstacleField, center, r, spacing=SURFACE_SPACING, n_bound=150) -> StarPolytope:
    """Visibility polytope around ``center`` with flip radius ``r``.

    Raises:
        InvalidInputError: center is inside an obstacle or r <= 0.
    """
    c = np.asarray(center, dtype=float)
    if r <= 0:
        raise InvalidInputError("flip radius must be positive")
    if not field.empty and field.distance(c[None])[0] <= 0:
        raise InvalidInputError(f"polytope center {c.tolist()} is inside an obstacle")
    cloud = field.surface_points(c, 2 * r, spacing)
    bound = c + BOUND_FACTOR * r * fibonacci_sphere(n_bound)
    pts = np.vstack([cloud, bound]) if len(cloud) else bound
    F = np.vstack([np.zeros((1, 3)), flip(pts, c, r)])
    A, b = hull_halfspaces(convex_hull_3d(F))
    return StarPolytope(c, A, b, float(r))


@dataclass
class RaycastResult:
    waypoints: np.ndarray  # (n_robots_other, n_polytopes, 3)
    fallback: np.ndarray  # bool, same leading shape
    spacing_violations: list  # (index, robot_a, robot_b) with spacing < d_r


def raycast_waypoints(polytopes, directions, margin=0.2, d_r=None, min_offset=0.1):
    """Waypoints for non-center robots by raycasting inside each polytope.

    Args:
        polytopes: sequence of StarPolytope, one per center waypoint.
        directions: (R, 3) fixed unit directions or (R, K, 3) per-polytope directions.
        margin: pull-back distance from the visible boundary (meters).
        d_r: reciprocal clearance; pairs closer than this are reported.
        min_offset: fallback offset when the ray leaves immediately.
    """
    D = np.asarray(directions, dtype=float)
    K = len(polytopes)
    if D.ndim == 2:
        D = np.broadcast_to(D[:, None, :], (D.shape[0], K, 3))
    if D.shape[1] != K:
        raise InvalidInputError("need one direction per polytope")
    nrm = np.linalg.norm(D, axis=-1)
    if np.any(np.abs(nrm - 1) > 1e-9):
        raise InvalidInputError("directions must be unit vectors")
    R = D.shape[0]
    W = np.zeros((R, K, 3))
    fb = np.zeros((R, K), dtype=bool)
    for k, poly in enumerate(polytopes):
        for i in range(R):
            rho = poly.ray_limit(D[i, k]) - margin
            if rho <= min_offset:
                rho, fb[i, k] = min_offset, True
            W[i, k] = poly.center + rho * D[i, k]
    viol = []
    if d_r is not None:
        for k, poly in enumerate(polytopes):
            pts = np.vstack([poly.center[None], W[:, k]])
            for a in range(len(pts)):
                for b in range(a + 1, len(pts)):
                    if np.linalg.norm(pts[a] - pts[b]) < d_r:
                        viol.append((k, a, b))
    return RaycastResult(W, fb, viol)
