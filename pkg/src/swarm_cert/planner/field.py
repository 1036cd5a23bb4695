"""Obstacle fields made of spheres and axis-aligned boxes, with analytic distance."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidInputError


def fibonacci_sphere(n):
    """n roughly uniform unit vectors."""
    n = max(int(n), 1)
    k = np.arange(n) + 0.5
    z = 1 - 2 * k / n
    phi = np.pi * (1 + 5**0.5) * k
    rho = np.sqrt(np.maximum(1 - z * z, 0.0))
    return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)


@dataclass
class ObstacleField:
    """Spheres (center, radius) and boxes (lo, hi) inside a workspace box."""

    spheres: list = field(default_factory=list)
    boxes: list = field(default_factory=list)
    bounds: tuple = ((-50.0, -50.0, -10.0), (50.0, 50.0, 10.0))

    def __post_init__(self):
        self.spheres = [(np.asarray(c, dtype=float), float(r)) for c, r in self.spheres]
        self.boxes = [(np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)) for lo, hi in self.boxes]
        lo, hi = (np.asarray(b, dtype=float) for b in self.bounds)
        self.bounds = (lo, hi)
        if np.any(hi <= lo):
            raise InvalidInputError("workspace bounds are empty")
        for c, r in self.spheres:
            if r <= 0 or np.any(c - r < lo) or np.any(c + r > hi):
                raise InvalidInputError("sphere outside workspace or non-positive radius")
        for a, b in self.boxes:
            if np.any(b <= a) or np.any(a < lo) or np.any(b > hi):
                raise InvalidInputError("box outside workspace or empty")

    @property
    def empty(self):
        return not self.spheres and not self.boxes

    def distance(self, points, grad=False):
        """Signed distance to the nearest obstacle (negative inside).

        Args:
            points: (..., 3).
            grad: also return the gradient (..., 3).
        """
        P = np.asarray(points, dtype=float)
        flat = P.reshape(-1, 3)
        best = np.full(len(flat), np.inf)
        g = np.zeros_like(flat)
        for c, r in self.spheres:
            v = flat - c
            n = np.linalg.norm(v, axis=1)
            d = n - r
            upd = d < best
            best[upd] = d[upd]
            safe = np.where(n > 0, n, 1.0)[:, None]
            gg = np.where(n[:, None] > 0, v / safe, np.array([1.0, 0, 0]))
            g[upd] = gg[upd]
        for lo, hi in self.boxes:
            ctr, half = (lo + hi) / 2, (hi - lo) / 2
            v = flat - ctr
            q = np.abs(v) - half
            s = np.where(v >= 0, 1.0, -1.0)
            out = np.maximum(q, 0.0)
            no = np.linalg.norm(out, axis=1)
            inside = np.max(q, axis=1)
            d = np.where(no > 0, no, inside)
            gg = np.where(no[:, None] > 0, s * out / np.where(no > 0, no, 1.0)[:, None], 0.0)
            ax = np.argmax(q, axis=1)
            ins = no <= 0
            gg[ins, ax[ins]] = s[ins, ax[ins]]
            upd = d < best
            best[upd] = d[upd]
            g[upd] = gg[upd]
        best = best.reshape(P.shape[:-1])
        if grad:
            return best, g.reshape(P.shape)
        return best

    def is_free(self, points, clearance=0.0):
        if self.empty:
            return np.ones(np.asarray(points).shape[:-1], dtype=bool)
        return self.distance(points) > clearance

    def segment_free(self, a, b, clearance=0.0, step=0.01):
        a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
        n = max(2, int(np.ceil(np.linalg.norm(b - a) / step)) + 1)
        s = np.linspace(0.0, 1.0, n)[:, None]
        return bool(np.all(self.is_free(a + s * (b - a), clearance)))

    def surface_points(self, center, radius, spacing=0.1):
        """Obstacle surface samples within ``radius`` of ``center``."""
        center = np.asarray(center, dtype=float)
        pts = []
        for c, r in self.spheres:
            if np.linalg.norm(c - center) - r > radius:
                continue
            n = int(np.ceil(4 * np.pi * r * r / spacing**2))
            pts.append(c + r * fibonacci_sphere(n))
        for lo, hi in self.boxes:
            if np.linalg.norm(np.maximum(np.maximum(lo - center, center - hi), 0.0)) > radius:
                continue
            pts.append(_box_surface(lo, hi, spacing))
        if not pts:
            return np.zeros((0, 3))
        P = np.vstack(pts)
        return P[np.linalg.norm(P - center, axis=1) < radius]

    def to_json(self):
        return {
            "spheres": [{"center": c.tolist(), "radius": r} for c, r in self.spheres],
            "boxes": [{"lo": a.tolist(), "hi": b.tolist()} for a, b in self.boxes],
            "bounds": [self.bounds[0].tolist(), self.bounds[1].tolist()],
        }

    @staticmethod
    def from_json(d):
        return ObstacleField(
            [(s["center"], s["radius"]) for s in d.get("spheres", [])],
            [(b["lo"], b["hi"]) for b in d.get("boxes", [])],
            tuple(d["bounds"]) if "bounds" in d else ObstacleField.__dataclass_fields__["bounds"].default,
        )


def _box_surface(lo, hi, spacing):
    axes = [np.linspace(lo[k], hi[k], max(2, int(np.ceil((hi[k] - lo[k]) / spacing)) + 1)) for k in range(3)]
    out = []
    for k in range(3):
        a, b = [axes[m] for m in range(3) if m != k]
        A, Bm = np.meshgrid(a, b, indexing="ij")
        for val in (lo[k], hi[k]):
            F = np.empty(A.shape + (3,))
            others = [m for m in range(3) if m != k]
            F[..., others[0]] = A
            F[..., others[1]] = Bm
            F[..., k] = val
            out.append(F.reshape(-1, 3))
    return np.unique(np.vstack(out).round(12), axis=0)


def random_field(rng, n_obstacles=50, size=(30.0, 50.0), height=(0.0, 4.0), radius=(0.4, 1.2), keep_clear=()):
    """Random pillars and spheres in a rectangular area, avoiding ``keep_clear`` points by 1.5 m."""
    lo = np.array([0.0, 0.0, height[0]])
    hi = np.array([size[0], size[1], height[1]])
    spheres, boxes = [], []
    tries = 0
    while len(spheres) + len(boxes) < n_obstacles and tries < 100 * n_obstacles:
        tries += 1
        r = rng.uniform(*radius)
        c = np.r_[rng.uniform(lo[0] + r, hi[0] - r), rng.uniform(lo[1] + r, hi[1] - r), 0.0]
        if any(np.linalg.norm(c[:2] - np.asarray(k)[:2]) < r + 1.5 for k in keep_clear):
            continue
        if rng.uniform() < 0.5:
            c[2] = rng.uniform(lo[2] + r, hi[2] - r)
            spheres.append((c, r))
        else:
            boxes.append((np.r_[c[:2] - r, lo[2]], np.r_[c[:2] + r, hi[2]]))
    return ObstacleField(spheres, boxes, (lo - [0, 0, 1.0], hi + [0, 0, 1.0]))
