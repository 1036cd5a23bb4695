"""Center-robot path search: A* on a 26-connected grid plus greedy shortcutting."""
from __future__ import annotations

import heapq
import itertools

import numpy as np

from ..errors import InvalidInputError, UnreachableError
from .field import ObstacleField

_NEIGHBORS = np.array([d for d in itertools.product((-1, 0, 1), repeat=3) if d != (0, 0, 0)])
_STEP = np.linalg.norm(_NEIGHBORS, axis=1)


def search_center_path(field: ObstacleField, start, goal, grid_res=0.5, clearance=0.3, max_nodes=2_000_000):
    """Collision-free polyline from ``start`` to ``goal``.

    Every vertex keeps ``clearance`` from obstacles, and so does every segment
    (checked at 1 cm steps).

    Raises:
        InvalidInputError: start or goal in collision.
        UnreachableError: the grid has no connecting path.
    """
    start, goal = np.asarray(start, dtype=float), np.asarray(goal, dtype=float)
    for name, p in (("start", start), ("goal", goal)):
        if not field.is_free(p[None], clearance)[0]:
            raise InvalidInputError(f"{name} {p.tolist()} is within clearance of an obstacle")
    if field.segment_free(start, goal, clearance):
        return [start, goal]

    lo, hi = field.bounds
    shape = tuple(int(np.floor((hi[k] - lo[k]) / grid_res)) + 1 for k in range(3))
    if np.prod(shape) > max_nodes:
        raise InvalidInputError("grid too large; raise grid_res")
    axes = [lo[k] + grid_res * np.arange(shape[k]) for k in range(3)]
    G = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    free = field.is_free(G, clearance)

    def cell(p):
        return tuple(np.clip(np.round((p - lo) / grid_res).astype(int), 0, np.array(shape) - 1))

    s, g = _nearest_free(free, cell(start)), _nearest_free(free, cell(goal))
    if s is None or g is None:
        raise UnreachableError("no free grid cell near start or goal")
    path = _astar(free, s, g)
    if path is None:
        raise UnreachableError("no collision-free path between start and goal")
    pts = [start] + [lo + grid_res * np.array(c) for c in path] + [goal]
    return _shortcut(field, pts, clearance)


def _nearest_free(free, c):
    if free[c]:
        return c
    shape = np.array(free.shape)
    for rad in range(1, 4):
        best = None
        for d in itertools.product(range(-rad, rad + 1), repeat=3):
            q = tuple(np.array(c) + d)
            if np.any(np.array(q) < 0) or np.any(np.array(q) >= shape):
                continue
            if free[q]:
                dist = np.linalg.norm(d)
                if best is None or dist < best[0]:
                    best = (dist, q)
        if best:
            return best[1]
    return None


def _astar(free, s, g):
    shape = free.shape
    goal = np.array(g)
    gscore = {s: 0.0}
    parent = {s: None}
    heap = [(np.linalg.norm(np.array(s) - goal), 0.0, s)]
    closed = set()
    while heap:
        _, gs, c = heapq.heappop(heap)
        if c in closed:
            continue
        if c == g:
            out = []
            while c is not None:
                out.append(c)
                c = parent[c]
            return out[::-1]
        closed.add(c)
        base = np.array(c)
        for d, w in zip(_NEIGHBORS, _STEP):
            q = base + d
            if np.any(q < 0) or q[0] >= shape[0] or q[1] >= shape[1] or q[2] >= shape[2]:
                continue
            qt = (int(q[0]), int(q[1]), int(q[2]))
            if not free[qt] or qt in closed:
                continue
            ng = gs + w
            if ng < gscore.get(qt, np.inf):
                gscore[qt] = ng
                parent[qt] = c
                heapq.heappush(heap, (ng + np.linalg.norm(q - goal), ng, qt))
    return None


def _shortcut(field, pts, clearance):
    out = [pts[0]]
    i = 0
    while i < len(pts) - 1:
        j = len(pts) - 1
        while j > i + 1 and not field.segment_free(pts[i], pts[j], clearance):
            j -= 1
        out.append(pts[j])
        i = j
    return out


def resample_path(path, spacing):
    """Points every ``spacing`` meters along a polyline (endpoints kept)."""
    P = np.asarray(path, dtype=float)
    seg = np.linalg.norm(np.diff(P, axis=0), axis=1)
    s = np.r_[0.0, np.cumsum(seg)]
    L = s[-1]
    n = max(1, int(np.ceil(L / spacing)))
    q = np.linspace(0.0, L, n + 1)
    return np.stack([np.interp(q, s, P[:, k]) for k in range(3)], axis=1)
