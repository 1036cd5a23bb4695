"""Planner configuration."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields

from ..errors import InvalidInputError

PENALTIES = ("d", "s", "r", "v", "c")


def _default_weights():
    return {"d": 10.0, "s": 100.0, "r": 100.0, "v": 10.0, "c": 1.0}


@dataclass
class PlannerConfig:
    """Limits, margins and weights of the swarm trajectory optimizer.

    Attributes:
        v_max, a_max: speed (m/s) and acceleration (m/s²) limits.
        d_s: obstacle clearance (m).
        d_r: inter-robot clearance (m).
        d_v: visibility margin on the log-sum-exp of the polytope face values.
        alpha: log-sum-exp sharpness.
        xi_max: bearing noise magnitude the plan must tolerate.
        dt: K-hat sampling interval (s).
        weights: penalty weights keyed by d, s, r, v, c.
        time_weight: weight of T_f in the objective.
        samples_per_piece: quadrature points per piece for integral penalties.
        polytope_radius: flip radius r of the visibility polytopes (m).
        formation_radius: cap on raycast waypoint distance from the center robot (m).
        piece_time: target duration of one trajectory piece in the initial guess (s).
        tighten: relative margin applied to every hard limit while optimizing.
        max_iter: quasi-Newton iterations per continuation round.
        rounds: continuation rounds (violated weights grow 10x per round).
        grid_res: center path search grid (m).
    """

    v_max: float = 2.0
    a_max: float = 3.0
    d_s: float = 0.3
    d_r: float = 1.0
    d_v: float = 0.2
    alpha: float = 50.0
    xi_max: float = 0.0
    dt: float = 0.1
    weights: dict = field(default_factory=_default_weights)
    time_weight: float = 1.0
    samples_per_piece: int = 8
    polytope_radius: float = 2.0
    formation_radius: float = 1.5
    piece_time: float = 1.0
    tighten: float = 0.05
    max_iter: int = 400
    rounds: int = 6
    grid_res: float = 0.5

    def __post_init__(self):
        w = _default_weights()
        w.update({k: float(v) for k, v in (self.weights or {}).items()})
        unknown = set(w) - set(PENALTIES)
        if unknown:
            raise InvalidInputError(f"unknown penalty weights {sorted(unknown)}")
        self.weights = w
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "weights":
                bad = [k for k, x in v.items() if not x > 0]
                if bad:
                    raise InvalidInputError(f"weights must be positive: {bad}")
            elif f.name in ("xi_max", "tighten"):
                if not v >= 0:
                    raise InvalidInputError(f"{f.name} must be >= 0")
            elif not v > 0:
                raise InvalidInputError(f"{f.name} must be positive")
        if self.alpha < 1:
            raise InvalidInputError("alpha must be >= 1")
        if self.xi_max >= 2:
            raise InvalidInputError("xi_max must be < 2")
        self.samples_per_piece = int(self.samples_per_piece)
        self.max_iter = int(self.max_iter)
        self.rounds = int(self.rounds)

    def replace(self, **kw):
        d = asdict(self)
        d.update(kw)
        return PlannerConfig(**d)

    def to_json(self):
        return asdict(self)

    @staticmethod
    def from_json(d):
        names = {f.name for f in fields(PlannerConfig)}
        unknown = set(d) - names
        if unknown:
            raise InvalidInputError(f"unknown planner config keys {sorted(unknown)}")
        return PlannerConfig(**d)

    @staticmethod
    def load(path):
        with open(path) as fh:
            return PlannerConfig.from_json(json.load(fh))
