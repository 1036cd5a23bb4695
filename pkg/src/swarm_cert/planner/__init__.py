"""Certificate-aware swarm trajectory planning."""
from .backend import PlanReport, SwarmPlan, SwarmProblem, optimize_swarm
from .certifiability import certifiability_penalty, lambda4_and_grad, psi
from .config import PlannerConfig
from .field import ObstacleField, random_field
from .frontend import direction_schedule, initial_guess, plan_swarm
from .lbfgs import lbfgs
from .polytope import StarPolytope, build_star_polytope, raycast_waypoints
from .search import resample_path, search_center_path

__all__ = [
    "ObstacleField", "PlanReport", "PlannerConfig", "StarPolytope", "SwarmPlan", "SwarmProblem",
    "build_star_polytope", "certifiability_penalty", "direction_schedule", "initial_guess", "lambda4_and_grad",
    "lbfgs", "optimize_swarm", "plan_swarm", "psi", "random_field", "raycast_waypoints", "resample_path",
    "search_center_path",
]
