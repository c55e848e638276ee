"""Trajectory representation, cost terms, and the multi-start optimizer."""

from .trajectory import Trajectory, interpolate, trajectory_metrics  # noqa: F401
from .costs import (  # noqa: F401
    CostBreakdown,
    cost_collision,
    cost_orientation,
    cost_position,
    cost_repulsion,
    cost_smoothness,
    cost_speed,
    cost_upvector,
    total_cost,
)
from .optimizer import OptimizeOptions, OptimizeResult, canonical_init, optimize, plan, sampled_max_penetration  # noqa: F401
