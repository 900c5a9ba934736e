"""Simulation and scheduling toolkit for avatar-assisted social time."""

from .allocator import (
    InfeasibleAllocation,
    TimeAllocation,
    check_feasibility,
    solve_allocation,
    spare_time,
)
from .core import (
    Alter,
    ConflictGraph,
    EgoNetwork,
    Layer,
    ModelParams,
    ValidationError,
    Violation,
    derive_gamma,
    validate_instance,
)
from .egogen import LayerStats, generate_conflict_graph, generate_ego_network
from .requests import MaterializedRequest, Mode, RequestSkeleton, generate_skeletons, materialize
from .scheduler import CostReport, Schedule, evaluate, schedule, social_cost, validate_schedule

__version__ = "0.1.0"

__all__ = [
    "Alter",
    "ConflictGraph",
    "CostReport",
    "EgoNetwork",
    "InfeasibleAllocation",
    "Layer",
    "LayerStats",
    "MaterializedRequest",
    "Mode",
    "ModelParams",
    "RequestSkeleton",
    "Schedule",
    "TimeAllocation",
    "ValidationError",
    "Violation",
    "check_feasibility",
    "derive_gamma",
    "evaluate",
    "generate_conflict_graph",
    "generate_ego_network",
    "generate_skeletons",
    "materialize",
    "schedule",
    "social_cost",
    "solve_allocation",
    "spare_time",
    "validate_instance",
    "validate_schedule",
]
