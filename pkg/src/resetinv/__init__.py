"""Inventory control with periodic and controlled resets."""

from .bellman import Grid, Kernel, SweepResult, TabulatedFunction, expected_continuation, g_value, sweep
from .bids import BracketError, Solution, initial_upper_bound, solve
from .demand import DemandModel
from .model import CostParameters, NotStronglyConvexError, ProblemSpec, State
from .structure import ThresholdPolicy, extract_thresholds, gamma_bounds

__all__ = [
    "BracketError",
    "CostParameters",
    "DemandModel",
    "Grid",
    "Kernel",
    "NotStronglyConvexError",
    "ProblemSpec",
    "Solution",
    "State",
    "SweepResult",
    "TabulatedFunction",
    "ThresholdPolicy",
    "expected_continuation",
    "extract_thresholds",
    "g_value",
    "gamma_bounds",
    "initial_upper_bound",
    "solve",
    "sweep",
]
