"""coneip: a first-order conic optimizer.

Interior-point outer loop with an ADMM inner loop on the homogeneous
self-dual embedding; supports nonnegative, second-order, rotated
second-order, and semidefinite cone blocks.
"""
from .core import (NONNEG, PSD, RSOC, SOC, Cone, ConicProblem, Residuals,
                   SolveResult, Status, compute_residuals)
from .solver import SolverConfig, SolveTrace, select_strategy, solve

__all__ = [
    "Cone", "ConicProblem", "Residuals", "SolveResult", "SolverConfig",
    "SolveTrace", "Status", "NONNEG", "SOC", "RSOC", "PSD",
    "compute_residuals", "select_strategy", "solve",
]

__version__ = "0.1.0"
