"""Gauss curvature flow of origin-symmetric convex bodies and the Orlicz-Minkowski equation."""

from .flow import FlowConfig, FlowResult, run
from .orlicz import CustomVarphi, OrliczClass, PowerLaw
from .oracle import OracleProblem, solve_newton
from .sphere_grid import GridS1, GridS2

__all__ = [
    "CustomVarphi",
    "FlowConfig",
    "FlowResult",
    "GridS1",
    "GridS2",
    "OracleProblem",
    "OrliczClass",
    "PowerLaw",
    "run",
    "solve_newton",
]
