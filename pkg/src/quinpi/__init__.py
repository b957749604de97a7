"""Implicit third-order finite-volume schemes for 1D scalar conservation laws.

The main entry points are :func:`quinpi.scheme.q3p1_step` (one time step of
the blended, conservative scheme) and :func:`quinpi.experiments.run`.
"""

from .core import (
    Grid,
    Problem,
    StateVector,
    make_grid,
    make_problem,
    project_initial_condition,
    total_mass,
    total_variation,
)
from .scheme import SchemeConfig, d3p1_step, ie_step, q3p1_step

__all__ = [
    "Grid",
    "Problem",
    "StateVector",
    "SchemeConfig",
    "d3p1_step",
    "ie_step",
    "make_grid",
    "make_problem",
    "project_initial_condition",
    "q3p1_step",
    "total_mass",
    "total_variation",
]

__version__ = "0.1.0"
