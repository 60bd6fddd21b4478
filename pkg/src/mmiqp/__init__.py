"""Mixed-integer quadratic optimization with indicators and M-matrices.

Hull functions of the two-variable sets, perspective/conic relaxations, a
small branch-and-bound, seeded benchmark generators and test oracles.
"""

from .core import Cut, Instance, LinearConstraint, Point, read_instance, write_instance
from .formulations import FormulationKind, build
from .bnb import SolveConfig, SolveReport, solve
from .relax import solve_fixed_x, solve_relaxation

__all__ = [
    "Cut", "Instance", "LinearConstraint", "Point", "read_instance", "write_instance",
    "FormulationKind", "build", "SolveConfig", "SolveReport", "solve", "solve_fixed_x",
    "solve_relaxation",
]
__version__ = "0.1.0"
