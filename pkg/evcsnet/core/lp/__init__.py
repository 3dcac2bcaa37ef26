"""In-repo LP/MILP engine."""
from evcsnet.core.lp.branch_bound import solve_milp
from evcsnet.core.lp.problem import (
    FEASIBILITY_TOL,
    INTEGRALITY_TOL,
    OPTIMALITY_TOL,
    Basis,
    LpProblem,
    LpSolution,
    LpStatus,
    RowSense,
    Sense,
)
from evcsnet.core.lp.simplex import solve_lp
from evcsnet.core.lp.solver import InternalSolver, LpSolver, get_solver

__all__ = [
    "FEASIBILITY_TOL",
    "INTEGRALITY_TOL",
    "OPTIMALITY_TOL",
    "Basis",
    "InternalSolver",
    "LpProblem",
    "LpSolution",
    "LpSolver",
    "LpStatus",
    "RowSense",
    "Sense",
    "get_solver",
    "solve_lp",
    "solve_milp",
]
