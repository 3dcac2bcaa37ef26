"""Solver interface used by the model builders."""
from abc import ABC, abstractmethod
from typing import Optional

from evcsnet.core.lp.branch_bound import DEFAULT_GAP_TOL, solve_milp
from evcsnet.core.lp.problem import Basis, LpProblem, LpSolution
from evcsnet.core.lp.simplex import solve_lp


class LpSolver(ABC):
    """Abstract base class for LP/MILP back ends."""

    name: str = "abstract"

    @abstractmethod
    def solve(self, problem: LpProblem, basis: Optional[Basis] = None) -> LpSolution:
        """
        Solve the continuous relaxation.

        Args:
            problem: Problem to solve (integrality flags ignored)
            basis: Final basis of an earlier solve of a same-shaped problem

        Returns:
            LpSolution with duals and reduced costs in the problem's sense
        """
        pass

    @abstractmethod
    def solve_mixed(
        self,
        problem: LpProblem,
        gap_tol: float = DEFAULT_GAP_TOL,
        time_limit: Optional[float] = None,
        basis: Optional[Basis] = None,
    ) -> LpSolution:
        """
        Solve with integrality enforced.

        Args:
            problem: Problem with integer columns
            gap_tol: Relative optimality gap at which to stop
            time_limit: Wall-clock seconds, or None
            basis: Root basis of an earlier solve, possibly with fewer rows

        Returns:
            LpSolution carrying incumbent, bound and node count
        """
        pass


class InternalSolver(LpSolver):
    """Bounded-variable simplex with best-first branch-and-bound."""

    name = "internal"

    def __init__(self, max_iterations: Optional[int] = None) -> None:
        self.max_iterations = max_iterations

    def solve(self, problem: LpProblem, basis: Optional[Basis] = None) -> LpSolution:
        return solve_lp(problem, max_iterations=self.max_iterations, basis=basis)

    def solve_mixed(
        self,
        problem: LpProblem,
        gap_tol: float = DEFAULT_GAP_TOL,
        time_limit: Optional[float] = None,
        basis: Optional[Basis] = None,
    ) -> LpSolution:
        return solve_milp(problem, gap_tol=gap_tol, time_limit=time_limit, basis=basis)


_SOLVERS = {InternalSolver.name: InternalSolver}


def get_solver(name: str = InternalSolver.name) -> LpSolver:
    """
    Solver by name.

    Raises:
        ValueError: If no solver is registered under that name
    """
    if name not in _SOLVERS:
        raise ValueError(f"Unknown solver '{name}' (available: {', '.join(sorted(_SOLVERS))})")
    return _SOLVERS[name]()
