"""Dispatch a planning solve to the DEP or the L-shaped method."""
import logging
import math
from typing import Optional, Sequence, Tuple

from evcsnet.core.config import SolverConfig
from evcsnet.core.dep import DepResult, build_dep, solve_dep
from evcsnet.core.lp.solver import LpSolver, get_solver
from evcsnet.core.lshaped import IterationRow, RunReport, run_lshaped
from evcsnet.models.instance import Instance, NetworkDesign
from evcsnet.models.scenario import Scenario, UtilityTable

logger = logging.getLogger(__name__)


def dep_report(result: DepResult, census: Optional[dict] = None) -> RunReport:
    """RunReport of a DEP solve; rows follow the incumbency trace (nodes, bounds)."""
    rows = [
        IterationRow(iteration=nodes, lower=incumbent, upper=bound, cuts=0, seconds=seconds)
        for nodes, seconds, incumbent, bound in result.solution.trace
    ]
    objective = result.objective if math.isfinite(result.objective) else 0.0
    return RunReport(
        method="dep",
        status="time_limit" if result.hit_limit else "optimal",
        objective=objective,
        bound=result.bound,
        seconds=result.seconds,
        cuts=0,
        rows=rows,
        census=census or {},
    )


def solve_design(
    inst: Instance,
    scenarios: Sequence[Scenario],
    solver_cfg: SolverConfig,
    tables: Optional[Sequence[UtilityTable]] = None,
    jobs: int = 1,
    solver: Optional[LpSolver] = None,
) -> Tuple[NetworkDesign, RunReport]:
    """
    Solve the two-stage problem over a scenario set with the configured method.

    Returns:
        The design (empty if a time limit left no incumbent) and its report
    """
    solver = solver or get_solver()
    if solver_cfg.method == "dep":
        problem, catalog = build_dep(inst, scenarios, tables)
        result = solve_dep(
            problem, catalog, gap_tol=solver_cfg.gap_tol, time_limit=solver_cfg.time_limit, solver=solver
        )
        census = catalog.census.to_dict() if catalog.census is not None else {}
        design = result.design or NetworkDesign.empty(inst.n_types, inst.n_lots)
        return design, dep_report(result, census)

    return run_lshaped(
        inst,
        scenarios,
        tables,
        mode=solver_cfg.method,
        epsilon=solver_cfg.epsilon,
        time_limit=solver_cfg.time_limit,
        max_iterations=solver_cfg.max_iterations,
        gap_tol=solver_cfg.gap_tol,
        jobs=jobs,
        solver=solver,
    )
