"""
L-shaped decomposition with single-cut and multi-cut optimality cuts.

The master holds the first stage plus eta (one per scenario in multi-cut
mode), each capped by the demand it stands for. Every iteration solves the
master, evaluates the recourse of each scenario at the master's design, and
adds cuts eta + (pi' T) v <= pi' rhs + rc . w* built from the recourse duals.

For this maximization the evaluated designs give the lower bound (best
expected recourse so far) and the master bound gives the upper bound.
"""
import logging
import math
import time
from dataclasses import dataclass, field
from functools import partial
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from evcsnet.core.dep import (
    CAPACITY,
    CHOICE,
    MC_LOWER,
    MC_X,
    SecondStageBlock,
    VariableCatalog,
    add_first_stage,
    build_second_stage,
    census,
)
from evcsnet.core.lp.branch_bound import DEFAULT_GAP_TOL
from evcsnet.core.lp.problem import Basis, LpProblem, LpStatus, RowSense, Sense
from evcsnet.core.lp.solver import InternalSolver, LpSolver
from evcsnet.core.parallel import ordered_map
from evcsnet.models.instance import Instance, NetworkDesign
from evcsnet.models.scenario import Scenario, UtilityTable

logger = logging.getLogger(__name__)

SINGLE = "single"
MULTI = "multi"
DUALITY_WARN = 1e-6


class SubproblemError(RuntimeError):
    """Raised when a recourse LP does not solve to optimality."""


def normalize_mode(mode: str) -> str:
    """Accept 'single'/'multi' and the method names 'single-cut'/'multi-cut'."""
    value = mode.replace("-cut", "")
    if value not in (SINGLE, MULTI):
        raise ValueError(f"cut mode must be 'single' or 'multi', got '{mode}'")
    return value


@dataclass
class SubproblemResult:
    """Optimal recourse of one scenario at a fixed first stage."""

    scenario_id: int
    probability: float
    objective: float
    primal: np.ndarray
    duals: np.ndarray
    reduced_costs: np.ndarray
    pi_capacity: np.ndarray
    pi_choice: np.ndarray
    pi_mccormick: np.ndarray
    basis: Optional[Basis] = field(default=None, repr=False, compare=False)

    @property
    def bound_term(self) -> float:
        """Contribution of column bounds to the dual objective."""
        return float(self.reduced_costs @ self.primal)


def _solve_block(
    block: SecondStageBlock, v: np.ndarray, solver: Optional[LpSolver] = None
) -> SubproblemResult:
    solver = solver or InternalSolver()
    problem = block.recourse_problem(v)
    solution = solver.solve(problem, basis=block.warm)
    if solution.status != LpStatus.OPTIMAL:
        raise SubproblemError(
            f"recourse LP of scenario {block.scenario_id} ended with {solution.status.value} "
            f"({solution.message or 'no detail'})"
        )
    gap = abs(solution.dual_objective(problem) - solution.objective)
    if gap > DUALITY_WARN * max(1.0, abs(solution.objective)):
        logger.warning(
            "recourse duals of scenario %d miss the objective by %.3g", block.scenario_id, gap
        )
    duals = solution.duals
    mccormick = np.concatenate([block.rows_of(MC_X), block.rows_of(MC_LOWER)])
    return SubproblemResult(
        scenario_id=block.scenario_id,
        probability=block.probability,
        objective=solution.objective,
        primal=solution.primal,
        duals=duals,
        reduced_costs=solution.reduced_costs,
        pi_capacity=duals[block.rows_of(CAPACITY)],
        pi_choice=duals[block.rows_of(CHOICE)],
        pi_mccormick=duals[np.sort(mccormick)],
        basis=solution.basis,
    )


def solve_subproblem(
    inst: Instance,
    design: NetworkDesign,
    scenario: Scenario,
    table: Optional[UtilityTable] = None,
    block: Optional[SecondStageBlock] = None,
    solver: Optional[LpSolver] = None,
) -> SubproblemResult:
    """
    Solve the recourse LP of one scenario with (x, z) fixed.

    Complete recourse makes the LP feasible for every first-stage-feasible
    design, so a non-optimal status is a construction bug.

    Raises:
        ValueError: If the design violates the first-stage constraints
        SubproblemError: If the LP is not solved to optimality
    """
    problems = design.violations(inst)
    if problems:
        raise ValueError("; ".join(str(p) for p in problems))
    block = block or build_second_stage(inst, scenario, table)
    result = _solve_block(block, design.vector(), solver)
    block.warm = result.basis
    return result


@dataclass(frozen=True, eq=False)
class Cut:
    """eta (or eta_scenario) + x_coef . x + z_coef . z <= rhs."""

    x_coef: np.ndarray
    z_coef: np.ndarray
    rhs: float
    scenario: Optional[int] = None

    def coefficients(self) -> np.ndarray:
        return np.concatenate([self.x_coef, self.z_coef])

    def bound(self, v: np.ndarray) -> float:
        """Upper bound the cut places on eta at first-stage point v."""
        return float(self.rhs - self.coefficients() @ np.asarray(v, dtype=float))

    def scaled(self, weight: float) -> "Cut":
        return Cut(self.x_coef * weight, self.z_coef * weight, self.rhs * weight, self.scenario)


def make_cut(result: SubproblemResult, block: SecondStageBlock, mode: str = MULTI) -> Cut:
    """
    Optimality cut from the recourse duals.

    z coefficients come from the capacity-row duals, x coefficients from the
    share-bound and McCormick (o <= x, o >= x + y - 1) duals; the o <= y rows
    have no first-stage terms and only enter the right-hand side. In single
    mode the cut is weighted by the scenario probability, ready to be summed
    with `aggregate_cuts`.
    """
    mode = normalize_mode(mode)
    half = block.T.shape[1] // 2
    cap = block.rows_of(CAPACITY)
    choice = block.rows_of(CHOICE)
    mccormick = np.sort(np.concatenate([block.rows_of(MC_X), block.rows_of(MC_LOWER)]))

    z_coef = block.T[cap][:, half:].T @ result.pi_capacity
    x_coef = block.T[choice][:, :half].T @ result.pi_choice
    x_coef = x_coef + block.T[mccormick][:, :half].T @ result.pi_mccormick
    rhs = float(result.duals @ block.rhs) + result.bound_term

    cut = Cut(
        x_coef=np.asarray(x_coef, dtype=float).ravel(),
        z_coef=np.asarray(z_coef, dtype=float).ravel(),
        rhs=rhs,
        scenario=block.scenario_id,
    )
    return cut.scaled(block.probability) if mode == SINGLE else cut


def aggregate_cuts(parts: Sequence[Cut]) -> Cut:
    """Sum probability-weighted components into one cut on the single eta."""
    return Cut(
        x_coef=np.sum([c.x_coef for c in parts], axis=0),
        z_coef=np.sum([c.z_coef for c in parts], axis=0),
        rhs=float(sum(c.rhs for c in parts)),
        scenario=None,
    )


@dataclass
class MasterState:
    """Master problem and the bookkeeping of one L-shaped run."""

    master: LpProblem
    catalog: VariableCatalog
    mode: str
    eta: List[int]
    scenario_ids: List[int]
    cuts: List[Cut] = field(default_factory=list)
    incumbent: Optional[NetworkDesign] = None
    upper: float = math.inf
    lower: float = -math.inf
    iteration: int = 0

    def eta_column(self, cut: Cut) -> int:
        if self.mode == SINGLE:
            return self.eta[0]
        return self.eta[self.scenario_ids.index(cut.scenario)]

    def add_cut(self, cut: Cut) -> None:
        coeffs: Dict[int, float] = {self.eta_column(cut): 1.0}
        for col, value in zip(self.catalog.first_stage_columns(), cut.coefficients()):
            if value != 0.0:
                coeffs[col] = float(value)
        label = "all" if cut.scenario is None else str(cut.scenario)
        self.master.add_row(coeffs, RowSense.LE, cut.rhs, f"cut[{len(self.cuts)},{label}]")
        self.cuts.append(cut)


def build_master(inst: Instance, scenarios: Sequence[Scenario], mode: str) -> MasterState:
    """First stage plus eta columns capped by (expected) total demand."""
    mode = normalize_mode(mode)
    master = LpProblem(Sense.MAX, name="master")
    catalog = add_first_stage(master, inst)
    if mode == SINGLE:
        cap = sum(s.probability * s.total_demand for s in scenarios)
        eta = [master.add_column(-math.inf, cap, 1.0, name="eta")]
    else:
        eta = [
            master.add_column(-math.inf, s.total_demand, s.probability, name=f"eta[{s.id}]")
            for s in scenarios
        ]
    return MasterState(
        master=master,
        catalog=catalog,
        mode=mode,
        eta=eta,
        scenario_ids=[s.id for s in scenarios],
    )


@dataclass
class IterationRow:
    iteration: int
    lower: float
    upper: float
    cuts: int
    seconds: float

    @property
    def gap(self) -> float:
        return self.upper - self.lower


@dataclass
class RunReport:
    """Per-iteration bounds and the final outcome of a solve."""

    method: str
    status: str
    objective: float
    bound: float
    seconds: float
    cuts: int = 0
    rows: List[IterationRow] = field(default_factory=list)
    census: Dict[str, object] = field(default_factory=dict)

    @property
    def iterations(self) -> int:
        return len(self.rows)

    @property
    def gap(self) -> float:
        return self.bound - self.objective

    @property
    def gap_percent(self) -> float:
        return 100.0 * self.gap / max(self.objective, 1e-9)

    @property
    def hit_limit(self) -> bool:
        return self.status in ("time_limit", "iteration_limit")

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [
                {
                    "iteration": r.iteration,
                    "LB": r.lower,
                    "UB": r.upper,
                    "gap": r.gap,
                    "cuts": r.cuts,
                    "seconds": round(r.seconds, 3),
                }
                for r in self.rows
            ],
            columns=["iteration", "LB", "UB", "gap", "cuts", "seconds"],
        )

    def summary(self) -> Dict[str, object]:
        return {
            "method": self.method,
            "status": self.status,
            "objective": self.objective,
            "bound": self.bound,
            "gap_percent": self.gap_percent,
            "iterations": self.iterations,
            "cuts": self.cuts,
            "seconds": self.seconds,
        }


def evaluate_recourse(
    inst: Instance,
    design: NetworkDesign,
    scenarios: Sequence[Scenario],
    tables: Optional[Sequence[UtilityTable]] = None,
    jobs: int = 1,
) -> Tuple[float, List[float]]:
    """
    Expected recourse sum_w p_w phi(x, z, w) of a fixed design.

    Returns:
        The expectation and the per-scenario values phi in scenario order
    """
    problems = design.violations(inst)
    if problems:
        raise ValueError("; ".join(str(p) for p in problems))
    blocks = [
        build_second_stage(inst, s, tables[k] if tables is not None else None)
        for k, s in enumerate(scenarios)
    ]
    results = ordered_map(partial(_solve_at, design.vector()), blocks, jobs)
    values = [r.objective for r in results]
    return float(sum(r.probability * r.objective for r in results)), values


def _solve_at(
    v: np.ndarray, block: SecondStageBlock, solver: Optional[LpSolver] = None
) -> SubproblemResult:
    return _solve_block(block, v, solver)


def _keep_bases(blocks: Sequence[SecondStageBlock], results: Sequence[SubproblemResult]) -> None:
    # Workers solve copies of the blocks, so the bases come back on the results
    for block, result in zip(blocks, results):
        block.warm = result.basis


def run_lshaped(
    inst: Instance,
    scenarios: Sequence[Scenario],
    tables: Optional[Sequence[UtilityTable]] = None,
    mode: str = MULTI,
    epsilon: float = 1e-4,
    time_limit: Optional[float] = None,
    max_iterations: int = 200,
    gap_tol: float = DEFAULT_GAP_TOL,
    jobs: int = 1,
    solver: Optional[LpSolver] = None,
) -> Tuple[NetworkDesign, RunReport]:
    """
    Run the L-shaped method until UB - LB <= epsilon.

    Args:
        inst: Network instance
        scenarios: Scenario set with weights
        tables: Utility tables aligned with scenarios (default: attached tables)
        mode: 'single' or 'multi' (also 'single-cut'/'multi-cut')
        epsilon: Absolute tolerance on the bound gap (drivers per day)
        time_limit: Wall-clock seconds; on expiry the incumbent is returned
        max_iterations: Iteration cap
        gap_tol: Relative gap for each master branch-and-bound
        jobs: Worker processes for the recourse solves

    Returns:
        Incumbent design and the run report

    Raises:
        ValueError: On an empty scenario set or non-positive epsilon
        SubproblemError: If a recourse LP fails
    """
    if epsilon <= 0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    if not scenarios:
        raise ValueError("scenario set must not be empty")
    mode = normalize_mode(mode)
    solver = solver or InternalSolver()
    start = time.monotonic()

    blocks = [
        build_second_stage(inst, s, tables[k] if tables is not None else None)
        for k, s in enumerate(scenarios)
    ]
    state = build_master(inst, scenarios, mode)
    first_stage = state.catalog.first_stage_columns()
    rows: List[IterationRow] = []
    status = "optimal"
    master_basis: Optional[Basis] = None

    while True:
        elapsed = time.monotonic() - start
        if time_limit is not None and elapsed >= time_limit:
            status = "time_limit"
            break
        state.iteration += 1
        remaining = None if time_limit is None else time_limit - elapsed
        master = solver.solve_mixed(
            state.master, gap_tol=gap_tol, time_limit=remaining, basis=master_basis
        )
        master_basis = master.basis
        if not master.has_solution:
            if master.status == LpStatus.ITERATION_LIMIT:
                status = "time_limit"
                break
            raise SubproblemError(f"master problem ended with {master.status.value}")
        bound = master.bound if math.isfinite(master.bound) else master.objective
        state.upper = min(state.upper, bound)

        v = np.rint(master.primal[first_stage])
        results = ordered_map(partial(_solve_at, v, solver=solver), blocks, jobs)
        _keep_bases(blocks, results)
        value = float(sum(r.probability * r.objective for r in results))
        if value > state.lower:
            state.lower = value
            state.incumbent = state.catalog.design_from(master.primal)

        parts = [make_cut(r, b, mode) for r, b in zip(results, blocks)]
        new_cuts = [aggregate_cuts(parts)] if mode == SINGLE else parts
        for cut in new_cuts:
            state.add_cut(cut)

        rows.append(
            IterationRow(
                iteration=state.iteration,
                lower=state.lower,
                upper=state.upper,
                cuts=len(state.cuts),
                seconds=time.monotonic() - start,
            )
        )
        logger.debug(
            "iteration %d: LB %.6f UB %.6f (+%d cuts)",
            state.iteration,
            state.lower,
            state.upper,
            len(new_cuts),
        )

        if state.upper - state.lower <= epsilon:
            break
        if master.status == LpStatus.ITERATION_LIMIT:
            status = "time_limit"
            break
        if state.iteration >= max_iterations:
            status = "iteration_limit"
            break

    seconds = time.monotonic() - start
    incumbent = state.incumbent or NetworkDesign.empty(inst.n_types, inst.n_lots)
    report = RunReport(
        method=f"{mode}-cut",
        status=status,
        objective=max(state.lower, 0.0) if state.incumbent is None else state.lower,
        bound=state.upper,
        seconds=seconds,
        cuts=len(state.cuts),
        rows=rows,
        census=census(inst, scenarios, tables).to_dict(),
    )
    logger.info(
        "%s-cut L-shaped %s after %d iterations: LB %.6f UB %.6f, %d cuts, %.2fs",
        mode,
        status,
        report.iterations,
        report.objective,
        report.bound,
        report.cuts,
        seconds,
    )
    return incumbent, report
