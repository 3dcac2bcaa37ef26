"""Best-first branch-and-bound over the simplex relaxation."""
import heapq
import logging
import math
import time
from typing import List, Optional, Tuple

import numpy as np

from evcsnet.core.lp.problem import INTEGRALITY_TOL, Basis, LpProblem, LpSolution, LpStatus, Sense
from evcsnet.core.lp.simplex import solve_lp

logger = logging.getLogger(__name__)

DEFAULT_GAP_TOL = 1e-9

_Node = Tuple[float, int, np.ndarray, np.ndarray, LpSolution]


def relative_gap(bound: float, incumbent: float) -> float:
    """(bound - incumbent) / max(1, |incumbent|) for a maximization."""
    return (bound - incumbent) / max(1.0, abs(incumbent))


def branching_column(primal: np.ndarray, integer_cols: np.ndarray) -> int:
    """Most fractional integer column (lowest index on ties), or -1 if integral."""
    if integer_cols.size == 0:
        return -1
    values = primal[integer_cols]
    frac = np.abs(values - np.rint(values))
    k = int(np.argmax(frac))
    if frac[k] <= INTEGRALITY_TOL:
        return -1
    return int(integer_cols[k])


def solve_milp(
    problem: LpProblem,
    gap_tol: float = DEFAULT_GAP_TOL,
    time_limit: Optional[float] = None,
    node_limit: Optional[int] = None,
    basis: Optional[Basis] = None,
) -> LpSolution:
    """
    Solve a mixed-integer problem by best-first branch-and-bound.

    Nodes are explored in order of their relaxation bound. The branching
    variable is the most fractional one; the down branch is created first.

    Args:
        problem: Problem with integrality flags on some columns
        gap_tol: Stop once (bound - incumbent) / max(1, |incumbent|) <= gap_tol
        time_limit: Wall-clock seconds; on expiry the incumbent is returned
            with status ITERATION_LIMIT and a valid bound
        node_limit: Optional cap on child relaxations solved
        basis: Warm start for the root relaxation; the root's own final basis
            is returned on the result

    Returns:
        LpSolution with `bound`, `nodes` and the incumbency `trace`
        (nodes, seconds, incumbent, bound) in the problem's own sense
    """
    start = time.monotonic()
    sense = 1.0 if problem.sense == Sense.MAX else -1.0
    ints = problem.integer_columns()
    lo, hi = problem.bounds()
    lo[ints] = np.ceil(lo[ints] - INTEGRALITY_TOL)
    hi[ints] = np.floor(hi[ints] + INTEGRALITY_TOL)
    if np.any(lo > hi):
        return LpSolution(status=LpStatus.INFEASIBLE, message="empty integer domain")

    root = solve_lp(problem, lo, hi, basis=basis)
    iterations = root.iterations
    if root.status != LpStatus.OPTIMAL:
        return LpSolution(status=root.status, iterations=iterations, message=f"root {root.message}")

    incumbent: Optional[LpSolution] = None
    best = -math.inf
    unresolved = -math.inf
    trace: List[Tuple[int, float, float, float]] = []
    heap: List[_Node] = []
    seq = 0
    nodes = 0
    limited = False

    def score(sol: LpSolution) -> float:
        return sense * sol.objective

    def global_bound() -> float:
        top = -heap[0][0] if heap else -math.inf
        return max(top, best, unresolved)

    def accept(sol: LpSolution) -> None:
        nonlocal incumbent, best
        primal = sol.primal.copy()
        primal[ints] = np.rint(primal[ints])
        incumbent = LpSolution(
            status=LpStatus.OPTIMAL,
            objective=problem.objective_value(primal),
            primal=primal,
            duals=sol.duals,
            reduced_costs=sol.reduced_costs,
        )
        best = sense * incumbent.objective
        trace.append(
            (nodes, time.monotonic() - start, incumbent.objective, sense * global_bound())
        )
        logger.debug("node %d: new incumbent %.9g", nodes, incumbent.objective)

    def prunable(bound: float) -> bool:
        return incumbent is not None and relative_gap(bound, best) <= gap_tol

    if branching_column(root.primal, ints) < 0:
        accept(root)
    else:
        heapq.heappush(heap, (-score(root), seq, lo, hi, root))

    while heap:
        if prunable(-heap[0][0]):
            break
        if time_limit is not None and time.monotonic() - start >= time_limit:
            limited = True
            break
        if node_limit is not None and nodes >= node_limit:
            limited = True
            break

        neg_bound, _, node_lo, node_hi, sol = heapq.heappop(heap)
        if prunable(-neg_bound):
            continue
        j = branching_column(sol.primal, ints)
        value = sol.primal[j]

        down_hi = node_hi.copy()
        down_hi[j] = math.floor(value)
        up_lo = node_lo.copy()
        up_lo[j] = math.ceil(value)
        for child_lo, child_hi in ((node_lo, down_hi), (up_lo, node_hi)):
            if child_lo[j] > child_hi[j]:
                continue
            child = solve_lp(problem, child_lo, child_hi, basis=sol.basis)
            nodes += 1
            iterations += child.iterations
            if child.status == LpStatus.INFEASIBLE:
                continue
            if child.status != LpStatus.OPTIMAL:
                # Keep the parent bound so the reported bound stays valid
                unresolved = max(unresolved, -neg_bound)
                logger.warning("node relaxation ended with %s; branch dropped", child.status.value)
                continue
            if prunable(score(child)):
                continue
            if branching_column(child.primal, ints) < 0:
                if score(child) > best:
                    accept(child)
            else:
                seq += 1
                heapq.heappush(heap, (-score(child), seq, child_lo, child_hi, child))

    bound = global_bound()
    elapsed = time.monotonic() - start
    if incumbent is None:
        status = LpStatus.ITERATION_LIMIT if limited or unresolved > -math.inf else LpStatus.INFEASIBLE
        logger.info("branch-and-bound: no incumbent after %d nodes (%s)", nodes, status.value)
        return LpSolution(
            status=status,
            iterations=iterations,
            bound=sense * bound,
            nodes=nodes,
            trace=trace,
            message="no integer solution found",
            basis=root.basis,
        )

    if unresolved > -math.inf and relative_gap(unresolved, best) > gap_tol:
        limited = True
    status = LpStatus.ITERATION_LIMIT if limited else LpStatus.OPTIMAL
    logger.info(
        "branch-and-bound %s: objective %.9g, bound %.9g, %d nodes, %.2fs",
        status.value,
        incumbent.objective,
        sense * bound,
        nodes,
        elapsed,
    )
    incumbent.status = status
    incumbent.bound = sense * bound
    incumbent.iterations = iterations
    incumbent.nodes = nodes
    incumbent.trace = trace
    incumbent.message = "time or node limit" if limited else ""
    incumbent.basis = root.basis
    return incumbent
