"""
Bounded-variable primal simplex with dual extraction.

Every row gets a slack (a x + s = b) whose bounds encode the row sense, so
the method works on equalities with bounded columns throughout. The basis is
held as a sparse LU factorization plus a file of eta columns, one per pivot,
and refactored periodically. Phase 1 minimizes the sum of bound violations of
the basic variables, so it starts from any basis: the slack basis, or the
final basis of an earlier solve of a problem with the same shape.
"""
import logging
import math
from typing import List, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from evcsnet.core.lp.problem import (
    FEASIBILITY_TOL,
    OPTIMALITY_TOL,
    Basis,
    LpProblem,
    LpSolution,
    LpStatus,
    RowSense,
    Sense,
)

logger = logging.getLogger(__name__)

PIVOT_TOL = 1e-9
DEGENERATE_STEP = 1e-12
REFACTOR_INTERVAL = 64
RESIDUAL_WARN = 1e-6

_BASIC, _LOWER, _UPPER, _FREE = 0, 1, 2, 3


class _Factor:
    """LU of the basis at the last refactor, followed by product-form etas."""

    def __init__(self, B: sp.csc_matrix) -> None:
        self.m = B.shape[0]
        self.lu = splu(B) if self.m else None
        self.etas: List[Tuple[int, np.ndarray]] = []

    def ftran(self, a: np.ndarray) -> np.ndarray:
        """Solve B w = a."""
        w = self.lu.solve(a) if self.m else a.copy()
        for r, alpha in self.etas:
            pivot = w[r] / alpha[r]
            w -= pivot * alpha
            w[r] = pivot
        return w

    def btran(self, c: np.ndarray) -> np.ndarray:
        """Solve B^T y = c."""
        v = np.array(c, dtype=float)
        for r, alpha in reversed(self.etas):
            v[r] += (v[r] - alpha @ v) / alpha[r]
        return self.lu.solve(v, trans="T") if self.m else v

    def update(self, r: int, alpha: np.ndarray) -> None:
        self.etas.append((r, alpha.copy()))


class _BoundedSimplex:
    """Simplex state over columns [structural | slack]."""

    def __init__(
        self,
        A: sp.csc_matrix,
        b: np.ndarray,
        lo: np.ndarray,
        hi: np.ndarray,
        x: np.ndarray,
        status: np.ndarray,
        basis: np.ndarray,
        max_iterations: int,
    ) -> None:
        self.A = A
        self.AT = A.T.tocsr()
        self.b = b
        self.lo = lo
        self.hi = hi
        self.x = x
        self.status = status
        self.basis = basis
        self.m = A.shape[0]
        self.max_iterations = max_iterations
        self.iterations = 0
        self.factor: Optional[_Factor] = None

    def column(self, j: int) -> np.ndarray:
        col = np.zeros(self.m)
        start, end = self.A.indptr[j], self.A.indptr[j + 1]
        col[self.A.indices[start:end]] = self.A.data[start:end]
        return col

    def refactor(self) -> bool:
        """Factor the basis and recompute basic values; False if singular."""
        try:
            factor = _Factor(self.A[:, self.basis].tocsc())
        except RuntimeError:
            return False
        nonbasic = self.x.copy()
        nonbasic[self.basis] = 0.0
        xb = factor.ftran(self.b - self.A @ nonbasic)
        if not np.all(np.isfinite(xb)):
            return False
        self.factor = factor
        self.x[self.basis] = xb
        return True

    def duals(self, cost: np.ndarray) -> np.ndarray:
        return self.factor.btran(cost[self.basis])

    def infeasible(self) -> Tuple[np.ndarray, np.ndarray]:
        xb = self.x[self.basis]
        below = xb < self.lo[self.basis] - FEASIBILITY_TOL
        above = xb > self.hi[self.basis] + FEASIBILITY_TOL
        return below, above

    def run(self, cost: Optional[np.ndarray]) -> str:
        """
        Iterate one phase.

        With `cost=None` this is phase 1 and returns 'feasible' or
        'infeasible'; otherwise it returns 'optimal' or 'unbounded'. Both
        phases may return 'limit' or 'singular'.
        """
        degenerate = 0
        bland = False
        while True:
            if cost is None:
                below, above = self.infeasible()
                if not (below.any() or above.any()):
                    return "feasible"
                basic_cost = above.astype(float) - below.astype(float)
                y = self.factor.btran(basic_cost)
                d = -(self.AT @ y)
                d[self.basis] = 0.0
            else:
                y = self.duals(cost)
                d = cost - self.AT @ y

            j, direction = self._price(d, bland)
            if j < 0:
                return "optimal" if cost is not None else "infeasible"
            if self.iterations >= self.max_iterations:
                return "limit"

            alpha = self.factor.ftran(self.column(j))
            r, theta, target, flip = self._ratio(j, direction, alpha, bland, cost is None)
            if math.isinf(theta):
                return "unbounded" if cost is not None else "singular"
            self._step(j, direction, alpha, r, theta, target, flip)
            self.iterations += 1
            if len(self.factor.etas) >= REFACTOR_INTERVAL and not self.refactor():
                return "singular"

            if theta <= DEGENERATE_STEP:
                degenerate += 1
                if degenerate >= 10 * max(self.m, 1) and not bland:
                    logger.debug("switching to Bland's rule after %d degenerate pivots", degenerate)
                    bland = True
            else:
                degenerate = 0
                bland = False

    def _price(self, d: np.ndarray, bland: bool) -> Tuple[int, int]:
        movable = self.lo < self.hi
        st = self.status
        up = ((st == _LOWER) | (st == _FREE)) & (d < -OPTIMALITY_TOL) & movable
        down = ((st == _UPPER) | (st == _FREE)) & (d > OPTIMALITY_TOL) & movable
        eligible = up | down
        if not eligible.any():
            return -1, 0
        if bland:
            j = int(np.argmax(eligible))
        else:
            j = int(np.argmax(np.where(eligible, np.abs(d), 0.0)))
        return j, (1 if up[j] else -1)

    def _ratio(
        self, j: int, direction: int, alpha: np.ndarray, bland: bool, phase1: bool
    ) -> Tuple[int, float, float, bool]:
        """Return (row, step, bound the leaving variable lands on, bound flip)."""
        delta = -direction * alpha
        xb = self.x[self.basis]
        lb = self.lo[self.basis]
        ub = self.hi[self.basis]
        limits = np.full(self.m, math.inf)
        targets = np.zeros(self.m)
        dec = delta < -PIVOT_TOL
        inc = delta > PIVOT_TOL
        if phase1:
            # Infeasible basics block at the bound they violate
            below, above = self.infeasible()
            feasible = ~(below | above)
            low = dec & feasible
            high = inc & feasible
            rise = inc & below
            fall = dec & above
            limits[rise] = (lb[rise] - xb[rise]) / delta[rise]
            targets[rise] = lb[rise]
            limits[fall] = (xb[fall] - ub[fall]) / -delta[fall]
            targets[fall] = ub[fall]
        else:
            low, high = dec, inc
        limits[low] = (xb[low] - lb[low]) / -delta[low]
        targets[low] = lb[low]
        limits[high] = (ub[high] - xb[high]) / delta[high]
        targets[high] = ub[high]
        limits = np.maximum(limits, 0.0)
        theta = float(limits.min()) if self.m else math.inf

        span = self.hi[j] - self.lo[j]
        if math.isfinite(span) and span <= theta:
            return -1, float(span), 0.0, True
        if math.isinf(theta):
            return -1, math.inf, 0.0, False

        ties = np.flatnonzero(limits <= theta + DEGENERATE_STEP)
        if bland:
            r = int(ties[np.argmin(self.basis[ties])])
        else:
            r = int(ties[np.argmax(np.abs(alpha[ties]))])
        return r, theta, float(targets[r]), False

    def _step(
        self,
        j: int,
        direction: int,
        alpha: np.ndarray,
        r: int,
        theta: float,
        target: float,
        flip: bool,
    ) -> None:
        self.x[self.basis] += theta * (-direction * alpha)
        if flip:
            self.x[j] = self.hi[j] if direction > 0 else self.lo[j]
            self.status[j] = _UPPER if direction > 0 else _LOWER
            return

        self.x[j] += direction * theta
        leaving = self.basis[r]
        self.x[leaving] = target
        if self.lo[leaving] == self.hi[leaving] or target == self.lo[leaving]:
            self.status[leaving] = _LOWER
        else:
            self.status[leaving] = _UPPER
        self.basis[r] = j
        self.status[j] = _BASIC
        self.factor.update(r, alpha)


def _row_satisfied(sense: RowSense, rhs: float) -> bool:
    if sense == RowSense.LE:
        return 0.0 <= rhs + FEASIBILITY_TOL
    if sense == RowSense.GE:
        return 0.0 >= rhs - FEASIBILITY_TOL
    return abs(rhs) <= FEASIBILITY_TOL


def _slack_bounds(sense: RowSense) -> Tuple[float, float]:
    if sense == RowSense.LE:
        return 0.0, math.inf
    if sense == RowSense.GE:
        return -math.inf, 0.0
    return 0.0, 0.0


def _at_bound(lo: np.ndarray, hi: np.ndarray, prefer_upper: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Nonbasic values and statuses: the preferred finite bound, else the other, else zero."""
    use_upper = (prefer_upper & np.isfinite(hi)) | (~np.isfinite(lo) & np.isfinite(hi))
    use_upper &= lo < hi
    x = np.where(use_upper, hi, np.where(np.isfinite(lo), lo, 0.0))
    status = np.where(
        use_upper, _UPPER, np.where(np.isfinite(lo), _LOWER, _FREE)
    ).astype(int)
    return x, status


def _warm_state(
    warm: Optional[Basis], rows: np.ndarray, lo: np.ndarray, hi: np.ndarray
) -> Optional[Tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """
    Starting (x, status, basis) from an earlier basis, or None if it does not fit.

    Rows appended since the earlier solve enter with their slacks basic.
    """
    if warm is None:
        return None
    kept = warm.rows.size
    added = rows.size - kept
    if added < 0 or warm.status.size != lo.size - added or not np.array_equal(warm.rows, rows[:kept]):
        return None
    status = np.concatenate([warm.status, np.full(added, _BASIC)]).astype(int)
    n = lo.size - rows.size
    basis = np.concatenate([warm.basic, n + kept + np.arange(added)]).astype(int)
    x, nonbasic = _at_bound(lo, hi, status == _UPPER)
    is_basic = status == _BASIC
    status = np.where(is_basic, _BASIC, nonbasic).astype(int)
    x[is_basic] = 0.0
    return x, status, basis


def _slack_state(
    A: sp.csc_matrix, b: np.ndarray, lo: np.ndarray, hi: np.ndarray, n: int
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Structurals at a finite bound (zero if free) with every slack basic."""
    m = b.size
    x, status = _at_bound(lo, hi, np.zeros(lo.size, dtype=bool))
    x[n:] = b - A[:, :n] @ x[:n]
    status[n:] = _BASIC
    return x, status, n + np.arange(m)


def solve_lp(
    problem: LpProblem,
    lower: Optional[np.ndarray] = None,
    upper: Optional[np.ndarray] = None,
    max_iterations: Optional[int] = None,
    basis: Optional[Basis] = None,
) -> LpSolution:
    """
    Solve the continuous relaxation of `problem` (integrality flags ignored).

    Args:
        problem: Problem to solve
        lower, upper: Optional column bounds replacing the problem's own
        max_iterations: Pivot budget over both phases
        basis: Optional final basis of an earlier solve to start from; it is
            ignored when its shape does not match or it is singular

    Returns:
        LpSolution; duals and reduced costs are in the problem's sense, and
        `basis` holds the final basis for a later warm start
    """
    A_full = problem.matrix()
    n = problem.num_columns
    lo0, hi0 = problem.bounds()
    lo = lo0.copy() if lower is None else np.asarray(lower, dtype=float).copy()
    hi = hi0.copy() if upper is None else np.asarray(upper, dtype=float).copy()
    if np.any(lo > hi + FEASIBILITY_TOL):
        return LpSolution(status=LpStatus.INFEASIBLE, message="crossed column bounds")
    hi = np.maximum(hi, lo)

    c = problem.objective_vector()
    sign = 1.0 if problem.sense == Sense.MIN else -1.0
    b_all = np.asarray(problem.rhs, dtype=float)
    senses = problem.row_sense

    # Empty rows carry no variables: check them and drop them
    nonempty = np.diff(A_full.indptr) > 0
    for i in np.flatnonzero(~nonempty):
        if not _row_satisfied(senses[i], b_all[i]):
            return LpSolution(status=LpStatus.INFEASIBLE, message=f"empty row {problem.row_names[i]}")
    rows = np.flatnonzero(nonempty)
    A = A_full[rows]
    b = b_all[rows]
    m = rows.size

    if max_iterations is None:
        max_iterations = max(1000, 20 * (m + n))

    slack_bounds = np.array([_slack_bounds(senses[i]) for i in rows]).reshape(m, 2)
    lo_all = np.concatenate([lo, slack_bounds[:, 0]])
    hi_all = np.concatenate([hi, slack_bounds[:, 1]])
    big = sp.hstack([A.tocsc(), sp.identity(m, format="csc")], format="csc")

    starts = []
    warm = _warm_state(basis, rows, lo_all, hi_all)
    if warm is not None:
        starts.append(("warm", warm))
    starts.append(("slack", _slack_state(big, b, lo_all, hi_all, n)))
    engine = None
    for label, (x, status, basic) in starts:
        engine = _BoundedSimplex(
            A=big,
            b=b,
            lo=lo_all,
            hi=hi_all,
            x=x,
            status=status,
            basis=basic,
            max_iterations=max_iterations,
        )
        if engine.refactor():
            break
        logger.debug("lp %s: %s basis is singular", problem.name, label)
        engine = None
    if engine is None:
        return LpSolution(status=LpStatus.ITERATION_LIMIT, message="singular starting basis")

    outcome = engine.run(None)
    if outcome == "infeasible":
        logger.debug("lp %s: phase 1 ended infeasible", problem.name)
        return LpSolution(status=LpStatus.INFEASIBLE, iterations=engine.iterations, message="phase 1")
    if outcome != "feasible":
        return _limit(engine, outcome)

    cost = np.concatenate([sign * c, np.zeros(m)])
    outcome = engine.run(cost)
    if outcome == "unbounded":
        return LpSolution(status=LpStatus.UNBOUNDED, iterations=engine.iterations)
    if outcome != "optimal":
        return _limit(engine, outcome)
    if not engine.refactor():
        return _limit(engine, "singular")

    primal = np.clip(engine.x[:n], lo, hi)
    residual = problem.max_violation(primal)
    if residual > RESIDUAL_WARN:
        logger.warning("lp %s: optimal point violates a row or bound by %.3g", problem.name, residual)
    y = engine.duals(cost)
    duals = np.zeros(problem.num_rows)
    duals[rows] = sign * y
    reduced = c - A_full.T @ duals
    objective = float(c @ primal) + problem.objective_offset
    logger.debug(
        "lp %s: optimal %.9g after %d pivots (%d rows, %d cols, %s start)",
        problem.name,
        objective,
        engine.iterations,
        m,
        n,
        label,
    )
    return LpSolution(
        status=LpStatus.OPTIMAL,
        objective=objective,
        primal=primal,
        duals=duals,
        reduced_costs=np.asarray(reduced).ravel(),
        iterations=engine.iterations,
        bound=objective,
        basis=Basis(rows=rows, basic=engine.basis.copy(), status=engine.status.copy()),
    )


def _limit(engine: _BoundedSimplex, outcome: str) -> LpSolution:
    message = "singular basis" if outcome == "singular" else "iteration limit"
    logger.debug("simplex stopped: %s after %d pivots", message, engine.iterations)
    return LpSolution(status=LpStatus.ITERATION_LIMIT, iterations=engine.iterations, message=message)
