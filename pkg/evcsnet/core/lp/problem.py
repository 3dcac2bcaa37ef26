"""Sparse linear/mixed-integer problem description and solution record."""
import copy
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Mapping, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

# Tolerances shared by the simplex and branch-and-bound
FEASIBILITY_TOL = 1e-7
OPTIMALITY_TOL = 1e-7
INTEGRALITY_TOL = 1e-6

INF = math.inf


class Sense(str, Enum):
    MAX = "max"
    MIN = "min"


class RowSense(str, Enum):
    LE = "<="
    GE = ">="
    EQ = "="


class LpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration_limit"


class LpProblem:
    """
    Linear program built column by column and row by row.

    Rows are stored sparsely; `matrix()` assembles a CSR matrix on demand.
    """

    def __init__(self, sense: Sense = Sense.MAX, name: str = "lp") -> None:
        self.sense = sense
        self.name = name
        self.lower: List[float] = []
        self.upper: List[float] = []
        self.obj: List[float] = []
        self.integer: List[bool] = []
        self.col_names: List[str] = []
        self.row_cols: List[np.ndarray] = []
        self.row_vals: List[np.ndarray] = []
        self.row_sense: List[RowSense] = []
        self.rhs: List[float] = []
        self.row_names: List[str] = []
        self.objective_offset = 0.0
        self._matrix: Optional[sp.csr_matrix] = None

    @property
    def num_columns(self) -> int:
        return len(self.obj)

    @property
    def num_rows(self) -> int:
        return len(self.rhs)

    def add_column(
        self,
        lower: float = 0.0,
        upper: float = INF,
        obj: float = 0.0,
        integer: bool = False,
        name: Optional[str] = None,
    ) -> int:
        """Add a column and return its index."""
        if lower > upper:
            raise ValueError(f"column bounds must satisfy lower <= upper, got [{lower}, {upper}]")
        index = self.num_columns
        self.lower.append(float(lower))
        self.upper.append(float(upper))
        self.obj.append(float(obj))
        self.integer.append(bool(integer))
        self.col_names.append(name or f"c{index}")
        self._matrix = None
        return index

    def add_row(
        self,
        coeffs: Mapping[int, float],
        sense: RowSense,
        rhs: float,
        name: Optional[str] = None,
    ) -> int:
        """Add a row sum(coeffs[j] * x_j) <sense> rhs and return its index."""
        cols = np.fromiter(coeffs.keys(), dtype=int, count=len(coeffs))
        vals = np.fromiter(coeffs.values(), dtype=float, count=len(coeffs))
        if cols.size and (cols.min() < 0 or cols.max() >= self.num_columns):
            raise ValueError(f"row {name or self.num_rows} references an unknown column")
        if not np.all(np.isfinite(vals)) or not math.isfinite(rhs):
            raise ValueError(f"row {name or self.num_rows} has non-finite data")
        keep = vals != 0.0
        index = self.num_rows
        self.row_cols.append(cols[keep])
        self.row_vals.append(vals[keep])
        self.row_sense.append(RowSense(sense))
        self.rhs.append(float(rhs))
        self.row_names.append(name or f"r{index}")
        self._matrix = None
        return index

    def matrix(self) -> sp.csr_matrix:
        """Constraint matrix (rows x columns)."""
        if self._matrix is None:
            if self.num_rows:
                indptr = np.concatenate([[0], np.cumsum([c.size for c in self.row_cols])])
                indices = np.concatenate(self.row_cols) if indptr[-1] else np.zeros(0, dtype=int)
                data = np.concatenate(self.row_vals) if indptr[-1] else np.zeros(0)
            else:
                indptr, indices, data = np.zeros(1, dtype=int), np.zeros(0, dtype=int), np.zeros(0)
            self._matrix = sp.csr_matrix(
                (data, indices, indptr), shape=(self.num_rows, self.num_columns)
            )
        return self._matrix

    def with_rhs(self, rhs: Sequence[float]) -> "LpProblem":
        """Copy sharing columns and matrix, with a new right-hand side."""
        if len(rhs) != self.num_rows:
            raise ValueError(f"expected {self.num_rows} right-hand sides, got {len(rhs)}")
        clone = copy.copy(self)
        clone.rhs = [float(v) for v in rhs]
        return clone

    def bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.lower, dtype=float), np.asarray(self.upper, dtype=float)

    def objective_vector(self) -> np.ndarray:
        return np.asarray(self.obj, dtype=float)

    def integer_columns(self) -> np.ndarray:
        return np.flatnonzero(np.asarray(self.integer, dtype=bool))

    def objective_value(self, x: np.ndarray) -> float:
        return float(self.objective_vector() @ x) + self.objective_offset

    def row_activity(self, x: np.ndarray) -> np.ndarray:
        return self.matrix() @ x

    def max_violation(self, x: np.ndarray) -> float:
        """Largest bound or row violation of a point."""
        lo, hi = self.bounds()
        worst = float(max(np.max(lo - x, initial=0.0), np.max(x - hi, initial=0.0)))
        gap = self.row_activity(x) - np.asarray(self.rhs, dtype=float)
        senses = np.array([s.value for s in self.row_sense], dtype=object)
        excess = np.where(
            senses == RowSense.LE.value, gap, np.where(senses == RowSense.GE.value, -gap, np.abs(gap))
        )
        return max(worst, float(np.max(excess, initial=0.0)))


@dataclass
class Basis:
    """
    Final simplex basis, reusable as a warm start for a problem of the same shape.

    `basic` holds the basic column per kept row; columns are numbered
    [structural | slack] and `status` gives every column's position.
    """

    rows: np.ndarray
    basic: np.ndarray
    status: np.ndarray


@dataclass
class LpSolution:
    """
    Result of an LP or MILP solve.

    Duals and reduced costs follow the problem's own sense: for a maximization
    with <= rows, duals are non-negative and objective = duals . rhs +
    reduced_costs . primal.
    """

    status: LpStatus
    objective: float = math.nan
    primal: np.ndarray = field(default_factory=lambda: np.zeros(0))
    duals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    reduced_costs: np.ndarray = field(default_factory=lambda: np.zeros(0))
    iterations: int = 0
    bound: float = math.nan
    nodes: int = 0
    trace: List[Tuple[int, float, float, float]] = field(default_factory=list)
    message: str = ""
    basis: Optional[Basis] = None

    @property
    def has_solution(self) -> bool:
        return self.primal.size > 0 and math.isfinite(self.objective)

    def dual_objective(self, problem: LpProblem) -> float:
        """duals . rhs + reduced_costs . primal (+ objective offset)."""
        return (
            float(self.duals @ np.asarray(problem.rhs, dtype=float))
            + float(self.reduced_costs @ self.primal)
            + problem.objective_offset
        )

    def relative_gap(self) -> float:
        """|bound - objective| / max(1, |objective|); 0 for a proven optimum."""
        if not (math.isfinite(self.bound) and math.isfinite(self.objective)):
            return math.inf
        return abs(self.bound - self.objective) / max(1.0, abs(self.objective))
