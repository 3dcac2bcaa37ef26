"""
Deterministic-equivalent model (DEP).

The first stage opens charger types at lots (x, binary) and installs chargers
(z, integer) under lot capacity and budget. Each scenario adds a recourse
block that routes cell demand to (lot, type) pairs through proportions y,
with the logit share bound linearized by McCormick variables o = x * y.

Every recourse row is stored as W y + T v <= rhs, where v is the first-stage
vector (x flattened type-major, then z). The DEP places all blocks side by
side; the L-shaped method solves the same blocks one at a time with v fixed.
"""
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Collection, Dict, List, Optional, Sequence, Set, Tuple

import numpy as np
import scipy.sparse as sp

from evcsnet.core.lp.branch_bound import DEFAULT_GAP_TOL
from evcsnet.core.lp.problem import Basis, LpProblem, LpSolution, LpStatus, RowSense, Sense
from evcsnet.core.lp.solver import InternalSolver, LpSolver
from evcsnet.models.instance import Instance, NetworkDesign
from evcsnet.models.scenario import Scenario, UtilityTable

logger = logging.getLogger(__name__)

# Recourse row families
CAPACITY = "capacity"
CHOICE = "choice"
MC_X = "mc_x"
MC_Y = "mc_y"
MC_LOWER = "mc_lower"
BUILDING = "building"
GROUP = "group"
FAMILIES = (CAPACITY, CHOICE, MC_X, MC_Y, MC_LOWER, BUILDING, GROUP)

YKey = Tuple[int, int, int, int]  # (cell, m, j, n)
OKey = Tuple[int, int, int, int, int]  # (cell, m, j, n, l)


class ModelBuildError(RuntimeError):
    """Raised when a model's variable catalog or blocks are inconsistent."""


def first_stage_size(inst: Instance) -> int:
    return 2 * inst.n_types * inst.n_lots


def x_index(inst: Instance, n: int, j: int) -> int:
    return n * inst.n_lots + j


def z_index(inst: Instance, n: int, j: int) -> int:
    return inst.n_types * inst.n_lots + n * inst.n_lots + j


def _table_of(scenario: Scenario, table: Optional[UtilityTable]) -> UtilityTable:
    table = table if table is not None else scenario.utilities
    if table is None:
        raise ValueError(f"scenario {scenario.id} has no utility table")
    return table


def _supported_types(table: UtilityTable, j: int) -> List[int]:
    return [n for n in range(table.shape[0]) if table.supported(n, j)]


@dataclass
class SecondStageBlock:
    """
    Recourse LP of one scenario: max obj . w  s.t.  W w + T v <= rhs, bounds on w.

    `warm` holds the last optimal basis; only the right-hand side moves with v,
    so the next solve starts from it.
    """

    scenario_id: int
    probability: float
    total_demand: float
    y_keys: List[YKey]
    o_keys: List[OKey]
    objective: np.ndarray
    upper: np.ndarray
    W: sp.csr_matrix
    T: sp.csr_matrix
    rhs: np.ndarray
    families: np.ndarray
    row_names: List[str]
    _base: Optional[LpProblem] = field(default=None, repr=False)
    warm: Optional[Basis] = field(default=None, repr=False, compare=False)

    @property
    def num_columns(self) -> int:
        return len(self.objective)

    @property
    def num_rows(self) -> int:
        return len(self.rhs)

    def rows_of(self, family: str) -> np.ndarray:
        return np.flatnonzero(self.families == family)

    def counts(self) -> Dict[str, int]:
        counts = {"y": len(self.y_keys), "o": len(self.o_keys)}
        for family in FAMILIES:
            counts[family] = int(np.count_nonzero(self.families == family))
        return counts

    def column_names(self) -> List[str]:
        names = [f"y[{self.scenario_id},{c},{m},{j},{n}]" for c, m, j, n in self.y_keys]
        names += [f"o[{self.scenario_id},{c},{m},{j},{n},{l}]" for c, m, j, n, l in self.o_keys]
        return names

    def recourse_problem(self, v: np.ndarray) -> LpProblem:
        """The block as a standalone LP with the first stage fixed at v."""
        if self._base is None:
            base = LpProblem(Sense.MAX, name=f"recourse-{self.scenario_id}")
            for obj, upper, name in zip(self.objective, self.upper, self.column_names()):
                base.add_column(0.0, upper, obj, name=name)
            for i in range(self.num_rows):
                start, end = self.W.indptr[i], self.W.indptr[i + 1]
                coeffs = dict(zip(self.W.indices[start:end].tolist(), self.W.data[start:end].tolist()))
                base.add_row(coeffs, RowSense.LE, float(self.rhs[i]), self.row_names[i])
            base.matrix()
            self._base = base
        return self._base.with_rhs(self.rhs - self.T @ np.asarray(v, dtype=float))


class _RowBuffer:
    def __init__(self) -> None:
        self.local: List[Dict[int, float]] = []
        self.link: List[Dict[int, float]] = []
        self.rhs: List[float] = []
        self.families: List[str] = []
        self.names: List[str] = []

    def add(
        self, local: Dict[int, float], link: Dict[int, float], rhs: float, family: str, name: str
    ) -> None:
        self.local.append(local)
        self.link.append(link)
        self.rhs.append(rhs)
        self.families.append(family)
        self.names.append(name)

    @staticmethod
    def _csr(rows: List[Dict[int, float]], width: int) -> sp.csr_matrix:
        indptr = np.concatenate([[0], np.cumsum([len(r) for r in rows])]).astype(int)
        indices = np.fromiter((k for r in rows for k in r), dtype=int, count=int(indptr[-1]))
        data = np.fromiter((v for r in rows for v in r.values()), dtype=float, count=int(indptr[-1]))
        return sp.csr_matrix((data, indices, indptr), shape=(len(rows), width))

    def matrices(self, n_local: int, n_first: int) -> Tuple[sp.csr_matrix, sp.csr_matrix]:
        return self._csr(self.local, n_local), self._csr(self.link, n_first)


def build_second_stage(
    inst: Instance, scenario: Scenario, table: Optional[UtilityTable] = None
) -> SecondStageBlock:
    """
    Build the recourse block of one scenario.

    y exists for (cell, m, j in m, n) when type n has supporting drivers at
    lot j; o exists for each y and each type l supported at j. Rows are only
    created when they contain y or o terms.

    Raises:
        ValueError: If the scenario has no utility table
        ModelBuildError: If the table shape or a feasible set does not match the instance
    """
    table = _table_of(scenario, table)
    n_types, n_lots = inst.n_types, inst.n_lots
    if table.shape != (n_types, n_lots):
        raise ModelBuildError(
            f"scenario {scenario.id}: utility table shape {table.shape} != {(n_types, n_lots)}"
        )
    sid = scenario.id
    supported = [_supported_types(table, j) for j in range(n_lots)]

    y_keys: List[YKey] = []
    y_index: Dict[YKey, int] = {}
    for c, cell in enumerate(scenario.cells):
        if cell.total <= 0:
            continue
        for m, _ in cell.groups:
            for j in sorted(scenario.fsi.lots(cell.building, m)):
                if not 0 <= j < n_lots:
                    raise ModelBuildError(f"scenario {sid}: lot {j} is not in the instance")
                for n in supported[j]:
                    y_index[(c, m, j, n)] = len(y_keys)
                    y_keys.append((c, m, j, n))

    o_keys: List[OKey] = []
    o_index: Dict[OKey, int] = {}
    for c, m, j, n in y_keys:
        for l in supported[j]:
            o_index[(c, m, j, n, l)] = len(y_keys) + len(o_keys)
            o_keys.append((c, m, j, n, l))

    rows = _RowBuffer()

    capacity: Dict[Tuple[int, int, int], Dict[int, float]] = {}
    for (c, m, j, n), col in y_index.items():
        cell = scenario.cells[c]
        first, last = cell.gamma
        for t in range(first, last + 1):
            capacity.setdefault((t, j, n), {})[col] = cell.total
    for t, j, n in sorted(capacity):
        rows.add(
            capacity[(t, j, n)], {z_index(inst, n, j): -1.0}, 0.0, CAPACITY, f"cap[{sid},{t},{j},{n}]"
        )

    choice: Dict[Tuple[int, int, int], List[Tuple[int, int]]] = {}
    for (c, m, j, n), col in y_index.items():
        choice.setdefault((c, j, n), []).append((m, col))
    for c, j, n in sorted(choice):
        # Each row is scaled by e^-shift to keep coefficients in range
        shift = max([float(table.u_nc[j])] + [float(table.u[l, j]) for l in supported[j]])
        local: Dict[int, float] = {}
        for m, col in choice[(c, j, n)]:
            local[col] = math.exp(float(table.u_nc[j]) - shift)
            for l in supported[j]:
                local[o_index[(c, m, j, n, l)]] = math.exp(float(table.u[l, j]) - shift)
        link = {x_index(inst, n, j): -math.exp(float(table.u[n, j]) - shift)}
        rows.add(local, link, 0.0, CHOICE, f"choice[{sid},{c},{j},{n}]")

    for key in o_keys:
        c, m, j, n, l = key
        o_col, y_col = o_index[key], y_index[(c, m, j, n)]
        label = f"{sid},{c},{m},{j},{n},{l}"
        rows.add({o_col: 1.0}, {x_index(inst, l, j): -1.0}, 0.0, MC_X, f"mcx[{label}]")
        rows.add({o_col: 1.0, y_col: -1.0}, {}, 0.0, MC_Y, f"mcy[{label}]")
        rows.add({y_col: 1.0, o_col: -1.0}, {x_index(inst, l, j): 1.0}, 1.0, MC_LOWER, f"mcl[{label}]")

    by_cell: Dict[int, List[int]] = {}
    by_group: Dict[Tuple[int, int], List[int]] = {}
    for (c, m, j, n), col in y_index.items():
        by_cell.setdefault(c, []).append(col)
        by_group.setdefault((c, m), []).append(col)
    for c in sorted(by_cell):
        rows.add({col: 1.0 for col in by_cell[c]}, {}, 1.0, BUILDING, f"bld[{sid},{c}]")
    for c, m in sorted(by_group):
        cell = scenario.cells[c]
        share = dict(cell.groups)[m]
        rows.add(
            {col: cell.total for col in by_group[(c, m)]}, {}, share, GROUP, f"grp[{sid},{c},{m}]"
        )

    n_local = len(y_keys) + len(o_keys)
    W, T = rows.matrices(n_local, first_stage_size(inst))
    objective = np.zeros(n_local)
    for col, (c, _, _, _) in enumerate(y_keys):
        objective[col] = scenario.cells[c].total
    upper = np.concatenate([np.ones(len(y_keys)), np.full(len(o_keys), math.inf)])

    return SecondStageBlock(
        scenario_id=sid,
        probability=scenario.probability,
        total_demand=scenario.total_demand,
        y_keys=y_keys,
        o_keys=o_keys,
        objective=objective,
        upper=upper,
        W=W,
        T=T,
        rhs=np.asarray(rows.rhs, dtype=float),
        families=np.asarray(rows.families, dtype=object),
        row_names=rows.names,
    )


@dataclass
class ModelCensus:
    """Closed-form size of a DEP: first stage plus per-family recourse counts."""

    n_types: int
    n_lots: int
    scenarios: int
    y: int = 0
    o: int = 0
    rows: Dict[str, int] = field(default_factory=lambda: {f: 0 for f in FAMILIES})

    @property
    def binaries(self) -> int:
        return self.n_types * self.n_lots

    @property
    def integers(self) -> int:
        return self.n_types * self.n_lots

    @property
    def first_stage_rows(self) -> int:
        return self.n_lots + self.n_types * self.n_lots + 1

    @property
    def columns(self) -> int:
        return self.binaries + self.integers + self.y + self.o

    @property
    def constraints(self) -> int:
        return self.first_stage_rows + sum(self.rows.values())

    def to_dict(self) -> Dict[str, object]:
        return {
            "scenarios": self.scenarios,
            "binaries": self.binaries,
            "integers": self.integers,
            "y": self.y,
            "o": self.o,
            "columns": self.columns,
            "constraints": self.constraints,
            "rows": dict(self.rows),
        }


def census(
    inst: Instance, scenarios: Sequence[Scenario], tables: Optional[Sequence[UtilityTable]] = None
) -> ModelCensus:
    """
    Count DEP variables and rows without building the model.

    With s_j the number of types supported at lot j, a group m of a cell adds
    sum_{j in m} s_j proportions y and sum_{j in m} s_j^2 McCormick variables o
    (three rows each). Capacity rows are the distinct (t, j, n) touched by any
    y, choice rows the distinct (cell, j, n), building rows the cells with a y,
    group rows the (cell, m) with a y.
    """
    result = ModelCensus(n_types=inst.n_types, n_lots=inst.n_lots, scenarios=len(scenarios))
    for k, scenario in enumerate(scenarios):
        table = _table_of(scenario, tables[k] if tables is not None else None)
        s = [len(_supported_types(table, j)) for j in range(inst.n_lots)]
        capacity: Set[Tuple[int, int]] = set()
        choice: Set[Tuple[int, int]] = set()
        for c, cell in enumerate(scenario.cells):
            if cell.total <= 0:
                continue
            cell_has_y = False
            for m, _ in cell.groups:
                lots = scenario.fsi.lots(cell.building, m)
                in_group = sum(s[j] for j in lots)
                if in_group == 0:
                    continue
                cell_has_y = True
                result.y += in_group
                result.o += sum(s[j] ** 2 for j in lots)
                result.rows[GROUP] += 1
                for j in lots:
                    if s[j]:
                        choice.add((c, j))
                        first, last = cell.gamma
                        capacity.update((t, j) for t in range(first, last + 1))
            if cell_has_y:
                result.rows[BUILDING] += 1
        result.rows[CAPACITY] += sum(s[j] for _, j in capacity)
        result.rows[CHOICE] += sum(s[j] for (_, j) in choice)
    for family in (MC_X, MC_Y, MC_LOWER):
        result.rows[family] = result.o
    return result


@dataclass
class VariableCatalog:
    """Column indices of every model variable, keyed by its subscripts."""

    n_types: int
    n_lots: int
    x: Dict[Tuple[int, int], int] = field(default_factory=dict)
    z: Dict[Tuple[int, int], int] = field(default_factory=dict)
    y: Dict[Tuple[int, int, int, int, int], int] = field(default_factory=dict)
    o: Dict[Tuple[int, int, int, int, int, int], int] = field(default_factory=dict)
    census: Optional[ModelCensus] = None

    def first_stage_columns(self) -> List[int]:
        """Columns of v = (x type-major, z type-major)."""
        keys = [(n, j) for n in range(self.n_types) for j in range(self.n_lots)]
        return [self.x[k] for k in keys] + [self.z[k] for k in keys]

    def design_from(self, primal: np.ndarray) -> NetworkDesign:
        return NetworkDesign.from_vector(
            np.asarray(primal)[self.first_stage_columns()], self.n_types, self.n_lots
        )

    def check(self, num_columns: int) -> None:
        """
        Verify that every index is in range and used by exactly one variable.

        Raises:
            ModelBuildError: On a dangling or shared index
        """
        seen: Set[int] = set()
        total = 0
        for name, index in (("x", self.x), ("z", self.z), ("y", self.y), ("o", self.o)):
            for key, col in index.items():
                if not 0 <= col < num_columns:
                    raise ModelBuildError(f"{name}{list(key)} points to missing column {col}")
                seen.add(col)
                total += 1
        if len(seen) != total:
            raise ModelBuildError("variable catalog maps two variables to one column")
        if total != num_columns:
            raise ModelBuildError(f"catalog covers {total} of {num_columns} columns")


def add_first_stage(problem: LpProblem, inst: Instance) -> VariableCatalog:
    """
    Add x, z and the first-stage rows (lot capacity, open-before-install, budget).

    The columns occupy indices 0 .. 2*N*J - 1 in first-stage vector order.
    """
    if problem.num_columns:
        raise ModelBuildError("first-stage columns must come first")
    catalog = VariableCatalog(n_types=inst.n_types, n_lots=inst.n_lots)
    for n in range(inst.n_types):
        for j in range(inst.n_lots):
            catalog.x[(n, j)] = problem.add_column(0.0, 1.0, integer=True, name=f"x[{n},{j}]")
    for n in range(inst.n_types):
        for j, lot in enumerate(inst.lots):
            catalog.z[(n, j)] = problem.add_column(
                0.0, float(lot.capacity), integer=True, name=f"z[{n},{j}]"
            )

    for j, lot in enumerate(inst.lots):
        problem.add_row(
            {catalog.z[(n, j)]: 1.0 for n in range(inst.n_types)},
            RowSense.LE,
            float(lot.capacity),
            f"lotcap[{j}]",
        )
    for n in range(inst.n_types):
        for j, lot in enumerate(inst.lots):
            problem.add_row(
                {catalog.z[(n, j)]: 1.0, catalog.x[(n, j)]: -float(lot.capacity)},
                RowSense.LE,
                0.0,
                f"open[{n},{j}]",
            )
    problem.add_row(
        {catalog.z[(n, j)]: float(c.install_cost) for n, c in enumerate(inst.chargers) for j in range(inst.n_lots)},
        RowSense.LE,
        float(inst.budget),
        "budget",
    )
    return catalog


def build_dep(
    inst: Instance,
    scenarios: Sequence[Scenario],
    tables: Optional[Sequence[UtilityTable]] = None,
    skip_families: Collection[str] = (),
) -> Tuple[LpProblem, VariableCatalog]:
    """
    Build the deterministic equivalent over a scenario set.

    Args:
        inst: Network instance
        scenarios: Scenario set (weights p_omega taken from each scenario)
        tables: Utility tables aligned with scenarios; defaults to the attached ones
        skip_families: Recourse row families to leave out (relaxations)

    Returns:
        The problem and its variable catalog (with census)

    Raises:
        ValueError: If the scenario set is empty or tables are misaligned
        ModelBuildError: If the built model disagrees with its catalog or census
    """
    if not scenarios:
        raise ValueError("scenario set must not be empty")
    if tables is not None and len(tables) != len(scenarios):
        raise ValueError(f"{len(tables)} utility tables for {len(scenarios)} scenarios")
    unknown = set(skip_families) - set(FAMILIES)
    if unknown:
        raise ValueError(f"unknown row families: {sorted(unknown)}")

    problem = LpProblem(Sense.MAX, name="dep")
    catalog = add_first_stage(problem, inst)
    built = ModelCensus(n_types=inst.n_types, n_lots=inst.n_lots, scenarios=len(scenarios))

    for k, scenario in enumerate(scenarios):
        block = build_second_stage(inst, scenario, tables[k] if tables is not None else None)
        offset = problem.num_columns
        sid = scenario.id
        for col, name in enumerate(block.column_names()):
            problem.add_column(
                0.0, float(block.upper[col]), block.probability * block.objective[col], name=name
            )
        for col, key in enumerate(block.y_keys):
            catalog.y[(sid,) + key] = offset + col
        for col, key in enumerate(block.o_keys):
            catalog.o[(sid,) + key] = offset + len(block.y_keys) + col

        for i in range(block.num_rows):
            if block.families[i] in skip_families:
                continue
            coeffs: Dict[int, float] = {}
            w0, w1 = block.W.indptr[i], block.W.indptr[i + 1]
            for col, value in zip(block.W.indices[w0:w1], block.W.data[w0:w1]):
                coeffs[offset + int(col)] = float(value)
            t0, t1 = block.T.indptr[i], block.T.indptr[i + 1]
            for col, value in zip(block.T.indices[t0:t1], block.T.data[t0:t1]):
                coeffs[int(col)] = float(value)
            problem.add_row(coeffs, RowSense.LE, float(block.rhs[i]), block.row_names[i])

        counts = block.counts()
        built.y += counts["y"]
        built.o += counts["o"]
        for family in FAMILIES:
            built.rows[family] += counts[family]

    catalog.check(problem.num_columns)
    expected = census(inst, scenarios, tables)
    if (built.y, built.o, built.rows) != (expected.y, expected.o, expected.rows):
        raise ModelBuildError(f"model size {built.to_dict()} disagrees with census {expected.to_dict()}")
    catalog.census = expected
    logger.info(
        "built DEP: %d scenarios, %d columns, %d rows",
        len(scenarios),
        problem.num_columns,
        problem.num_rows,
    )
    return problem, catalog


@dataclass
class DepResult:
    """Outcome of a DEP solve."""

    design: Optional[NetworkDesign]
    objective: float
    bound: float
    gap: float
    status: LpStatus
    seconds: float
    nodes: int
    solution: LpSolution

    @property
    def hit_limit(self) -> bool:
        return self.status == LpStatus.ITERATION_LIMIT


def solve_dep(
    problem: LpProblem,
    catalog: VariableCatalog,
    gap_tol: float = DEFAULT_GAP_TOL,
    time_limit: Optional[float] = None,
    solver: Optional[LpSolver] = None,
) -> DepResult:
    """
    Solve a built DEP and extract the first-stage design.

    The objective is the expected number of drivers served per day. On a time
    limit the incumbent (if any) is returned together with the bound.
    """
    solver = solver or InternalSolver()
    start = time.monotonic()
    solution = solver.solve_mixed(problem, gap_tol=gap_tol, time_limit=time_limit)
    seconds = time.monotonic() - start
    design = catalog.design_from(solution.primal) if solution.has_solution else None
    logger.info(
        "DEP %s: objective %.6f, bound %.6f, %d nodes, %.2fs",
        solution.status.value,
        solution.objective,
        solution.bound,
        solution.nodes,
        seconds,
    )
    return DepResult(
        design=design,
        objective=solution.objective,
        bound=solution.bound,
        gap=solution.relative_gap(),
        status=solution.status,
        seconds=seconds,
        nodes=solution.nodes,
        solution=solution,
    )
