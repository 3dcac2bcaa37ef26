"""Fixed-format MPS export for cross-checking models against external solvers."""
import math
from pathlib import Path
from typing import List, Optional

import numpy as np

from evcsnet.core.lp.problem import LpProblem, RowSense, Sense

OBJECTIVE_ROW = "OBJ"
BOUND_SET = "BND"
RHS_SET = "RHS"
INTEGER_INFINITY = 1e30

_ROW_TYPE = {RowSense.LE: "L", RowSense.GE: "G", RowSense.EQ: "E"}


def column_code(j: int) -> str:
    return f"C{j:07d}"


def row_code(i: int) -> str:
    return f"R{i:07d}"


def format_number(value: float) -> str:
    """Render a value in at most 12 characters."""
    text = f"{value:.10g}"
    if len(text) > 12:
        text = f"{value:.5e}"
    return text


def _field_line(code: str, name: str, entry: str, value: Optional[float] = None) -> str:
    """One data line: type in columns 2-3, names in 5-12 and 15-22, value in 25-36."""
    line = f" {code:<2} {name:<8}  {entry:<8}"
    if value is not None:
        line += f"  {format_number(value):>12}"
    return line.rstrip()


def mps_text(problem: LpProblem) -> str:
    """
    Fixed-format MPS text of a problem.

    Names are replaced by 8-character codes (C0000000, R0000000); a comment
    block at the top maps every code back to the model name.
    """
    lines: List[str] = [f"* {problem.name}"]
    lines += [f"* {column_code(j)} {name}" for j, name in enumerate(problem.col_names)]
    lines += [f"* {row_code(i)} {name}" for i, name in enumerate(problem.row_names)]

    lines.append(f"NAME          {problem.name[:8].upper()}")
    lines.append("OBJSENSE")
    lines.append("    MAX" if problem.sense == Sense.MAX else "    MIN")

    lines.append("ROWS")
    lines.append(f" N  {OBJECTIVE_ROW}")
    for i, sense in enumerate(problem.row_sense):
        lines.append(f" {_ROW_TYPE[sense]}  {row_code(i)}")

    lines.append("COLUMNS")
    csc = problem.matrix().tocsc()
    obj = problem.objective_vector()
    in_integer_block = False
    marker = 0
    for j in range(problem.num_columns):
        if problem.integer[j] != in_integer_block:
            kind = "'INTORG'" if problem.integer[j] else "'INTEND'"
            lines.append(_marker_line(marker, kind))
            marker += 1
            in_integer_block = problem.integer[j]
        name = column_code(j)
        if obj[j] != 0.0:
            lines.append(_field_line("", name, OBJECTIVE_ROW, obj[j]))
        start, end = csc.indptr[j], csc.indptr[j + 1]
        for i, value in zip(csc.indices[start:end], csc.data[start:end]):
            lines.append(_field_line("", name, row_code(int(i)), float(value)))
    if in_integer_block:
        lines.append(_marker_line(marker, "'INTEND'"))

    lines.append("RHS")
    if problem.objective_offset != 0.0:
        lines.append(_field_line("", RHS_SET, OBJECTIVE_ROW, -problem.objective_offset))
    for i, rhs in enumerate(problem.rhs):
        if rhs != 0.0:
            lines.append(_field_line("", RHS_SET, row_code(i), rhs))

    lines.append("BOUNDS")
    lo, hi = problem.bounds()
    for j in range(problem.num_columns):
        lines += _bound_lines(column_code(j), float(lo[j]), float(hi[j]), problem.integer[j])

    lines.append("ENDATA")
    return "\n".join(lines) + "\n"


def _marker_line(index: int, kind: str) -> str:
    """Marker name in columns 5-12, 'MARKER' in 15-22 and the kind in 40-47."""
    return _field_line("", f"M{index:07d}", "'MARKER'") + " " * 17 + kind


def _bound_lines(name: str, lower: float, upper: float, integer: bool = False) -> List[str]:
    if lower == upper:
        return [_field_line("FX", BOUND_SET, name, lower)]
    if math.isinf(lower) and math.isinf(upper):
        return [_field_line("FR", BOUND_SET, name)]
    out = []
    if math.isinf(lower):
        out.append(_field_line("MI", BOUND_SET, name))
    elif lower != 0.0:
        out.append(_field_line("LO", BOUND_SET, name, lower))
    if not math.isinf(upper):
        out.append(_field_line("UP", BOUND_SET, name, upper))
    elif integer:
        # Some readers default integer columns without an upper bound to binary
        out.append(_field_line("UP", BOUND_SET, name, INTEGER_INFINITY))
    return out


def write_mps(problem: LpProblem, path: Path) -> None:
    """Write `mps_text(problem)` to a file."""
    Path(path).write_text(mps_text(problem))


def count_entries(problem: LpProblem) -> int:
    """Nonzeros written to the COLUMNS section, objective entries included."""
    return int(problem.matrix().nnz + np.count_nonzero(problem.objective_vector()))
