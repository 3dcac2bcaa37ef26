"""Tests for MPS export."""
import math

from evcsnet.core.lp import LpProblem, RowSense, Sense
from evcsnet.core.lp.mps import column_code, count_entries, format_number, mps_text, write_mps


def small_milp() -> LpProblem:
    problem = LpProblem(Sense.MAX, name="design")
    x = problem.add_column(0.0, 1.0, 0.0, integer=True, name="x[0]")
    z = problem.add_column(0.0, 5.0, 0.0, integer=True, name="z[0,0]")
    y = problem.add_column(0.0, math.inf, 2.0, name="y[0,0]")
    problem.add_row({z: 1.0, x: -5.0}, RowSense.LE, 0.0, name="link")
    problem.add_row({y: 4.0, z: -1.0}, RowSense.LE, 0.0, name="capacity")
    problem.add_row({z: 1000.0}, RowSense.LE, 2000.0, name="budget")
    return problem


class TestFormatting:
    """Test field helpers."""

    def test_column_code(self):
        """Test that codes are eight characters."""
        assert column_code(42) == "C0000042"
        assert len(column_code(9_999_999)) == 8

    def test_numbers_fit_field(self):
        """Test that numbers never exceed twelve characters."""
        for value in (1.0, -0.5, 1234567.891, 1e-12, -3.14159265358979e20, 1 / 3):
            assert len(format_number(value)) <= 12


class TestMpsText:
    """Test the emitted document."""

    def test_sections_in_order(self):
        """Test that every section appears once and in order."""
        text = mps_text(small_milp())

        order = ["NAME", "OBJSENSE", "ROWS", "COLUMNS", "RHS", "BOUNDS", "ENDATA"]
        positions = [text.index(f"\n{section}") for section in order]
        assert positions == sorted(positions)
        assert " N  OBJ" in text
        assert "    MAX" in text

    def test_integer_markers(self):
        """Test that integer columns are wrapped in one marker block."""
        columns = mps_text(small_milp()).split("\nCOLUMNS\n")[1]

        assert columns.count("'INTORG'") == 1
        assert columns.count("'INTEND'") == 1
        assert columns.index("'INTORG'") < columns.index("C0000001") < columns.index("'INTEND'")
        assert columns.index("'INTEND'") < columns.index("C0000002")

    def test_marker_fields_in_fixed_columns(self):
        """Test that marker lines keep the name, 'MARKER' and the kind in their fields."""
        columns = mps_text(small_milp()).split("\nCOLUMNS\n")[1].split("\nRHS\n")[0]
        markers = [line for line in columns.splitlines() if "'MARKER'" in line]

        assert len(markers) == 2
        for line in markers:
            assert line[:4] == "    "
            assert len(line[4:12].strip()) == 8
            assert line[14:22] == "'MARKER'"
        assert markers[0][39:47] == "'INTORG'"
        assert markers[1][39:47] == "'INTEND'"

    def test_names_mapped_in_comments(self):
        """Test that model names appear in the header comments."""
        text = mps_text(small_milp())

        assert "* C0000001 z[0,0]" in text
        assert "* R0000002 budget" in text

    def test_bounds(self):
        """Test upper bounds are written and infinite ones omitted."""
        text = mps_text(small_milp())

        assert " UP BND       C0000001" in text
        assert "C0000002" not in text.split("BOUNDS")[1]

    def test_unbounded_integer_gets_explicit_upper(self):
        """Test that an integer column without an upper bound is not left to default to binary."""
        # Given an integer count column with no upper bound
        problem = small_milp()
        problem.add_column(0.0, math.inf, 1.0, integer=True, name="n[0]")

        # When exported
        bounds = mps_text(problem).split("\nBOUNDS\n")[1]

        # Then it carries an explicit huge upper bound, continuous ones still none
        assert ["UP", "BND", "C0000003", "1e+30"] in [line.split() for line in bounds.splitlines()]
        assert "C0000002" not in bounds

    def test_entry_count(self):
        """Test the nonzero count including objective entries."""
        assert count_entries(small_milp()) == 6

    def test_write(self, tmp_path):
        """Test that the file matches the text."""
        path = tmp_path / "model.mps"

        write_mps(small_milp(), path)

        assert path.read_text() == mps_text(small_milp())
        assert path.read_text().endswith("ENDATA\n")
