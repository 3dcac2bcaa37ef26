"""Tests for the deterministic-equivalent model."""
from dataclasses import replace

import numpy as np
import pytest

from evcsnet.core.dep import (
    BUILDING,
    CAPACITY,
    CHOICE,
    GROUP,
    MC_LOWER,
    MC_X,
    MC_Y,
    ModelBuildError,
    build_dep,
    build_second_stage,
    census,
    first_stage_size,
    solve_dep,
    x_index,
    z_index,
)
from evcsnet.core.lp import LpStatus, solve_lp
from evcsnet.models.scenario import UtilityTable


class TestIndexing:
    """Test first-stage vector layout."""

    def test_type_major_layout(self, two_level_instance):
        """Test that x comes first, then z, both type-major."""
        inst = two_level_instance([4, 4], budget=10_000)

        assert first_stage_size(inst) == 8
        assert x_index(inst, 1, 0) == 2
        assert z_index(inst, 0, 1) == 5


class TestSecondStage:
    """Test one scenario's recourse block."""

    def test_toy_block_families(self, toy_instance, make_scenario):
        """Test that the toy block has one row per family."""
        block = build_second_stage(toy_instance, make_scenario(4.0))

        counts = block.counts()
        assert counts["y"] == 1
        assert counts["o"] == 1
        for family in (CAPACITY, CHOICE, MC_X, MC_Y, MC_LOWER, BUILDING, GROUP):
            assert counts[family] == 1

    @pytest.mark.parametrize("opened,count,expected", [(1, 5, 2.0), (1, 1, 1.0), (0, 0, 0.0)])
    def test_recourse_at_fixed_design(self, toy_instance, make_scenario, opened, count, expected):
        """Test that the recourse value is min(d/2, z) when open."""
        # Given: demand 4 with equal charge/no-charge utilities
        block = build_second_stage(toy_instance, make_scenario(4.0))

        # When: the recourse LP is solved at a fixed design
        solution = solve_lp(block.recourse_problem(np.array([opened, count], dtype=float)))

        # Then: half the demand is captured, up to the charger count
        assert solution.status == LpStatus.OPTIMAL
        assert solution.objective == pytest.approx(expected)

    def test_higher_utility_raises_share(self, toy_instance, make_scenario):
        """Test that u > u_nc lets more than half the demand charge."""
        block = build_second_stage(toy_instance, make_scenario(4.0, u=1.0))

        solution = solve_lp(block.recourse_problem(np.array([1.0, 5.0])))

        share = np.exp(1.0) / (np.exp(1.0) + 1.0)
        assert solution.objective == pytest.approx(4.0 * share, rel=1e-6)

    def test_missing_table(self, toy_instance, make_scenario):
        """Test that a scenario without utilities is rejected."""
        scenario = replace(make_scenario(4.0), utilities=None)

        with pytest.raises(ValueError, match="no utility table"):
            build_second_stage(toy_instance, scenario)

    def test_table_shape_mismatch(self, toy_instance, make_scenario):
        """Test that a wrongly shaped table is a build error."""
        table = UtilityTable(u=np.zeros((2, 1)), u_nc=np.zeros(1), support=np.ones((2, 1)))

        with pytest.raises(ModelBuildError, match="shape"):
            build_second_stage(toy_instance, make_scenario(4.0), table)

    def test_unsupported_type_has_no_columns(self, toy_instance, make_scenario):
        """Test that types without supporting drivers get no y."""
        table = UtilityTable(u=np.zeros((1, 1)), u_nc=np.zeros(1), support=np.zeros((1, 1)))

        block = build_second_stage(toy_instance, make_scenario(4.0), table)

        assert block.num_columns == 0
        assert block.num_rows == 0


class TestCensus:
    """Test closed-form model sizes."""

    def test_toy_census(self, toy_instance, make_scenario):
        """Test columns and constraints of the one-scenario toy."""
        result = census(toy_instance, [make_scenario(4.0)])

        assert result.binaries == 1
        assert result.integers == 1
        assert result.columns == 4
        assert result.constraints == 3 + 7

    def test_census_matches_built_model(self, toy_instance, make_scenario):
        """Test that the census equals the built problem's dimensions."""
        scenarios = [make_scenario(4.0, 0.5, 0), make_scenario(8.0, 0.5, 1)]

        problem, catalog = build_dep(toy_instance, scenarios)

        assert catalog.census.columns == problem.num_columns
        assert catalog.census.constraints == problem.num_rows

    def test_census_on_generated_scenarios(self, desk_instance):
        """Test census agreement on generated scenarios with several lots and types."""
        from evcsnet.core.choice import prepare_scenarios
        from evcsnet.core.config import BehaviorConfig, ExperimentConfig

        config = replace(ExperimentConfig(), behavior=BehaviorConfig(daily_traffic=(40, 40), ev_share=0.5))
        scenarios = prepare_scenarios(desk_instance, config, 2, seed=1)

        problem, catalog = build_dep(desk_instance, scenarios)

        assert catalog.census.columns == problem.num_columns
        assert catalog.census.constraints == problem.num_rows
        assert catalog.census.to_dict()["scenarios"] == 2


class TestBuildDep:
    """Test deterministic-equivalent assembly."""

    def test_empty_scenario_set(self, toy_instance):
        """Test that an empty set is rejected."""
        with pytest.raises(ValueError, match="must not be empty"):
            build_dep(toy_instance, [])

    def test_misaligned_tables(self, toy_instance, make_scenario):
        """Test that table and scenario counts must agree."""
        with pytest.raises(ValueError, match="utility tables"):
            build_dep(toy_instance, [make_scenario(4.0)], tables=[])

    def test_unknown_family(self, toy_instance, make_scenario):
        """Test that skipped families must exist."""
        with pytest.raises(ValueError, match="unknown row families"):
            build_dep(toy_instance, [make_scenario(4.0)], skip_families=["coverage"])

    def test_catalog_covers_columns(self, toy_instance, make_scenario):
        """Test that the catalog names each variable once."""
        problem, catalog = build_dep(toy_instance, [make_scenario(4.0)])

        catalog.check(problem.num_columns)
        assert catalog.first_stage_columns() == [0, 1]
        assert (0, 0, 0, 0, 0) in catalog.y


class TestSolveDep:
    """Test the toy oracle."""

    @pytest.mark.parametrize("budget,expected", [(0, 0.0), (1000, 1.0), (2000, 2.0), (5000, 2.0)])
    def test_toy_objective(self, toy_instance, make_scenario, budget, expected):
        """Test objective min(d/2, floor(budget/1000)) for demand 4."""
        # Given: the toy instance at a budget
        inst = toy_instance.with_budget(budget)
        problem, catalog = build_dep(inst, [make_scenario(4.0)])

        # When: solved
        result = solve_dep(problem, catalog)

        # Then: the objective and design agree with the closed form
        assert result.status == LpStatus.OPTIMAL
        assert result.objective == pytest.approx(expected, abs=1e-6)
        assert result.design.violations(inst) == []
        assert result.design.count[0, 0] >= expected - 1e-9

    def test_two_scenarios(self, toy_instance, make_scenario):
        """Test the weighted two-scenario toy at budget 3000."""
        inst = toy_instance.with_budget(3000)
        scenarios = [make_scenario(4.0, 0.5, 0), make_scenario(8.0, 0.5, 1)]
        problem, catalog = build_dep(inst, scenarios)

        result = solve_dep(problem, catalog)

        assert result.objective == pytest.approx(2.5, abs=1e-6)
        assert result.design.count[0, 0] == 3

    def test_dropping_choice_rows_relaxes(self, toy_instance, make_scenario):
        """Test that without choice rows all demand can be served."""
        inst = toy_instance.with_budget(5000)
        problem, catalog = build_dep(inst, [make_scenario(4.0)], skip_families=[CHOICE])

        result = solve_dep(problem, catalog)

        assert result.objective == pytest.approx(4.0, abs=1e-6)

    def test_mccormick_makes_share_exact(self, toy_instance, make_scenario):
        """Test that with McCormick rows the share equals the logit value."""
        inst = toy_instance.with_budget(5000)
        problem, catalog = build_dep(inst, [make_scenario(4.0)])

        result = solve_dep(problem, catalog)

        y = result.solution.primal[catalog.y[(0, 0, 0, 0, 0)]]
        o = result.solution.primal[catalog.o[(0, 0, 0, 0, 0, 0)]]
        assert y == pytest.approx(0.5, abs=1e-6)
        assert o == pytest.approx(y, abs=1e-6)
