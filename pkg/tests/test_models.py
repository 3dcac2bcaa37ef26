"""Tests for domain models."""
import math

import numpy as np
import pytest

from evcsnet.models.demand import DriverRecord
from evcsnet.models.instance import Activity, Instance, Level, NetworkDesign, TimeGrid


class TestTimeGrid:
    """Test TimeGrid slot lookup."""

    def test_slot_of_half_open(self):
        """Test that slot boundaries belong to the later slot."""
        # Given: the default four-slot grid
        grid = TimeGrid()

        # When/Then: boundaries map to the slot they open
        assert grid.slot_of(6.0) == 0
        assert grid.slot_of(8.99) == 0
        assert grid.slot_of(9.0) == 1
        assert grid.slot_of(13.5) == 2
        assert grid.slot_of(14.0) == 3

    def test_closing_instant_in_last_slot(self):
        """Test that the closing time and later times map to the last slot."""
        grid = TimeGrid()

        assert grid.slot_of(18.0) == 3
        assert grid.slot_of(20.0) == 3
        assert grid.slot_of(5.0) == 0

    def test_gammas_are_ordered_pairs(self):
        """Test that gammas list every arrival <= departure pair."""
        grid = TimeGrid()

        gammas = grid.gammas()

        assert len(gammas) == 10
        assert all(a <= d for a, d in gammas)
        assert grid.span == 12.0


class TestInstance:
    """Test Instance helpers."""

    def test_distance_is_euclidean(self, toy_instance):
        """Test lot-to-building distance."""
        assert toy_instance.distance(0, 0) == pytest.approx(0.1)

    def test_with_budget_copies(self, toy_instance):
        """Test that with_budget leaves the original untouched."""
        # When: the budget is changed
        other = toy_instance.with_budget(500)

        # Then: only the copy changes
        assert other.budget == 500.0
        assert toy_instance.budget == 2000.0

    def test_with_price_reprices_level(self, desk_instance):
        """Test that with_price only touches the given level."""
        # When: level 3 is repriced
        repriced = desk_instance.with_price(Level.L3, 3.0)

        # Then: L3 has the new price and L2 keeps its own
        l3 = repriced.type_of_level(Level.L3)
        l2 = repriced.type_of_level(Level.L2)
        assert repriced.chargers[l3].price_per_hour == 3.0
        assert repriced.chargers[l2].price_per_hour == desk_instance.chargers[l2].price_per_hour

    def test_round_trip_dict(self, desk_instance):
        """Test that to_dict/from_dict preserve the instance."""
        assert Instance.from_dict(desk_instance.to_dict()) == desk_instance

    def test_buildings_of_activity(self, desk_instance):
        """Test that every activity has two desk buildings."""
        for activity in Activity:
            assert len(desk_instance.buildings_of(activity)) == 2


class TestNetworkDesign:
    """Test NetworkDesign invariants."""

    def test_from_counts_opens_used_pairs(self):
        """Test that from_counts opens exactly the pairs with chargers."""
        design = NetworkDesign.from_counts(np.array([[0, 2], [1, 0]]))

        assert design.open.tolist() == [[0, 1], [1, 0]]
        assert design.total() == 3

    def test_vector_round_trip(self):
        """Test the first-stage vector layout (x then z)."""
        design = NetworkDesign.from_counts(np.array([[0, 2], [1, 0]]))

        vector = design.vector()

        assert vector.tolist() == [0, 1, 1, 0, 0, 2, 1, 0]
        assert NetworkDesign.from_vector(vector, 2, 2) == design

    def test_valid_design_has_no_violations(self, toy_instance):
        """Test a design within budget and capacity."""
        design = NetworkDesign.from_counts(np.array([[2]]))

        assert design.violations(toy_instance) == []
        assert design.cost(toy_instance) == 2000.0

    def test_over_budget(self, toy_instance):
        """Test that cost above the budget is reported."""
        design = NetworkDesign.from_counts(np.array([[3]]))

        problems = design.violations(toy_instance)

        assert any(p.field == "design.cost" for p in problems)

    def test_count_without_open_flag(self, toy_instance):
        """Test that z > 0 requires x = 1."""
        design = NetworkDesign(open=np.array([[0]]), count=np.array([[1]]))

        problems = design.violations(toy_instance)

        assert any("k_j * x" in p.message for p in problems)

    def test_wrong_shape(self, toy_instance):
        """Test that a mis-shaped design is rejected."""
        design = NetworkDesign.empty(2, 1)

        problems = design.violations(toy_instance)

        assert len(problems) == 1
        assert problems[0].field == "design"

    def test_counts_by_level(self, desk_instance):
        """Test per-level charger totals."""
        count = np.zeros((3, 6), dtype=int)
        count[1, 0] = 2
        count[0, 3] = 1
        design = NetworkDesign.from_counts(count)

        assert design.counts_by_level(desk_instance) == {"L1": 1, "L2": 2, "L3": 0}


class TestDriverRecord:
    """Test DriverRecord."""

    def test_dict_round_trip(self, make_driver):
        """Test to_dict/from_dict."""
        driver = make_driver(8.0, 12.5, lots=(0, 2), utilities=[1.0, 2.0])

        restored = DriverRecord.from_dict(driver.to_dict())

        assert restored == driver
        assert restored.dwell == pytest.approx(4.5)
        assert restored.gamma == (0, 0)

    def test_with_utilities(self, make_driver):
        """Test that utilities attach without touching the rest."""
        driver = make_driver(8.0, 9.0)

        updated = driver.with_utilities((0.5,), no_charge=-1.0)

        assert updated.utilities == (0.5,)
        assert updated.no_charge_utility == -1.0
        assert updated.arrival == driver.arrival
        assert math.isclose(updated.dwell, 1.0)
