"""Tests for the discrete-event charging simulation."""
from dataclasses import replace

import numpy as np
import pytest

from evcsnet.core.config import BehaviorConfig, ExperimentConfig
from evcsnet.core.sampling import RngStream
from evcsnet.core.simulation import (
    REJECTED,
    SERVED,
    baseline_design,
    demand_weights,
    driver_streams,
    simulate_day,
    simulate_replications,
    summarize,
)
from evcsnet.models.instance import NetworkDesign, TimeGrid

# Utilities far enough apart that a logit draw is effectively certain
SURE = 50.0


def chargers(count: int) -> NetworkDesign:
    return NetworkDesign.from_counts(np.array([[count]]))


class TestSimulateDay:
    """Test one replayed day."""

    def test_second_overlapping_driver_rejected(self, toy_instance, make_driver):
        """Test that a single occupied charger turns away an overlapping arrival."""
        # Given: one charger and two overlapping stays that both want it
        drivers = [make_driver(8.0, 12.0, utilities=[SURE]), make_driver(9.0, 11.0, utilities=[SURE])]

        # When: the day is simulated
        metrics = simulate_day(toy_instance, chargers(1), drivers, RngStream(0), event_log=True)

        # Then: the first is served and the second rejected
        assert (metrics.served, metrics.rejected, metrics.declined) == (1, 1, 0)
        assert [e["outcome"] for e in metrics.events] == [SERVED, REJECTED]
        assert metrics.accessibility == pytest.approx(50.0)

    def test_charger_reused_after_departure(self, toy_instance, make_driver):
        """Test that a driver arriving at a departure instant gets the freed charger."""
        drivers = [make_driver(8.0, 10.0, utilities=[SURE]), make_driver(10.0, 12.0, utilities=[SURE])]

        metrics = simulate_day(toy_instance, chargers(1), drivers, RngStream(0))

        assert metrics.served == 2
        assert metrics.peak_occupancy[0, 0] == 1

    def test_utilization(self, toy_instance, make_driver):
        """Test that a six-hour stay on one charger over a twelve-hour day is 50%."""
        drivers = [make_driver(8.0, 14.0, utilities=[SURE])]

        metrics = simulate_day(toy_instance, chargers(1), drivers, RngStream(1))

        assert metrics.charger_hours_used == pytest.approx(6.0)
        assert metrics.charger_hours_available == pytest.approx(12.0)
        assert metrics.utilization == pytest.approx(50.0)
        assert metrics.level_utilization("L2") == pytest.approx(50.0)

    def test_slot_utilization(self, toy_instance, make_driver):
        """Test that occupied hours are split across time slots."""
        grid = TimeGrid(slots=((6.0, 12.0), (12.0, 18.0)), opening=6.0, closing=18.0)
        inst = replace(toy_instance, grid=grid)
        drivers = [make_driver(8.0, 14.0, utilities=[SURE])]

        metrics = simulate_day(inst, chargers(1), drivers, RngStream(1))

        assert metrics.slot_utilization("L2") == pytest.approx([400.0 / 6.0, 200.0 / 6.0])

    def test_empty_design(self, toy_instance, make_driver):
        """Test that with nothing installed nobody is served."""
        drivers = [make_driver(8.0, 12.0), make_driver(9.0, 10.0)]

        metrics = simulate_day(toy_instance, chargers(0), drivers, RngStream(2))

        assert metrics.accessibility == 0.0
        assert metrics.utilization is None
        assert metrics.rejected == 2

    def test_low_utility_declines(self, toy_instance, make_driver):
        """Test that a strongly negative utility means the driver declines."""
        drivers = [make_driver(8.0, 12.0, utilities=[-SURE])]

        metrics = simulate_day(toy_instance, chargers(1), drivers, RngStream(3))

        assert metrics.declined == 1
        assert metrics.served == 0

    def test_walk_distance(self, toy_instance, make_driver):
        """Test that served drivers add their walk to the lot."""
        drivers = [make_driver(8.0, 12.0, utilities=[SURE])]

        metrics = simulate_day(toy_instance, chargers(1), drivers, RngStream(4))

        assert metrics.walk_total == pytest.approx(toy_instance.distance(0, 0))
        assert metrics.walk_per_person == pytest.approx(metrics.walk_total)

    def test_table_fallback(self, toy_instance, make_driver, make_scenario):
        """Test that drivers without utilities use the lot's aggregate value."""
        table = make_scenario(1.0, u=SURE).utilities
        drivers = [make_driver(8.0, 12.0)]

        metrics = simulate_day(toy_instance, chargers(1), drivers, RngStream(5), table=table)

        assert metrics.served == 1

    def test_missing_utilities(self, toy_instance, make_driver):
        """Test that a driver needs utilities or a table."""
        with pytest.raises(ValueError, match="no utilities"):
            simulate_day(toy_instance, chargers(1), [make_driver(8.0, 12.0)], RngStream(6))

    def test_invalid_design(self, toy_instance, make_driver):
        """Test that an over-budget design is rejected."""
        with pytest.raises(ValueError, match="exceeds budget"):
            simulate_day(toy_instance, chargers(3), [make_driver(8.0, 12.0)], RngStream(7))

    def test_conservation_on_generated_day(self, desk_instance):
        """Test served + rejected + declined = drivers on a generated day."""
        # Given: one generated day and a level-2 baseline
        config = replace(ExperimentConfig(), behavior=BehaviorConfig(daily_traffic=(80, 80), ev_share=0.5))
        drivers = driver_streams(desk_instance, config, replications=1, seed=2)[0]
        design = baseline_design(desk_instance, "config1", budget=10_000)

        # When: simulated
        metrics = simulate_day(desk_instance, design, drivers, RngStream(2, (6, 0)))

        # Then: every driver has exactly one outcome
        assert metrics.served + metrics.rejected + metrics.declined == metrics.total == len(drivers)
        assert np.all(metrics.peak_occupancy <= design.count)


class TestReplications:
    """Test replicated simulation and summaries."""

    def test_common_random_numbers(self, toy_instance, make_driver):
        """Test that equal seeds reproduce the same outcomes."""
        streams = [[make_driver(8.0, 12.0, utilities=[0.0]), make_driver(9.0, 13.0, utilities=[0.0])]] * 3

        first = simulate_replications(toy_instance, chargers(1), streams, seed=9)
        second = simulate_replications(toy_instance, chargers(1), streams, seed=9)

        assert [m.served for m in first] == [m.served for m in second]

    def test_summary_keys(self, toy_instance, make_driver):
        """Test mean and sd columns."""
        streams = [[make_driver(8.0, 12.0, utilities=[SURE])], [make_driver(8.0, 10.0, utilities=[SURE])]]

        summary = summarize(simulate_replications(toy_instance, chargers(1), streams, seed=1))

        assert summary["accessibility_mean"] == pytest.approx(100.0)
        assert summary["accessibility_sd"] == pytest.approx(0.0)
        assert summary["utilization_mean"] == pytest.approx(100.0 * 3.0 / 12.0)


class TestBaselines:
    """Test choice-unaware designs."""

    def test_config1_below_one_charger(self, two_level_instance):
        """Test that a budget below one level-2 charger installs nothing."""
        inst = two_level_instance([4], budget=3000)

        assert baseline_design(inst, "config1").total() == 0

    def test_config1_fills_level2(self, two_level_instance):
        """Test five level-2 chargers from five times their cost."""
        inst = two_level_instance([20], budget=5 * 3450)

        design = baseline_design(inst, "config1")

        assert design.counts_by_level(inst) == {"L1": 0, "L2": 5, "L3": 0}

    def test_config2_split(self, two_level_instance):
        """Test the 80/20 level-2/level-1 split on a full lot."""
        inst = two_level_instance([10], budget=100_000)

        design = baseline_design(inst, "config2")

        assert design.counts_by_level(inst) == {"L1": 2, "L2": 8, "L3": 0}
        assert design.violations(inst) == []

    def test_lots_filled_by_weight(self, two_level_instance):
        """Test that the heavier lot is filled first."""
        inst = two_level_instance([2, 2], budget=3450 + 900)

        design = baseline_design(inst, "config2", weights=np.array([0.0, 1.0]))

        assert design.count[:, 0].tolist() == [0, 0]
        assert design.count[:, 1].tolist() == [1, 1]

    def test_invalid_requests(self, toy_instance, two_level_instance):
        """Test unknown names, negative budgets and missing levels."""
        inst = two_level_instance([2], budget=1000)
        with pytest.raises(ValueError, match="unknown baseline"):
            baseline_design(inst, "config3")
        with pytest.raises(ValueError, match="budget must be >= 0"):
            baseline_design(inst, "config1", budget=-1)
        with pytest.raises(ValueError, match="level-1"):
            baseline_design(toy_instance, "config2")

    def test_demand_weights(self, toy_instance, make_scenario):
        """Test expected drivers per lot."""
        weights = demand_weights(toy_instance, [make_scenario(4.0, 0.5), make_scenario(8.0, 0.5, 1)])

        assert weights.tolist() == pytest.approx([6.0])
