"""Tests for scenario generation and scenario files."""
from dataclasses import replace

import pytest

from evcsnet.cli.main import DATA_DIR
from evcsnet.core.config import BehaviorConfig, load_config
from evcsnet.core.sampling import RngStream
from evcsnet.core.scenarios import (
    ScenarioGenerationError,
    check_activity_coverage,
    generate_scenario,
    generate_scenario_set,
    read_scenarios,
    write_scenarios,
)
from evcsnet.models.instance import Activity, Building


@pytest.fixture
def small_behavior() -> BehaviorConfig:
    """Fifty drivers per day."""
    return BehaviorConfig(daily_traffic=(100, 100), ev_share=0.5)


class TestGenerateScenario:
    """Test one simulated day."""

    def test_driver_count_and_conservation(self, desk_instance, small_behavior):
        """Test that kept drivers plus lost demand equals the generated count."""
        scenario = generate_scenario(desk_instance, small_behavior, RngStream(1, 0))

        assert scenario.generated == 50
        assert scenario.total_demand == len(scenario.drivers)

    def test_drivers_within_operating_day(self, desk_instance, small_behavior):
        """Test arrival/departure bounds and slot consistency."""
        grid = desk_instance.grid
        scenario = generate_scenario(desk_instance, small_behavior, RngStream(2, 0))

        for driver in scenario.drivers:
            assert grid.opening <= driver.arrival < grid.closing
            assert driver.arrival < driver.departure <= grid.closing
            assert driver.arrival_slot == grid.slot_of(driver.arrival)
            assert driver.arrival_slot <= driver.departure_slot
            assert 0.0 <= driver.soc <= 1.0
            assert driver.feasible_lots

    def test_reproducible(self, desk_instance, small_behavior):
        """Test that identical streams give identical scenarios."""
        a = generate_scenario(desk_instance, small_behavior, RngStream(3, 0))
        b = generate_scenario(desk_instance, small_behavior, RngStream(3, 0))

        assert a.drivers == b.drivers
        assert a.cells == b.cells

    def test_zero_traffic(self, desk_instance):
        """Test that zero EV share gives an empty day."""
        behavior = BehaviorConfig(daily_traffic=(100, 100), ev_share=0.0)

        scenario = generate_scenario(desk_instance, behavior, RngStream(4, 0))

        assert scenario.drivers == ()
        assert scenario.total_demand == 0.0

    def test_tiny_walk_cap_loses_demand(self, desk_instance):
        """Test that a cap below every lot distance turns all drivers into lost demand."""
        behavior = BehaviorConfig(daily_traffic=(40, 40), ev_share=0.5, walk_cap_miles=0.001)

        scenario = generate_scenario(desk_instance, behavior, RngStream(5, 0))

        assert scenario.drivers == ()
        assert scenario.lost_demand == 20

    def test_frozen_sources_use_means(self, desk_instance):
        """Test that frozen soc and walk give identical values across drivers."""
        behavior = BehaviorConfig(daily_traffic=(40, 40), ev_share=0.5, frozen=("soc",))

        scenario = generate_scenario(desk_instance, behavior, RngStream(6, 0))

        assert len({d.soc for d in scenario.drivers}) == 1


class TestActivityCoverage:
    """Test the building/activity consistency check."""

    def test_missing_activity(self, desk_instance):
        """Test that an activity without buildings is named."""
        # Given: an instance with only work buildings
        buildings = tuple(
            Building(b.id, Activity.WORK, b.location) for b in desk_instance.buildings
        )
        inst = replace(desk_instance, buildings=buildings)

        # When/Then: the check fails
        with pytest.raises(ScenarioGenerationError, match="no building"):
            check_activity_coverage(inst, BehaviorConfig())

    def test_error_is_value_error(self):
        """Test the error hierarchy."""
        assert issubclass(ScenarioGenerationError, ValueError)


class TestScenarioSet:
    """Test scenario sets and files."""

    def test_equal_probabilities(self, desk_instance, small_behavior):
        """Test that weights are 1/count."""
        scenarios = generate_scenario_set(desk_instance, small_behavior, 4, seed=9)

        assert [s.id for s in scenarios] == [0, 1, 2, 3]
        assert all(s.probability == pytest.approx(0.25) for s in scenarios)

    def test_scenario_regenerates_alone(self, desk_instance, small_behavior):
        """Test that scenario i depends only on (seed, prefix, i)."""
        three = generate_scenario_set(desk_instance, small_behavior, 3, seed=9, prefix=(1,))
        five = generate_scenario_set(desk_instance, small_behavior, 5, seed=9, prefix=(1,))

        assert three[2].drivers == five[2].drivers

    def test_count_must_be_positive(self, desk_instance, small_behavior):
        """Test that count 0 is rejected."""
        with pytest.raises(ValueError, match="count"):
            generate_scenario_set(desk_instance, small_behavior, 0, seed=1)

    def test_file_round_trip(self, desk_instance, small_behavior, tmp_path):
        """Test write then read of a scenario file."""
        # Given: two scenarios written with a header
        scenarios = generate_scenario_set(desk_instance, small_behavior, 2, seed=5)
        path = tmp_path / "scenarios.jsonl"
        write_scenarios(path, scenarios, {"seed": 5})

        # When: read back
        header, restored = read_scenarios(path)

        # Then: header, drivers and aggregates match
        assert header == {"seed": 5}
        assert [s.drivers for s in restored] == [s.drivers for s in scenarios]
        assert [s.cells for s in restored] == [s.cells for s in scenarios]
        assert [s.lost_demand for s in restored] == [s.lost_demand for s in scenarios]

    def test_rewrite_is_byte_identical(self, desk_instance, small_behavior, tmp_path):
        """Test that regenerating writes the same bytes."""
        first, second = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        write_scenarios(first, generate_scenario_set(desk_instance, small_behavior, 2, seed=5), {})
        write_scenarios(second, generate_scenario_set(desk_instance, small_behavior, 2, seed=5), {})

        assert first.read_bytes() == second.read_bytes()

    def test_malformed_line(self, tmp_path):
        """Test that a bad record names its line."""
        path = tmp_path / "bad.jsonl"
        path.write_text('{"header": {}}\n{"something": 1}\n')

        with pytest.raises(ValueError, match="line 2"):
            read_scenarios(path)


class TestLostDemand:
    """Test the share of drivers no lot can serve on the desk instance."""

    def test_fraction_in_band(self, desk_instance):
        """Test that the mean lost fraction over 1000 desk days lies in [0.08, 0.18]."""
        # Given: the packaged desk configuration
        behavior = load_config(DATA_DIR / "desk_config.yaml").behavior

        # When: a thousand days are generated
        scenarios = generate_scenario_set(desk_instance, behavior, 1000, seed=0)

        # Then: about one driver in eight walks to no lot
        lost = sum(s.lost_demand for s in scenarios)
        total = lost + sum(len(s.drivers) for s in scenarios)
        assert 0.08 <= lost / total <= 0.18
