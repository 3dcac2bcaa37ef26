"""Tests for the mixed-logit choice model."""
from dataclasses import replace

import numpy as np
import pytest

from evcsnet.core.choice import (
    aggregate_utilities,
    draw_coefficients,
    driver_utility,
    logit_share,
    no_charge_share,
    predictor_vector,
    prepare_scenarios,
)
from evcsnet.core.config import BehaviorConfig, CoefficientSpec, ExperimentConfig, VehicleSpec
from evcsnet.core.sampling import RngStream
from evcsnet.models.scenario import UtilityTable

from tests.conftest import L2


class TestUtility:
    """Test deterministic utilities."""

    def test_worked_example(self):
        """Test the mean-coefficient utility of a reference predictor vector."""
        # Given: mean coefficients and a hand-built predictor vector
        beta = draw_coefficients(CoefficientSpec(), RngStream(0), mixing=False)
        x = np.array([1, 1.5, 6, 0.13, 1, 1, 0, 80, 30, 0], dtype=float)

        # When/Then: the dot product matches the hand computation
        assert float(beta @ x) == pytest.approx(2.2587, abs=1e-4)

    def test_predictor_vector(self, make_driver):
        """Test predictors of a four-hour level-2 stay."""
        driver = make_driver(8.0, 12.0)

        x = predictor_vector(driver, L2, VehicleSpec())

        expected = [1.0, 1.5, 6.0, 0.13, 1.0, 1.0, 0.0, 92.4, 63.0, 1.0]
        assert x == pytest.approx(expected)

    def test_zero_sds_equal_means(self, make_driver):
        """Test that mixing with zero sds reproduces the mean utility."""
        driver = make_driver(8.0, 12.0)
        coeffs = CoefficientSpec(sds=(0.0,) * 10)

        mixed = driver_utility(driver, L2, coeffs, VehicleSpec(), RngStream(1), mixing=True)
        plain = driver_utility(driver, L2, coeffs, VehicleSpec(), RngStream(1), mixing=False)

        assert mixed == pytest.approx(plain)

    def test_mixing_varies_by_driver(self):
        """Test that coefficient draws differ between streams."""
        a = draw_coefficients(CoefficientSpec(), RngStream(1), mixing=True)
        b = draw_coefficients(CoefficientSpec(), RngStream(2), mixing=True)

        assert not np.array_equal(a, b)


class TestLogitShare:
    """Test logit share identities."""

    def table(self, u, u_nc=0.0):
        u = np.asarray(u, dtype=float).reshape(-1, 1)
        return UtilityTable(u=u, u_nc=np.array([u_nc]), support=np.ones_like(u))

    def test_shares_sum_to_one(self):
        """Test that open shares plus not charging sum to 1."""
        table = self.table([0.3, 1.2, -2.0], u_nc=0.5)
        open_row = [1, 1, 1]

        total = sum(logit_share(n, 0, table, open_row) for n in range(3))
        total += no_charge_share(0, table, open_row)

        assert total == pytest.approx(1.0, abs=1e-12)

    def test_translation_invariance(self):
        """Test that shifting every utility leaves shares unchanged."""
        base = self.table([0.3, 1.2], u_nc=0.5)
        shifted = self.table([100.3, 101.2], u_nc=100.5)

        for n in range(2):
            assert logit_share(n, 0, base, [1, 1]) == pytest.approx(
                logit_share(n, 0, shifted, [1, 1]), abs=1e-10
            )

    def test_closed_type_has_zero_share(self):
        """Test that closed types neither take share nor dilute others."""
        table = self.table([0.0, 0.0])

        assert logit_share(1, 0, table, [1, 0]) == 0.0
        assert logit_share(0, 0, table, [1, 0]) == pytest.approx(0.5)

    def test_unsupported_entry(self):
        """Test that unsupported entries have zero share."""
        table = UtilityTable(u=np.zeros((1, 1)), u_nc=np.zeros(1), support=np.zeros((1, 1)))

        assert logit_share(0, 0, table, [1]) == 0.0
        assert table.exp_u(0, 0) == 0.0


class TestAggregation:
    """Test per-lot utility aggregation."""

    def test_mean_over_reaching_drivers(self, toy_instance, make_scenario, make_driver):
        """Test that only drivers reaching a lot support it."""
        # Given: a one-lot scenario with two drivers reaching the lot
        drivers = (make_driver(8.0, 12.0), make_driver(9.0, 10.0))
        scenario = replace(make_scenario(2.0), drivers=drivers)

        # When: utilities are aggregated without mixing
        table, updated = aggregate_utilities(
            scenario, toy_instance, CoefficientSpec(), VehicleSpec(), RngStream(0), mixing=False
        )

        # Then: u is the mean of the two driver utilities
        assert table.support[0, 0] == 2
        assert table.u[0, 0] == pytest.approx(np.mean([d.utilities[0] for d in updated]))
        assert table.u_nc[0] == 0.0

    def test_sum_strategy(self, toy_instance, make_scenario, make_driver):
        """Test the sum aggregation."""
        drivers = (make_driver(8.0, 12.0), make_driver(9.0, 10.0))
        scenario = replace(make_scenario(2.0), drivers=drivers)

        table, updated = aggregate_utilities(
            scenario,
            toy_instance,
            CoefficientSpec(),
            VehicleSpec(),
            RngStream(0),
            mixing=False,
            strategy="sum",
        )

        assert table.u[0, 0] == pytest.approx(sum(d.utilities[0] for d in updated))

    def test_unknown_strategy(self, toy_instance, make_scenario, make_driver):
        """Test that unknown strategies are rejected."""
        scenario = replace(make_scenario(1.0), drivers=(make_driver(8.0, 12.0),))

        with pytest.raises(ValueError, match="aggregation strategy"):
            aggregate_utilities(
                scenario, toy_instance, CoefficientSpec(), VehicleSpec(), RngStream(0), strategy="max"
            )


class TestPrepareScenarios:
    """Test the planning input pipeline."""

    def test_tables_attached_and_reproducible(self, desk_instance):
        """Test that tables are attached and identical on rerun."""
        config = replace(
            ExperimentConfig(), behavior=BehaviorConfig(daily_traffic=(60, 60), ev_share=0.5)
        )

        first = prepare_scenarios(desk_instance, config, 2, seed=3)
        second = prepare_scenarios(desk_instance, config, 2, seed=3)

        for a, b in zip((s.utilities for s in first), (s.utilities for s in second)):
            assert np.array_equal(a.u, b.u)
            assert a.shape == (3, 6)
