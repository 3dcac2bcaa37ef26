"""Tests for random streams and inverse-transform samplers."""
import math

import numpy as np
import pytest

from evcsnet.core.config import BehaviorConfig
from evcsnet.core.sampling import (
    RngStream,
    combine_beta,
    truncated_normal_mean,
    truncated_normal_sample,
    truncated_normal_samples,
    walk_radius_mean,
    walk_radius_sample,
    walk_radius_samples,
    weibull_mean,
    weibull_sample,
    weibull_samples,
    weibull_variance,
)

DRAWS = 1_000_000


def configured_weibulls():
    """Every arrival and dwell (scale, shape) pair of the default behavior config."""
    cfg = BehaviorConfig()
    pairs = set(cfg.arrival_weibull.values())
    for table in cfg.dwell_weibull.values():
        pairs.update(table.values())
    return sorted(pairs)


class TestRngStream:
    """Test stream reproducibility."""

    def test_same_key_same_sequence(self):
        """Test that (seed, stream) fixes the sequence."""
        a = RngStream(7, (1, 2))
        b = RngStream(7, (1, 2))

        assert [a.uniform() for _ in range(5)] == [b.uniform() for _ in range(5)]

    def test_streams_differ(self):
        """Test that different stream keys give different draws."""
        assert RngStream(7, 1).uniform() != RngStream(7, 2).uniform()

    def test_child_ignores_parent_consumption(self):
        """Test that a child stream does not depend on parent draws."""
        fresh = RngStream(3, 0)
        used = RngStream(3, 0)
        used.uniform()

        assert fresh.child(4).uniform() == used.child(4).uniform()

    def test_negative_seed(self):
        """Test that seeds must be non-negative."""
        with pytest.raises(ValueError, match="seed"):
            RngStream(-1)

    def test_categorical_uses_cumulative(self, stub_rng):
        """Test categorical draws against fixed uniforms."""
        rng = RngStream(0)
        rng.uniform = stub_rng([0.1, 0.5, 0.95]).uniform

        draws = [rng.categorical([0.2, 0.5, 0.3]) for _ in range(3)]

        assert draws == [0, 1, 2]


class TestWeibull:
    """Test Weibull sampling."""

    def test_inverse_transform(self, stub_rng):
        """Test that u = 1 - 1/e maps to the scale."""
        rng = stub_rng([1.0 - math.exp(-1.0)])

        assert weibull_sample(13.0, 4.0, rng) == pytest.approx(13.0)

    def test_median_draw(self, stub_rng):
        """Test that u = 0.5 with scale 8 and shape 3 gives 8 * ln(2)^(1/3)."""
        assert weibull_sample(8.0, 3.0, stub_rng([0.5])) == pytest.approx(7.0800, abs=1e-4)

    @pytest.mark.parametrize("scale,shape", configured_weibulls())
    def test_moments(self, scale, shape):
        """Test empirical mean and variance within 2% for every configured parameter pair."""
        samples = weibull_samples(scale, shape, RngStream(11, 0), DRAWS)

        assert samples.mean() == pytest.approx(weibull_mean(scale, shape), rel=0.02)
        # Shapes below 1 have too heavy a tail for a 2% variance check at this size
        if shape >= 1.0:
            assert samples.var() == pytest.approx(weibull_variance(scale, shape), rel=0.02)

    def test_invalid_parameters(self):
        """Test that non-positive parameters are rejected."""
        with pytest.raises(ValueError, match="scale and shape"):
            weibull_mean(0.0, 1.0)


class TestTruncatedNormal:
    """Test truncated-normal sampling."""

    def test_samples_in_bounds(self):
        """Test that draws respect the bounds."""
        samples = truncated_normal_samples(0.3, 0.1, 0.0, 1.0, RngStream(1), 10_000)

        assert samples.min() >= 0.0
        assert samples.max() <= 1.0

    def test_mean(self):
        """Test the empirical mean against the analytic truncated mean."""
        samples = truncated_normal_samples(0.3, 0.1, 0.0, 1.0, RngStream(2), DRAWS)

        assert samples.mean() == pytest.approx(truncated_normal_mean(0.3, 0.1, 0.0, 1.0), rel=0.02)

    def test_deep_tail_falls_back(self):
        """Test that an interval far in the tail still yields a value inside it."""
        value = truncated_normal_sample(0.0, 0.1, 5.0, 6.0, RngStream(3), max_tries=5)

        assert 5.0 <= value <= 6.0

    def test_tiny_sd_returns_mean(self):
        """Test that a near-zero spread collapses onto the mean."""
        value = truncated_normal_sample(0.5, 1e-9, 0.0, 1.0, RngStream(4))

        assert value == pytest.approx(0.5, abs=1e-6)

    def test_degenerate_interval(self):
        """Test that lo >= hi is rejected."""
        with pytest.raises(ValueError, match="degenerate"):
            truncated_normal_mean(0.3, 0.1, 1.0, 1.0)


class TestWalkRadius:
    """Test distance-decay radius sampling."""

    def test_inverse_transform(self, stub_rng):
        """Test that 1 - u = 1/e maps to 1/beta."""
        rng = stub_rng([1.0 - math.exp(-1.0)])

        assert walk_radius_sample(2.0, rng) == pytest.approx(0.5)

    @pytest.mark.parametrize("distance", [0.1, 0.5, 1.0])
    def test_survival(self, distance):
        """Test P(radius > d) = e^(-beta d) within 0.01."""
        beta = 1.77
        samples = walk_radius_samples(beta, RngStream(5), DRAWS)

        assert np.mean(samples > distance) == pytest.approx(math.exp(-beta * distance), abs=0.01)

    def test_cap_truncates(self):
        """Test that capped draws stay below the cap."""
        samples = walk_radius_samples(1.7, RngStream(6), 10_000, cap=0.2)

        assert samples.max() <= 0.2
        assert samples.mean() == pytest.approx(walk_radius_mean(1.7, 0.2), rel=0.02)

    def test_uncapped_mean(self):
        """Test that the uncapped mean is 1/beta."""
        assert walk_radius_mean(2.0) == 0.5


class TestCombineBeta:
    """Test distance-decay beta strategies."""

    def test_mean_strategy(self):
        """Test the mean of season, region and community betas."""
        cfg = BehaviorConfig()

        beta = combine_beta("winter", "midwest", "urban", "work", cfg)

        assert beta == pytest.approx((1.88 + 1.65 + 1.78) / 3)

    def test_season_only(self):
        """Test the season-only strategy."""
        cfg = BehaviorConfig(beta_strategy="season-only")

        assert combine_beta("summer", "midwest", "urban", None, cfg) == 1.64

    def test_fixed(self):
        """Test the fixed strategy."""
        cfg = BehaviorConfig(beta_strategy="fixed", fixed_beta=2.5)

        assert combine_beta("summer", "west", "suburban", None, cfg) == 2.5

    def test_unknown_level(self):
        """Test that unknown factor levels are rejected."""
        with pytest.raises(ValueError, match="unknown season level"):
            combine_beta("monsoon", "midwest", "urban", None, BehaviorConfig())
