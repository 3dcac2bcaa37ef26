"""Seeded random streams and the inverse-transform samplers for driver behavior."""
import math
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy import special, stats

from evcsnet.core.config import BehaviorConfig


class RngStream:
    """
    Independent, reproducible random stream identified by (seed, stream key).

    Identical (seed, stream) pairs produce identical sequences regardless of
    how many other streams exist or in which order they are consumed.
    """

    def __init__(self, seed: int, stream: Union[int, Sequence[int]] = 0) -> None:
        if seed < 0:
            raise ValueError(f"seed must be >= 0, got {seed}")
        key = (int(stream),) if isinstance(stream, (int, np.integer)) else tuple(int(s) for s in stream)
        self.seed = int(seed)
        self.stream: Tuple[int, ...] = key
        self.generator = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=key))
        )

    def child(self, *key: int) -> "RngStream":
        """Sub-stream; independent of this stream's consumption."""
        return RngStream(self.seed, self.stream + tuple(key))

    def uniform(self) -> float:
        """Uniform draw on [0, 1)."""
        return float(self.generator.random())

    def normal(self, mean: float = 0.0, sd: float = 1.0) -> float:
        return float(self.generator.normal(mean, sd))

    def integer(self, lo: int, hi: int) -> int:
        """Uniform integer on [lo, hi] inclusive."""
        return int(self.generator.integers(lo, hi + 1))

    def categorical(self, probabilities: Sequence[float]) -> int:
        """Index drawn with the given probabilities (inverse CDF on one uniform)."""
        cumulative = np.cumsum(np.asarray(probabilities, dtype=float))
        u = self.uniform() * cumulative[-1]
        index = int(np.searchsorted(cumulative, u, side="right"))
        return min(index, len(cumulative) - 1)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream={self.stream})"


def _check_weibull(scale: float, shape: float) -> None:
    if not (scale > 0 and shape > 0):
        raise ValueError(f"Weibull scale and shape must be > 0, got ({scale}, {shape})")


def weibull_sample(scale: float, shape: float, rng: RngStream) -> float:
    """Weibull draw scale * (-ln(1 - u))^(1/shape), u uniform on [0, 1)."""
    _check_weibull(scale, shape)
    u = rng.uniform()
    return scale * (-math.log1p(-u)) ** (1.0 / shape)


def weibull_samples(scale: float, shape: float, rng: RngStream, size: int) -> np.ndarray:
    """Vectorized `weibull_sample`."""
    _check_weibull(scale, shape)
    u = rng.generator.random(size)
    return scale * (-np.log1p(-u)) ** (1.0 / shape)


def weibull_mean(scale: float, shape: float) -> float:
    _check_weibull(scale, shape)
    return float(scale * special.gamma(1.0 + 1.0 / shape))


def weibull_variance(scale: float, shape: float) -> float:
    _check_weibull(scale, shape)
    g1 = special.gamma(1.0 + 1.0 / shape)
    g2 = special.gamma(1.0 + 2.0 / shape)
    return float(scale**2 * (g2 - g1**2))


def _check_truncated(sd: float, lo: float, hi: float) -> None:
    if not sd > 0:
        raise ValueError(f"sd must be > 0, got {sd}")
    if not lo < hi:
        raise ValueError(f"degenerate interval [{lo}, {hi}]")


def _truncated_inverse_cdf(mean: float, sd: float, lo: float, hi: float, u: np.ndarray) -> np.ndarray:
    a = special.ndtr((lo - mean) / sd)
    b = special.ndtr((hi - mean) / sd)
    return np.clip(mean + sd * special.ndtri(a + u * (b - a)), lo, hi)


def truncated_normal_sample(
    mean: float, sd: float, lo: float, hi: float, rng: RngStream, max_tries: int = 1000
) -> float:
    """
    Normal(mean, sd) conditioned on [lo, hi], by rejection.

    After `max_tries` rejections (interval deep in a tail) the draw falls back
    to the inverse CDF of the truncated distribution.
    """
    _check_truncated(sd, lo, hi)
    for _ in range(max_tries):
        x = rng.normal(mean, sd)
        if lo <= x <= hi:
            return x
    return float(_truncated_inverse_cdf(mean, sd, lo, hi, np.array([rng.uniform()]))[0])


def truncated_normal_samples(
    mean: float, sd: float, lo: float, hi: float, rng: RngStream, size: int
) -> np.ndarray:
    """Vectorized `truncated_normal_sample` (batched rejection)."""
    _check_truncated(sd, lo, hi)
    out = np.empty(size)
    filled = 0
    while filled < size:
        draws = rng.generator.normal(mean, sd, size=max(2 * (size - filled), 16))
        kept = draws[(draws >= lo) & (draws <= hi)][: size - filled]
        if kept.size == 0:
            out[filled:] = _truncated_inverse_cdf(mean, sd, lo, hi, rng.generator.random(size - filled))
            break
        out[filled : filled + kept.size] = kept
        filled += kept.size
    return out


def truncated_normal_mean(mean: float, sd: float, lo: float, hi: float) -> float:
    _check_truncated(sd, lo, hi)
    alpha, beta = (lo - mean) / sd, (hi - mean) / sd
    mass = stats.norm.cdf(beta) - stats.norm.cdf(alpha)
    return float(mean + sd * (stats.norm.pdf(alpha) - stats.norm.pdf(beta)) / mass)


def _check_beta(beta: float) -> None:
    if not beta > 0:
        raise ValueError(f"beta must be > 0, got {beta}")


def walk_radius_sample(beta: float, rng: RngStream, cap: Optional[float] = None) -> float:
    """
    Willingness-to-walk radius with survival function e^(-beta d).

    With `cap`, the draw comes from the same distribution truncated to [0, cap].
    """
    _check_beta(beta)
    u = 1.0 - rng.uniform()  # (0, 1]
    if cap is None:
        return -math.log(u) / beta
    q = (1.0 - u) * -math.expm1(-beta * cap)
    return -math.log1p(-q) / beta


def walk_radius_samples(
    beta: float, rng: RngStream, size: int, cap: Optional[float] = None
) -> np.ndarray:
    """Vectorized `walk_radius_sample`."""
    _check_beta(beta)
    u = 1.0 - rng.generator.random(size)
    if cap is None:
        return -np.log(u) / beta
    q = (1.0 - u) * -math.expm1(-beta * cap)
    return -np.log1p(-q) / beta


def walk_radius_mean(beta: float, cap: Optional[float] = None) -> float:
    _check_beta(beta)
    if cap is None:
        return 1.0 / beta
    tail = math.exp(-beta * cap)
    return 1.0 / beta - cap * tail / (1.0 - tail)


def combine_beta(
    season: str, region: str, community: str, activity: Optional[str], cfg: BehaviorConfig
) -> float:
    """
    Distance-decay beta for one driver under the configured strategy.

    "mean" averages the season, region and community betas, plus the activity
    beta when the config has one for that activity; "season-only" returns the
    season beta; "fixed" returns cfg.fixed_beta.

    Raises:
        ValueError: If a factor level has no configured beta
    """
    season, region, community = (getattr(v, "value", v) for v in (season, region, community))
    activity = getattr(activity, "value", activity)

    def lookup(table_name: str, level: str) -> float:
        table = getattr(cfg, table_name)
        if level not in table:
            raise ValueError(f"unknown {table_name.replace('_beta', '')} level '{level}'")
        return float(table[level])

    if cfg.beta_strategy == "fixed":
        return cfg.fixed_beta
    if cfg.beta_strategy == "season-only":
        return lookup("season_beta", season)

    values = [
        lookup("season_beta", season),
        lookup("region_beta", region),
        lookup("community_beta", community),
    ]
    if activity is not None and activity in cfg.activity_beta:
        values.append(float(cfg.activity_beta[activity]))
    return sum(values) / len(values)
