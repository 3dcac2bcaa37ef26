"""Scenario generation: one simulated day of EV drivers per scenario."""
import json
import logging
from functools import partial
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple

from evcsnet.core.config import ACTIVITIES, BehaviorConfig
from evcsnet.core.network import aggregate_demand, feasible_set
from evcsnet.core.parallel import ordered_map
from evcsnet.core.sampling import (
    RngStream,
    combine_beta,
    truncated_normal_mean,
    truncated_normal_sample,
    walk_radius_mean,
    walk_radius_sample,
    weibull_mean,
    weibull_sample,
)
from evcsnet.models.demand import DriverRecord
from evcsnet.models.instance import Activity, Instance
from evcsnet.models.scenario import DayType, Scenario, Season

logger = logging.getLogger(__name__)

SEASONS: Tuple[Season, ...] = tuple(Season)

# Latest arrival leaves at least one minute of dwell before closing
MIN_DWELL_HOURS = 1.0 / 60.0


class ScenarioGenerationError(ValueError):
    """Raised when a scenario cannot be generated for an instance/config pair."""


def check_activity_coverage(inst: Instance, cfg: BehaviorConfig) -> None:
    """
    Ensure every activity that can be drawn has at least one building.

    Raises:
        ScenarioGenerationError: Naming the first activity without buildings
    """
    for day in (DayType.WEEKDAY.value, DayType.WEEKEND.value):
        for slot in range(inst.grid.size):
            row = cfg.mix_row(day, slot)
            for activity, p in zip(ACTIVITIES, row):
                if p > 0 and not inst.buildings_of(Activity(activity)):
                    raise ScenarioGenerationError(
                        f"activity '{activity}' has positive probability "
                        f"({day}, slot {slot}) but no building in the instance"
                    )


def _arrival(inst: Instance, cfg: BehaviorConfig, day: str, rng: RngStream) -> float:
    scale, shape = cfg.arrival_params(day)
    grid = inst.grid
    if "arrival" in cfg.frozen:
        offset = weibull_mean(scale, shape)
    else:
        offset = weibull_sample(scale, shape, rng)
        tries = 1
        while grid.opening + offset >= grid.closing and tries < cfg.arrival_max_tries:
            offset = weibull_sample(scale, shape, rng)
            tries += 1
    return min(grid.opening + offset, grid.closing - MIN_DWELL_HOURS)


def _sample_driver(
    inst: Instance, cfg: BehaviorConfig, day: str, season: Season, rng: RngStream
) -> DriverRecord:
    grid = inst.grid
    arrival = _arrival(inst, cfg, day, rng)
    arrival_slot = grid.slot_of(arrival)

    activity = Activity(ACTIVITIES[rng.categorical(cfg.mix_row(day, arrival_slot))])
    candidates = inst.buildings_of(activity)
    building = candidates[rng.integer(0, len(candidates) - 1)]

    scale, shape = cfg.dwell_params(activity.value, day)
    dwell = weibull_mean(scale, shape) if "dwell" in cfg.frozen else weibull_sample(scale, shape, rng)
    departure = min(arrival + dwell, grid.closing)

    lo, hi = cfg.soc_bounds
    if "soc" in cfg.frozen:
        soc = truncated_normal_mean(cfg.soc_mean, cfg.soc_sd, lo, hi)
    else:
        soc = truncated_normal_sample(cfg.soc_mean, cfg.soc_sd, lo, hi, rng)

    beta = combine_beta(season.value, cfg.region, cfg.community, activity.value, cfg)
    if "walk" in cfg.frozen:
        radius = walk_radius_mean(beta, cfg.walk_cap_miles)
    else:
        radius = walk_radius_sample(beta, rng, cfg.walk_cap_miles)

    return DriverRecord(
        building=building,
        activity=activity,
        arrival=arrival,
        departure=departure,
        arrival_slot=arrival_slot,
        departure_slot=grid.slot_of(departure),
        soc=soc,
        walk_radius=radius,
        feasible_lots=feasible_set(building, radius, inst),
    )


def _driver_count(cfg: BehaviorConfig, rng: RngStream) -> int:
    lo, hi = cfg.daily_traffic
    traffic = (lo + hi) / 2.0 if "traffic" in cfg.frozen else float(rng.integer(lo, hi))
    share = cfg.ev_share
    if cfg.ev_share_range is not None:
        a, b = cfg.ev_share_range
        share = (a + b) / 2.0 if "traffic" in cfg.frozen else a + (b - a) * rng.uniform()
    return int(traffic * share + 0.5)


def generate_scenario(
    inst: Instance,
    cfg: BehaviorConfig,
    rng: RngStream,
    scenario_id: int = 0,
    probability: float = 1.0,
) -> Scenario:
    """
    Generate one day of drivers and aggregate their demand.

    Drivers whose walking radius reaches no lot are counted as lost demand.

    Raises:
        ScenarioGenerationError: If a drawable activity has no building
    """
    check_activity_coverage(inst, cfg)

    season = SEASONS[rng.integer(0, len(SEASONS) - 1)]
    day = DayType.WEEKDAY if rng.uniform() < cfg.day_type_probability else DayType.WEEKEND
    count = _driver_count(cfg, rng)

    drivers: List[DriverRecord] = []
    lost = 0
    for _ in range(count):
        driver = _sample_driver(inst, cfg, day.value, season, rng)
        if driver.feasible_lots:
            drivers.append(driver)
        else:
            lost += 1

    fsi, cells = aggregate_demand(drivers)
    return Scenario(
        id=scenario_id,
        day_type=day,
        season=season,
        drivers=tuple(drivers),
        lost_demand=lost,
        cells=tuple(cells),
        fsi=fsi,
        probability=probability,
    )


def _generate_indexed(
    inst: Instance,
    cfg: BehaviorConfig,
    seed: int,
    prefix: Tuple[int, ...],
    count: int,
    index: int,
) -> Scenario:
    rng = RngStream(seed, prefix + (index,))
    return generate_scenario(inst, cfg, rng, scenario_id=index, probability=1.0 / count)


def generate_scenario_set(
    inst: Instance,
    cfg: BehaviorConfig,
    count: int,
    seed: int,
    prefix: Sequence[int] = (),
    jobs: int = 1,
) -> List[Scenario]:
    """
    Generate `count` scenarios with uniform weights.

    Scenario i uses stream `prefix + (i,)` of `seed`, so any scenario can be
    regenerated on its own.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    check_activity_coverage(inst, cfg)
    work = partial(_generate_indexed, inst, cfg, seed, tuple(prefix), count)
    scenarios = ordered_map(work, range(count), jobs)
    logger.info(
        "generated %d scenarios (seed %d): %d drivers, %d lost",
        count,
        seed,
        sum(len(s.drivers) for s in scenarios),
        sum(s.lost_demand for s in scenarios),
    )
    return scenarios


def scenario_lines(scenario: Scenario) -> List[str]:
    """JSON-lines records of one scenario: its drivers, then a summary line."""
    lines = [
        json.dumps({"scenario": scenario.id, "driver": d.to_dict()}, sort_keys=True)
        for d in scenario.drivers
    ]
    summary = {
        "day_type": scenario.day_type.value,
        "drivers": len(scenario.drivers),
        "lost_demand": scenario.lost_demand,
        "probability": scenario.probability,
        "season": scenario.season.value,
    }
    lines.append(json.dumps({"scenario": scenario.id, "summary": summary}, sort_keys=True))
    return lines


def write_scenarios(path: Path, scenarios: Sequence[Scenario], header: Dict[str, Any]) -> None:
    """Write a scenario set as JSON-lines with a leading header record."""
    with open(path, "w") as f:
        f.write(json.dumps({"header": header}, sort_keys=True) + "\n")
        for scenario in scenarios:
            for line in scenario_lines(scenario):
                f.write(line + "\n")


def read_scenarios(path: Path) -> Tuple[Dict[str, Any], List[Scenario]]:
    """
    Read a scenario file written by `write_scenarios`.

    Raises:
        FileNotFoundError: If the file doesn't exist
        ValueError: If a line is malformed
    """
    if not path.exists():
        raise FileNotFoundError(f"Scenario file not found: {path}")

    header: Dict[str, Any] = {}
    drivers: Dict[int, List[DriverRecord]] = {}
    summaries: Dict[int, Dict[str, Any]] = {}
    with open(path) as f:
        for lineno, raw in enumerate(f, start=1):
            if not raw.strip():
                continue
            try:
                record = json.loads(raw)
                if "header" in record:
                    header = record["header"]
                elif "driver" in record:
                    sid = int(record["scenario"])
                    drivers.setdefault(sid, []).append(DriverRecord.from_dict(record["driver"]))
                elif "summary" in record:
                    summaries[int(record["scenario"])] = record["summary"]
                else:
                    raise ValueError("unknown record type")
            except (KeyError, TypeError, ValueError) as e:
                raise ValueError(f"{path}: line {lineno}: {e}") from e

    scenarios = []
    for sid in sorted(summaries):
        summary = summaries[sid]
        kept = drivers.get(sid, [])
        fsi, cells = aggregate_demand(kept)
        scenarios.append(
            Scenario(
                id=sid,
                day_type=DayType(summary["day_type"]),
                season=Season(summary["season"]),
                drivers=tuple(kept),
                lost_demand=int(summary["lost_demand"]),
                cells=tuple(cells),
                fsi=fsi,
                probability=float(summary["probability"]),
            )
        )
    return header, scenarios
