"""
Discrete-event replay of driver arrivals against a fixed network design.

Each (type, lot) pair with chargers is a simpy Resource. An arriving driver
draws a charger option by logit over the installed options in reach (not
charging included); a full first choice triggers a new draw without it.
Drivers never wait: a charger is held from arrival to departure or not at all.
"""
import logging
import math
from dataclasses import dataclass, field
from functools import partial
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import simpy

from evcsnet.core.choice import prepare_scenarios
from evcsnet.core.config import ExperimentConfig
from evcsnet.core.parallel import ordered_map
from evcsnet.core.planning import solve_design
from evcsnet.core.sampling import RngStream
from evcsnet.models.demand import DriverRecord
from evcsnet.models.instance import Instance, Level, NetworkDesign
from evcsnet.models.scenario import Scenario, UtilityTable

logger = logging.getLogger(__name__)

SERVED = "served"
REJECTED = "rejected"
DECLINED = "declined"

# Stream prefixes for fresh driver days and for the in-simulation choice draws
DRIVER_STREAM = 5
CHOICE_DRAW_STREAM = 6

L2_SHARE = 0.8


@dataclass
class SimMetrics:
    """Outcome of one simulated day."""

    total: int
    served: int
    rejected: int
    declined: int
    charger_hours_used: float
    charger_hours_available: float
    used_by_level: Dict[str, float]
    available_by_level: Dict[str, float]
    slot_used_by_level: Dict[str, List[float]]
    slot_available_by_level: Dict[str, List[float]]
    walk_total: float
    peak_occupancy: np.ndarray
    events: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def accessibility(self) -> float:
        """Percent of drivers who obtained a charger."""
        return 100.0 * self.served / self.total if self.total else 0.0

    @property
    def utilization(self) -> Optional[float]:
        """Percent of installed charger-hours occupied; None with nothing installed."""
        if self.charger_hours_available <= 0:
            return None
        return 100.0 * self.charger_hours_used / self.charger_hours_available

    def level_utilization(self, level: str) -> Optional[float]:
        available = self.available_by_level.get(level, 0.0)
        if available <= 0:
            return None
        return 100.0 * self.used_by_level[level] / available

    def slot_utilization(self, level: str) -> List[Optional[float]]:
        return [
            None if available <= 0 else 100.0 * used / available
            for used, available in zip(
                self.slot_used_by_level[level], self.slot_available_by_level[level]
            )
        ]

    @property
    def walk_per_person(self) -> float:
        return self.walk_total / self.served if self.served else 0.0

    def to_row(self) -> Dict[str, Any]:
        row: Dict[str, Any] = {
            "drivers": self.total,
            "served": self.served,
            "rejected": self.rejected,
            "declined": self.declined,
            "accessibility": self.accessibility,
            "utilization": self.utilization,
            "charger_hours_used": self.charger_hours_used,
            "charger_hours_available": self.charger_hours_available,
            "walk_total": self.walk_total,
            "walk_per_person": self.walk_per_person,
        }
        for level in self.used_by_level:
            row[f"utilization_{level}"] = self.level_utilization(level)
        return row


class ChargingNetwork:
    """simpy resources for the installed (type, lot) pairs, with occupancy tracking."""

    def __init__(self, env: simpy.Environment, design: NetworkDesign) -> None:
        self.env = env
        self.count = design.count
        self.chargers: Dict[Tuple[int, int], simpy.Resource] = {}
        for n, j in zip(*np.nonzero(design.count)):
            self.chargers[(int(n), int(j))] = simpy.Resource(env, capacity=int(design.count[n, j]))
        self.peak = np.zeros_like(design.count)

    def options(self, lots: Sequence[int]) -> List[Tuple[int, int]]:
        """Installed (type, lot) pairs at the given lots, lot-major."""
        n_types = self.count.shape[0]
        return [(n, j) for j in sorted(lots) for n in range(n_types) if (n, j) in self.chargers]

    def has_free(self, option: Tuple[int, int]) -> bool:
        resource = self.chargers[option]
        return resource.count < resource.capacity

    def occupy(self, option: Tuple[int, int]) -> simpy.resources.resource.Request:
        request = self.chargers[option].request()
        n, j = option
        self.peak[n, j] = max(self.peak[n, j], self.chargers[option].count)
        return request


def _option_utility(
    driver: DriverRecord, option: Tuple[int, int], table: Optional[UtilityTable]
) -> float:
    n, j = option
    if driver.utilities:
        return float(driver.utilities[n])
    if table is None:
        raise ValueError("driver has no utilities and no utility table was given")
    return float(table.u[n, j])


def _draw(
    utilities: Sequence[float], no_charge: float, rng: RngStream
) -> int:
    """Logit draw over options plus not charging (last index)."""
    values = np.append(np.asarray(utilities, dtype=float), no_charge)
    weights = np.exp(values - values.max())
    return rng.categorical(weights / weights.sum())


def simulate_day(
    inst: Instance,
    design: NetworkDesign,
    drivers: Sequence[DriverRecord],
    rng: RngStream,
    table: Optional[UtilityTable] = None,
    event_log: bool = False,
) -> SimMetrics:
    """
    Replay one day of drivers against a design.

    Drivers are processed in arrival order (ties by position). Each driver's
    choice draws come from its own sub-stream of `rng`, so outcomes under two
    designs share random numbers driver by driver.

    Raises:
        ValueError: If the design violates the first-stage constraints
    """
    problems = design.violations(inst)
    if problems:
        raise ValueError("; ".join(str(p) for p in problems))

    grid = inst.grid
    env = simpy.Environment(initial_time=grid.opening)
    network = ChargingNetwork(env, design)
    levels = [c.level.value for c in inst.chargers]
    level_names = sorted(set(levels))
    used = {level: 0.0 for level in level_names}
    slot_used = {level: [0.0] * grid.size for level in level_names}
    outcome_counts = {SERVED: 0, REJECTED: 0, DECLINED: 0}
    walk_total = 0.0
    events: List[Dict[str, Any]] = []

    ordered = sorted(enumerate(drivers), key=lambda item: (item[1].arrival, item[0]))

    def record(index: int, driver: DriverRecord, outcome: str, option=None, attempts=0) -> None:
        outcome_counts[outcome] += 1
        if event_log:
            events.append(
                {
                    "driver": index,
                    "building": driver.building,
                    "arrival": driver.arrival,
                    "departure": driver.departure,
                    "outcome": outcome,
                    "type": None if option is None else option[0],
                    "lot": None if option is None else option[1],
                    "attempts": attempts,
                }
            )

    def visit(index: int, driver: DriverRecord):
        nonlocal walk_total
        draws = rng.child(index)
        remaining = network.options(driver.feasible_lots)
        if not remaining:
            record(index, driver, REJECTED)
            return
        attempts = 0
        while remaining:
            utilities = [_option_utility(driver, o, table) for o in remaining]
            pick = _draw(utilities, driver.no_charge_utility, draws)
            attempts += 1
            if pick == len(remaining):
                record(index, driver, DECLINED if attempts == 1 else REJECTED, attempts=attempts)
                return
            option = remaining[pick]
            if network.has_free(option):
                request = network.occupy(option)
                yield request
                n, j = option
                walk = inst.distance(driver.building, j)
                walk_total += walk
                hours = max(driver.departure - env.now, 0.0)
                level = levels[n]
                used[level] += hours
                for t, (start, end) in enumerate(grid.slots):
                    slot_used[level][t] += max(0.0, min(end, driver.departure) - max(start, env.now))
                record(index, driver, SERVED, option, attempts)
                yield env.timeout(hours)
                network.chargers[option].release(request)
                return
            remaining = remaining[:pick] + remaining[pick + 1 :]
        record(index, driver, REJECTED, attempts=attempts)

    def arrivals():
        for index, driver in ordered:
            yield env.timeout(max(driver.arrival - env.now, 0.0))
            # Departures at this instant release their chargers first
            yield env.timeout(0)
            env.process(visit(index, driver))

    env.process(arrivals())
    env.run()

    available = {level: 0.0 for level in level_names}
    slot_available = {level: [0.0] * grid.size for level in level_names}
    for n, level in enumerate(levels):
        installed = float(design.count[n].sum())
        available[level] += installed * grid.span
        for t, (start, end) in enumerate(grid.slots):
            slot_available[level][t] += installed * (end - start)

    metrics = SimMetrics(
        total=len(drivers),
        served=outcome_counts[SERVED],
        rejected=outcome_counts[REJECTED],
        declined=outcome_counts[DECLINED],
        charger_hours_used=sum(used.values()),
        charger_hours_available=sum(available.values()),
        used_by_level=used,
        available_by_level=available,
        slot_used_by_level=slot_used,
        slot_available_by_level=slot_available,
        walk_total=walk_total,
        peak_occupancy=network.peak,
        events=events,
    )
    logger.debug(
        "simulated %d drivers: %d served, %d rejected, %d declined",
        metrics.total,
        metrics.served,
        metrics.rejected,
        metrics.declined,
    )
    return metrics


def demand_weights(inst: Instance, scenarios: Sequence[Scenario]) -> np.ndarray:
    """Expected drivers per day with each lot in walking reach."""
    weights = np.zeros(inst.n_lots)
    for s in scenarios:
        for cell in s.cells:
            for m, share in cell.groups:
                for j in s.fsi.lots(cell.building, m):
                    weights[j] += s.probability * share
    return weights


def baseline_design(
    inst: Instance,
    which: str,
    budget: Optional[float] = None,
    weights: Optional[np.ndarray] = None,
) -> NetworkDesign:
    """
    Choice-unaware baseline designs.

    config1 fills lots with level-2 chargers; config2 installs, per lot, the
    largest count t whose split floor(0.8 t) level-2 plus the rest level-1
    fits the remaining budget. Lots are filled in descending order of
    `weights` (lowest index first on ties).

    Raises:
        ValueError: On an unknown configuration, negative budget, or a
            missing charger level
    """
    budget = inst.budget if budget is None else float(budget)
    if budget < 0:
        raise ValueError(f"budget must be >= 0, got {budget}")
    if which not in ("config1", "config2"):
        raise ValueError(f"unknown baseline '{which}'")
    l2 = inst.type_of_level(Level.L2)
    l1 = inst.type_of_level(Level.L1)
    if l2 is None or (which == "config2" and l1 is None):
        raise ValueError(f"{which} needs level-2{' and level-1' if which == 'config2' else ''} chargers")

    w = np.zeros(inst.n_lots) if weights is None else np.asarray(weights, dtype=float)
    order = sorted(range(inst.n_lots), key=lambda j: (-w[j], j))
    count = np.zeros((inst.n_types, inst.n_lots), dtype=int)
    remaining = budget
    c2 = inst.chargers[l2].install_cost

    for j in order:
        capacity = inst.lots[j].capacity
        if which == "config1":
            k = min(capacity, int(math.floor(remaining / c2 + 1e-9)))
            count[l2, j] = k
            remaining -= k * c2
            continue
        c1 = inst.chargers[l1].install_cost
        for t in range(capacity, 0, -1):
            n2 = int(math.floor(L2_SHARE * t + 1e-9))
            cost = n2 * c2 + (t - n2) * c1
            if cost <= remaining + 1e-9:
                count[l2, j] = n2
                count[l1, j] = t - n2
                remaining -= cost
                break
    return NetworkDesign.from_counts(count)


def driver_streams(
    inst: Instance, config: ExperimentConfig, replications: int, seed: int, jobs: int = 1
) -> List[List[DriverRecord]]:
    """Fresh driver days (with utilities) for simulation replications."""
    days = prepare_scenarios(inst, config, replications, seed, prefix=(DRIVER_STREAM,), jobs=jobs)
    return [list(day.drivers) for day in days]


def _simulate_replication(
    inst: Instance,
    design: NetworkDesign,
    seed: int,
    event_log: bool,
    item: Tuple[int, Sequence[DriverRecord]],
) -> SimMetrics:
    r, drivers = item
    rng = RngStream(seed, (CHOICE_DRAW_STREAM, r))
    return simulate_day(inst, design, drivers, rng, event_log=event_log)


def simulate_replications(
    inst: Instance,
    design: NetworkDesign,
    streams: Sequence[Sequence[DriverRecord]],
    seed: int,
    jobs: int = 1,
    event_log: bool = False,
) -> List[SimMetrics]:
    """Simulate one design on every driver stream; replication r uses draw stream r."""
    work = partial(_simulate_replication, inst, design, seed, event_log)
    return ordered_map(work, list(enumerate(streams)), jobs)


def summarize(metrics: Sequence[SimMetrics]) -> Dict[str, float]:
    """Mean and sample sd of every metric across replications."""
    frame = pd.DataFrame([m.to_row() for m in metrics]).astype(float)
    summary: Dict[str, float] = {}
    for column in frame.columns:
        summary[f"{column}_mean"] = float(frame[column].mean())
        summary[f"{column}_sd"] = float(frame[column].std(ddof=1)) if len(frame) > 1 else 0.0
    return summary


def compare(
    inst: Instance,
    planning: Sequence[Scenario],
    streams: Sequence[Sequence[DriverRecord]],
    budgets: Sequence[float],
    config: ExperimentConfig,
    jobs: int = 1,
) -> pd.DataFrame:
    """
    Choice-aware design against config1/config2 on identical driver streams.

    For each budget the choice-aware design is optimized on `planning`, the
    baselines are built from the planning demand weights, and all three are
    simulated on the same streams with the same choice draws.
    """
    weights = demand_weights(inst, planning)
    rows = []
    for budget in budgets:
        budgeted = inst.with_budget(budget)
        designs = {
            "choice-aware": solve_design(budgeted, planning, config.solver, jobs=jobs)[0],
            "config1": baseline_design(budgeted, "config1", weights=weights),
            "config2": baseline_design(budgeted, "config2", weights=weights),
        }
        for approach, design in designs.items():
            metrics = simulate_replications(budgeted, design, streams, config.simulation.seed, jobs)
            row: Dict[str, Any] = {"budget": budget, "approach": approach}
            row.update(design.counts_by_level(budgeted))
            row.update(summarize(metrics))
            rows.append(row)
        logger.info("compared designs at budget %g", budget)
    return pd.DataFrame(rows)
