"""Mixed-logit utilities per driver, their aggregation per lot, and logit shares."""
import logging
from functools import partial
from typing import List, Optional, Sequence, Tuple

import numpy as np

from evcsnet.core.config import ChoiceConfig, CoefficientSpec, ExperimentConfig, VehicleSpec
from evcsnet.core.parallel import ordered_map
from evcsnet.core.sampling import RngStream
from evcsnet.core.scenarios import generate_scenario_set
from evcsnet.models.demand import DriverRecord
from evcsnet.models.instance import ChargerType, Instance, Level
from evcsnet.models.scenario import Scenario, UtilityTable

logger = logging.getLogger(__name__)

DWELL_DUMMY_HOURS = 0.5

# Sub-stream key for coefficient draws, kept apart from the generation stream
CHOICE_STREAM = 7


def predictor_vector(driver: DriverRecord, charger: ChargerType, veh: VehicleSpec) -> np.ndarray:
    """
    Predictors X of one (driver, charger type) alternative, in PREDICTORS order.

    Charging lasts until the battery is full or the driver leaves.
    """
    dwell = driver.dwell
    headroom_kwh = (1.0 - driver.soc) * veh.battery_kwh
    charge_hours = min(dwell, headroom_kwh / charger.power_kw)
    range_charged = min(charger.power_kw * dwell, headroom_kwh) * veh.miles_per_kwh
    remaining = driver.soc * veh.battery_kwh * veh.miles_per_kwh
    return np.array(
        [
            1.0,
            charger.price_per_hour,
            charger.price_per_hour * charge_hours,
            veh.home_price_per_kwh,
            1.0 if dwell >= DWELL_DUMMY_HOURS else 0.0,
            1.0 if charger.level == Level.L2 else 0.0,
            1.0 if charger.level == Level.L3 else 0.0,
            range_charged,
            remaining,
            1.0 if remaining >= veh.next_opportunity_miles else 0.0,
        ]
    )


def draw_coefficients(coeffs: CoefficientSpec, rng: RngStream, mixing: bool) -> np.ndarray:
    """One coefficient vector per driver: independent normals, or the means."""
    means = np.asarray(coeffs.means)
    if not mixing:
        return means
    return means + np.asarray(coeffs.sds) * rng.generator.standard_normal(len(means))


def driver_utility(
    driver: DriverRecord,
    charger: ChargerType,
    coeffs: CoefficientSpec,
    veh: VehicleSpec,
    rng: RngStream,
    mixing: bool,
    beta: Optional[np.ndarray] = None,
) -> float:
    """
    Deterministic utility beta . X of one alternative.

    Pass `beta` to share one coefficient draw across a driver's alternatives;
    otherwise a fresh draw is taken from `rng`.
    """
    if beta is None:
        beta = draw_coefficients(coeffs, rng, mixing)
    return float(beta @ predictor_vector(driver, charger, veh))


def no_charge_utility(
    driver: DriverRecord,
    coeffs: CoefficientSpec,
    veh: VehicleSpec,
    rng: RngStream,
    mixing: bool,
) -> float:
    """Deterministic utility of not charging; normalized to 0."""
    return 0.0


def driver_utilities(
    driver: DriverRecord,
    inst: Instance,
    coeffs: CoefficientSpec,
    veh: VehicleSpec,
    rng: RngStream,
    mixing: bool,
) -> Tuple[np.ndarray, np.ndarray]:
    """Utilities of every charger type for one driver (single draw) and the draw."""
    beta = draw_coefficients(coeffs, rng, mixing)
    values = np.array(
        [driver_utility(driver, c, coeffs, veh, rng, mixing, beta=beta) for c in inst.chargers]
    )
    return values, beta


def aggregate_utilities(
    scenario: Scenario,
    inst: Instance,
    coeffs: CoefficientSpec,
    veh: VehicleSpec,
    rng: RngStream,
    mixing: bool = True,
    strategy: str = "mean",
) -> Tuple[UtilityTable, Tuple[DriverRecord, ...]]:
    """
    Aggregate driver utilities to u[n, j] over the drivers who can reach lot j.

    Returns:
        The table and the scenario's drivers with their own utilities filled in
    """
    n_types, n_lots = inst.n_types, inst.n_lots
    totals = np.zeros((n_types, n_lots))
    support = np.zeros((n_types, n_lots))
    beta_sum = np.zeros((n_lots, len(coeffs.means)))
    x_sum = np.zeros((n_types, n_lots, len(coeffs.means)))

    drivers = []
    for driver in scenario.drivers:
        values, beta = driver_utilities(driver, inst, coeffs, veh, rng, mixing)
        nc = no_charge_utility(driver, coeffs, veh, rng, mixing)
        drivers.append(driver.with_utilities(tuple(float(v) for v in values), nc))
        lots = sorted(driver.feasible_lots)
        if not lots:
            continue
        totals[:, lots] += values[:, np.newaxis]
        support[:, lots] += 1.0
        if strategy == "representative":
            beta_sum[lots] += beta
            for n, charger in enumerate(inst.chargers):
                x_sum[n, lots] += predictor_vector(driver, charger, veh)

    u = np.zeros((n_types, n_lots))
    mask = support > 0
    if strategy == "mean":
        u[mask] = totals[mask] / support[mask]
    elif strategy == "sum":
        u[mask] = totals[mask]
    elif strategy == "representative":
        for n in range(n_types):
            for j in range(n_lots):
                if mask[n, j]:
                    k = support[n, j]
                    u[n, j] = float((beta_sum[j] / k) @ (x_sum[n, j] / k))
    else:
        raise ValueError(f"unknown aggregation strategy '{strategy}'")

    table = UtilityTable(u=u, u_nc=np.zeros(n_lots), support=support)
    return table, tuple(drivers)


def logit_share(n: int, j: int, table: UtilityTable, open_row: Sequence[int]) -> float:
    """
    Share bound of type n at lot j:
    e^{u_nj} x_nj / (e^{u_nc,j} + sum_l e^{u_lj} x_lj).
    """
    if not open_row[n] or not table.supported(n, j):
        return 0.0
    exponents = [float(table.u_nc[j])]
    exponents += [
        float(table.u[l, j]) for l in range(len(open_row)) if open_row[l] and table.supported(l, j)
    ]
    shift = max(exponents)
    denominator = sum(np.exp(e - shift) for e in exponents)
    return float(np.exp(table.u[n, j] - shift) / denominator)


def no_charge_share(j: int, table: UtilityTable, open_row: Sequence[int]) -> float:
    """Implied share of not charging at lot j."""
    exponents = [float(table.u_nc[j])]
    exponents += [
        float(table.u[l, j]) for l in range(len(open_row)) if open_row[l] and table.supported(l, j)
    ]
    shift = max(exponents)
    return float(np.exp(table.u_nc[j] - shift) / sum(np.exp(e - shift) for e in exponents))


def attach_utilities(
    scenarios: Sequence[Scenario],
    inst: Instance,
    coeffs: CoefficientSpec,
    veh: VehicleSpec,
    choice: ChoiceConfig,
    seed: int,
    prefix: Sequence[int] = (),
    jobs: int = 1,
) -> List[Scenario]:
    """Fill the utility table of every scenario from its own coefficient stream."""
    work = partial(_attach_one, inst, coeffs, veh, choice, seed, tuple(prefix))
    return ordered_map(work, list(scenarios), jobs)


def _attach_one(
    inst: Instance,
    coeffs: CoefficientSpec,
    veh: VehicleSpec,
    choice: ChoiceConfig,
    seed: int,
    prefix: Tuple[int, ...],
    scenario: Scenario,
) -> Scenario:
    rng = RngStream(seed, prefix + (scenario.id, CHOICE_STREAM))
    table, drivers = aggregate_utilities(
        scenario, inst, coeffs, veh, rng, mixing=choice.mixing, strategy=choice.aggregation
    )
    return scenario.with_utilities(table, drivers)


def prepare_scenarios(
    inst: Instance,
    config: ExperimentConfig,
    count: int,
    seed: int,
    prefix: Sequence[int] = (),
    jobs: int = 1,
) -> List[Scenario]:
    """Generate a scenario set and attach utility tables (the planning input)."""
    scenarios = generate_scenario_set(inst, config.behavior, count, seed, prefix=prefix, jobs=jobs)
    return attach_utilities(
        scenarios, inst, config.coefficients, config.vehicle, config.choice, seed, prefix, jobs
    )
