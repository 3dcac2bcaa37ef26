"""Pytest configuration and shared fixtures."""
import itertools
from dataclasses import replace
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import pytest

from evcsnet.cli.main import DESK_INSTANCE
from evcsnet.core.choice import prepare_scenarios
from evcsnet.core.config import ACTIVITIES, DAY_TYPES, BehaviorConfig, ExperimentConfig
from evcsnet.core.network import load_instance
from evcsnet.models.demand import DemandCell, DriverRecord, FeasibleSetIndex
from evcsnet.models.instance import (
    Activity,
    Building,
    ChargerType,
    Instance,
    Level,
    NetworkDesign,
    ParkingLot,
    TimeGrid,
)
from evcsnet.models.scenario import DayType, Scenario, Season, UtilityTable

# One slot spanning the whole operating day
DAY_GRID = TimeGrid(slots=((6.0, 18.0),), opening=6.0, closing=18.0)

L1 = ChargerType(id=0, level=Level.L1, install_cost=900.0, power_kw=1.9, price_per_hour=0.75)
L2 = ChargerType(id=1, level=Level.L2, install_cost=3450.0, power_kw=6.6, price_per_hour=1.5)

# Activities drawn on seeded networks, one building each
SEEDED_ACTIVITIES = (Activity.WORK, Activity.MEAL, Activity.SHOPPING)


class StubRng:
    """Stand-in for RngStream that replays fixed uniforms."""

    def __init__(self, uniforms: Sequence[float]) -> None:
        self.uniforms = list(uniforms)

    def uniform(self) -> float:
        return self.uniforms.pop(0)


@pytest.fixture
def stub_rng() -> Callable[[Sequence[float]], StubRng]:
    """Return a factory for fixed-uniform random streams."""
    return StubRng


@pytest.fixture
def toy_instance() -> Instance:
    """One level-2 type ($1000), one lot of 5 spaces, one building, budget $2000."""
    return Instance(
        chargers=(ChargerType(0, Level.L2, 1000.0, 6.6, 1.5),),
        lots=(ParkingLot(0, 5, (0.0, 0.0)),),
        buildings=(Building(0, Activity.WORK, (0.0, 0.1)),),
        grid=DAY_GRID,
        budget=2000.0,
    )


@pytest.fixture
def make_scenario() -> Callable[..., Scenario]:
    """
    Return a builder for single-lot, single-type scenarios.

    The default utilities (0 for charging and for not charging) give a
    logit share of 1/2 when the type is open.
    """

    def build(
        demand: float,
        probability: float = 1.0,
        scenario_id: int = 0,
        u: float = 0.0,
        u_nc: float = 0.0,
    ) -> Scenario:
        fsi = FeasibleSetIndex(subsets={0: (frozenset({0}),)})
        cells = (DemandCell(gamma=(0, 0), building=0, total=demand, groups=((0, demand),)),)
        table = UtilityTable(
            u=np.full((1, 1), u), u_nc=np.full(1, u_nc), support=np.ones((1, 1))
        )
        return Scenario(
            id=scenario_id,
            day_type=DayType.WEEKDAY,
            season=Season.SUMMER,
            drivers=(),
            lost_demand=0,
            cells=cells,
            fsi=fsi,
            probability=probability,
            utilities=table,
        )

    return build


@pytest.fixture
def two_level_instance() -> Callable[..., Instance]:
    """Return a builder for L1/L2 instances with the given lot capacities."""

    def build(capacities: Sequence[int], budget: float) -> Instance:
        lots = tuple(ParkingLot(j, k, (0.1 * j, 0.0)) for j, k in enumerate(capacities))
        return Instance(
            chargers=(L1, L2),
            lots=lots,
            buildings=(Building(0, Activity.WORK, (0.0, 0.05)),),
            grid=DAY_GRID,
            budget=budget,
        )

    return build


@pytest.fixture
def make_driver() -> Callable[..., DriverRecord]:
    """Return a builder for drivers of building 0 that can reach the given lots."""

    def build(
        arrival: float,
        departure: float,
        lots: Sequence[int] = (0,),
        utilities: Optional[List[float]] = None,
        no_charge: float = 0.0,
    ) -> DriverRecord:
        return DriverRecord(
            building=0,
            activity=Activity.WORK,
            arrival=arrival,
            departure=departure,
            arrival_slot=0,
            departure_slot=0,
            soc=0.3,
            walk_radius=1.0,
            feasible_lots=frozenset(lots),
            utilities=tuple(utilities or ()),
            no_charge_utility=no_charge,
        )

    return build


@pytest.fixture
def desk_instance() -> Instance:
    """Return the packaged reference desk instance."""
    return load_instance(DESK_INSTANCE)


def seeded_config(inst: Instance) -> ExperimentConfig:
    """Thirty-odd drivers a day spread evenly over the activities the buildings cover."""
    present = {b.activity.value for b in inst.buildings}
    row = [1.0 / len(present) if a in present else 0.0 for a in ACTIVITIES]
    config = ExperimentConfig()
    config.behavior = BehaviorConfig(
        daily_traffic=(20, 40), ev_share=0.5, activity_mix={day: [row] for day in DAY_TYPES}
    )
    return config


@pytest.fixture
def seeded_network() -> Callable[[int], Tuple[Instance, List[Scenario]]]:
    """
    Return a builder of small seeded planning problems.

    Each has at most 4 lots, 2 charger types, 3 buildings and 3 scenarios,
    and at most 4 (type, lot) pairs so every design can be enumerated.
    """

    def build(seed: int) -> Tuple[Instance, List[Scenario]]:
        rng = np.random.default_rng(seed)
        kinds = [(L1, L2), (L1,), (L2,)][int(rng.integers(0, 3))]
        n_lots = 2 if len(kinds) == 2 else int(rng.integers(2, 5))
        n_buildings = int(rng.integers(1, 4))
        present = SEEDED_ACTIVITIES[:n_buildings]
        inst = Instance(
            chargers=tuple(replace(kind, id=n) for n, kind in enumerate(kinds)),
            lots=tuple(
                ParkingLot(j, int(rng.integers(1, 3)), tuple(float(v) for v in rng.uniform(0.0, 0.4, 2)))
                for j in range(n_lots)
            ),
            buildings=tuple(
                Building(b, activity, tuple(float(v) for v in rng.uniform(0.0, 0.4, 2)))
                for b, activity in enumerate(present)
            ),
            budget=float(rng.choice([900.0, 1800.0, 3450.0, 4350.0, 8000.0])),
        )
        scenarios = prepare_scenarios(inst, seeded_config(inst), int(rng.integers(2, 4)), seed)
        return inst, scenarios

    return build


@pytest.fixture
def feasible_designs() -> Callable[[Instance], List[NetworkDesign]]:
    """Return an enumerator of every first-stage-feasible (x, z), open but empty pairs included."""

    def enumerate_all(inst: Instance) -> List[NetworkDesign]:
        shape = (inst.n_types, inst.n_lots)
        states = [
            [(0, 0)] + [(1, k) for k in range(lot.capacity + 1)]
            for _ in inst.chargers
            for lot in inst.lots
        ]
        designs = []
        for pick in itertools.product(*states):
            opened, counts = zip(*pick)
            design = NetworkDesign(
                open=np.array(opened, dtype=int).reshape(shape),
                count=np.array(counts, dtype=int).reshape(shape),
            )
            if not design.violations(inst):
                designs.append(design)
        return designs

    return enumerate_all


@pytest.fixture
def network_config() -> Callable[[Instance], ExperimentConfig]:
    """Return the behavior setup the seeded networks are generated with."""
    return seeded_config
