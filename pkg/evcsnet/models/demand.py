"""Driver records and the demand aggregates built from them."""
from dataclasses import dataclass, field, replace
from typing import Any, Dict, FrozenSet, Iterator, List, Tuple

from evcsnet.models.instance import Activity

Gamma = Tuple[int, int]


@dataclass(frozen=True)
class DriverRecord:
    """One simulated EV driver arriving at a building."""

    building: int
    activity: Activity
    arrival: float  # clock hours
    departure: float
    arrival_slot: int
    departure_slot: int
    soc: float
    walk_radius: float
    feasible_lots: FrozenSet[int]
    utilities: Tuple[float, ...] = ()
    no_charge_utility: float = 0.0

    @property
    def dwell(self) -> float:
        return self.departure - self.arrival

    @property
    def gamma(self) -> Gamma:
        return (self.arrival_slot, self.departure_slot)

    def with_utilities(self, utilities: Tuple[float, ...], no_charge: float = 0.0) -> "DriverRecord":
        return replace(self, utilities=tuple(utilities), no_charge_utility=no_charge)

    def to_dict(self) -> Dict[str, Any]:
        """Convert driver record to dictionary for serialization."""
        return {
            "building": self.building,
            "activity": self.activity.value,
            "arrival": self.arrival,
            "departure": self.departure,
            "arrival_slot": self.arrival_slot,
            "departure_slot": self.departure_slot,
            "soc": self.soc,
            "walk_radius": self.walk_radius,
            "feasible_lots": sorted(self.feasible_lots),
            "utilities": list(self.utilities),
            "no_charge_utility": self.no_charge_utility,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "DriverRecord":
        """Create driver record from dictionary."""
        return cls(
            building=int(data["building"]),
            activity=Activity(data["activity"]),
            arrival=float(data["arrival"]),
            departure=float(data["departure"]),
            arrival_slot=int(data["arrival_slot"]),
            departure_slot=int(data["departure_slot"]),
            soc=float(data["soc"]),
            walk_radius=float(data["walk_radius"]),
            feasible_lots=frozenset(int(j) for j in data["feasible_lots"]),
            utilities=tuple(float(u) for u in data.get("utilities", [])),
            no_charge_utility=float(data.get("no_charge_utility", 0.0)),
        )


@dataclass(frozen=True)
class DemandCell:
    """
    Demand of one (gamma, building) pair.

    `groups` holds (feasible-set id m, d'[gamma, b, m]); `total` is d[gamma, b].
    Counts are driver counts, except in averaged scenarios where they are
    probability-weighted means.
    """

    gamma: Gamma
    building: int
    total: float
    groups: Tuple[Tuple[int, float], ...]


@dataclass(frozen=True)
class FeasibleSetIndex:
    """Distinct lot subsets S^M(b) per building; the id of a subset is its position."""

    subsets: Dict[int, Tuple[FrozenSet[int], ...]] = field(default_factory=dict)

    def lots(self, building: int, m: int) -> FrozenSet[int]:
        return self.subsets[building][m]

    def id_of(self, building: int, lots: FrozenSet[int]) -> int:
        return self.subsets[building].index(frozenset(lots))

    def buildings(self) -> List[int]:
        return sorted(self.subsets)

    def items(self) -> Iterator[Tuple[int, int, FrozenSet[int]]]:
        """Yield (building, m, lots) in deterministic order."""
        for b in self.buildings():
            for m, lots in enumerate(self.subsets[b]):
                yield b, m, lots

    def __len__(self) -> int:
        return sum(len(v) for v in self.subsets.values())
