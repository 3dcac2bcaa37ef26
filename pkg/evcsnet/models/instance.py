"""Static network data: charger catalog, parking lots, buildings, time grid."""
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np


class Level(str, Enum):
    """Charger level."""

    L1 = "L1"
    L2 = "L2"
    L3 = "L3"


class Activity(str, Enum):
    """Activity type of a destination building."""

    WORK = "work"
    SCHOOL = "school"
    SOCIAL = "social"
    FAMILY = "family"
    MEAL = "meal"
    SHOPPING = "shopping"


Point = Tuple[float, float]

DEFAULT_SLOTS: Tuple[Tuple[float, float], ...] = ((6.0, 9.0), (9.0, 12.0), (12.0, 14.0), (14.0, 18.0))


@dataclass(frozen=True)
class ChargerType:
    """A charger type n with its installation cost c_n."""

    id: int
    level: Level
    install_cost: float
    power_kw: float
    price_per_hour: float

    def to_dict(self) -> Dict[str, Any]:
        """Convert charger type to dictionary for serialization."""
        return {
            "level": self.level.value,
            "install_cost": self.install_cost,
            "power_kw": self.power_kw,
            "price_per_hour": self.price_per_hour,
        }


@dataclass(frozen=True)
class ParkingLot:
    """A parking lot j holding at most k_j chargers."""

    id: int
    capacity: int
    location: Point

    def to_dict(self) -> Dict[str, Any]:
        """Convert parking lot to dictionary for serialization."""
        return {"capacity": self.capacity, "location": list(self.location)}


@dataclass(frozen=True)
class Building:
    """A destination building b."""

    id: int
    activity: Activity
    location: Point

    def to_dict(self) -> Dict[str, Any]:
        """Convert building to dictionary for serialization."""
        return {"activity": self.activity.value, "location": list(self.location)}


@dataclass(frozen=True)
class TimeGrid:
    """Operating day split into half-open time slots (clock hours)."""

    slots: Tuple[Tuple[float, float], ...] = DEFAULT_SLOTS
    opening: float = 6.0
    closing: float = 18.0

    @property
    def size(self) -> int:
        """Number of slots |T|."""
        return len(self.slots)

    @property
    def span(self) -> float:
        """Length of the operating day in hours."""
        return self.closing - self.opening

    def slot_of(self, t: float) -> int:
        """
        Index of the slot containing clock time t.

        Slots are half-open; the closing instant belongs to the last slot.
        Times outside the day are snapped to the first or last slot.
        """
        for index, (start, end) in enumerate(self.slots):
            if start <= t < end:
                return index
        if t < self.opening:
            return 0
        return self.size - 1

    def gammas(self) -> List[Tuple[int, int]]:
        """All (arrival slot, departure slot) pairs with arrival <= departure."""
        return [(a, d) for a in range(self.size) for d in range(a, self.size)]

    def to_dict(self) -> Dict[str, Any]:
        """Convert grid to dictionary for serialization."""
        return {
            "opening": self.opening,
            "closing": self.closing,
            "slots": [list(s) for s in self.slots],
        }


@dataclass(frozen=True)
class Instance:
    """Static problem data: chargers N, lots J, buildings B, grid T, budget F."""

    chargers: Tuple[ChargerType, ...]
    lots: Tuple[ParkingLot, ...]
    buildings: Tuple[Building, ...]
    grid: TimeGrid = field(default_factory=TimeGrid)
    budget: float = 0.0

    @property
    def n_types(self) -> int:
        return len(self.chargers)

    @property
    def n_lots(self) -> int:
        return len(self.lots)

    @property
    def costs(self) -> np.ndarray:
        return np.array([c.install_cost for c in self.chargers], dtype=float)

    @property
    def capacities(self) -> np.ndarray:
        return np.array([lot.capacity for lot in self.lots], dtype=int)

    def distance(self, building: int, lot: int) -> float:
        """Euclidean distance in miles between a building and a lot."""
        bx, by = self.buildings[building].location
        lx, ly = self.lots[lot].location
        return math.hypot(bx - lx, by - ly)

    def type_of_level(self, level: Level) -> Optional[int]:
        """First charger type id with the given level, if any."""
        for charger in self.chargers:
            if charger.level == level:
                return charger.id
        return None

    def buildings_of(self, activity: Activity) -> List[int]:
        return [b.id for b in self.buildings if b.activity == activity]

    def with_budget(self, budget: float) -> "Instance":
        return replace(self, budget=float(budget))

    def with_price(self, level: Level, price_per_hour: float) -> "Instance":
        """Copy of the instance with every charger of `level` repriced."""
        chargers = tuple(
            replace(c, price_per_hour=float(price_per_hour)) if c.level == level else c
            for c in self.chargers
        )
        return replace(self, chargers=chargers)

    def to_dict(self) -> Dict[str, Any]:
        """Convert instance to the instance-file document."""
        return {
            "chargers": [c.to_dict() for c in self.chargers],
            "lots": [lot.to_dict() for lot in self.lots],
            "buildings": [b.to_dict() for b in self.buildings],
            "grid": self.grid.to_dict(),
            "budget": self.budget,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Instance":
        """Create instance from an instance-file document (ids by array order)."""
        chargers = tuple(
            ChargerType(
                id=i,
                level=Level(c["level"]),
                install_cost=float(c["install_cost"]),
                power_kw=float(c["power_kw"]),
                price_per_hour=float(c.get("price_per_hour", 0.0)),
            )
            for i, c in enumerate(data["chargers"])
        )
        lots = tuple(
            ParkingLot(id=j, capacity=int(lot["capacity"]), location=_point(lot["location"]))
            for j, lot in enumerate(data["lots"])
        )
        buildings = tuple(
            Building(id=b, activity=Activity(bd["activity"]), location=_point(bd["location"]))
            for b, bd in enumerate(data["buildings"])
        )
        grid_data = data.get("grid") or {}
        grid = TimeGrid(
            slots=tuple(
                (float(s[0]), float(s[1])) for s in grid_data.get("slots", DEFAULT_SLOTS)
            ),
            opening=float(grid_data.get("opening", 6.0)),
            closing=float(grid_data.get("closing", 18.0)),
        )
        return cls(
            chargers=chargers,
            lots=lots,
            buildings=buildings,
            grid=grid,
            budget=float(data.get("budget", 0.0)),
        )


def _point(value: Any) -> Point:
    return (float(value[0]), float(value[1]))


@dataclass(frozen=True)
class Violation:
    """One failed invariant."""

    field: str
    message: str

    def __str__(self) -> str:
        return f"{self.field}: {self.message}"


@dataclass(frozen=True, eq=False)
class NetworkDesign:
    """First-stage decision: open[n, j] (x, binary) and count[n, j] (z, integer)."""

    open: np.ndarray
    count: np.ndarray

    @classmethod
    def empty(cls, n_types: int, n_lots: int) -> "NetworkDesign":
        return cls(
            open=np.zeros((n_types, n_lots), dtype=int),
            count=np.zeros((n_types, n_lots), dtype=int),
        )

    @classmethod
    def from_counts(cls, count: np.ndarray) -> "NetworkDesign":
        """Design that opens exactly the (n, j) pairs with chargers."""
        count = np.asarray(count, dtype=int)
        return cls(open=(count > 0).astype(int), count=count)

    @classmethod
    def from_vector(cls, vector: np.ndarray, n_types: int, n_lots: int) -> "NetworkDesign":
        """Inverse of `vector()`; values are rounded to integers."""
        size = n_types * n_lots
        values = np.rint(np.asarray(vector, dtype=float)).astype(int)
        return cls(
            open=values[:size].reshape(n_types, n_lots),
            count=values[size : 2 * size].reshape(n_types, n_lots),
        )

    def vector(self) -> np.ndarray:
        """First-stage vector (x flattened type-major, then z)."""
        return np.concatenate([self.open.ravel(), self.count.ravel()]).astype(float)

    def cost(self, inst: Instance) -> float:
        return float(inst.costs @ self.count.sum(axis=1))

    def total(self) -> int:
        return int(self.count.sum())

    def counts_by_level(self, inst: Instance) -> Dict[str, int]:
        totals = {level.value: 0 for level in Level}
        for charger in inst.chargers:
            totals[charger.level.value] += int(self.count[charger.id].sum())
        return totals

    def violations(self, inst: Instance, tol: float = 1e-9) -> List[Violation]:
        """Check the first-stage constraints (open flags, lot capacity, budget) against an instance."""
        problems: List[Violation] = []
        shape = (inst.n_types, inst.n_lots)
        if self.open.shape != shape or self.count.shape != shape:
            return [Violation("design", f"expected shape {shape}, got {self.count.shape}")]
        if np.any((self.open != 0) & (self.open != 1)):
            problems.append(Violation("design.x", "open flags must be binary"))
        if np.any(self.count < 0):
            problems.append(Violation("design.z", "counts must be non-negative"))
        caps = inst.capacities
        if np.any(self.count > caps[np.newaxis, :] * self.open):
            problems.append(Violation("design.z", "z[n,j] must not exceed k_j * x[n,j]"))
        if np.any(self.count.sum(axis=0) > caps):
            problems.append(Violation("design.z", "chargers per lot exceed lot capacity"))
        if self.cost(inst) > inst.budget + tol:
            problems.append(
                Violation("design.cost", f"cost {self.cost(inst):g} exceeds budget {inst.budget:g}")
            )
        return problems

    def to_dict(self) -> Dict[str, Any]:
        return {"x": self.open.tolist(), "z": self.count.tolist()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "NetworkDesign":
        return cls(
            open=np.asarray(data["x"], dtype=int),
            count=np.asarray(data["z"], dtype=int),
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, NetworkDesign):
            return NotImplemented
        return bool(
            np.array_equal(self.open, other.open) and np.array_equal(self.count, other.count)
        )

    def __repr__(self) -> str:
        return f"NetworkDesign(z={self.count.tolist()})"
