"""Instance loading/validation and demand aggregation shared by every model."""
import json
import logging
import math
from collections import OrderedDict
from pathlib import Path
from typing import Dict, FrozenSet, List, Sequence, Tuple

import jsonschema

from evcsnet.models.demand import DemandCell, DriverRecord, FeasibleSetIndex, Gamma
from evcsnet.models.instance import Instance, Violation

logger = logging.getLogger(__name__)

_POINT = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}

INSTANCE_SCHEMA = {
    "type": "object",
    "required": ["chargers", "lots", "buildings", "budget"],
    "properties": {
        "chargers": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["level", "install_cost", "power_kw"],
                "properties": {
                    "level": {"enum": ["L1", "L2", "L3"]},
                    "install_cost": {"type": "number"},
                    "power_kw": {"type": "number"},
                    "price_per_hour": {"type": "number"},
                },
                "additionalProperties": False,
            },
        },
        "lots": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["capacity", "location"],
                "properties": {"capacity": {"type": "integer"}, "location": _POINT},
                "additionalProperties": False,
            },
        },
        "buildings": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["activity", "location"],
                "properties": {
                    "activity": {
                        "enum": ["work", "school", "social", "family", "meal", "shopping"]
                    },
                    "location": _POINT,
                },
                "additionalProperties": False,
            },
        },
        "grid": {
            "type": "object",
            "properties": {
                "opening": {"type": "number"},
                "closing": {"type": "number"},
                "slots": {
                    "type": "array",
                    "items": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                },
            },
            "additionalProperties": False,
        },
        "budget": {"type": "number"},
    },
    "additionalProperties": False,
}


def validate_instance(inst: Instance) -> List[Violation]:
    """
    Check every static invariant of an instance.

    Returns:
        One Violation per failed invariant; empty when the instance is valid
    """
    violations: List[Violation] = []

    if not inst.chargers:
        violations.append(Violation("chargers", "at least one charger type is required"))
    if not inst.lots:
        violations.append(Violation("lots", "at least one parking lot is required"))
    if not inst.buildings:
        violations.append(Violation("buildings", "at least one building is required"))
    if inst.budget < 0:
        violations.append(Violation("budget", "budget must be >= 0"))

    for i, charger in enumerate(inst.chargers):
        if charger.id != i:
            violations.append(Violation(f"chargers[{i}].id", "ids must be dense 0..|N|-1"))
        if not charger.install_cost > 0:
            violations.append(Violation(f"chargers[{i}].install_cost", "install_cost must be > 0"))
        if not charger.power_kw > 0:
            violations.append(Violation(f"chargers[{i}].power_kw", "power_kw must be > 0"))
        if charger.price_per_hour < 0:
            violations.append(
                Violation(f"chargers[{i}].price_per_hour", "price_per_hour must be >= 0")
            )

    for j, lot in enumerate(inst.lots):
        if lot.id != j:
            violations.append(Violation(f"lots[{j}].id", "ids must be dense 0..|J|-1"))
        if lot.capacity < 0:
            violations.append(Violation(f"lots[{j}].capacity", "capacity must be >= 0"))

    for b, building in enumerate(inst.buildings):
        if building.id != b:
            violations.append(Violation(f"buildings[{b}].id", "ids must be dense 0..|B|-1"))

    grid = inst.grid
    if not grid.slots:
        violations.append(Violation("grid.slots", "at least one slot is required"))
    else:
        if any(end <= start for start, end in grid.slots):
            violations.append(Violation("grid.slots", "every slot must have positive length"))
        if grid.slots[0][0] != grid.opening or grid.slots[-1][1] != grid.closing:
            violations.append(Violation("grid.slots", "slots must cover opening to closing"))
        for (_, end), (start, _) in zip(grid.slots, grid.slots[1:]):
            if end != start:
                violations.append(
                    Violation("grid.slots", "slots must be contiguous and non-overlapping")
                )
                break

    return violations


def load_instance(path: Path) -> Instance:
    """
    Load and validate an instance file.

    Raises:
        FileNotFoundError: If the file doesn't exist
        ValueError: If the document fails the schema or an invariant
    """
    if not path.exists():
        raise FileNotFoundError(f"Instance file not found: {path}")

    with open(path) as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise ValueError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}") from e

    try:
        jsonschema.validate(data, INSTANCE_SCHEMA)
    except jsonschema.ValidationError as e:
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ValueError(f"{path}: {where}: {e.message}") from e

    inst = Instance.from_dict(data)
    violations = validate_instance(inst)
    if violations:
        raise ValueError(f"{path}: " + "; ".join(str(v) for v in violations))
    return inst


def save_instance(inst: Instance, path: Path) -> None:
    """Write an instance file."""
    with open(path, "w") as f:
        json.dump(inst.to_dict(), f, indent=2)
        f.write("\n")


def feasible_set(building: int, radius: float, inst: Instance) -> FrozenSet[int]:
    """
    Lots within `radius` miles of a building.

    Raises:
        ValueError: If the building id is unknown or radius is negative
    """
    if not 0 <= building < len(inst.buildings):
        raise ValueError(f"Unknown building id: {building}")
    if radius < 0 or math.isnan(radius):
        raise ValueError(f"radius must be >= 0, got {radius}")
    return frozenset(j for j in range(inst.n_lots) if inst.distance(building, j) <= radius)


def aggregate_demand(
    drivers: Sequence[DriverRecord],
) -> Tuple[FeasibleSetIndex, List[DemandCell]]:
    """
    Group drivers into demand cells.

    Drivers are grouped by (gamma, building); within a cell, by identical
    feasible set. Subset ids per building follow the order (size, sorted lots),
    so they do not depend on driver order.

    Raises:
        ValueError: If a driver has an empty feasible set
    """
    per_building: Dict[int, set] = {}
    counts: "OrderedDict[Tuple[Gamma, int], Dict[FrozenSet[int], int]]" = OrderedDict()

    for driver in drivers:
        if not driver.feasible_lots:
            raise ValueError("drivers with an empty feasible set must be dropped as lost demand")
        lots = frozenset(driver.feasible_lots)
        per_building.setdefault(driver.building, set()).add(lots)
        key = (driver.gamma, driver.building)
        groups = counts.setdefault(key, {})
        groups[lots] = groups.get(lots, 0) + 1

    subsets = {
        b: tuple(sorted(sets, key=lambda s: (len(s), sorted(s))))
        for b, sets in per_building.items()
    }
    fsi = FeasibleSetIndex(subsets=subsets)

    cells = []
    for (gamma, b) in sorted(counts, key=lambda k: (k[0][0], k[0][1], k[1])):
        groups = sorted((fsi.id_of(b, lots), n) for lots, n in counts[(gamma, b)].items())
        cells.append(
            DemandCell(
                gamma=gamma,
                building=b,
                total=float(sum(n for _, n in groups)),
                groups=tuple((m, float(n)) for m, n in groups),
            )
        )

    logger.debug("aggregated %d drivers into %d cells", len(drivers), len(cells))
    return fsi, cells
