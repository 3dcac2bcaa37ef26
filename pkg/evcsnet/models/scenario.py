"""Scenario (one simulated day) and its aggregated utility table."""
from dataclasses import dataclass, replace
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np

from evcsnet.models.demand import DemandCell, DriverRecord, FeasibleSetIndex


class Season(str, Enum):
    WINTER = "winter"
    SPRING = "spring"
    SUMMER = "summer"
    AUTUMN = "autumn"


class DayType(str, Enum):
    WEEKDAY = "weekday"
    WEEKEND = "weekend"


@dataclass(frozen=True, eq=False)
class UtilityTable:
    """
    Aggregated utilities u[n, j] and u_nc[j] of one scenario.

    Entries with support[n, j] == 0 have no supporting drivers; they are
    flagged as unsupported (share bound 0) and their stored value is never
    used in arithmetic.
    """

    u: np.ndarray
    u_nc: np.ndarray
    support: np.ndarray

    @property
    def shape(self) -> Tuple[int, int]:
        return (int(self.u.shape[0]), int(self.u.shape[1]))

    def supported(self, n: int, j: int) -> bool:
        return bool(self.support[n, j] > 0)

    def exp_u(self, n: int, j: int) -> float:
        """e^{u[n, j]}, or 0 for an unsupported entry."""
        if not self.supported(n, j):
            return 0.0
        return float(np.exp(self.u[n, j]))

    def rows(self) -> List[List[Optional[float]]]:
        """One row per lot: utilities per type (None when unsupported), then no-charge."""
        n_types, n_lots = self.shape
        table: List[List[Optional[float]]] = []
        for j in range(n_lots):
            row: List[Optional[float]] = [
                float(self.u[n, j]) if self.supported(n, j) else None for n in range(n_types)
            ]
            row.append(float(self.u_nc[j]))
            table.append(row)
        return table


@dataclass(frozen=True, eq=False)
class Scenario:
    """One simulated day omega with weight p_omega."""

    id: int
    day_type: DayType
    season: Season
    drivers: Tuple[DriverRecord, ...]
    lost_demand: int
    cells: Tuple[DemandCell, ...]
    fsi: FeasibleSetIndex
    probability: float = 1.0
    utilities: Optional[UtilityTable] = None

    @property
    def total_demand(self) -> float:
        """Sum of d[gamma, b] over cells; the cap on served demand."""
        return float(sum(cell.total for cell in self.cells))

    @property
    def generated(self) -> int:
        """Drivers generated for the day, including lost demand."""
        return len(self.drivers) + self.lost_demand

    def with_utilities(
        self, table: UtilityTable, drivers: Optional[Tuple[DriverRecord, ...]] = None
    ) -> "Scenario":
        return replace(
            self,
            utilities=table,
            drivers=self.drivers if drivers is None else tuple(drivers),
        )
