"""CSV report files, console tables, and the budget/price sweeps behind `evcsnet report`."""
import logging
from dataclasses import dataclass
from io import StringIO
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from rich.console import Console
from rich.table import Table

from evcsnet.core.choice import prepare_scenarios
from evcsnet.core.config import ExperimentConfig
from evcsnet.core.planning import solve_design
from evcsnet.core.simulation import (
    SimMetrics,
    compare,
    driver_streams,
    simulate_replications,
    summarize,
)
from evcsnet.models.instance import Instance, Level, NetworkDesign
from evcsnet.models.scenario import Scenario

logger = logging.getLogger(__name__)

# Stream prefix of the planning sample used by the sweeps
PLANNING_STREAM = 0


def write_csv(frame: pd.DataFrame, path: Path, header: Dict[str, Any]) -> None:
    """Write a frame as CSV below a `# key: value` header block."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        for key in sorted(header):
            f.write(f"# {key}: {header[key]}\n")
        frame.to_csv(f, index=False, float_format="%.10g", lineterminator="\n")


def read_csv(path: Path) -> Tuple[Dict[str, str], pd.DataFrame]:
    """
    Read a file written by `write_csv`.

    Raises:
        FileNotFoundError: If the file doesn't exist
    """
    if not path.exists():
        raise FileNotFoundError(f"Report file not found: {path}")
    header: Dict[str, str] = {}
    with open(path) as f:
        for line in f:
            if not line.startswith("# "):
                break
            key, _, value = line[2:].rstrip("\n").partition(": ")
            header[key] = value
    return header, pd.read_csv(path, comment="#")


def render_table(frame: pd.DataFrame, title: str) -> str:
    """Render a frame as a rich table."""
    table = Table(title=title)
    for i, column in enumerate(frame.columns):
        table.add_column(str(column), style="cyan" if i == 0 else None, justify="right")
    for row in frame.itertuples(index=False):
        table.add_row(*[_cell(v) for v in row])
    console = Console(file=StringIO(), force_terminal=False, width=120)
    console.print(table)
    return console.file.getvalue()


def _cell(value: Any) -> str:
    if value is None or (isinstance(value, float) and np.isnan(value)):
        return "-"
    if isinstance(value, float):
        return f"{value:.4g}"
    return str(value)


@dataclass
class SweepPoint:
    budget: float
    design: NetworkDesign
    objective: float
    status: str


def budget_sweep(
    inst: Instance,
    scenarios: Sequence[Scenario],
    config: ExperimentConfig,
    budgets: Sequence[float],
    jobs: int = 1,
) -> List[SweepPoint]:
    """Solve the planning model once per budget on a shared scenario set."""
    points = []
    for budget in budgets:
        design, report = solve_design(inst.with_budget(budget), scenarios, config.solver, jobs=jobs)
        points.append(SweepPoint(budget=float(budget), design=design, objective=report.objective, status=report.status))
        logger.info("budget %g: objective %.4f (%s)", budget, report.objective, report.status)
    return points


def accessibility_frame(
    inst: Instance,
    points: Sequence[SweepPoint],
    streams: Sequence[Sequence[Any]],
    seed: int,
    jobs: int = 1,
) -> Tuple[pd.DataFrame, Dict[float, List[SimMetrics]]]:
    """Model objective and simulated accessibility per budget."""
    rows = []
    simulated: Dict[float, List[SimMetrics]] = {}
    for point in points:
        metrics = simulate_replications(inst.with_budget(point.budget), point.design, streams, seed, jobs)
        simulated[point.budget] = metrics
        summary = summarize(metrics)
        rows.append(
            {
                "budget": point.budget,
                "objective": point.objective,
                "status": point.status,
                "accessibility_mean": summary["accessibility_mean"],
                "accessibility_sd": summary["accessibility_sd"],
                "walk_per_person_mean": summary["walk_per_person_mean"],
            }
        )
    return pd.DataFrame(rows), simulated


def charger_count_frame(inst: Instance, points: Sequence[SweepPoint]) -> pd.DataFrame:
    rows = []
    for point in points:
        row: Dict[str, Any] = {"budget": point.budget}
        row.update(point.design.counts_by_level(inst))
        row["cost"] = point.design.cost(inst)
        rows.append(row)
    return pd.DataFrame(rows)


def slot_utilization_frame(
    inst: Instance, simulated: Dict[float, List[SimMetrics]]
) -> pd.DataFrame:
    """Mean utilization per (budget, level, slot); empty levels are left blank."""
    rows = []
    for budget, metrics in simulated.items():
        if not metrics:
            continue
        for level in metrics[0].slot_used_by_level:
            for t, (start, end) in enumerate(inst.grid.slots):
                values = [m.slot_utilization(level)[t] for m in metrics]
                defined = [v for v in values if v is not None]
                rows.append(
                    {
                        "budget": budget,
                        "level": level,
                        "slot": t,
                        "start": start,
                        "end": end,
                        "utilization": float(np.mean(defined)) if defined else None,
                    }
                )
    return pd.DataFrame(rows, columns=["budget", "level", "slot", "start", "end", "utilization"])


def level3_price_sweep(
    inst: Instance,
    config: ExperimentConfig,
    prices: Sequence[float],
    budgets: Sequence[float],
    count: int,
    seed: int,
    jobs: int = 1,
) -> pd.DataFrame:
    """
    Level-3 installations and average level-3 utility per lot as the price drops.

    The driver sample is identical across prices; only the utilities change.

    Raises:
        ValueError: If the catalog has no level-3 charger
    """
    l3 = inst.type_of_level(Level.L3)
    if l3 is None:
        raise ValueError("price sweep needs a level-3 charger in the catalog")
    rows = []
    for price in prices:
        repriced = inst.with_price(Level.L3, price)
        scenarios = prepare_scenarios(repriced, config, count, seed, prefix=(PLANNING_STREAM,), jobs=jobs)
        utilities = _mean_level3_utility(scenarios, l3, inst.n_lots)
        for budget in budgets:
            design, report = solve_design(repriced.with_budget(budget), scenarios, config.solver, jobs=jobs)
            row: Dict[str, Any] = {"price": float(price), "budget": float(budget)}
            row["level3_installed"] = int(design.count[l3].sum())
            row["objective"] = report.objective
            for j, u in enumerate(utilities):
                row[f"u_L3_lot{j}"] = u
            rows.append(row)
        logger.info("level-3 price %g done", price)
    return pd.DataFrame(rows)


def _mean_level3_utility(scenarios: Sequence[Scenario], l3: int, n_lots: int) -> List[Optional[float]]:
    values: List[Optional[float]] = []
    for j in range(n_lots):
        supported = [
            float(s.utilities.u[l3, j])
            for s in scenarios
            if s.utilities is not None and s.utilities.supported(l3, j)
        ]
        values.append(float(np.mean(supported)) if supported else None)
    return values


def write_report(
    inst: Instance,
    config: ExperimentConfig,
    output_dir: Path,
    header: Dict[str, Any],
    jobs: int = 1,
) -> Dict[str, Path]:
    """
    Run every sweep on one planning sample and one set of driver streams.

    Returns:
        Report name -> written CSV path
    """
    run = config.run
    sim = config.simulation
    planning = prepare_scenarios(inst, config, run.scenarios, run.seed, prefix=(PLANNING_STREAM,), jobs=jobs)
    streams = driver_streams(inst, config, sim.replications, sim.seed, jobs)

    points = budget_sweep(inst, planning, config, run.budgets, jobs)
    access, simulated = accessibility_frame(inst, points, streams, sim.seed, jobs)
    frames = {
        "accessibility_vs_budget": access,
        "chargers_vs_budget": charger_count_frame(inst, points),
        "utilization_by_slot": slot_utilization_frame(inst, simulated),
        "comparison": compare(inst, planning, streams, run.budgets, config, jobs),
    }
    if inst.type_of_level(Level.L3) is not None:
        frames["level3_price_sweep"] = level3_price_sweep(
            inst, config, run.level3_prices, run.budgets, run.scenarios, run.seed, jobs
        )

    paths = {}
    for name, frame in frames.items():
        path = output_dir / f"{name}.csv"
        write_csv(frame, path, header)
        paths[name] = path
    return paths
