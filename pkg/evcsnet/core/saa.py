"""Sample average approximation bounds and the value of the stochastic solution."""
import logging
import math
from dataclasses import dataclass, field, replace
from functools import partial
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from evcsnet.core.choice import prepare_scenarios
from evcsnet.core.config import SOURCES, ExperimentConfig, SolverConfig, frozen_all_but
from evcsnet.core.lshaped import evaluate_recourse
from evcsnet.core.parallel import ordered_map
from evcsnet.core.planning import solve_design
from evcsnet.models.demand import DemandCell, FeasibleSetIndex
from evcsnet.models.instance import Instance, NetworkDesign
from evcsnet.models.scenario import Scenario, UtilityTable

logger = logging.getLogger(__name__)

# Stream prefixes keep replication, validation, evaluation and ablation samples apart
REPLICATION_STREAM = 1
VALIDATION_STREAM = 2
EVALUATION_STREAM = 3
ABLATION_STREAM = 4


def mean_and_variance(values: Sequence[float]) -> Tuple[float, float]:
    """Sample mean and the variance of that mean, sum (v - mean)^2 / (n (n - 1))."""
    data = np.asarray(values, dtype=float)
    if data.size == 0:
        raise ValueError("need at least one value")
    mean = float(data.mean())
    if data.size == 1:
        return mean, 0.0
    variance = float(((data - mean) ** 2).sum() / (data.size * (data.size - 1)))
    return mean, variance


@dataclass
class SaaReport:
    """Statistical bounds of one SAA run (maximization: v-bar estimates an upper bound)."""

    replication_values: List[float]
    replication_designs: List[NetworkDesign]
    upper: float
    upper_variance: float
    candidate: NetworkDesign
    candidate_index: int
    lower: float
    lower_variance: float
    scenarios_per_replication: int
    lots: int
    flagged: List[int] = field(default_factory=list)

    @property
    def gap(self) -> float:
        return self.upper - self.lower

    @property
    def gap_variance(self) -> float:
        return self.upper_variance + self.lower_variance

    @property
    def gap_sd(self) -> float:
        return math.sqrt(self.gap_variance)

    @property
    def heuristic(self) -> bool:
        """True when a replication stopped at a limit, so v-bar is not a proven bound."""
        return bool(self.flagged)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [
                {
                    "S": self.scenarios_per_replication,
                    "P": self.lots,
                    "UB": self.upper,
                    "LB": self.lower,
                    "Gap": self.gap,
                    "SD": self.gap_sd,
                    "heuristic": self.heuristic,
                }
            ]
        )


def _replicate(
    inst: Instance, config: ExperimentConfig, solver_cfg: SolverConfig, index: int
) -> Tuple[NetworkDesign, float, bool]:
    saa = config.saa
    key = 0 if saa.shared_seed else index
    scenarios = prepare_scenarios(inst, config, saa.L, saa.seed, prefix=(REPLICATION_STREAM, key))
    design, report = solve_design(inst, scenarios, solver_cfg)
    logger.info("SAA replication %d: v = %.6f (%s)", index, report.objective, report.status)
    return design, report.objective, report.hit_limit


def evaluate_design(
    inst: Instance,
    design: NetworkDesign,
    scenarios: Sequence[Scenario],
    tables: Optional[Sequence[UtilityTable]] = None,
    jobs: int = 1,
) -> Tuple[float, float]:
    """
    Estimate f(x, z) on a scenario sample.

    Returns:
        The sample mean of phi and the variance of that mean
    """
    _, values = evaluate_recourse(inst, design, scenarios, tables, jobs)
    return mean_and_variance(values)


def saa_run(
    inst: Instance,
    config: ExperimentConfig,
    method: Optional[str] = None,
    jobs: int = 1,
) -> SaaReport:
    """
    Solve K independent L-scenario problems and bound the optimality gap.

    The candidate design is the replication design with the best mean
    recourse on a shared validation sample; its value on L' fresh scenarios
    gives the lower bound.
    """
    saa = config.saa
    solver_cfg = replace(config.solver, method=method) if method else config.solver
    replications = ordered_map(
        partial(_replicate, inst, config, solver_cfg), range(saa.K), jobs
    )
    designs = [r[0] for r in replications]
    values = [r[1] for r in replications]
    flagged = [k for k, r in enumerate(replications) if r[2]]
    if flagged:
        logger.warning("replications %s stopped at a limit; bounds are heuristic", flagged)
    upper, upper_variance = mean_and_variance(values)

    validation = prepare_scenarios(
        inst, config, saa.validation_scenarios, saa.seed, prefix=(VALIDATION_STREAM,), jobs=jobs
    )
    scores: Dict[int, float] = {}
    best_index, best_score = 0, -math.inf
    for k, design in enumerate(designs):
        previous = next((i for i in scores if designs[i] == design), None)
        score = scores[previous] if previous is not None else evaluate_recourse(
            inst, design, validation, jobs=jobs
        )[0]
        scores[k] = score
        if score > best_score:
            best_index, best_score = k, score

    evaluation = prepare_scenarios(
        inst, config, saa.L_prime, saa.seed, prefix=(EVALUATION_STREAM,), jobs=jobs
    )
    lower, lower_variance = evaluate_design(inst, designs[best_index], evaluation, jobs=jobs)
    logger.info(
        "SAA: UB %.4f (var %.4g), LB %.4f (var %.4g), candidate replication %d",
        upper,
        upper_variance,
        lower,
        lower_variance,
        best_index,
    )
    return SaaReport(
        replication_values=values,
        replication_designs=designs,
        upper=upper,
        upper_variance=upper_variance,
        candidate=designs[best_index],
        candidate_index=best_index,
        lower=lower,
        lower_variance=lower_variance,
        scenarios_per_replication=saa.L,
        lots=inst.n_lots,
        flagged=flagged,
    )


def mean_scenario(scenarios: Sequence[Scenario], scenario_id: int = 0) -> Scenario:
    """
    Probability-weighted mean scenario.

    Cell demands d[gamma, b] and group demands d'[gamma, b, m] are averaged
    with weights p; feasible sets become the union over scenarios. Utilities
    are averaged over the scenarios where an entry is supported, with the
    weights renormalized over those scenarios.
    """
    if not scenarios:
        raise ValueError("scenario set must not be empty")
    totals: Dict[Tuple[Tuple[int, int], int], float] = {}
    groups: Dict[Tuple[Tuple[int, int], int], Dict[frozenset, float]] = {}
    per_building: Dict[int, set] = {}
    for s in scenarios:
        for cell in s.cells:
            key = (cell.gamma, cell.building)
            totals[key] = totals.get(key, 0.0) + s.probability * cell.total
            bucket = groups.setdefault(key, {})
            for m, share in cell.groups:
                lots = s.fsi.lots(cell.building, m)
                per_building.setdefault(cell.building, set()).add(lots)
                bucket[lots] = bucket.get(lots, 0.0) + s.probability * share

    fsi = FeasibleSetIndex(
        subsets={
            b: tuple(sorted(sets, key=lambda lots: (len(lots), sorted(lots))))
            for b, sets in per_building.items()
        }
    )
    cells = tuple(
        DemandCell(
            gamma=gamma,
            building=b,
            total=totals[(gamma, b)],
            groups=tuple(
                sorted((fsi.id_of(b, lots), share) for lots, share in groups[(gamma, b)].items())
            ),
        )
        for gamma, b in sorted(totals, key=lambda k: (k[0][0], k[0][1], k[1]))
    )

    utilities = None
    tables = [(s.probability, s.utilities) for s in scenarios if s.utilities is not None]
    if tables:
        weight = sum(p * (t.support > 0) for p, t in tables)
        weighted = sum(p * np.where(t.support > 0, t.u, 0.0) for p, t in tables)
        u = np.divide(weighted, weight, out=np.zeros_like(weighted, dtype=float), where=weight > 0)
        u_nc = sum(p * t.u_nc for p, t in tables) / sum(p for p, _ in tables)
        utilities = UtilityTable(u=u, u_nc=np.asarray(u_nc, dtype=float), support=weight)

    first = scenarios[0]
    return Scenario(
        id=scenario_id,
        day_type=first.day_type,
        season=first.season,
        drivers=(),
        lost_demand=0,
        cells=cells,
        fsi=fsi,
        probability=1.0,
        utilities=utilities,
    )


def expected_value_problem(
    inst: Instance,
    scenarios: Sequence[Scenario],
    solver_cfg: Optional[SolverConfig] = None,
    jobs: int = 1,
) -> Tuple[NetworkDesign, float]:
    """Solve the single mean scenario; returns the EV design and the EV objective."""
    solver_cfg = solver_cfg or SolverConfig()
    design, report = solve_design(inst, [mean_scenario(scenarios)], solver_cfg, jobs=jobs)
    return design, report.objective


@dataclass
class VssResult:
    """
    RP, EV, EEV and their VSS.

    `rp` is the recourse problem's own incumbent as reported by its solve.
    The result is heuristic when that solve stopped at a limit, or when the
    EV design evaluates above the RP incumbent, which an optimal RP rules out.
    """

    rp: float
    ev: float
    eev: float
    rp_design: NetworkDesign
    ev_design: NetworkDesign
    rp_status: str = "optimal"
    heuristic: bool = False

    @property
    def vss(self) -> float:
        return self.rp - self.eev

    @property
    def vss_percent(self) -> Optional[float]:
        """100 * VSS / EEV, or None when EEV is 0."""
        if self.eev == 0:
            return None
        return 100.0 * self.vss / self.eev

    def to_dict(self) -> Dict[str, object]:
        return {
            "RP": self.rp,
            "EV": self.ev,
            "EEV": self.eev,
            "VSS": self.vss,
            "VSS_percent": self.vss_percent,
            "RP_status": self.rp_status,
            "heuristic": self.heuristic,
        }


def vss(
    inst: Instance,
    scenarios: Sequence[Scenario],
    solver_cfg: Optional[SolverConfig] = None,
    jobs: int = 1,
) -> VssResult:
    """
    RP, EEV and VSS = RP - EEV on one scenario set.

    The RP value and status are kept as solved. An EEV above RP by more than
    the solve tolerance marks the result heuristic instead of replacing RP.
    """
    solver_cfg = solver_cfg or SolverConfig()
    rp_design, report = solve_design(inst, scenarios, solver_cfg, jobs=jobs)
    ev_design, ev = expected_value_problem(inst, scenarios, solver_cfg, jobs)
    eev, _ = evaluate_recourse(inst, ev_design, scenarios, jobs=jobs)
    rp = report.objective
    heuristic = report.hit_limit
    tolerance = max(solver_cfg.epsilon, solver_cfg.gap_tol * max(1.0, abs(rp)), 1e-6)
    if eev > rp + tolerance:
        logger.warning(
            "EV design evaluates %.4g above the RP incumbent (%s); VSS is heuristic",
            eev - rp,
            report.status,
        )
        heuristic = True
    result = VssResult(
        rp=rp,
        ev=ev,
        eev=eev,
        rp_design=rp_design,
        ev_design=ev_design,
        rp_status=report.status,
        heuristic=heuristic,
    )
    logger.info("VSS: RP %.4f (%s), EEV %.4f, VSS %.4f", rp, report.status, eev, result.vss)
    return result


@dataclass
class AblationRow:
    series: str
    rp: float
    eev: float
    vss: float
    vss_percent: Optional[float]
    heuristic: bool = False


def vss_ablation(
    inst: Instance,
    config: ExperimentConfig,
    count: int,
    seed: int,
    sources: Sequence[str] = SOURCES,
    replications: int = 1,
    jobs: int = 1,
) -> List[AblationRow]:
    """
    VSS with every source random ("all"), then with one source random and
    all others frozen at their means. Each series averages `replications`
    scenario sets of `count` scenarios.
    """
    rows = []
    for series in ("all",) + tuple(sources):
        behavior = replace(config.behavior, frozen=frozen_all_but(None if series == "all" else series))
        variant = replace(config, behavior=behavior)
        results = []
        for r in range(replications):
            scenarios = prepare_scenarios(
                inst, variant, count, seed, prefix=(ABLATION_STREAM, r), jobs=jobs
            )
            results.append(vss(inst, scenarios, variant.solver, jobs))
        rp = float(np.mean([v.rp for v in results]))
        eev = float(np.mean([v.eev for v in results]))
        rows.append(
            AblationRow(
                series=series,
                rp=rp,
                eev=eev,
                vss=rp - eev,
                vss_percent=None if eev == 0 else 100.0 * (rp - eev) / eev,
                heuristic=any(v.heuristic for v in results),
            )
        )
        logger.info("ablation %s: VSS %.4f", series, rp - eev)
    return rows


def ablation_frame(rows: Sequence[AblationRow]) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {
                "series": r.series,
                "RP": r.rp,
                "EEV": r.eev,
                "VSS": r.vss,
                "VSS_percent": r.vss_percent,
                "heuristic": r.heuristic,
            }
            for r in rows
        ],
        columns=["series", "RP", "EEV", "VSS", "VSS_percent", "heuristic"],
    )
