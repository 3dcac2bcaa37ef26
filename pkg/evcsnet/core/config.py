"""Experiment configuration parser for evcsnet.yaml."""
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import yaml

from evcsnet.models.instance import Activity, Instance

WeibullParams = Tuple[float, float]

ACTIVITIES: Tuple[str, ...] = tuple(a.value for a in Activity)
DAY_TYPES: Tuple[str, ...] = ("weekday", "weekend")
SOURCES: Tuple[str, ...] = ("arrival", "dwell", "soc", "walk", "traffic")
BETA_STRATEGIES: Tuple[str, ...] = ("mean", "season-only", "fixed")
AGGREGATIONS: Tuple[str, ...] = ("mean", "sum", "representative")
METHODS: Tuple[str, ...] = ("dep", "single-cut", "multi-cut")
BASELINES: Tuple[str, ...] = ("choice-aware", "config1", "config2")

PREDICTORS: Tuple[str, ...] = (
    "intercept",
    "price",
    "charging_cost",
    "home_cost",
    "dwell_30min",
    "level2",
    "level3",
    "range_charged",
    "remaining_range",
    "enough_to_next",
)

# (mean, sd) per predictor, mixed-logit estimates
DEFAULT_COEFFICIENTS: Dict[str, Tuple[float, float]] = {
    "intercept": (4.756, 0.022),
    "price": (-0.607, 0.089),
    "charging_cost": (-0.062, 0.004),
    "home_cost": (0.009, 0.489),
    "dwell_30min": (0.335, 0.188),
    "level2": (1.229, 0.253),
    "level3": (1.609, 0.264),
    "range_charged": (0.014, 0.003),
    "remaining_range": (-0.130, 0.006),
    "enough_to_next": (-4.401, 0.078),
}


def _default_arrival() -> Dict[str, WeibullParams]:
    return {"weekday": (13.0, 4.0), "weekend": (8.0, 3.0)}


def _default_dwell() -> Dict[str, Dict[str, WeibullParams]]:
    return {
        "weekday": {
            "work": (5.89, 10.0),
            "social": (1.89, 10.0),
            "family": (1.05, 10.0),
            "meal": (0.79, 2.0),
            "school": (3.61, 2.0),
            "shopping": (0.56, 2.0),
        },
        "weekend": {
            "work": (6.04, 6.0),
            "social": (2.03, 2.0),
            "family": (1.13, 2.0),
            "meal": (0.79, 2.0),
            "school": (3.36, 10.0),
            "shopping": (0.25, 0.5),
        },
    }


def _default_activity_mix() -> Dict[str, List[List[float]]]:
    # Columns follow ACTIVITIES: work, school, social, family, meal, shopping
    return {
        "weekday": [
            [0.55, 0.25, 0.05, 0.05, 0.05, 0.05],
            [0.35, 0.20, 0.10, 0.10, 0.10, 0.15],
            [0.15, 0.10, 0.15, 0.10, 0.30, 0.20],
            [0.10, 0.05, 0.25, 0.20, 0.15, 0.25],
        ],
        "weekend": [
            [0.15, 0.05, 0.20, 0.25, 0.15, 0.20],
            [0.10, 0.05, 0.25, 0.20, 0.15, 0.25],
            [0.05, 0.05, 0.30, 0.15, 0.15, 0.30],
            [0.05, 0.05, 0.30, 0.20, 0.10, 0.30],
        ],
    }


def _default_season_beta() -> Dict[str, float]:
    return {"winter": 1.88, "spring": 1.68, "summer": 1.64, "autumn": 1.70}


def _default_region_beta() -> Dict[str, float]:
    return {"northeast": 1.85, "midwest": 1.65, "south": 1.76, "west": 1.65}


def _default_community_beta() -> Dict[str, float]:
    return {"town_and_country": 1.68, "suburban": 1.63, "urban": 1.78}


def _pair(value: Any, name: str) -> WeibullParams:
    if len(value) != 2:
        raise ValueError(f"{name} must be a (scale, shape) pair")
    return (float(value[0]), float(value[1]))


@dataclass
class BehaviorConfig:
    """Driver-behavior distributions used by scenario generation."""

    arrival_weibull: Dict[str, WeibullParams] = field(default_factory=_default_arrival)
    dwell_weibull: Dict[str, Dict[str, WeibullParams]] = field(default_factory=_default_dwell)
    swap_weibull_order: bool = False
    soc_mean: float = 0.3
    soc_sd: float = 0.1
    soc_bounds: Tuple[float, float] = (0.0, 1.0)
    season_beta: Dict[str, float] = field(default_factory=_default_season_beta)
    region_beta: Dict[str, float] = field(default_factory=_default_region_beta)
    community_beta: Dict[str, float] = field(default_factory=_default_community_beta)
    activity_beta: Dict[str, float] = field(default_factory=dict)
    region: str = "midwest"
    community: str = "urban"
    beta_strategy: str = "mean"
    fixed_beta: float = 2.0
    walk_cap_miles: Optional[float] = None
    daily_traffic: Tuple[int, int] = (10000, 14000)
    ev_share: float = 0.02
    ev_share_range: Optional[Tuple[float, float]] = None
    activity_mix: Dict[str, List[List[float]]] = field(default_factory=_default_activity_mix)
    day_type_probability: float = 5.0 / 7.0
    arrival_max_tries: int = 100
    frozen: Tuple[str, ...] = ()

    def __post_init__(self) -> None:
        """Validate configuration after initialization."""
        self.arrival_weibull = {
            str(k): _pair(v, f"arrival_weibull.{k}") for k, v in self.arrival_weibull.items()
        }
        self.dwell_weibull = {
            str(day): {str(a): _pair(v, f"dwell_weibull.{day}.{a}") for a, v in table.items()}
            for day, table in self.dwell_weibull.items()
        }
        self.soc_bounds = (float(self.soc_bounds[0]), float(self.soc_bounds[1]))
        self.daily_traffic = (int(self.daily_traffic[0]), int(self.daily_traffic[1]))
        if self.ev_share_range is not None:
            self.ev_share_range = (float(self.ev_share_range[0]), float(self.ev_share_range[1]))
        self.frozen = tuple(self.frozen)

        for day in DAY_TYPES:
            if day not in self.arrival_weibull:
                raise ValueError(f"arrival_weibull is missing day type '{day}'")
            if day not in self.dwell_weibull:
                raise ValueError(f"dwell_weibull is missing day type '{day}'")
            if day not in self.activity_mix:
                raise ValueError(f"activity_mix is missing day type '{day}'")
        for name, (scale, shape) in self.arrival_weibull.items():
            if scale <= 0 or shape <= 0:
                raise ValueError(f"arrival_weibull.{name} scale and shape must be > 0")
        for day, table in self.dwell_weibull.items():
            for activity, (scale, shape) in table.items():
                if activity not in ACTIVITIES:
                    raise ValueError(f"dwell_weibull.{day}: unknown activity '{activity}'")
                if scale <= 0 or shape <= 0:
                    raise ValueError(f"dwell_weibull.{day}.{activity} scale and shape must be > 0")
        if self.soc_sd <= 0:
            raise ValueError("soc_sd must be > 0")
        if not self.soc_bounds[0] < self.soc_bounds[1]:
            raise ValueError("soc_bounds must satisfy lo < hi")
        for table_name in ("season_beta", "region_beta", "community_beta", "activity_beta"):
            for level, beta in getattr(self, table_name).items():
                if beta <= 0:
                    raise ValueError(f"{table_name}.{level} must be > 0")
        if self.region not in self.region_beta:
            raise ValueError(f"region '{self.region}' has no entry in region_beta")
        if self.community not in self.community_beta:
            raise ValueError(f"community '{self.community}' has no entry in community_beta")
        if self.beta_strategy not in BETA_STRATEGIES:
            raise ValueError(f"beta_strategy must be one of {', '.join(BETA_STRATEGIES)}")
        if self.fixed_beta <= 0:
            raise ValueError("fixed_beta must be > 0")
        if self.walk_cap_miles is not None and self.walk_cap_miles <= 0:
            raise ValueError("walk_cap_miles must be > 0")
        lo, hi = self.daily_traffic
        if not 0 <= lo <= hi:
            raise ValueError("daily_traffic must satisfy 0 <= lo <= hi")
        if not 0.0 <= self.ev_share <= 1.0:
            raise ValueError("ev_share must be between 0 and 1")
        if self.ev_share_range is not None:
            a, b = self.ev_share_range
            if not 0.0 <= a <= b <= 1.0:
                raise ValueError("ev_share_range must satisfy 0 <= lo <= hi <= 1")
        for day, rows in self.activity_mix.items():
            if not rows:
                raise ValueError(f"activity_mix.{day} must have at least one row")
            for i, row in enumerate(rows):
                if len(row) != len(ACTIVITIES):
                    raise ValueError(
                        f"activity_mix.{day}[{i}] must have {len(ACTIVITIES)} entries "
                        f"({', '.join(ACTIVITIES)})"
                    )
                if any(p < 0 for p in row) or abs(sum(row) - 1.0) > 1e-9:
                    raise ValueError(f"activity_mix.{day}[{i}] must be a probability vector")
        if not 0.0 <= self.day_type_probability <= 1.0:
            raise ValueError("day_type_probability must be between 0 and 1")
        if self.arrival_max_tries < 1:
            raise ValueError("arrival_max_tries must be >= 1")
        unknown = [s for s in self.frozen if s not in SOURCES]
        if unknown:
            raise ValueError(f"frozen: unknown source(s) {unknown}; expected {', '.join(SOURCES)}")

    def arrival_params(self, day_type: str) -> WeibullParams:
        scale, shape = self.arrival_weibull[day_type]
        return (shape, scale) if self.swap_weibull_order else (scale, shape)

    def dwell_params(self, activity: str, day_type: str) -> WeibullParams:
        try:
            scale, shape = self.dwell_weibull[day_type][activity]
        except KeyError:
            raise ValueError(f"no dwell parameters for ({activity}, {day_type})") from None
        return (shape, scale) if self.swap_weibull_order else (scale, shape)

    def mix_row(self, day_type: str, slot: int) -> List[float]:
        """Activity probabilities at an arrival slot; the last row covers later slots."""
        rows = self.activity_mix[day_type]
        return rows[min(slot, len(rows) - 1)]


@dataclass
class CoefficientSpec:
    """Mixed-logit coefficients: (mean, sd) per predictor, in PREDICTORS order."""

    means: Tuple[float, ...] = tuple(DEFAULT_COEFFICIENTS[k][0] for k in PREDICTORS)
    sds: Tuple[float, ...] = tuple(DEFAULT_COEFFICIENTS[k][1] for k in PREDICTORS)

    def __post_init__(self) -> None:
        """Validate configuration after initialization."""
        self.means = tuple(float(v) for v in self.means)
        self.sds = tuple(float(v) for v in self.sds)
        if len(self.means) != len(PREDICTORS) or len(self.sds) != len(PREDICTORS):
            raise ValueError(f"coefficients must cover {len(PREDICTORS)} predictors")
        if any(sd < 0 for sd in self.sds):
            raise ValueError("coefficient sds must be >= 0")

    @classmethod
    def from_mapping(cls, data: Dict[str, Any]) -> "CoefficientSpec":
        """Build from {predictor: [mean, sd]}; missing predictors keep their defaults."""
        unknown = sorted(set(data) - set(PREDICTORS))
        if unknown:
            raise ValueError(f"coefficients: unknown predictor(s) {unknown}")
        merged = dict(DEFAULT_COEFFICIENTS)
        for name, value in data.items():
            merged[name] = _pair(value, f"coefficients.{name}")
        return cls(
            means=tuple(merged[k][0] for k in PREDICTORS),
            sds=tuple(merged[k][1] for k in PREDICTORS),
        )

    def to_mapping(self) -> Dict[str, List[float]]:
        return {k: [m, s] for k, m, s in zip(PREDICTORS, self.means, self.sds)}


@dataclass
class VehicleSpec:
    """Vehicle parameters behind the range-related predictors."""

    battery_kwh: float = 60.0
    miles_per_kwh: float = 3.5
    home_price_per_kwh: float = 0.13
    next_opportunity_miles: float = 40.0

    def __post_init__(self) -> None:
        """Validate configuration after initialization."""
        for f in fields(self):
            if not getattr(self, f.name) > 0:
                raise ValueError(f"vehicle.{f.name} must be > 0")


@dataclass
class ChoiceConfig:
    """How driver utilities are drawn and aggregated."""

    mixing: bool = True
    aggregation: str = "mean"

    def __post_init__(self) -> None:
        """Validate configuration after initialization."""
        if self.aggregation not in AGGREGATIONS:
            raise ValueError(f"aggregation must be one of {', '.join(AGGREGATIONS)}")


@dataclass
class SolverConfig:
    """Solution method and tolerances."""

    method: str = "multi-cut"
    epsilon: float = 1e-4
    time_limit: Optional[float] = None
    gap_tol: float = 1e-9
    max_iterations: int = 200

    def __post_init__(self) -> None:
        """Validate configuration after initialization."""
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {', '.join(METHODS)}")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        if self.time_limit is not None and self.time_limit <= 0:
            raise ValueError("time_limit must be > 0")
        if self.gap_tol < 0:
            raise ValueError("gap_tol must be >= 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass
class SaaConfig:
    """Sample average approximation sizes."""

    K: int = 5
    L: int = 10
    L_prime: int = 200
    seed: int = 0
    validation_scenarios: int = 100
    shared_seed: bool = False

    def __post_init__(self) -> None:
        """Validate configuration after initialization."""
        if self.K < 2:
            raise ValueError("K must be >= 2")
        if self.L < 1:
            raise ValueError("L must be >= 1")
        if self.L_prime < self.L:
            raise ValueError("L_prime must be >= L")
        if self.validation_scenarios < 1:
            raise ValueError("validation_scenarios must be >= 1")


@dataclass
class SimConfig:
    """Simulation replications."""

    replications: int = 200
    baseline: str = "choice-aware"
    seed: int = 0

    def __post_init__(self) -> None:
        """Validate configuration after initialization."""
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.baseline not in BASELINES:
            raise ValueError(f"baseline must be one of {', '.join(BASELINES)}")


@dataclass
class RunConfig:
    """Run-level settings; CLI flags override them."""

    instance: Optional[Path] = None
    seed: int = 0
    scenarios: int = 40
    budget: Optional[float] = None
    output_dir: Path = Path("results")
    jobs: int = 1
    budgets: Tuple[float, ...] = (5000.0, 10000.0, 15000.0, 20000.0, 25000.0)
    level3_prices: Tuple[float, ...] = (9.0, 6.0, 4.0, 3.0)

    def __post_init__(self) -> None:
        """Validate configuration after initialization."""
        if isinstance(self.instance, str):
            self.instance = Path(self.instance)
        if isinstance(self.output_dir, str):
            self.output_dir = Path(self.output_dir)
        self.budgets = tuple(float(b) for b in self.budgets)
        self.level3_prices = tuple(float(p) for p in self.level3_prices)
        if self.scenarios < 1:
            raise ValueError("scenarios must be >= 1")
        if self.budget is not None and self.budget < 0:
            raise ValueError("budget must be >= 0")
        if not 1 <= self.jobs <= 64:
            raise ValueError("jobs must be between 1 and 64")
        if any(b < 0 for b in self.budgets):
            raise ValueError("budgets must be >= 0")
        if any(p < 0 for p in self.level3_prices):
            raise ValueError("level3_prices must be >= 0")


@dataclass
class ExperimentConfig:
    """Complete evcsnet.yaml representation."""

    behavior: BehaviorConfig = field(default_factory=BehaviorConfig)
    coefficients: CoefficientSpec = field(default_factory=CoefficientSpec)
    vehicle: VehicleSpec = field(default_factory=VehicleSpec)
    choice: ChoiceConfig = field(default_factory=ChoiceConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    saa: SaaConfig = field(default_factory=SaaConfig)
    simulation: SimConfig = field(default_factory=SimConfig)
    run: RunConfig = field(default_factory=RunConfig)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["coefficients"] = self.coefficients.to_mapping()
        return data


_SECTIONS = {
    "behavior": BehaviorConfig,
    "vehicle": VehicleSpec,
    "choice": ChoiceConfig,
    "solver": SolverConfig,
    "saa": SaaConfig,
    "simulation": SimConfig,
    "run": RunConfig,
}


def _build_section(name: str, cls: Any, data: Any) -> Any:
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ValueError(f"Invalid '{name}' section: expected a mapping, got {type(data).__name__}")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ValueError(f"Unknown field '{name}.{unknown[0]}'")
    try:
        return cls(**data)
    except (TypeError, ValueError) as e:
        raise ValueError(f"Invalid '{name}' section: {e}") from e


def experiment_from_dict(data: Dict[str, Any]) -> ExperimentConfig:
    """
    Build an ExperimentConfig from a parsed document.

    Raises:
        ValueError: On unknown sections/fields or invalid values
    """
    unknown = sorted(set(data) - set(_SECTIONS) - {"coefficients"})
    if unknown:
        raise ValueError(f"Unknown section '{unknown[0]}'")

    coefficients_data = data.get("coefficients")
    if coefficients_data is None:
        coefficients = CoefficientSpec()
    elif isinstance(coefficients_data, dict):
        coefficients = CoefficientSpec.from_mapping(coefficients_data)
    else:
        raise ValueError("Invalid 'coefficients' section: expected a mapping")

    sections = {name: _build_section(name, cls, data.get(name)) for name, cls in _SECTIONS.items()}
    return ExperimentConfig(coefficients=coefficients, **sections)


def load_config(path: Path) -> ExperimentConfig:
    """
    Load and parse an experiment config file.

    Args:
        path: Path to the YAML config file

    Returns:
        Parsed ExperimentConfig; relative instance paths resolve against the file

    Raises:
        FileNotFoundError: If the file doesn't exist
        ValueError: If YAML syntax or a field is invalid
    """
    if not path.exists():
        raise FileNotFoundError(f"Config file not found: {path}")

    with open(path) as f:
        try:
            data = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            mark = getattr(e, "problem_mark", None)
            where = f" (line {mark.line + 1})" if mark is not None else ""
            raise ValueError(f"{path}: invalid YAML{where}: {e}") from e

    if not isinstance(data, dict):
        raise ValueError(f"{path}: expected a mapping at the top level")

    try:
        config = experiment_from_dict(data)
    except ValueError as e:
        raise ValueError(f"{path}: {e}") from e

    instance = config.run.instance
    if instance is not None and not instance.is_absolute():
        config.run.instance = (path.parent / instance).resolve()
    return config


def config_hash(config: ExperimentConfig, inst: Optional[Instance] = None) -> str:
    """sha256 over canonical JSON of the experiment config and the instance."""
    payload: Dict[str, Any] = {"config": config.to_dict()}
    if inst is not None:
        payload["instance"] = inst.to_dict()
    canonical = json.dumps(payload, sort_keys=True, default=str)
    return "sha256:" + hashlib.sha256(canonical.encode()).hexdigest()


def header_fields(
    config: ExperimentConfig, inst: Optional[Instance], command: str, seed: int
) -> Dict[str, Any]:
    """Header block written at the top of every output file."""
    from evcsnet import __version__

    return {
        "version": __version__,
        "command": command,
        "seed": seed,
        "config_hash": config_hash(config, inst),
    }


def frozen_all_but(source: Optional[str]) -> Tuple[str, ...]:
    """Frozen-source tuple keeping only `source` random (None keeps all random)."""
    if source is None:
        return ()
    if source not in SOURCES:
        raise ValueError(f"unknown uncertainty source '{source}'")
    return tuple(s for s in SOURCES if s != source)
