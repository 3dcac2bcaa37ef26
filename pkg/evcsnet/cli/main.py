"""Main CLI entry point for evcsnet."""
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import click

from evcsnet import __version__

DATA_DIR = Path(__file__).resolve().parent.parent / "data"
DESK_INSTANCE = DATA_DIR / "desk_instance.json"
INSTANCE_COPY = Path("desk_instance.json")
DEFAULT_CONFIG = Path("evcsnet.yaml")

EXIT_LIMIT = 3

CONFIG_TEMPLATE = """# evcsnet experiment configuration
# Every section is optional; omitted fields keep their defaults.
# CLI flags (--seed, --scenarios, --budget, --method, ...) override these values.

run:
  # instance: desk_instance.json    # relative paths resolve against this file
  seed: 0
  scenarios: 40
  output_dir: results
  jobs: 1
  budgets: [5000, 10000, 15000, 20000, 25000]
  level3_prices: [9.0, 6.0, 4.0, 3.0]

behavior:
  daily_traffic: [10000, 14000]
  ev_share: 0.02
  region: midwest                   # northeast | midwest | south | west
  community: urban                  # town_and_country | suburban | urban
  beta_strategy: mean               # mean | season-only | fixed
  # walk_cap_miles: 0.2             # pessimistic walking case
  # frozen: [soc]                   # replace sources by their means

# coefficients:                     # predictor: [mean, sd]
#   price: [-0.607, 0.089]

vehicle:
  battery_kwh: 60.0
  miles_per_kwh: 3.5

choice:
  mixing: true
  aggregation: mean                 # mean | sum | representative

solver:
  method: multi-cut                 # dep | single-cut | multi-cut
  epsilon: 0.0001
  # time_limit: 600

saa:
  K: 5
  L: 10
  L_prime: 200

simulation:
  replications: 200
  baseline: choice-aware            # simulated without --design: choice-aware | config1 | config2
"""

logger = logging.getLogger("evcsnet")


def _error(message: str) -> None:
    click.echo(click.style("Error: ", fg="red", bold=True) + message)


def _ok(message: str) -> None:
    click.echo(click.style("✓ ", fg="green") + message)


def _setup_logging(verbose: bool, quiet: bool) -> None:
    from rich.console import Console
    from rich.logging import RichHandler

    root = logging.getLogger()
    for handler in list(root.handlers):
        if isinstance(handler, RichHandler):
            root.removeHandler(handler)
    root.addHandler(RichHandler(console=Console(stderr=True), show_path=False))
    if quiet:
        root.setLevel(logging.ERROR)
        logger.setLevel(logging.ERROR)
    elif verbose:
        root.setLevel(logging.DEBUG)
        logger.setLevel(logging.DEBUG)
    else:
        root.setLevel(logging.WARNING)
        logger.setLevel(logging.INFO)


def _load_inputs(
    config_path: Optional[str], instance_path: Optional[str], budget: Optional[float] = None
) -> Tuple[Any, Any]:
    """Load the experiment config and the instance; errors abort with exit code 1."""
    from evcsnet.core.config import ExperimentConfig, load_config
    from evcsnet.core.network import load_instance

    try:
        if config_path is not None:
            config = load_config(Path(config_path))
        elif DEFAULT_CONFIG.exists():
            config = load_config(DEFAULT_CONFIG)
        else:
            config = ExperimentConfig()

        if instance_path is not None:
            path = Path(instance_path)
        elif config.run.instance is not None:
            path = config.run.instance
        else:
            logger.info("no instance given, using the reference desk instance")
            path = DESK_INSTANCE
        inst = load_instance(path)
    except (FileNotFoundError, ValueError) as e:
        _error(str(e))
        raise click.Abort() from None

    override = budget if budget is not None else config.run.budget
    if override is not None:
        inst = inst.with_budget(override)
    return config, inst


def _apply_overrides(config: Any, **values: Any) -> None:
    """CLI flags override config fields (None means not given)."""
    sections = {
        "seed": config.run,
        "scenarios": config.run,
        "jobs": config.run,
        "output_dir": config.run,
        "method": config.solver,
        "epsilon": config.solver,
        "time_limit": config.solver,
        "replications": config.simulation,
    }
    for name, value in values.items():
        if value is not None:
            setattr(sections[name], name, Path(value) if name == "output_dir" else value)


def _planning_scenarios(inst: Any, config: Any, scenario_file: Optional[str]) -> Any:
    from evcsnet.core.choice import attach_utilities, prepare_scenarios
    from evcsnet.core.reports import PLANNING_STREAM
    from evcsnet.core.scenarios import read_scenarios

    run = config.run
    if scenario_file is None:
        return prepare_scenarios(
            inst, config, run.scenarios, run.seed, prefix=(PLANNING_STREAM,), jobs=run.jobs
        )
    try:
        header, scenarios = read_scenarios(Path(scenario_file))
    except (FileNotFoundError, ValueError) as e:
        _error(str(e))
        raise click.Abort() from None
    seed = int(header.get("seed", run.seed))
    return attach_utilities(
        scenarios,
        inst,
        config.coefficients,
        config.vehicle,
        config.choice,
        seed,
        prefix=(PLANNING_STREAM,),
        jobs=run.jobs,
    )


def _write_json(path: Path, data: Dict[str, Any]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write("\n")


config_option = click.option(
    "--config", "config_path", type=click.Path(dir_okay=False), help="Experiment config (YAML)"
)
instance_option = click.option(
    "--instance", "instance_path", type=click.Path(dir_okay=False), help="Instance file (JSON)"
)
seed_option = click.option("--seed", type=click.IntRange(min=0), help="Random seed")
scenarios_option = click.option(
    "--scenarios", type=click.IntRange(min=1), help="Number of planning scenarios"
)
output_dir_option = click.option(
    "--output-dir", type=click.Path(file_okay=False), help="Directory for result files"
)


@click.group()
@click.version_option(version=__version__)
@click.option("--verbose", "-v", is_flag=True, help="Show debug logging")
@click.option("--quiet", "-q", is_flag=True, help="Only show errors")
@click.option("--jobs", type=click.IntRange(1, 64), default=None, help="Parallel worker cap")
@click.pass_context
def cli(ctx: click.Context, verbose: bool, quiet: bool, jobs: Optional[int]) -> None:
    """evcsnet - EV charging-station network design

    Plans charger installations with a two-stage stochastic model of driver
    choice and evaluates designs by simulation.
    """
    _setup_logging(verbose, quiet)
    ctx.ensure_object(dict)
    ctx.obj["jobs"] = jobs


@cli.command()
@click.option("--force", is_flag=True, help="Overwrite existing evcsnet.yaml")
@click.option(
    "--with-instance", is_flag=True, help="Also write an editable copy of the reference desk instance"
)
def init(force: bool, with_instance: bool) -> None:
    """Initialize a new evcsnet.yaml file."""
    from evcsnet.core.network import load_instance, save_instance

    if DEFAULT_CONFIG.exists() and not force:
        _error("evcsnet.yaml already exists. Use --force to overwrite.")
        raise click.Abort()

    template = CONFIG_TEMPLATE
    if with_instance:
        if INSTANCE_COPY.exists() and not force:
            _error(f"{INSTANCE_COPY} already exists. Use --force to overwrite.")
            raise click.Abort()
        save_instance(load_instance(DESK_INSTANCE), INSTANCE_COPY)
        template = template.replace(
            f"  # instance: {INSTANCE_COPY}", f"  instance: {INSTANCE_COPY}  "
        )
        _ok(f"Created {INSTANCE_COPY}")

    DEFAULT_CONFIG.write_text(template)
    _ok("Created evcsnet.yaml")
    click.echo("  Point run.instance at your instance file, then run: evcsnet solve")


@cli.command()
def version() -> None:
    """Show evcsnet version."""
    click.echo(f"evcsnet version {__version__}")


@cli.command()
@click.argument("instance_file", type=click.Path())
def validate(instance_file: str) -> None:
    """Check an instance file against the schema and invariants."""
    from evcsnet.core.network import load_instance

    try:
        inst = load_instance(Path(instance_file))
    except (FileNotFoundError, ValueError) as e:
        _error(str(e))
        raise click.Abort() from None

    _ok(
        f"{instance_file}: {inst.n_types} charger types, {inst.n_lots} lots, "
        f"{len(inst.buildings)} buildings, budget {inst.budget:g}"
    )


@cli.command()
@config_option
@instance_option
@seed_option
@scenarios_option
@click.option("--output", "-o", type=click.Path(dir_okay=False), default="scenarios.jsonl")
@click.pass_context
def generate(
    ctx: click.Context,
    config_path: Optional[str],
    instance_path: Optional[str],
    seed: Optional[int],
    scenarios: Optional[int],
    output: str,
) -> None:
    """Generate a planning scenario set (JSON-lines)."""
    from evcsnet.core.config import header_fields
    from evcsnet.core.reports import PLANNING_STREAM
    from evcsnet.core.scenarios import generate_scenario_set, write_scenarios

    config, inst = _load_inputs(config_path, instance_path)
    _apply_overrides(config, seed=seed, scenarios=scenarios, jobs=ctx.obj["jobs"])
    run = config.run

    try:
        scenario_set = generate_scenario_set(
            inst, config.behavior, run.scenarios, run.seed, prefix=(PLANNING_STREAM,), jobs=run.jobs
        )
    except ValueError as e:
        _error(str(e))
        raise click.Abort() from None

    header = header_fields(config, inst, "generate", run.seed)
    write_scenarios(Path(output), scenario_set, header)
    drivers = sum(len(s.drivers) for s in scenario_set)
    _ok(f"Wrote {len(scenario_set)} scenarios ({drivers} drivers) to {output}")


@cli.command()
@config_option
@instance_option
@seed_option
@scenarios_option
@output_dir_option
@click.option(
    "--method", type=click.Choice(["dep", "single-cut", "multi-cut"]), help="Solution method"
)
@click.option("--epsilon", type=click.FloatRange(min=0, min_open=True), help="L-shaped gap tolerance")
@click.option("--time-limit", type=click.FloatRange(min=0, min_open=True), help="Seconds")
@click.option("--budget", type=click.FloatRange(min=0), help="Override the instance budget")
@click.option("--scenario-file", type=click.Path(dir_okay=False), help="Scenarios from 'generate'")
@click.option("--dump-mps", type=click.Path(dir_okay=False), help="Write the DEP in fixed MPS")
@click.pass_context
def solve(
    ctx: click.Context,
    config_path: Optional[str],
    instance_path: Optional[str],
    seed: Optional[int],
    scenarios: Optional[int],
    output_dir: Optional[str],
    method: Optional[str],
    epsilon: Optional[float],
    time_limit: Optional[float],
    budget: Optional[float],
    scenario_file: Optional[str],
    dump_mps: Optional[str],
) -> None:
    """Solve the two-stage planning model."""
    import pandas as pd

    from evcsnet.core.config import header_fields
    from evcsnet.core.dep import build_dep
    from evcsnet.core.lp.mps import count_entries, write_mps
    from evcsnet.core.planning import solve_design
    from evcsnet.core.reports import render_table, write_csv

    config, inst = _load_inputs(config_path, instance_path, budget)
    _apply_overrides(
        config,
        seed=seed,
        scenarios=scenarios,
        output_dir=output_dir,
        method=method,
        epsilon=epsilon,
        time_limit=time_limit,
        jobs=ctx.obj["jobs"],
    )
    run = config.run
    planning = _planning_scenarios(inst, config, scenario_file)

    if dump_mps:
        problem, _ = build_dep(inst, planning)
        write_mps(problem, Path(dump_mps))
        _ok(
            f"Wrote MPS model to {dump_mps} ({problem.num_rows} rows, {problem.num_columns} columns, "
            f"{count_entries(problem)} entries)"
        )

    design, report = solve_design(inst, planning, config.solver, jobs=run.jobs)

    header = header_fields(config, inst, "solve", run.seed)
    solution = {
        "header": header,
        "method": config.solver.method,
        "status": report.status,
        "x": design.open.tolist(),
        "z": design.count.tolist(),
        "objective": report.objective,
        "bound": report.bound,
        "gap": report.gap_percent,
        "seconds": round(report.seconds, 3),
        "cuts": report.cuts,
        "census": report.census,
    }
    solution_path = run.output_dir / "solution.json"
    _write_json(solution_path, solution)
    write_csv(report.to_frame(), run.output_dir / "iterations.csv", header)

    click.echo(render_table(pd.DataFrame([report.summary()]), "Solve summary"), nl=False)
    counts = ", ".join(f"{k}={v}" for k, v in design.counts_by_level(inst).items())
    if report.hit_limit:
        click.echo(
            click.style("! ", fg="yellow")
            + f"Stopped at a {report.status.replace('_', ' ')}; incumbent {report.objective:.4f}"
        )
        sys.exit(EXIT_LIMIT)
    _ok(f"Objective {report.objective:.4f} ({counts}); wrote {solution_path}")


@cli.command()
@config_option
@instance_option
@output_dir_option
@click.option("--K", "replications", type=click.IntRange(min=2), help="SAA replications")
@click.option("--L", "per_replication", type=click.IntRange(min=1), help="Scenarios per replication")
@click.option("--Lprime", "evaluation", type=click.IntRange(min=1), help="Evaluation sample size")
@click.option(
    "--method", type=click.Choice(["dep", "single-cut", "multi-cut"]), help="Solution method"
)
@click.option("--budget", type=click.FloatRange(min=0), help="Override the instance budget")
@click.option("--ablation", is_flag=True, help="Also compute VSS per uncertainty source")
@scenarios_option
@seed_option
@click.pass_context
def analyze(
    ctx: click.Context,
    config_path: Optional[str],
    instance_path: Optional[str],
    output_dir: Optional[str],
    replications: Optional[int],
    per_replication: Optional[int],
    evaluation: Optional[int],
    method: Optional[str],
    budget: Optional[float],
    ablation: bool,
    scenarios: Optional[int],
    seed: Optional[int],
) -> None:
    """SAA bounds and the value of the stochastic solution."""
    from dataclasses import replace

    import pandas as pd

    from evcsnet.core.config import header_fields
    from evcsnet.core.reports import render_table, write_csv
    from evcsnet.core.saa import ablation_frame, saa_run, vss, vss_ablation

    config, inst = _load_inputs(config_path, instance_path, budget)
    _apply_overrides(
        config,
        seed=seed,
        scenarios=scenarios,
        output_dir=output_dir,
        method=method,
        jobs=ctx.obj["jobs"],
    )
    try:
        config.saa = replace(
            config.saa,
            K=replications or config.saa.K,
            L=per_replication or config.saa.L,
            L_prime=evaluation or config.saa.L_prime,
        )
    except ValueError as e:
        _error(str(e))
        raise click.Abort() from None
    run = config.run
    header = header_fields(config, inst, "analyze", run.seed)

    report = saa_run(inst, config, jobs=run.jobs)
    write_csv(report.to_frame(), run.output_dir / "saa.csv", header)
    click.echo(render_table(report.to_frame(), "SAA bounds"), nl=False)

    planning = _planning_scenarios(inst, config, None)
    result = vss(inst, planning, config.solver, run.jobs)
    vss_frame = pd.DataFrame([result.to_dict()])
    write_csv(vss_frame, run.output_dir / "vss.csv", header)
    click.echo(render_table(vss_frame, "Value of the stochastic solution"), nl=False)

    flagged_vss = result.heuristic
    if ablation:
        rows = vss_ablation(inst, config, run.scenarios, run.seed, jobs=run.jobs)
        write_csv(ablation_frame(rows), run.output_dir / "vss_ablation.csv", header)
        flagged_vss = flagged_vss or any(r.heuristic for r in rows)

    if report.heuristic or flagged_vss:
        if report.heuristic:
            click.echo(
                click.style("! ", fg="yellow")
                + f"Replications {report.flagged} hit a limit; bounds are heuristic"
            )
        if flagged_vss:
            click.echo(
                click.style("! ", fg="yellow")
                + f"VSS is heuristic (RP status {result.rp_status})"
            )
        sys.exit(EXIT_LIMIT)
    _ok(f"Wrote analysis to {run.output_dir}")


@cli.command()
@config_option
@instance_option
@output_dir_option
@click.option("--design", "design_file", type=click.Path(dir_okay=False), help="Solution JSON")
@click.option(
    "--baseline",
    type=click.Choice(["choice-aware", "config1", "config2"]),
    help="Design to simulate instead of --design (default: simulation.baseline)",
)
@click.option("--replications", type=click.IntRange(min=1), help="Simulated days")
@click.option("--budget", type=click.FloatRange(min=0), help="Override the instance budget")
@click.option("--event-log", type=click.Path(dir_okay=False), help="Per-driver JSON-lines log")
@seed_option
@scenarios_option
@click.pass_context
def simulate(
    ctx: click.Context,
    config_path: Optional[str],
    instance_path: Optional[str],
    output_dir: Optional[str],
    design_file: Optional[str],
    baseline: Optional[str],
    replications: Optional[int],
    budget: Optional[float],
    event_log: Optional[str],
    seed: Optional[int],
    scenarios: Optional[int],
) -> None:
    """Replay simulated driver days against a design."""
    import pandas as pd

    from evcsnet.core.config import header_fields
    from evcsnet.core.planning import solve_design
    from evcsnet.core.reports import render_table, write_csv
    from evcsnet.core.simulation import (
        baseline_design,
        demand_weights,
        driver_streams,
        simulate_replications,
        summarize,
    )
    from evcsnet.models.instance import NetworkDesign

    if design_file is not None and baseline is not None:
        _error("give at most one of --design or --baseline")
        raise click.Abort()

    config, inst = _load_inputs(config_path, instance_path, budget)
    _apply_overrides(
        config,
        seed=seed,
        scenarios=scenarios,
        output_dir=output_dir,
        replications=replications,
        jobs=ctx.obj["jobs"],
    )
    run = config.run
    sim = config.simulation

    if design_file is not None:
        path = Path(design_file)
        if not path.exists():
            _error(f"Design file not found: {path}")
            raise click.Abort()
        try:
            design = NetworkDesign.from_dict(json.loads(path.read_text()))
        except (KeyError, ValueError) as e:
            _error(f"{path}: {e}")
            raise click.Abort() from None
    else:
        which = baseline or sim.baseline
        planning = _planning_scenarios(inst, config, None)
        if which == "choice-aware":
            logger.info("solving the choice-aware design on %d planning scenarios", len(planning))
            design, plan = solve_design(inst, planning, config.solver, jobs=run.jobs)
            if plan.hit_limit:
                logger.warning("planning solve ended with %s; simulating its incumbent", plan.status)
        else:
            design = baseline_design(inst, which, weights=demand_weights(inst, planning))

    streams = driver_streams(inst, config, sim.replications, sim.seed, run.jobs)
    try:
        metrics = simulate_replications(
            inst, design, streams, sim.seed, run.jobs, event_log=event_log is not None
        )
    except ValueError as e:
        _error(str(e))
        raise click.Abort() from None

    header = header_fields(config, inst, "simulate", sim.seed)
    frame = pd.DataFrame([{"replication": r, **m.to_row()} for r, m in enumerate(metrics)])
    write_csv(frame, run.output_dir / "simulation.csv", header)

    if event_log is not None:
        log_path = Path(event_log)
        with open(log_path, "w") as f:
            for r, m in enumerate(metrics):
                for event in m.events:
                    f.write(json.dumps({"replication": r, **event}, sort_keys=True) + "\n")

    summary = summarize(metrics)
    table = pd.DataFrame(
        [
            {"metric": name[: -len("_mean")], "mean": value, "sd": summary[name[: -len("_mean")] + "_sd"]}
            for name, value in summary.items()
            if name.endswith("_mean")
        ]
    )
    click.echo(render_table(table, "Simulation summary"), nl=False)
    _ok(f"Simulated {len(metrics)} days; wrote {run.output_dir / 'simulation.csv'}")


@cli.command()
@config_option
@instance_option
@output_dir_option
@seed_option
@scenarios_option
@click.pass_context
def report(
    ctx: click.Context,
    config_path: Optional[str],
    instance_path: Optional[str],
    output_dir: Optional[str],
    seed: Optional[int],
    scenarios: Optional[int],
) -> None:
    """Budget sweeps, baseline comparison and the level-3 price sweep."""
    from evcsnet.core.config import header_fields
    from evcsnet.core.reports import write_report

    config, inst = _load_inputs(config_path, instance_path)
    _apply_overrides(
        config, seed=seed, scenarios=scenarios, output_dir=output_dir, jobs=ctx.obj["jobs"]
    )
    run = config.run
    header = header_fields(config, inst, "report", run.seed)
    paths = write_report(inst, config, run.output_dir, header, run.jobs)
    for name, path in paths.items():
        _ok(f"{name}: {path}")


@cli.group()
def utilities() -> None:
    """Inspect aggregated utility tables."""
    pass


@utilities.command("dump")
@config_option
@instance_option
@seed_option
@scenarios_option
@click.option("--output", "-o", type=click.Path(dir_okay=False), help="Write CSV instead of a table")
@click.pass_context
def utilities_dump(
    ctx: click.Context,
    config_path: Optional[str],
    instance_path: Optional[str],
    seed: Optional[int],
    scenarios: Optional[int],
    output: Optional[str],
) -> None:
    """Show u[n, j], u_nc[j] and the no-charge share with every type open, per planning scenario."""
    import pandas as pd

    from evcsnet.core.choice import no_charge_share
    from evcsnet.core.config import header_fields
    from evcsnet.core.reports import render_table, write_csv

    config, inst = _load_inputs(config_path, instance_path)
    _apply_overrides(config, seed=seed, scenarios=scenarios, jobs=(ctx.obj or {}).get("jobs"))
    planning = _planning_scenarios(inst, config, None)

    all_open = [1] * inst.n_types
    rows = []
    for s in planning:
        for j, values in enumerate(s.utilities.rows()):
            row: Dict[str, Any] = {"scenario": s.id, "lot": j}
            for charger, u in zip(inst.chargers, values):
                row[f"u_{charger.level.value}_{charger.id}"] = u
            row["u_nc"] = values[-1]
            row["nc_share_all_open"] = no_charge_share(j, s.utilities, all_open)
            rows.append(row)
    frame = pd.DataFrame(rows)

    if output:
        write_csv(frame, Path(output), header_fields(config, inst, "utilities dump", config.run.seed))
        _ok(f"Wrote {len(rows)} rows to {output}")
    else:
        click.echo(render_table(frame, "Aggregated utilities"), nl=False)


if __name__ == "__main__":
    cli()
