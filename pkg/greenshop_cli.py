#!/usr/bin/env python3
"""greenshop: carbon-aware job-shop scheduling on the command line."""

import functools
import logging
from pathlib import Path

import click

from packages.cli.experiment import SUMMARY_FILE, ExperimentSpec, run_experiment
from packages.cli.report import aggregate, load_results, render_table, write_report
from packages.core.codec import (
    instance_from_dict,
    instance_to_dict,
    read_json,
    report_to_dict,
    result_to_dict,
    schedule_from_any,
    write_json,
)
from packages.core.config import get_log_level, get_node_limit, get_time_limit, load_config_file
from packages.core.errors import GreenshopError
from packages.core.generator import GeneratorConfig, generate
from packages.core.models import as_fraction, check_feasible
from packages.core.objectives import evaluate
from packages.core.oracle import best, enumerate_schedules
from packages.core.solver import ObjectiveKind, SolveConfig, solve, solve_stretched
from packages.core.traces import CarbonTrace, load_hourly_csv, synthetic_sinusoid

logger = logging.getLogger("greenshop")


def handle_errors(func):
    """Turn library errors into a one-line message and exit status 1."""
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except GreenshopError as e:
            raise click.ClickException(str(e)) from e
    return wrapper


def trace_options(func):
    func = click.option("--synthetic", default=None, metavar="MEAN,AMP,PERIOD,PHASE",
                        help="Sinusoidal trace instead of a CSV")(func)
    func = click.option("--trace-offset", default=0, show_default=True, type=int,
                        help="First CSV data row to use (0-based)")(func)
    func = click.option("--trace", "trace_path", default=None, type=click.Path(exists=True, dir_okay=False),
                        help="Hourly carbon-intensity CSV (timestamp,carbon_intensity)")(func)
    return func


def _load_trace(trace_path: str | None, offset: int, synthetic: str | None, length: int) -> CarbonTrace | None:
    if trace_path and synthetic:
        raise click.UsageError("--trace and --synthetic are mutually exclusive")
    if trace_path:
        return load_hourly_csv(trace_path, offset)
    if synthetic:
        parts = [p.strip() for p in synthetic.split(",")]
        if len(parts) not in (3, 4):
            raise click.UsageError("--synthetic takes MEAN,AMP,PERIOD[,PHASE]")
        try:
            mean, amp = as_fraction(parts[0]), as_fraction(parts[1])
            period, phase = int(parts[2]), int(parts[3]) if len(parts) == 4 else 0
        except ValueError as e:
            raise click.UsageError(f"--synthetic: {e}") from e
        return synthetic_sinusoid(mean, amp, period, phase, length)
    return None


def _echo_report(title: str, report: dict) -> None:
    click.echo(f"  {click.style(title, bold=True)}")
    for key in ("makespan", "energy_kwh", "carbon_g", "utilization"):
        if report.get(key) is not None:
            click.echo(f"    {key:<12} {report[key]}")


@click.group()
@click.option("--verbose", "-v", count=True, help="-v for INFO, -vv for DEBUG")
def cli(verbose):
    """greenshop: carbon-aware flexible job-shop scheduling."""
    level = {0: get_log_level(), 1: "INFO"}.get(verbose, "DEBUG")
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


# ── gen ──────────────────────────────────────────────────────────────────

@cli.command()
@click.option("--config", "-c", "config_path", default=None, type=click.Path(exists=True, dir_okay=False),
              help="Generator config (YAML/JSON/TOML); may list seeds")
@click.option("--seed", "-s", "seeds", type=int, multiple=True, help="Seed (repeatable)")
@click.option("--out", "-o", default="instances", show_default=True, help="Output directory")
@handle_errors
def gen(config_path, seeds, out):
    """Generate instance.v1 files, one per seed."""
    data = load_config_file(config_path) if config_path else {}
    file_seeds = data.pop("seeds", None)
    seeds = list(seeds) or list(file_seeds if file_seeds is not None else [data.get("seed", 0)])
    data.pop("seed", None)
    configs = [GeneratorConfig.from_mapping({**data, "seed": int(s)}) for s in seeds]

    for config in configs:
        instance = generate(config)
        path = write_json(Path(out) / f"inst_{config.seed}.json", instance_to_dict(instance))
        click.echo(f"  {path}  ({instance.n_tasks} tasks, horizon {instance.horizon})")


# ── solve ────────────────────────────────────────────────────────────────

@cli.command("solve")
@click.argument("instance_file", type=click.Path(exists=True, dir_okay=False))
@trace_options
@click.option("--objective", type=click.Choice([k.value for k in ObjectiveKind]), default="carbon",
              show_default=True)
@click.option("--stretch", default=None, help="Stretch factor S >= 1; omit for makespan only")
@click.option("--time-limit", type=float, default=None, help="Wall-clock seconds per stage")
@click.option("--node-limit", type=int, default=None, help="Search nodes per stage")
@click.option("--out", "-o", default=".", show_default=True, help="Output directory")
@handle_errors
def solve_cmd(instance_file, trace_path, trace_offset, synthetic, objective, stretch, time_limit, node_limit, out):
    """Solve an instance: optimal makespan, then carbon or energy under S x OPT."""
    instance = instance_from_dict(read_json(instance_file))
    time_limit = time_limit if time_limit is not None else get_time_limit()
    node_limit = node_limit if node_limit is not None else get_node_limit()
    objective = ObjectiveKind(objective)
    trace = _load_trace(trace_path, trace_offset, synthetic, instance.horizon)
    stem = Path(instance_file).stem

    baseline = solve(instance, trace, SolveConfig(ObjectiveKind.MAKESPAN, time_limit=time_limit, node_limit=node_limit))
    if stretch is None or objective is ObjectiveKind.MAKESPAN:
        doc = result_to_dict(baseline, instance)
        click.echo(f"  optimal makespan {baseline.report.makespan} "
                   f"({'proven' if baseline.proven_optimal else 'best found'}, {baseline.nodes_explored} nodes)")
    else:
        if trace is None:
            raise click.UsageError(f"--objective {objective.value} needs --trace or --synthetic")
        result = solve_stretched(instance, trace, baseline, objective, stretch,
                                 time_limit=time_limit, node_limit=node_limit)
        doc = result_to_dict(result, instance, objective)
        click.echo(f"  optimal makespan {result.opt_makespan}, bound {result.makespan_bound} (S={result.stretch})")
        _echo_report("baseline", doc["baseline"]["report"])
        _echo_report(f"{objective.value}-optimal", doc["constrained"]["report"])
        click.echo(f"  carbon savings {float(result.carbon_savings_pct):.2f}%  "
                   f"energy savings {float(result.energy_savings_pct):.2f}%")

    path = write_json(Path(out) / f"result_{stem}.json", doc)
    click.echo(f"  wrote {path}")


# ── verify ───────────────────────────────────────────────────────────────

@cli.command()
@click.argument("instance_file", type=click.Path(exists=True, dir_okay=False))
@click.argument("schedule_file", type=click.Path(exists=True, dir_okay=False))
@trace_options
@click.option("--oracle", is_flag=True, help="Compare against the exhaustive optimum (tiny instances)")
@click.option("--objective", type=click.Choice([k.value for k in ObjectiveKind]), default=None,
              help="Objective for --oracle (default carbon with a trace, else makespan)")
@click.option("--bound", type=int, default=None, help="Makespan bound for --oracle")
@click.pass_context
@handle_errors
def verify(ctx, instance_file, schedule_file, trace_path, trace_offset, synthetic, oracle, objective, bound):
    """Check a schedule (or result file) against its instance."""
    instance = instance_from_dict(read_json(instance_file))
    doc = read_json(schedule_file)
    schedule = schedule_from_any(doc)
    if isinstance(doc, dict) and doc.get("schema") == "result.v1" and doc.get("mode") == "bilevel":
        # A stretched result carries the bound and objective it was solved under.
        if bound is None:
            bound = doc.get("makespan_bound")
        if objective is None:
            objective = (doc.get("constrained") or {}).get("objective")
    verdict = check_feasible(instance, schedule)
    if not verdict.ok:
        click.echo(click.style(f"  INFEASIBLE: {len(verdict.violations)} violation(s)", fg="red"))
        for v in verdict.violations:
            click.echo(f"    [{v.family.value}] {v.message}")
        ctx.exit(1)

    trace = _load_trace(trace_path, trace_offset, synthetic, instance.horizon)
    report = evaluate(instance, schedule, trace)
    click.echo(click.style("  ok: schedule is feasible", fg="green"))
    _echo_report("objectives", report_to_dict(report))

    if oracle:
        kind = ObjectiveKind(objective) if objective else (
            ObjectiveKind.CARBON if trace is not None else ObjectiveKind.MAKESPAN
        )
        if kind.uses_carbon and trace is None:
            raise click.UsageError(f"--objective {kind.value} needs --trace or --synthetic")
        if bound is not None and report.makespan > bound:
            click.echo(click.style(f"  schedule exceeds bound {bound}", fg="red"))
            ctx.exit(1)
        _, optimum = best(enumerate_schedules(instance, trace, bound), kind)
        ours, theirs = kind.key(report), kind.key(optimum)
        gap = ours[0] - theirs[0]
        click.echo(f"  oracle optimum {theirs[0]} ({kind.value}); optimality gap {gap}")
        if ours > theirs and gap == 0:
            click.echo("  primary objective optimal, tie-break not")


# ── exp ──────────────────────────────────────────────────────────────────

@cli.command()
@click.option("--config", "-c", "config_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Experiment spec (YAML/JSON/TOML)")
@click.option("--out", "-o", default=None, help="Output directory (overrides the spec)")
@click.option("--workers", "-w", type=int, default=None, help="Parallel cell groups")
@click.option("--time-limit", type=float, default=None, help="Wall-clock seconds per solve")
@click.option("--node-limit", type=int, default=None, help="Search nodes per solve")
@handle_errors
def exp(config_path, out, workers, time_limit, node_limit):
    """Run an experiment grid and summarize it."""
    spec = ExperimentSpec.from_mapping(load_config_file(config_path), base_dir=Path(config_path).parent)
    if out:
        spec.output_dir = Path(out)
    if time_limit is not None:
        spec.time_limit = time_limit
    elif spec.time_limit is None:
        spec.time_limit = get_time_limit()
    if node_limit is not None:
        spec.node_limit = node_limit
    elif spec.node_limit is None:
        spec.node_limit = get_node_limit()

    results = run_experiment(spec, workers)
    frame, skipped = load_results(results)
    table = aggregate(frame)
    summary = Path(spec.output_dir) / SUMMARY_FILE
    table.to_csv(summary, index=False)
    click.echo(render_table(table, skipped))
    click.echo(f"  wrote {results} and {summary}")


# ── report ───────────────────────────────────────────────────────────────

@cli.command()
@click.argument("results_csv", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "-o", default=None, help="Output directory (default: <results dir>/report)")
@handle_errors
def report(results_csv, out):
    """Aggregate tables and plot-ready series from a results CSV."""
    out = Path(out) if out else Path(results_csv).parent / "report"
    written, skipped = write_report(results_csv, out)
    click.echo((out / "table.txt").read_text())
    for path in written:
        click.echo(f"  {path}")
    if skipped:
        click.echo(click.style(f"  skipped {skipped} row(s)", fg="yellow"))


if __name__ == "__main__":
    cli()
