"""Command-line entry point: ``predkl <experiment> [--config PATH] ...``.

Exit status is 0 when every check passes, 2 when a statistical check
fails and 1 on errors (bad config, numerical failure).
"""

from __future__ import annotations

import sys
from typing import Optional

import click

from . import __version__
from .config import EXPERIMENTS, ExperimentConfig, parse_config
from .errors import ConfigError
from .experiments import EXIT_ERROR, PLOT_KINDS, RunRecord, emit_plotdata, reproduce, run, write_record

DEFAULT_CONFIGS = {
    "risk-table": """\
experiment = risk-table
model.p = 3
model.v_x = 1
model.v_y = 1
prior.1.kind = uniform
prior.2.kind = harmonic
mu.radii = 0, 1, 2, 4
budget = 20000
""",
    "dominance-scan": """\
experiment = dominance-scan
model.p = 3
model.v_x = 1
model.v_y = 1
prior.1.kind = harmonic
prior.2.kind = gaussian
prior.2.tau2 = 1
mu.radii = 0, 1, 2, 4, 8
budget = 20000
""",
    "verify-bridge": """\
experiment = verify-bridge
model.p = 1
model.v_x = 1
model.v_y = 1
prior.1.kind = gaussian
prior.1.tau2 = 1
mu.radii = 0
budget = 100000
""",
    "blyth-run": """\
experiment = blyth-run
model.p = 1
model.v_x = 1
model.v_y = 1
prior.1.kind = uniform
blyth.n = 2, 8, 32
budget = 20000
""",
    "check-admissibility": """\
experiment = check-admissibility
model.p = 1
model.v_x = 1
model.v_y = 1
prior.1.kind = uniform
check.p = 1, 2, 3
""",
    "truncation-demo": """\
experiment = truncation-demo
model.p = 1
model.v_x = 1
model.bound = 1
truncation.edges = 0, 0.5, 1
truncation.values = 1.5, 0.5
truncation.mu = 0, 0.25, 0.5, 1
""",
}


def _load(experiment: str, config: Optional[str]) -> ExperimentConfig:
    if config is None:
        return parse_config(DEFAULT_CONFIGS[experiment])
    with open(config, encoding="utf-8") as fh:
        cfg = parse_config(fh.read())
    if cfg.experiment != experiment:
        raise ConfigError(f"config is for {cfg.experiment!r}, not {experiment!r}", None, "experiment")
    return cfg


def _summary(record: RunRecord) -> str:
    lines = [f"{record.experiment}: {record.status} ({record.wall_clock_seconds:.1f} s)"]
    if record.error:
        lines.append(f"  error: {record.error}")
    for check in record.checks:
        lines.append(f"  [{'PASS' if check['passed'] else 'FAIL'}] {check['name']}")
    return "\n".join(lines)


def _make_command(experiment: str):
    @click.command(name=experiment, help=f"Run the {experiment} experiment.")
    @click.option("--config", "config", type=click.Path(exists=True, dir_okay=False),
                  help="key = value config file (defaults to a built-in example).")
    @click.option("--seed", type=int, help="Override the master seed.")
    @click.option("--workers", type=click.IntRange(min=1), help="Worker threads.")
    @click.option("--output", type=click.Path(dir_okay=False), help="Where to write the record.")
    @click.option("--format", "fmt", type=click.Choice(["json", "csv"]), help="Output format.")
    def command(config, seed, workers, output, fmt):
        try:
            cfg = _load(experiment, config)
            if seed is not None:
                cfg.seed = seed
            if workers is not None:
                cfg.workers = workers
            if output is not None:
                cfg.output_path = output
            if fmt is not None:
                cfg.output_format = fmt
            record = run(cfg, write=False)
            if cfg.output_path:
                path = write_record(record, cfg.output_path, cfg.output_format)
                click.echo(f"wrote {path}", err=True)
            else:
                click.echo(record.to_json() if cfg.output_format == "json" else "", nl=False)
        except (ConfigError, OSError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_ERROR)
        click.echo(_summary(record), err=True)
        sys.exit(record.exit_code)

    return command


@click.group()
@click.version_option(__version__, prog_name="predkl")
def main():
    """Predictive density risk experiments."""


for _name in EXPERIMENTS:
    main.add_command(_make_command(_name))


@main.command()
@click.argument("record_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--kind", type=click.Choice(PLOT_KINDS), help="Table to emit (default: by experiment).")
@click.option("--output", type=click.Path(dir_okay=False), help="CSV path (default: stdout).")
def plotdata(record_path, kind, output):
    """Emit a plot-ready CSV table from a JSON run record."""
    try:
        with open(record_path, encoding="utf-8") as fh:
            record = RunRecord.from_json(fh.read())
        text = emit_plotdata(record, kind, output)
    except (ValueError, KeyError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_ERROR)
    if not output:
        click.echo(text, nl=False)


@main.command()
@click.argument("record_path", type=click.Path(exists=True, dir_okay=False))
def rerun(record_path):
    """Re-execute a JSON record's embedded config and compare every cell."""
    with open(record_path, encoding="utf-8") as fh:
        record = RunRecord.from_json(fh.read())
    same, diffs = reproduce(record)
    for path, old, new in diffs[:20]:
        click.echo(f"  {path}: {old!r} != {new!r}", err=True)
    click.echo("identical" if same else f"{len(diffs)} differences")
    sys.exit(0 if same else EXIT_ERROR)


@main.command("show-config")
@click.argument("experiment", type=click.Choice(EXPERIMENTS))
def show_config(experiment):
    """Print the built-in example config for EXPERIMENT."""
    click.echo(DEFAULT_CONFIGS[experiment], nl=False)


if __name__ == "__main__":
    main()
