"""Command-line interface.

Subcommands: gen-network, gen-gt, run, filter-sensors, sensitivity,
report. Exit codes: 0 success, 1 validation error, 2 numerical failure,
3 partial completion.
"""

from __future__ import annotations

import csv
import json
import sys
from pathlib import Path

import click
import numpy as np
from threadpoolctl import threadpool_limits

from .archetypes import ARCHETYPES, build_archetype
from .errors import (
    ConfigurationError,
    DomainError,
    NumericalError,
    RoutingError,
    ValidationError,
)
from .experiment import (
    ExperimentSpec,
    build_scenario,
    make_objective,
    run_experiment,
)
from .experiment import report as build_report
from .filters import filter_conservation, filter_taz_granularity
from .kernels import KERNEL_KINDS
from .metrics import MEASURES
from .network import generate_od_pairs, network_from_json, network_to_json
from .optimizers import METHODS
from .sensitivity import classify_variables
from .simulator import GroundTruth, generate_ground_truth

EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2
EXIT_PARTIAL = 3


@click.group()
def cli():
    """Simulation-based OD demand calibration benchmark."""


@cli.command("gen-network")
@click.option("--archetype", type=click.Choice(ARCHETYPES), required=True)
@click.option("--scale", type=int, default=None, help="archetype scale parameter")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def gen_network(archetype, scale, out):
    """Build an archetype network and write it as JSON."""
    network, partition = build_archetype(archetype, scale)
    Path(out).write_text(network_to_json(network, partition))
    pairs = generate_od_pairs(partition, network)
    click.echo(
        f"{archetype}: {len(network.nodes)} nodes, {len(network.links)} links, "
        f"{partition.num_zones} TAZes, {pairs.dimension} OD pairs, "
        f"{len(network.sensors)} sensors -> {out}"
    )


def _spec_for_network(network, **kwargs) -> ExperimentSpec:
    meta = network.meta
    archetype = meta.get("archetype", "simple-ramp")
    return ExperimentSpec(archetype=archetype, scale=meta.get("scale"), **kwargs)


@cli.command("gen-gt")
@click.option("--network", "network_path", type=click.Path(exists=True), required=True)
@click.option("--seed", type=int, default=0)
@click.option("--replications", type=int, default=None)
@click.option("--mode", type=click.Choice(["det", "stoch"]), default=None)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def gen_gt(network_path, seed, replications, mode, out):
    """Synthesize ground-truth sensor targets for a network."""
    network, partition = network_from_json(Path(network_path).read_text())
    mode_name = {"det": "deterministic", "stoch": "stochastic", None: None}[mode]
    spec = _spec_for_network(network, mode=mode_name, gt_seed=seed)
    scenario = build_scenario(spec, network, partition)
    if replications is None:
        replications = 1 if scenario.simulator.config.mode == "deterministic" else 20
    gt = generate_ground_truth(
        scenario.simulator, scenario.lower, scenario.upper, seed, replications
    )
    Path(out).write_text(gt.to_json())
    click.echo(
        f"ground truth over {len(gt.sensor_ids)} sensors "
        f"({gt.mode}, R={gt.replications}) -> {out}"
    )


@cli.command("run")
@click.option("--network", "network_path", type=click.Path(exists=True), default=None)
@click.option("--gt", "gt_path", type=click.Path(exists=True), default=None)
@click.option("--archetype", type=click.Choice(ARCHETYPES), default=None)
@click.option("--scale", type=int, default=None)
@click.option("--model", "models", type=click.Choice(METHODS), multiple=True)
@click.option("--kernel", type=click.Choice(KERNEL_KINDS), default=None)
@click.option("--measure", type=click.Choice(MEASURES), default=None)
@click.option("--epochs", type=int, default=None)
@click.option("--batch-size", type=int, default=None)
@click.option("--init-points", type=int, default=None)
@click.option("--runs", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--workers", type=int, default=None)
@click.option("--exclude-unobservable", is_flag=True, default=False)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="JSON file mirroring these flags; explicit flags win")
def run_cmd(network_path, gt_path, archetype, scale, models, kernel, measure,
            epochs, batch_size, init_points, runs, seed, workers,
            exclude_unobservable, out_dir, config_path):
    """Run a calibration experiment across methods and seeds."""
    file_cfg = {}
    if config_path:
        file_cfg = json.loads(Path(config_path).read_text())

    def pick(flag_value, key, fallback):
        if flag_value not in (None, (), False):
            return flag_value
        return file_cfg.get(key, fallback)

    network = partition = None
    if network_path:
        network, partition = network_from_json(Path(network_path).read_text())
        archetype = network.meta.get("archetype", archetype or "simple-ramp")
        scale = network.meta.get("scale", scale)

    spec = ExperimentSpec(
        archetype=pick(archetype, "archetype", "simple-ramp"),
        scale=pick(scale, "scale", None),
        methods=tuple(pick(models, "model", ("random",))),
        kernel=pick(kernel, "kernel", "matern52"),
        measure=pick(measure, "measure", "count"),
        runs=pick(runs, "runs", None),
        seed=pick(seed, "seed", 0),
        epochs=pick(epochs, "epochs", None),
        batch_size=pick(batch_size, "batch_size", None),
        init_points=pick(init_points, "init_points", None),
        workers=pick(workers, "workers", 1),
        exclude_unobservable=bool(pick(exclude_unobservable,
                                       "exclude_unobservable", False)),
        out_dir=pick(out_dir, "out", "results"),
    )
    gt = GroundTruth.from_json(Path(gt_path).read_text()) if gt_path else None
    bundle = run_experiment(spec, network, partition, gt)
    click.echo(f"experiment written to {bundle.out_dir}")
    if bundle.failures:
        for key, msg in bundle.failures.items():
            click.echo(f"failed {key}: {msg}", err=True)
    if bundle.partial:
        sys.exit(EXIT_PARTIAL)


@cli.command("filter-sensors")
@click.option("--network", "network_path", type=click.Path(exists=True), required=True)
@click.option("--counts", "counts_path", type=click.Path(exists=True), required=True,
              help="CSV with columns sensor_id, interval, count")
@click.option("--threshold", type=float, default=0.5)
@click.option("--margin", type=float, default=0.0)
def filter_sensors(network_path, counts_path, threshold, margin):
    """Run both sensor filters and print per-sensor verdicts as CSV."""
    network, partition = network_from_json(Path(network_path).read_text())
    series: dict[int, list[float]] = {}
    with open(counts_path, newline="") as fh:
        for row in csv.DictReader(fh):
            series.setdefault(int(row["sensor_id"]), []).append(
                (int(row["interval"]), float(row["count"]))
            )
    counts = {
        sid: np.array([c for _, c in sorted(vals)]) for sid, vals in series.items()
    }
    diag = filter_conservation(network, counts, threshold, margin)
    taz_excluded = set(filter_taz_granularity(network, partition))
    click.echo("sensor_id,verdict,violation_fraction,violation_margin")
    for sensor in network.sensors:
        verdict = diag.verdicts[sensor.id]
        if verdict == "retained" and sensor.id in taz_excluded:
            verdict = "taz-granularity-excluded"
        click.echo(
            f"{sensor.id},{verdict},{diag.violation_fraction[sensor.id]!r},"
            f"{diag.violation_margin[sensor.id]!r}"
        )


@cli.command("sensitivity")
@click.option("--network", "network_path", type=click.Path(exists=True), required=True)
@click.option("--gt", "gt_path", type=click.Path(exists=True), required=True)
@click.option("--probes", type=int, default=5)
@click.option("--seed", type=int, default=0)
def sensitivity_cmd(network_path, gt_path, probes, seed):
    """Classify OD dimensions by objective sensitivity."""
    network, partition = network_from_json(Path(network_path).read_text())
    spec = _spec_for_network(network)
    scenario = build_scenario(spec, network, partition)
    gt = GroundTruth.from_json(Path(gt_path).read_text())
    oracle = make_objective(scenario, gt, "count")

    def value_oracle(x, probe_seed):
        return oracle(x, probe_seed).value

    rep = classify_variables(
        value_oracle, (scenario.lower, scenario.upper), probes, seed=seed
    )
    click.echo("dimension,origin,destination,class,effect")
    for d, (cls, effect) in enumerate(zip(rep.classes, rep.effects)):
        o, dd = scenario.pairs.pairs[d]
        click.echo(f"{d},{o},{dd},{cls},{float(effect)!r}")
    click.echo(
        f"# dominant={rep.count('dominant')} secondary={rep.count('secondary')} "
        f"negligible={rep.count('negligible')}"
    )


@cli.command("report")
@click.option("--in", "in_dir", type=click.Path(exists=True, file_okay=False),
              required=True)
def report_cmd(in_dir):
    """Rebuild aggregate/convergence/fit CSVs from per-run files."""
    paths = build_report(in_dir)
    for name, path in sorted(paths.items()):
        click.echo(f"{name}: {path}")


def main():
    try:
        with threadpool_limits(limits=1):
            cli(standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        sys.exit(EXIT_VALIDATION)
    except click.exceptions.Abort:
        sys.exit(EXIT_VALIDATION)
    except (ValidationError, ConfigurationError, DomainError, RoutingError,
            ZeroDivisionError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)
    except NumericalError as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        sys.exit(EXIT_NUMERICAL)


if __name__ == "__main__":
    main()
