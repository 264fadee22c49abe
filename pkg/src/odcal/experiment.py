"""Experiment orchestration: scenario assembly, benchmark runs, reporting.

A scenario bundles an archetype network, its feasible OD pairs, the
seeded simulator, and synthetic ground truth. Every run seed draws one
shared initial design used by all methods; per-run traces land in
per-run-unique files and the report step recomputes every aggregate from
those files alone.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import metrics
from .archetypes import ARCHETYPES, build_archetype
from .errors import ConfigurationError, ValidationError
from .network import (
    ODPairSet,
    RoadNetwork,
    TazPartition,
    generate_od_pairs,
    identify_unobservable_pairs,
    network_from_json,
    network_to_json,
)
from .optimizers import METHODS, EvalOutcome, OptimizerConfig, RunResult, run
from .seeding import derive_seed
from .simulator import (
    GroundTruth,
    SimulatorConfig,
    TrafficSimulator,
    generate_ground_truth,
)

# Per-archetype defaults: simulation / sensor / OD windows, simulator mode,
# route temperature, optimizer budget, number of independent runs, OD bounds.
ARCHETYPE_DEFAULTS: dict[str, dict] = {
    "simple-ramp": dict(
        simulation_window=(0.0, 3600.0), sensor_window=(0.0, 3600.0),
        od_window=(0.0, 3300.0), mode="deterministic", route_temperature=0.0,
        init_points=10, epochs=50, batch_size=2, num_restarts=8,
        raw_samples=128, sample_shape=64, runs=10, od_bounds=(1.0, 2500.0),
    ),
    "one-way-corridor": dict(
        simulation_window=(0.0, 3900.0), sensor_window=(300.0, 3900.0),
        od_window=(0.0, 3600.0), mode="stochastic", route_temperature=0.0,
        init_points=20, epochs=100, batch_size=3, num_restarts=16,
        raw_samples=256, sample_shape=64, runs=10, od_bounds=(1.0, 2000.0),
    ),
    "junction": dict(
        simulation_window=(0.0, 3900.0), sensor_window=(300.0, 3900.0),
        od_window=(0.0, 3600.0), mode="stochastic", route_temperature=30.0,
        init_points=30, epochs=200, batch_size=4, num_restarts=32,
        raw_samples=512, sample_shape=128, runs=10, od_bounds=(1.0, 2000.0),
    ),
    "small-region": dict(
        simulation_window=(0.0, 4200.0), sensor_window=(600.0, 4200.0),
        od_window=(0.0, 3600.0), mode="stochastic", route_temperature=30.0,
        init_points=50, epochs=600, batch_size=5, num_restarts=64,
        raw_samples=1024, sample_shape=128, runs=3, od_bounds=(1.0, 2000.0),
    ),
    "region": dict(
        simulation_window=(0.0, 4800.0), sensor_window=(1200.0, 4800.0),
        od_window=(0.0, 3600.0), mode="stochastic", route_temperature=30.0,
        init_points=20, epochs=5, batch_size=2, num_restarts=32,
        raw_samples=512, sample_shape=128, runs=1, od_bounds=(1.0, 2000.0),
    ),
}

GT_REPLICATIONS_STOCHASTIC = 20


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything needed to reproduce one benchmark experiment.

    Fields left at None fall back to the archetype defaults above.
    """

    archetype: str = "simple-ramp"
    scale: int | None = None
    methods: tuple[str, ...] = ("random",)
    kernel: str = "matern52"
    measure: str = "count"
    runs: int | None = None
    seed: int = 0
    gt_seed: int | None = None
    gt_replications: int | None = None
    mode: str | None = None
    init_points: int | None = None
    epochs: int | None = None
    batch_size: int | None = None
    num_restarts: int | None = None
    raw_samples: int | None = None
    sample_shape: int | None = None
    exclude_unobservable: bool = False
    workers: int = 1
    out_dir: str = "results"

    def __post_init__(self):
        if self.archetype not in ARCHETYPES:
            raise ConfigurationError(f"unknown archetype {self.archetype!r}")
        for method in self.methods:
            if method not in METHODS:
                raise ConfigurationError(f"unknown method {method!r}")
        if self.measure not in metrics.MEASURES:
            raise ConfigurationError(f"unknown measure {self.measure!r}")
        if self.runs is not None and self.runs < 1:
            raise ConfigurationError("runs must be >= 1")
        if self.workers < 1:
            raise ConfigurationError("workers must be >= 1")

    def defaults(self) -> dict:
        return ARCHETYPE_DEFAULTS[self.archetype]

    def resolved_runs(self) -> int:
        return self.runs if self.runs is not None else self.defaults()["runs"]

    def resolved_gt_seed(self) -> int:
        return self.gt_seed if self.gt_seed is not None else derive_seed(self.seed, "gt")

    def simulator_config(self) -> SimulatorConfig:
        d = self.defaults()
        return SimulatorConfig(
            mode=self.mode if self.mode is not None else d["mode"],
            simulation_window=d["simulation_window"],
            sensor_window=d["sensor_window"],
            od_window=d["od_window"],
            route_temperature=d["route_temperature"],
        )

    def optimizer_config(self, method: str, run_seed: int) -> OptimizerConfig:
        d = self.defaults()

        def pick(name):
            v = getattr(self, name)
            return v if v is not None else d[name]

        return OptimizerConfig(
            method=method,
            kernel=self.kernel,
            init_points=pick("init_points"),
            epochs=pick("epochs"),
            batch_size=pick("batch_size"),
            num_restarts=pick("num_restarts"),
            raw_samples=pick("raw_samples"),
            sample_shape=pick("sample_shape"),
            seed=run_seed,
        )

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentSpec":
        doc = dict(doc)
        if "methods" in doc:
            doc["methods"] = tuple(doc["methods"])
        return cls(**doc)


@dataclass
class Scenario:
    network: RoadNetwork
    partition: TazPartition
    pairs: ODPairSet
    simulator: TrafficSimulator
    lower: np.ndarray
    upper: np.ndarray
    excluded: tuple[int, ...] = ()

    @property
    def dimension(self) -> int:
        return self.pairs.dimension

    @property
    def included(self) -> np.ndarray:
        mask = np.ones(self.dimension, dtype=bool)
        mask[list(self.excluded)] = False
        return np.flatnonzero(mask)


def build_scenario(
    spec: ExperimentSpec,
    network: RoadNetwork | None = None,
    partition: TazPartition | None = None,
) -> Scenario:
    if network is None or partition is None:
        network, partition = build_archetype(spec.archetype, spec.scale)
    pairs = generate_od_pairs(partition, network)
    simulator = TrafficSimulator(network, partition, pairs, spec.simulator_config())
    meta = network.meta
    bounds = (
        (meta["od_lower"], meta["od_upper"])
        if "od_lower" in meta
        else spec.defaults()["od_bounds"]
    )
    lower = np.full(pairs.dimension, float(bounds[0]))
    upper = np.full(pairs.dimension, float(bounds[1]))
    excluded: tuple[int, ...] = ()
    if spec.exclude_unobservable:
        excluded = identify_unobservable_pairs(network, pairs, simulator.routes)
    return Scenario(network, partition, pairs, simulator, lower, upper, excluded)


def make_objective(scenario: Scenario, gt: GroundTruth, measure: str):
    """Objective oracle over the (possibly reduced) demand space.

    Excluded dimensions are fixed at zero demand; the oracle returns the
    squared-distance loss and the NRMSE against the ground-truth targets.
    """
    targets = gt.counts if measure == "count" else gt.speeds
    included = scenario.included
    dim = scenario.dimension

    def oracle(x_sub: np.ndarray, seed: int) -> EvalOutcome:
        x_full = np.zeros(dim)
        x_full[included] = x_sub
        result = scenario.simulator.simulate(x_full, seed)
        y_sim = result.counts if measure == "count" else result.speeds
        return EvalOutcome(
            value=metrics.loss(targets, y_sim),
            nrmse=metrics.nrmse(targets, y_sim),
        )

    return oracle


def simulate_best(scenario: Scenario, gt: GroundTruth, measure: str,
                  x_sub: np.ndarray, seed: int):
    """Replay one evaluation to recover its per-sensor values."""
    x_full = np.zeros(scenario.dimension)
    x_full[scenario.included] = x_sub
    result = scenario.simulator.simulate(x_full, seed)
    y_sim = result.counts if measure == "count" else result.speeds
    targets = gt.counts if measure == "count" else gt.speeds
    return x_full, targets, np.asarray(y_sim, dtype=float)


# ---------------------------------------------------------------------------
# Single-run execution (usable directly or inside a worker process)

def execute_run(
    spec: ExperimentSpec,
    network_json: str,
    gt_json: str,
    method: str,
    run_index: int,
    out_dir: str | None = None,
) -> dict:
    """Run one method with one run seed; write per-run CSV and JSON files.

    Returns the run summary (also stored as JSON). Rebuilds the scenario
    from the serialized inputs so it is safe to call in a worker process.
    """
    network, partition = network_from_json(network_json)
    gt = GroundTruth.from_json(gt_json)
    scenario = build_scenario(spec, network, partition)
    oracle = make_objective(scenario, gt, spec.measure)
    included = scenario.included

    run_seed = spec.seed + run_index
    config = spec.optimizer_config(method, run_seed)
    result: RunResult = run(
        method, oracle, len(included),
        (scenario.lower[included], scenario.upper[included]), config,
    )

    summary = summarize_run(spec, scenario, gt, method, run_index, result)
    if out_dir is not None:
        write_run_files(out_dir, method, run_index, result, summary)
    return summary


def summarize_run(spec, scenario, gt, method, run_index, result: RunResult) -> dict:
    log = result.log
    summary = {
        "method": method,
        "run_index": run_index,
        "run_seed": spec.seed + run_index,
        "archetype": spec.archetype,
        "measure": spec.measure,
        "dimension": scenario.dimension,
        "effective_dimension": len(scenario.included),
        "excluded_pairs": list(scenario.excluded),
        "epochs": result.config.epochs,
        "evaluations": len(log),
        "trace": [float(t) for t in result.trace],
        "epoch_records": result.epoch_records,
        "error": result.error,
    }
    if len(log) == 0:
        return summary

    best_idx = log.incumbent_index
    best_unit = log.points[best_idx]
    best_sub = scenario.lower[scenario.included] + best_unit * (
        scenario.upper[scenario.included] - scenario.lower[scenario.included]
    )
    x_full, targets, y_sim = simulate_best(
        scenario, gt, spec.measure, best_sub, log.seeds[best_idx]
    )
    init_nrmses = [n for n, e in zip(log.nrmses, log.epochs) if e == 0]
    best_nrmse = log.incumbent_nrmse
    summary.update({
        "init_min_nrmse": min(init_nrmses) if init_nrmses else None,
        "init_mean_nrmse": float(np.mean(init_nrmses)) if init_nrmses else None,
        "best_nrmse": best_nrmse,
        "best_loss": log.incumbent_value,
        "improvement_pct": (
            metrics.improvement(min(init_nrmses), best_nrmse)
            if init_nrmses else None
        ),
        "best_od": [float(v) for v in x_full],
        "best_eval_seed": log.seeds[best_idx],
        "per_sensor": {
            str(sid): {"y_gt": float(g), "y_sim": float(s)}
            for sid, g, s in zip(gt.sensor_ids, targets, y_sim)
        },
    })
    return summary


def run_csv_path(out_dir, method, run_index) -> Path:
    return Path(out_dir) / "runs" / f"{method}_run{run_index}.csv"


def run_json_path(out_dir, method, run_index) -> Path:
    return Path(out_dir) / "runs" / f"{method}_run{run_index}.json"


def write_run_files(out_dir, method, run_index, result: RunResult, summary: dict):
    runs_dir = Path(out_dir) / "runs"
    runs_dir.mkdir(parents=True, exist_ok=True)
    log = result.log
    with open(run_csv_path(out_dir, method, run_index), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "eval_index", "nrmse", "loss", "seed"])
        for idx in range(len(log)):
            writer.writerow([
                log.epochs[idx], idx, repr(log.nrmses[idx]),
                repr(log.values[idx]), log.seeds[idx],
            ])
    run_json_path(out_dir, method, run_index).write_text(
        json.dumps(summary, indent=2)
    )


def _worker(payload) -> dict:
    spec_doc, network_json, gt_json, method, run_index, out_dir = payload
    spec = ExperimentSpec.from_dict(spec_doc)
    return execute_run(spec, network_json, gt_json, method, run_index, out_dir)


# ---------------------------------------------------------------------------
# Whole experiments

@dataclass
class ExperimentBundle:
    spec: ExperimentSpec
    out_dir: str
    summaries: dict = field(default_factory=dict)   # (method, run) -> summary
    failures: dict = field(default_factory=dict)    # (method, run) -> message

    @property
    def partial(self) -> bool:
        return bool(self.failures) or any(
            s.get("error") for s in self.summaries.values()
        )


def run_experiment(
    spec: ExperimentSpec,
    network: RoadNetwork | None = None,
    partition: TazPartition | None = None,
    gt: GroundTruth | None = None,
) -> ExperimentBundle:
    """Execute every (method, run seed) cell of the spec and write reports.

    Sub-run failures are recorded per run; sibling runs continue and the
    bundle is marked partial.
    """
    out_dir = Path(spec.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    scenario = build_scenario(spec, network, partition)
    network_json = network_to_json(scenario.network, scenario.partition)
    (out_dir / "network.json").write_text(network_json)

    if gt is None:
        replications = spec.gt_replications
        if replications is None:
            replications = (
                1 if scenario.simulator.config.mode == "deterministic"
                else GT_REPLICATIONS_STOCHASTIC
            )
        gt = generate_ground_truth(
            scenario.simulator, scenario.lower, scenario.upper,
            spec.resolved_gt_seed(), replications,
        )
    gt_json = gt.to_json()
    (out_dir / "ground_truth.json").write_text(gt_json)

    runs = spec.resolved_runs()
    tasks = [(method, r) for method in spec.methods for r in range(runs)]
    bundle = ExperimentBundle(spec=spec, out_dir=str(out_dir))
    spec_doc = json.loads(spec.to_json())
    payloads = [
        (spec_doc, network_json, gt_json, method, r, str(out_dir))
        for method, r in tasks
    ]

    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            futures = {pool.submit(_worker, p): t for p, t in zip(payloads, tasks)}
            for future, (method, r) in futures.items():
                try:
                    bundle.summaries[(method, r)] = future.result()
                except Exception as exc:  # sibling runs continue
                    bundle.failures[(method, r)] = f"{type(exc).__name__}: {exc}"
    else:
        for payload, (method, r) in zip(payloads, tasks):
            try:
                bundle.summaries[(method, r)] = _worker(payload)
            except Exception as exc:  # sibling runs continue
                bundle.failures[(method, r)] = f"{type(exc).__name__}: {exc}"

    experiment_doc = {
        "spec": json.loads(spec.to_json()),
        "dimension": scenario.dimension,
        "effective_dimension": len(scenario.included),
        "excluded_pairs": list(scenario.excluded),
        "runs": runs,
        "completed": sorted(f"{m}/{r}" for m, r in bundle.summaries),
        "failed": {f"{m}/{r}": msg for (m, r), msg in bundle.failures.items()},
        "partial": bundle.partial,
    }
    (out_dir / "experiment.json").write_text(json.dumps(experiment_doc, indent=2))
    try:
        report(out_dir)
    except ValidationError:
        if not bundle.partial:
            raise  # nothing failed yet no reports: genuine inconsistency
    return bundle


# ---------------------------------------------------------------------------
# Reporting (reads only the emitted per-run files)

def _load_summaries(out_dir) -> dict[str, list[dict]]:
    runs_dir = Path(out_dir) / "runs"
    if not runs_dir.is_dir():
        raise ValidationError(f"no runs directory under {out_dir}")
    by_method: dict[str, list[dict]] = {}
    for path in sorted(runs_dir.glob("*_run*.json")):
        doc = json.loads(path.read_text())
        if doc.get("error"):
            continue  # aborted runs keep their files but skip aggregation
        by_method.setdefault(doc["method"], []).append(doc)
    if not by_method:
        raise ValidationError(f"no completed run records under {runs_dir}")
    for docs in by_method.values():
        docs.sort(key=lambda d: d["run_index"])
    return by_method


def report(out_dir) -> dict[str, Path]:
    """Emit the aggregate table, per-method convergence and fit CSVs.

    Everything is recomputed from the per-run JSON/CSV files, so the
    aggregates stay exactly reproducible from the persisted artifacts.
    """
    out_dir = Path(out_dir)
    by_method = _load_summaries(out_dir)
    paths: dict[str, Path] = {}

    aggregate_path = out_dir / "aggregate.csv"
    with open(aggregate_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([
            "method", "archetype", "runs",
            "mean_init_nrmse", "mean_init_min_nrmse",
            "mean_best_nrmse", "std_best_nrmse",
            "mean_improvement_pct", "std_improvement_pct",
        ])
        for method in sorted(by_method):
            docs = by_method[method]
            best = np.array([d["best_nrmse"] for d in docs])
            imp = np.array([d["improvement_pct"] for d in docs])
            writer.writerow([
                method, docs[0]["archetype"], len(docs),
                repr(float(np.mean([d["init_mean_nrmse"] for d in docs]))),
                repr(float(np.mean([d["init_min_nrmse"] for d in docs]))),
                repr(float(best.mean())), repr(float(best.std())),
                repr(float(imp.mean())), repr(float(imp.std())),
            ])
    paths["aggregate"] = aggregate_path

    for method, docs in by_method.items():
        traces = np.array([d["trace"] for d in docs])
        conv_path = out_dir / f"convergence_{method}.csv"
        with open(conv_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "mean_nrmse", "std_nrmse"])
            for epoch in range(traces.shape[1]):
                col = traces[:, epoch]
                writer.writerow([
                    epoch, repr(float(col.mean())), repr(float(col.std()))
                ])
        paths[f"convergence_{method}"] = conv_path

        records = [
            metrics.EvaluationRecord(
                od=np.array(d["best_od"]),
                loss=d["best_loss"],
                nrmse=d["best_nrmse"],
                per_sensor=tuple(
                    (v["y_gt"], v["y_sim"]) for v in d["per_sensor"].values()
                ),
                epoch=d["epochs"],
                seed=d["best_eval_seed"],
                measure=d["measure"],
            )
            for d in docs
        ]
        gt_vals, sim_mean, sim_std = metrics.fit_to_gt(records)
        sensor_ids = list(docs[0]["per_sensor"].keys())
        fit_path = out_dir / f"fit_{method}.csv"
        metrics.write_fit_csv(sensor_ids, gt_vals, sim_mean, sim_std, fit_path)
        paths[f"fit_{method}"] = fit_path
    return paths
