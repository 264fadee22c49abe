"""Partial-completion behavior: failed runs keep their files, reports
cover the surviving runs, and the bundle is marked partial."""

import json
from pathlib import Path

import numpy as np

from odcal.experiment import ExperimentSpec, run_experiment
from odcal.simulator import GroundTruth


def broken_ground_truth(dimension=3, sensors=(0, 1, 2)):
    # zero-mean targets make nrmse raise inside the oracle on every call
    return GroundTruth(
        x_star=np.full(dimension, 100.0),
        sensor_ids=tuple(sensors),
        counts=np.zeros(len(sensors)),
        speeds=np.full(len(sensors), 20.0),
        gt_seed=0,
        replications=1,
        mode="deterministic",
    )


def test_failed_runs_recorded_and_siblings_survive(tmp_path):
    spec = ExperimentSpec(
        archetype="simple-ramp", methods=("random",), runs=2, epochs=3,
        init_points=3, seed=1, measure="count", out_dir=str(tmp_path / "bad"),
    )
    bundle = run_experiment(spec, gt=broken_ground_truth())
    assert bundle.partial
    out = Path(spec.out_dir)
    assert (out / "experiment.json").exists()
    doc = json.loads((out / "experiment.json").read_text())
    assert doc["partial"]
    # run records persist with their error messages and empty logs
    run_doc = json.loads((out / "runs" / "random_run0.json").read_text())
    assert run_doc["error"]


def test_speed_measure_survives_zero_count_targets(tmp_path):
    # the same broken counts are irrelevant when optimizing against speeds
    spec = ExperimentSpec(
        archetype="simple-ramp", methods=("random",), runs=1, epochs=2,
        init_points=3, seed=1, measure="speed", out_dir=str(tmp_path / "ok"),
    )
    bundle = run_experiment(spec, gt=broken_ground_truth())
    assert not bundle.partial
    assert (Path(spec.out_dir) / "aggregate.csv").exists()
