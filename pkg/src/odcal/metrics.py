"""Calibration objective and accuracy metrics.

loss is the sum of squared per-sensor deviations; nrmse normalizes the
root mean squared error by the mean ground-truth value, which makes runs
comparable across network scales. Both have the same argmin for a fixed
target vector.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, ValidationError

MEASURES = ("count", "speed")


def _check_pair(y_gt, y_sim) -> tuple[np.ndarray, np.ndarray]:
    y_gt = np.asarray(y_gt, dtype=float)
    y_sim = np.asarray(y_sim, dtype=float)
    if y_gt.ndim != 1 or y_gt.shape != y_sim.shape:
        raise ValidationError("target and simulated vectors must have equal length")
    if y_gt.size < 1:
        raise ValidationError("need at least one sensor")
    return y_gt, y_sim


def loss(y_gt, y_sim) -> float:
    """Sum of squared deviations between target and simulated values."""
    y_gt, y_sim = _check_pair(y_gt, y_sim)
    return float(np.sum((y_gt - y_sim) ** 2))


def nrmse(y_gt, y_sim) -> float:
    """Root mean squared error divided by the mean target value."""
    y_gt, y_sim = _check_pair(y_gt, y_sim)
    mean = float(np.mean(y_gt))
    if mean <= 0:
        raise ZeroDivisionError("mean of ground-truth vector must be positive")
    return float(np.sqrt(np.mean((y_gt - y_sim) ** 2)) / mean)


def improvement(nrmse_init_min: float, nrmse_best: float) -> float:
    """Percentage reduction from the best initial NRMSE to the best found."""
    if nrmse_init_min <= 0:
        raise DomainError("baseline NRMSE must be positive")
    return (nrmse_init_min - nrmse_best) / nrmse_init_min * 100.0


@dataclass(frozen=True)
class EvaluationRecord:
    """One objective evaluation, kept for traces and fit diagnostics."""

    od: np.ndarray
    loss: float
    nrmse: float
    per_sensor: tuple[tuple[float, float], ...]  # (y_gt, y_sim) per sensor
    epoch: int
    seed: int
    measure: str = "count"

    def __post_init__(self):
        if self.loss < 0 or self.nrmse < 0:
            raise ValidationError("loss and nrmse must be non-negative")
        if self.measure not in MEASURES:
            raise ValidationError(f"unknown measure {self.measure!r}")


def fit_to_gt(records: Sequence[EvaluationRecord]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-sensor target, mean and population std of simulated values.

    Expects one record per seed, each holding that seed's best solution.
    """
    if not records:
        raise ValidationError("no records")
    n = len(records[0].per_sensor)
    if any(len(r.per_sensor) != n for r in records):
        raise ValidationError("records disagree on sensor count")
    gt = np.array([pair[0] for pair in records[0].per_sensor])
    sims = np.array([[pair[1] for pair in r.per_sensor] for r in records])
    return gt, sims.mean(axis=0), sims.std(axis=0)  # population convention


def write_records_csv(records: Iterable[EvaluationRecord], path) -> None:
    """Columns: epoch, eval_index, nrmse, loss, seed."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "eval_index", "nrmse", "loss", "seed"])
        for idx, rec in enumerate(records):
            writer.writerow([rec.epoch, idx, repr(rec.nrmse), repr(rec.loss), rec.seed])


def write_fit_csv(sensor_ids, gt, sim_mean, sim_std, path) -> None:
    """Columns: sensor_id, y_gt, sim_mean, sim_std (population std)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sensor_id", "y_gt", "sim_mean", "sim_std"])
        for sid, g, m, s in zip(sensor_ids, gt, sim_mean, sim_std):
            writer.writerow([sid, repr(float(g)), repr(float(m)), repr(float(s))])
