"""Simulation-based origin-destination demand calibration benchmark."""

from .archetypes import ARCHETYPES, build_archetype
from .experiment import ExperimentSpec, run_experiment
from .metrics import improvement, loss, nrmse
from .network import (
    ODPairSet,
    ODVector,
    RoadNetwork,
    TazPartition,
    generate_od_pairs,
    identify_unobservable_pairs,
)
from .optimizers import METHODS, OptimizerConfig, run
from .simulator import (
    GroundTruth,
    SimulatorConfig,
    TrafficSimulator,
    generate_ground_truth,
)

__version__ = "0.1.0"

__all__ = [
    "ARCHETYPES",
    "METHODS",
    "ExperimentSpec",
    "GroundTruth",
    "ODPairSet",
    "ODVector",
    "OptimizerConfig",
    "RoadNetwork",
    "SimulatorConfig",
    "TazPartition",
    "TrafficSimulator",
    "build_archetype",
    "generate_ground_truth",
    "generate_od_pairs",
    "identify_unobservable_pairs",
    "improvement",
    "loss",
    "nrmse",
    "run",
    "run_experiment",
]
