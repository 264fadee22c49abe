import numpy as np
import pytest
from threadpoolctl import threadpool_limits

from odcal.archetypes import build_simple_ramp
from odcal.network import generate_od_pairs
from odcal.simulator import SimulatorConfig, TrafficSimulator


@pytest.fixture(autouse=True, scope="session")
def _single_threaded_blas():
    # small-matrix workloads; thread handoff dominates otherwise
    with threadpool_limits(limits=1):
        yield


@pytest.fixture(scope="session")
def simple_ramp():
    network, partition = build_simple_ramp()
    pairs = generate_od_pairs(partition, network)
    return network, partition, pairs


@pytest.fixture(scope="session")
def ramp_simulator(simple_ramp):
    network, partition, pairs = simple_ramp
    return TrafficSimulator(network, partition, pairs, SimulatorConfig())


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
