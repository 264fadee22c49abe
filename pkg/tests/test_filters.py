import numpy as np
import pytest

from odcal.archetypes import build_corridor, build_simple_ramp
from odcal.errors import DiagnosticError, ValidationError
from odcal.filters import filter_conservation, filter_taz_granularity
from odcal.network import (
    Link,
    Node,
    RoadNetwork,
    Sensor,
    TazPartition,
    Zone,
)


def ramp_with_counts(up_series, down_series):
    """Simple ramp network; interval data injected on the merge sensors."""
    network, partition = build_simple_ramp()
    counts = {
        0: np.asarray(up_series, dtype=float),
        1: np.asarray(down_series, dtype=float),
        2: np.asarray(down_series, dtype=float),  # off-ramp side stays clean
    }
    return network, counts


def two_on_ramp_network():
    """Mainline with two on-ramps whose entry nodes share one TAZ."""
    nodes = (
        Node(0, 0, 0), Node(1, 1, 0), Node(2, 2, 0), Node(3, 3, 0),
        Node(4, 1, -1), Node(5, 2, -1),
    )
    links = (
        Link(0, 0, 1, 1000.0, 3, 30.0, 6000.0, "mainline"),
        Link(1, 1, 2, 1000.0, 3, 30.0, 6000.0, "mainline"),
        Link(2, 2, 3, 1000.0, 3, 30.0, 6000.0, "mainline"),
        Link(3, 4, 1, 300.0, 1, 15.0, 1800.0, "on-ramp"),
        Link(4, 5, 2, 300.0, 1, 15.0, 1800.0, "on-ramp"),
    )
    sensors = (Sensor(0, 0), Sensor(1, 1), Sensor(2, 2))
    network = RoadNetwork(nodes, links, sensors)
    partition = TazPartition((
        Zone(0, sources=(0,)),
        Zone(1, sources=(4, 5)),   # one TAZ feeding both on-ramps
        Zone(2, sinks=(3,)),
    ))
    return network, partition


class TestConservation:
    def test_frequent_on_ramp_violation_is_flagged(self):
        # upstream exceeds downstream in 8 of 10 intervals
        up = [120] * 8 + [90, 90]
        down = [100] * 10
        network, counts = ramp_with_counts(up, down)
        diag = filter_conservation(network, counts)
        assert diag.verdicts[0] == "conservation-violation"
        assert diag.verdicts[1] == "conservation-violation"
        assert diag.violation_fraction[0] == pytest.approx(0.8)

    def test_clean_data_all_retained(self):
        network, counts = ramp_with_counts([100] * 10, [130] * 10)
        diag = filter_conservation(network, counts)
        assert set(diag.verdicts.values()) == {"retained"}

    def test_off_ramp_violation_direction(self):
        # downstream of the off-ramp exceeds the merge section in every interval
        network, _ = build_simple_ramp()
        counts = {
            0: np.full(10, 100.0),
            1: np.full(10, 100.0),
            2: np.full(10, 150.0),   # off-ramp should only drain flow
        }
        diag = filter_conservation(network, counts)
        assert diag.verdicts[1] == "conservation-violation"
        assert diag.verdicts[2] == "conservation-violation"
        assert diag.verdicts[0] == "retained"

    def test_rare_violations_below_threshold_survive(self):
        up = [120] * 4 + [90] * 6   # 40% of intervals violate
        network, counts = ramp_with_counts(up, [100] * 10)
        diag = filter_conservation(network, counts)
        assert set(diag.verdicts.values()) == {"retained"}

    def test_margin_tolerates_small_excess(self):
        up = [101] * 10
        network, counts = ramp_with_counts(up, [100] * 10)
        assert set(
            filter_conservation(network, counts, margin=2.0).verdicts.values()
        ) == {"retained"}
        flagged = filter_conservation(network, counts, margin=0.5).verdicts
        assert flagged[0] == "conservation-violation"

    def test_missing_series_rejected(self):
        network, counts = ramp_with_counts([1] * 3, [1] * 3)
        counts.pop(2)
        with pytest.raises(ValidationError):
            filter_conservation(network, counts)

    def test_unlocatable_sensor_raises_diagnostic_error(self):
        network, counts = ramp_with_counts([1] * 3, [1] * 3)
        counts[99] = np.ones(3)   # sensor id that sits on no mainline chain
        with pytest.raises(DiagnosticError):
            filter_conservation(network, counts)

    def test_idempotent_on_clean_data(self):
        network, counts = ramp_with_counts([100] * 10, [130] * 10)
        first = filter_conservation(network, counts)
        second = filter_conservation(network, counts)
        assert first.verdicts == second.verdicts
        assert first.violation_fraction == second.violation_fraction


class TestTazGranularity:
    def test_sensor_between_two_on_ramps_of_one_taz_excluded(self):
        network, partition = two_on_ramp_network()
        assert filter_taz_granularity(network, partition) == (1,)

    def test_one_ramp_per_taz_excludes_nothing(self):
        network, partition = build_simple_ramp()
        assert filter_taz_granularity(network, partition) == ()
        corridor, cpart = build_corridor(zones=6)
        assert filter_taz_granularity(corridor, cpart) == ()

    def test_two_off_ramps_of_one_taz_excluded(self):
        nodes = (
            Node(0, 0, 0), Node(1, 1, 0), Node(2, 2, 0), Node(3, 3, 0),
            Node(4, 1, -1), Node(5, 2, -1),
        )
        links = (
            Link(0, 0, 1, 1000.0, 3, 30.0, 6000.0, "mainline"),
            Link(1, 1, 2, 1000.0, 3, 30.0, 6000.0, "mainline"),
            Link(2, 2, 3, 1000.0, 3, 30.0, 6000.0, "mainline"),
            Link(3, 1, 4, 300.0, 1, 15.0, 1800.0, "off-ramp"),
            Link(4, 2, 5, 300.0, 1, 15.0, 1800.0, "off-ramp"),
        )
        sensors = (Sensor(0, 0), Sensor(1, 1), Sensor(2, 2))
        network = RoadNetwork(nodes, links, sensors)
        partition = TazPartition((
            Zone(0, sources=(0,)),
            Zone(1, sinks=(4, 5)),
            Zone(2, sinks=(3,)),
        ))
        assert filter_taz_granularity(network, partition) == (1,)

    def test_distinct_tazs_not_excluded(self):
        network, _ = two_on_ramp_network()
        partition = TazPartition((
            Zone(0, sources=(0,)),
            Zone(1, sources=(4,)),
            Zone(2, sources=(5,)),
            Zone(3, sinks=(3,)),
        ))
        assert filter_taz_granularity(network, partition) == ()

    def test_idempotent_after_exclusion(self):
        network, partition = two_on_ramp_network()
        excluded = filter_taz_granularity(network, partition)
        stripped = RoadNetwork(
            network.nodes, network.links,
            tuple(s for s in network.sensors if s.id not in excluded),
        )
        assert filter_taz_granularity(stripped, partition) == ()
