"""Sensor diagnostics: count-conservation checks and TAZ-granularity exclusion.

Mainline counts should not decrease past an on-ramp nor increase past an
off-ramp; sensors whose interval data violates that too often are marked
unreliable. Separately, sensors lying between multiple on-ramps of one
origin TAZ (or multiple off-ramps of one destination TAZ) observe only a
subset of that TAZ's flow and are excluded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DiagnosticError, ValidationError
from .network import RoadNetwork, TazPartition

VERDICTS = ("retained", "conservation-violation", "taz-granularity-excluded")


@dataclass(frozen=True)
class SensorDiagnostics:
    """Per-sensor verdicts plus violation statistics; verdicts partition
    the sensor set."""

    verdicts: dict[int, str]
    violation_fraction: dict[int, float]
    violation_margin: dict[int, float]

    def sensors_with(self, verdict: str) -> tuple[int, ...]:
        return tuple(sorted(s for s, v in self.verdicts.items() if v == verdict))


@dataclass(frozen=True)
class _Chain:
    """One walked mainline chain: ordered link ids and ramp attachments."""

    link_ids: tuple[int, ...]
    # attachments: (position between links, kind, ramp end node)
    attachments: tuple[tuple[int, str, int], ...]


def _walk_mainline_chains(network: RoadNetwork) -> list[_Chain]:
    mainline = [l for l in network.links if l.kind == "mainline"]
    out_by_node: dict[int, list] = {}
    in_by_node: dict[int, list] = {}
    for link in mainline:
        out_by_node.setdefault(link.from_node, []).append(link)
        in_by_node.setdefault(link.to_node, []).append(link)

    ramps_at: dict[int, list[tuple[str, int]]] = {}
    for link in network.links:
        if link.kind == "on-ramp":
            ramps_at.setdefault(link.to_node, []).append(("on-ramp", link.from_node))
        elif link.kind == "off-ramp":
            ramps_at.setdefault(link.from_node, []).append(("off-ramp", link.to_node))

    chains = []
    starts = [l for l in mainline
              if l.from_node not in in_by_node and len(out_by_node.get(l.from_node, [])) == 1]
    for start in sorted(starts, key=lambda l: l.id):
        links = [start.id]
        attachments = []
        node = start.to_node
        pos = 1
        while True:
            for kind, ramp_node in ramps_at.get(node, []):
                attachments.append((pos, kind, ramp_node))
            nxt = out_by_node.get(node, [])
            if len(nxt) != 1 or len(in_by_node.get(node, [])) != 1:
                break
            links.append(nxt[0].id)
            node = nxt[0].to_node
            pos += 1
        chains.append(_Chain(tuple(links), tuple(attachments)))
    return chains


def filter_conservation(
    network: RoadNetwork,
    interval_counts: dict[int, np.ndarray],
    violation_threshold: float = 0.5,
    margin: float = 0.0,
) -> SensorDiagnostics:
    """Flag sensor pairs whose ramp-conservation inequality fails too often.

    ``interval_counts`` maps sensor id to its per-interval count series.
    For each ramp the nearest sensors upstream and downstream on the same
    mainline chain are compared per interval: an on-ramp expects
    up <= down, an off-ramp expects up >= down. A pair is flagged when
    the inequality is violated by more than ``margin`` in strictly more
    than ``violation_threshold`` of the intervals; both sensors of a
    flagged pair are marked.
    """
    sensor_by_link = {}
    for sensor in network.sensors:
        if sensor.id not in interval_counts:
            raise ValidationError(f"no interval counts for sensor {sensor.id}")
        sensor_by_link[sensor.link] = sensor.id

    chains = _walk_mainline_chains(network)
    located = {sid: False for sid in interval_counts}
    for chain in chains:
        for link_id in chain.link_ids:
            if link_id in sensor_by_link:
                located[sensor_by_link[link_id]] = True
    missing = [s for s, ok in located.items() if not ok]
    if missing:
        raise DiagnosticError(f"sensors not locatable on a mainline chain: {missing}")

    verdicts = {sid: "retained" for sid in interval_counts}
    fraction = {sid: 0.0 for sid in interval_counts}
    margin_stat = {sid: 0.0 for sid in interval_counts}

    for chain in chains:
        sensor_positions = [
            (pos, sensor_by_link[link_id])
            for pos, link_id in enumerate(chain.link_ids)
            if link_id in sensor_by_link
        ]
        for att_pos, kind, _ in chain.attachments:
            upstream = [s for p, s in sensor_positions if p < att_pos]
            downstream = [s for p, s in sensor_positions if p >= att_pos]
            if not upstream or not downstream:
                continue
            up, down = upstream[-1], downstream[0]
            cu = np.asarray(interval_counts[up], dtype=float)
            cd = np.asarray(interval_counts[down], dtype=float)
            if cu.shape != cd.shape:
                raise ValidationError("interval series lengths differ")
            excess = (cu - cd) if kind == "on-ramp" else (cd - cu)
            violations = excess > margin
            frac = float(violations.mean())
            mean_excess = float(excess[violations].mean()) if violations.any() else 0.0
            for sid in (up, down):
                fraction[sid] = max(fraction[sid], frac)
                margin_stat[sid] = max(margin_stat[sid], mean_excess)
                if frac > violation_threshold:
                    verdicts[sid] = "conservation-violation"

    return SensorDiagnostics(verdicts, fraction, margin_stat)


def filter_taz_granularity(
    network: RoadNetwork,
    partition: TazPartition,
) -> tuple[int, ...]:
    """Sensor ids to exclude for TAZ-resolution reasons.

    A sensor is excluded when it sits strictly between two on-ramps whose
    entry nodes are sources of the same TAZ, or strictly between two
    off-ramps whose exit nodes are sinks of the same TAZ.
    """
    source_zone = {}
    sink_zone = {}
    for zone in partition.zones:
        for node in zone.sources:
            source_zone[node] = zone.id
        for node in zone.sinks:
            sink_zone[node] = zone.id

    sensor_by_link = {s.link: s.id for s in network.sensors}
    excluded: set[int] = set()
    for chain in _walk_mainline_chains(network):
        for kind, zone_of in (("on-ramp", source_zone), ("off-ramp", sink_zone)):
            by_zone: dict[int, list[int]] = {}
            for pos, att_kind, ramp_node in chain.attachments:
                if att_kind == kind and ramp_node in zone_of:
                    by_zone.setdefault(zone_of[ramp_node], []).append(pos)
            for positions in by_zone.values():
                if len(positions) < 2:
                    continue
                lo, hi = min(positions), max(positions)
                for link_pos in range(lo, hi):
                    link_id = chain.link_ids[link_pos]
                    if link_id in sensor_by_link:
                        excluded.add(sensor_by_link[link_id])
    return tuple(sorted(excluded))
