"""Road-network data model: directed links, TAZ partitions, OD pairs.

The network is a directed graph of freeway links. Traffic analysis zones
(TAZes) group source nodes (where demand enters) and sink nodes (where it
leaves); an OD pair is an ordered zone pair with at least one directed
path from a source of the origin to a sink of the destination.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

import networkx as nx
import numpy as np

from .errors import ValidationError

LINK_KINDS = ("mainline", "on-ramp", "off-ramp", "connector")

DEFAULT_OD_BOUNDS = (1.0, 2000.0)
SIMPLE_RAMP_OD_BOUNDS = (1.0, 2500.0)


@dataclass(frozen=True)
class Node:
    id: int
    x: float
    y: float


@dataclass(frozen=True)
class Link:
    id: int
    from_node: int
    to_node: int
    length: float          # meters
    lanes: int
    free_flow_speed: float  # m/s
    capacity: float         # vehicles/hour for the whole link
    kind: str


@dataclass(frozen=True)
class Sensor:
    id: int
    link: int


@dataclass(frozen=True)
class RoadNetwork:
    """Directed freeway graph with sensor placements.

    Immutable after construction; safe to share across workers.
    """

    nodes: tuple[Node, ...]
    links: tuple[Link, ...]
    sensors: tuple[Sensor, ...] = ()
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        node_ids = [n.id for n in self.nodes]
        if len(set(node_ids)) != len(node_ids):
            raise ValidationError("duplicate node ids")
        link_ids = [l.id for l in self.links]
        if len(set(link_ids)) != len(link_ids):
            raise ValidationError("duplicate link ids")
        known = set(node_ids)
        for link in self.links:
            if link.from_node not in known or link.to_node not in known:
                raise ValidationError(f"link {link.id} references unknown node")
            if link.kind not in LINK_KINDS:
                raise ValidationError(f"link {link.id}: unknown kind {link.kind!r}")
            if link.capacity <= 0 or link.free_flow_speed <= 0 or link.length <= 0:
                raise ValidationError(f"link {link.id}: non-positive attribute")
            if link.lanes < 1:
                raise ValidationError(f"link {link.id}: lanes must be >= 1")
        sensor_ids = [s.id for s in self.sensors]
        if len(set(sensor_ids)) != len(sensor_ids):
            raise ValidationError("duplicate sensor ids")
        by_link = self.link_by_id
        for sensor in self.sensors:
            if sensor.link not in by_link:
                raise ValidationError(f"sensor {sensor.id} on unknown link {sensor.link}")
            if by_link[sensor.link].kind != "mainline":
                raise ValidationError(
                    f"sensor {sensor.id} on non-mainline link {sensor.link}"
                )

    @cached_property
    def node_by_id(self) -> dict[int, Node]:
        return {n.id: n for n in self.nodes}

    @cached_property
    def link_by_id(self) -> dict[int, Link]:
        return {l.id: l for l in self.links}

    @cached_property
    def sensor_link_ids(self) -> frozenset[int]:
        return frozenset(s.link for s in self.sensors)

    def graph(self, weight: str = "travel_time") -> nx.DiGraph:
        """Directed graph with free-flow travel time edge weights."""
        g = nx.DiGraph()
        g.add_nodes_from(n.id for n in self.nodes)
        for link in self.links:
            g.add_edge(
                link.from_node,
                link.to_node,
                link_id=link.id,
                travel_time=link.length / link.free_flow_speed,
            )
        return g


@dataclass(frozen=True)
class Zone:
    id: int
    sources: tuple[int, ...] = ()
    sinks: tuple[int, ...] = ()


@dataclass(frozen=True)
class TazPartition:
    zones: tuple[Zone, ...]

    def __post_init__(self):
        ids = [z.id for z in self.zones]
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate zone ids")
        for zone in self.zones:
            if not zone.sources and not zone.sinks:
                raise ValidationError(f"zone {zone.id} has neither sources nor sinks")

    @property
    def num_zones(self) -> int:
        return len(self.zones)

    @cached_property
    def zone_by_id(self) -> dict[int, Zone]:
        return {z.id: z for z in self.zones}

    def validate_against(self, network: RoadNetwork) -> None:
        known = set(network.node_by_id)
        for zone in self.zones:
            for node in (*zone.sources, *zone.sinks):
                if node not in known:
                    raise ValidationError(
                        f"zone {zone.id} references unknown node {node}"
                    )


@dataclass(frozen=True)
class ODPairSet:
    """Ordered, lexicographically sorted feasible zone pairs."""

    pairs: tuple[tuple[int, int], ...]

    def __post_init__(self):
        for o, d in self.pairs:
            if o == d:
                raise ValidationError(f"intra-zone pair ({o}, {d}) not allowed")
        if len(set(self.pairs)) != len(self.pairs):
            raise ValidationError("duplicate OD pairs")

    @property
    def dimension(self) -> int:
        return len(self.pairs)


@dataclass(frozen=True)
class ODVector:
    """Demand per OD pair (vehicles per OD generation window) with box bounds."""

    values: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        lower = np.asarray(self.lower, dtype=float)
        upper = np.asarray(self.upper, dtype=float)
        if values.ndim != 1 or values.shape != lower.shape or values.shape != upper.shape:
            raise ValidationError("values and bounds must be 1-d arrays of equal length")
        if np.any(np.isnan(values)):
            raise ValidationError("NaN demand value")
        if np.any(lower > upper):
            raise ValidationError("lower bound exceeds upper bound")
        if np.any(values < lower) or np.any(values > upper):
            raise ValidationError("demand outside bounds")
        for arr, name in ((values, "values"), (lower, "lower"), (upper, "upper")):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def dimension(self) -> int:
        return self.values.shape[0]


def make_bounds(dimension: int, bounds: tuple[float, float]) -> tuple[np.ndarray, np.ndarray]:
    lo, hi = bounds
    return np.full(dimension, lo, dtype=float), np.full(dimension, hi, dtype=float)


# ---------------------------------------------------------------------------
# OD pair generation

def generate_od_pairs(partition: TazPartition, network: RoadNetwork) -> ODPairSet:
    """Enumerate feasible ordered zone pairs by directed reachability.

    A pair (o, d), o != d, is feasible when at least one directed path of
    positive length leads from some source node of o to some sink node of d.
    The result is sorted lexicographically by (origin id, destination id),
    which fixes the coordinate system of the demand vector.
    """
    if not partition.zones:
        raise ValidationError("empty partition")
    partition.validate_against(network)
    graph = network.graph()

    reachable: dict[int, set[int]] = {}
    for zone in partition.zones:
        seen: set[int] = set()
        for source in zone.sources:
            seen |= nx.descendants(graph, source)
        reachable[zone.id] = seen

    pairs = []
    for origin in partition.zones:
        if not origin.sources:
            continue
        for dest in partition.zones:
            if dest.id == origin.id or not dest.sinks:
                continue
            if reachable[origin.id].intersection(dest.sinks):
                pairs.append((origin.id, dest.id))
    pairs.sort()
    return ODPairSet(tuple(pairs))


def identify_unobservable_pairs(
    network: RoadNetwork,
    pairs: ODPairSet,
    routes: Iterable[Iterable],
) -> tuple[int, ...]:
    """Indices of pairs none of whose routes traverse any sensor link.

    ``routes`` is the per-pair route list produced by the simulator's
    route-choice model; each route exposes a ``links`` attribute.
    """
    known_links = set(network.link_by_id)
    sensor_links = network.sensor_link_ids
    unobservable = []
    for idx, route_set in enumerate(routes):
        covered = False
        for route in route_set:
            for link_id in route.links:
                if link_id not in known_links:
                    raise ValidationError(
                        f"route for pair {idx} references unknown link {link_id}"
                    )
                if link_id in sensor_links:
                    covered = True
        if not covered:
            unobservable.append(idx)
    return tuple(unobservable)


# ---------------------------------------------------------------------------
# Serialization (single JSON document holding network + partition)

def network_to_json(network: RoadNetwork, partition: TazPartition) -> str:
    doc = {
        "nodes": [{"id": n.id, "x": n.x, "y": n.y} for n in network.nodes],
        "links": [
            {
                "id": l.id,
                "from": l.from_node,
                "to": l.to_node,
                "length": l.length,
                "lanes": l.lanes,
                "free_flow_speed": l.free_flow_speed,
                "capacity": l.capacity,
                "kind": l.kind,
            }
            for l in network.links
        ],
        "tazs": [
            {"id": z.id, "sources": list(z.sources), "sinks": list(z.sinks)}
            for z in partition.zones
        ],
        "sensors": [{"id": s.id, "link": s.link} for s in network.sensors],
    }
    if network.meta:
        doc["meta"] = network.meta
    return json.dumps(doc, indent=2)


def network_from_json(text: str) -> tuple[RoadNetwork, TazPartition]:
    doc = json.loads(text)
    for key in ("nodes", "links", "tazs", "sensors"):
        if key not in doc:
            raise ValidationError(f"missing top-level key {key!r}")
    nodes = tuple(Node(n["id"], n["x"], n["y"]) for n in doc["nodes"])
    links = tuple(
        Link(
            l["id"], l["from"], l["to"], l["length"], l["lanes"],
            l["free_flow_speed"], l["capacity"], l["kind"],
        )
        for l in doc["links"]
    )
    sensors = tuple(Sensor(s["id"], s["link"]) for s in doc["sensors"])
    network = RoadNetwork(nodes, links, sensors, meta=doc.get("meta", {}))
    partition = TazPartition(
        tuple(
            Zone(z["id"], tuple(z["sources"]), tuple(z["sinks"]))
            for z in doc["tazs"]
        )
    )
    partition.validate_against(network)
    return network, partition
