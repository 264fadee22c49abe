"""Seeded mesoscopic link-flow traffic simulator.

Maps an OD demand vector to per-sensor link counts and mean speeds.
Demand is split across logit route choices, loaded onto links in a fixed
deterministic order, capped at link capacity (excess queues upstream and
is never counted), and speeds degrade with a BPR volume-delay factor.
Stochastic mode replaces each (pair, route) flow by a Poisson draw with
the deterministic mean, which makes counts integer-valued and the
objective non-differentiable.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from itertools import islice

import networkx as nx
import numpy as np

from .errors import DomainError, RoutingError, ValidationError
from .network import ODPairSet, ODVector, RoadNetwork, TazPartition
from .seeding import derive_seed, rng_for

MODES = ("deterministic", "stochastic")


@dataclass(frozen=True)
class SimulatorConfig:
    """Auxiliary simulation parameters (the fixed parameter vector).

    Windows are (start, end) seconds; the sensor window must lie inside
    the simulation window and the OD generation window must not extend
    past it.
    """

    mode: str = "deterministic"
    simulation_window: tuple[float, float] = (0.0, 3600.0)
    sensor_window: tuple[float, float] = (0.0, 3600.0)
    od_window: tuple[float, float] = (0.0, 3300.0)
    route_temperature: float = 0.0   # logit dispersion (seconds); 0 = shortest path
    bpr_alpha: float = 0.15
    bpr_beta: float = 4.0
    max_routes: int = 3

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValidationError(f"unknown mode {self.mode!r}")
        sim0, sim1 = self.simulation_window
        sen0, sen1 = self.sensor_window
        od0, od1 = self.od_window
        if not (sim0 <= sen0 < sen1 <= sim1):
            raise ValidationError("sensor window must be a sub-interval of the simulation window")
        if not (sim0 <= od0 < od1 <= sim1):
            raise ValidationError("od window must lie within the simulation window")
        if self.route_temperature < 0:
            raise ValidationError("route temperature must be >= 0")
        if self.bpr_alpha <= 0 or self.bpr_beta <= 0:
            raise ValidationError("BPR exponents must be positive")
        if self.max_routes < 1:
            raise ValidationError("max_routes must be >= 1")

    @property
    def sensor_duration(self) -> float:
        return self.sensor_window[1] - self.sensor_window[0]

    @property
    def od_duration(self) -> float:
        return self.od_window[1] - self.od_window[0]

    @property
    def observed_fraction(self) -> float:
        """Fraction of the OD window overlapped by the sensor window."""
        lo = max(self.sensor_window[0], self.od_window[0])
        hi = min(self.sensor_window[1], self.od_window[1])
        return max(hi - lo, 0.0) / self.od_duration


@dataclass(frozen=True)
class Route:
    links: tuple[int, ...]
    travel_time: float
    probability: float


@dataclass(frozen=True, eq=False)
class SimulationResult:
    sensor_ids: tuple[int, ...]
    counts: np.ndarray           # non-negative integers, one per sensor
    speeds: np.ndarray           # m/s, one per sensor
    seed: int
    wall_time: float = field(compare=False)

    def __eq__(self, other):
        if not isinstance(other, SimulationResult):
            return NotImplemented
        return (
            self.sensor_ids == other.sensor_ids
            and self.seed == other.seed
            and np.array_equal(self.counts, other.counts)
            and np.array_equal(self.speeds, other.speeds)
        )


@dataclass(frozen=True)
class GroundTruth:
    """Synthetic calibration targets; x_star is hidden from optimizers."""

    x_star: np.ndarray
    sensor_ids: tuple[int, ...]
    counts: np.ndarray
    speeds: np.ndarray
    gt_seed: int
    replications: int
    mode: str

    def to_json(self) -> str:
        return json.dumps(
            {
                "x_star": [float(v) for v in self.x_star],
                "targets": {
                    str(sid): {"count": float(c), "speed": float(s)}
                    for sid, c, s in zip(self.sensor_ids, self.counts, self.speeds)
                },
                "gt_seed": self.gt_seed,
                "replications": self.replications,
                "mode": self.mode,
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "GroundTruth":
        doc = json.loads(text)
        sensor_ids = tuple(int(k) for k in doc["targets"])
        counts = np.array([doc["targets"][str(s)]["count"] for s in sensor_ids])
        speeds = np.array([doc["targets"][str(s)]["speed"] for s in sensor_ids])
        return cls(
            x_star=np.array(doc["x_star"], dtype=float),
            sensor_ids=sensor_ids,
            counts=counts,
            speeds=speeds,
            gt_seed=doc["gt_seed"],
            replications=doc["replications"],
            mode=doc["mode"],
        )


# ---------------------------------------------------------------------------
# Route choice

def compute_routes(
    network: RoadNetwork,
    pairs: ODPairSet,
    partition: TazPartition,
    config: SimulatorConfig,
) -> tuple[tuple[Route, ...], ...]:
    """Up to ``max_routes`` shortest paths per pair with logit probabilities.

    Probabilities are proportional to exp(-travel_time / temperature);
    temperature 0 puts all mass on the single shortest path (ties broken
    by link sequence). Deterministic.
    """
    graph = network.graph()
    zone_by_id = partition.zone_by_id
    theta = config.route_temperature
    all_routes: list[tuple[Route, ...]] = []
    for origin_id, dest_id in pairs.pairs:
        origin, dest = zone_by_id[origin_id], zone_by_id[dest_id]
        found: dict[tuple[int, ...], float] = {}
        for s in origin.sources:
            for t in dest.sinks:
                if s == t:
                    continue
                try:
                    paths = nx.shortest_simple_paths(graph, s, t, weight="travel_time")
                    for path in islice(paths, config.max_routes):
                        links = tuple(
                            graph.edges[u, v]["link_id"]
                            for u, v in zip(path[:-1], path[1:])
                        )
                        tt = sum(
                            graph.edges[u, v]["travel_time"]
                            for u, v in zip(path[:-1], path[1:])
                        )
                        found.setdefault(links, tt)
                except nx.NetworkXNoPath:
                    continue
        if not found:
            raise RoutingError(f"no route for OD pair ({origin_id}, {dest_id})")
        ranked = sorted(found.items(), key=lambda kv: (kv[1], kv[0]))[: config.max_routes]
        times = np.array([tt for _, tt in ranked])
        if theta == 0.0 or len(ranked) == 1:
            probs = np.zeros(len(ranked))
            probs[0] = 1.0
        else:
            logits = -(times - times.min()) / theta
            weights = np.exp(logits)
            probs = weights / weights.sum()
        all_routes.append(tuple(
            Route(links, tt, float(p)) for (links, tt), p in zip(ranked, probs)
        ))
    return tuple(all_routes)


# ---------------------------------------------------------------------------
# Simulation

class TrafficSimulator:
    """Precomputes routes and link structures for repeated evaluations.

    ``simulate`` is pure given (demand, seed); instances may be queried
    concurrently once constructed.
    """

    def __init__(
        self,
        network: RoadNetwork,
        partition: TazPartition,
        pairs: ODPairSet,
        config: SimulatorConfig,
        routes: tuple[tuple[Route, ...], ...] | None = None,
    ):
        partition.validate_against(network)
        self.network = network
        self.partition = partition
        self.pairs = pairs
        self.config = config
        self.routes = routes if routes is not None else compute_routes(
            network, pairs, partition, config
        )
        if len(self.routes) != pairs.dimension:
            raise ValidationError("route list length does not match pair count")

        links = network.links
        self._link_index = {l.id: i for i, l in enumerate(links)}
        self._free_speed = np.array([l.free_flow_speed for l in links])
        self._capacity_vph = np.array([l.capacity for l in links])
        self._window_cap = self._capacity_vph * config.sensor_duration / 3600.0
        self._sensor_ids = tuple(s.id for s in network.sensors)
        self._sensor_link_rows = np.array(
            [self._link_index[s.link] for s in network.sensors], dtype=int
        )
        self._route_rows = [
            [np.array([self._link_index[l] for l in r.links], dtype=int) for r in rs]
            for rs in self.routes
        ]
        self._route_probs = [
            np.array([r.probability for r in rs]) for rs in self.routes
        ]

    @property
    def dimension(self) -> int:
        return self.pairs.dimension

    def simulate(self, od: ODVector | np.ndarray, seed: int = 0) -> SimulationResult:
        start = time.perf_counter()
        if isinstance(od, ODVector):
            demand = od.values
        else:
            demand = np.asarray(od, dtype=float)
            if np.any(np.isnan(demand)):
                raise ValidationError("NaN demand value")
        if demand.shape != (self.dimension,):
            raise ValidationError("demand length does not match OD pair count")
        if np.any(demand < 0):
            raise DomainError("negative demand")

        cfg = self.config
        obs = cfg.observed_fraction
        n_links = len(self.network.links)
        arrivals = np.zeros(n_links)
        through = np.zeros(n_links)
        remaining = self._window_cap.copy()

        rng = np.random.default_rng(seed) if cfg.mode == "stochastic" else None
        for p in range(self.dimension):
            means = demand[p] * self._route_probs[p] * obs
            flows = rng.poisson(means).astype(float) if rng is not None else means
            for rows, flow in zip(self._route_rows[p], flows):
                f = flow
                for li in rows:
                    arrivals[li] += f
                    passed = min(f, remaining[li])
                    remaining[li] -= passed
                    through[li] += passed
                    f = passed
                    if f == 0.0:
                        break

        volume_vph = arrivals * 3600.0 / cfg.sensor_duration
        factor = 1.0 + cfg.bpr_alpha * (volume_vph / self._capacity_vph) ** cfg.bpr_beta
        speeds = self._free_speed / factor

        counts = np.rint(through[self._sensor_link_rows]).astype(int)
        return SimulationResult(
            sensor_ids=self._sensor_ids,
            counts=counts,
            speeds=speeds[self._sensor_link_rows],
            seed=seed,
            wall_time=time.perf_counter() - start,
        )


def simulate(
    network: RoadNetwork,
    partition: TazPartition,
    pairs: ODPairSet,
    od: ODVector | np.ndarray,
    config: SimulatorConfig,
    seed: int = 0,
) -> SimulationResult:
    """One-shot convenience wrapper around :class:`TrafficSimulator`."""
    return TrafficSimulator(network, partition, pairs, config).simulate(od, seed)


def generate_ground_truth(
    simulator: TrafficSimulator,
    lower: np.ndarray,
    upper: np.ndarray,
    gt_seed: int,
    replications: int = 1,
    x_star: np.ndarray | None = None,
) -> GroundTruth:
    """Synthesize calibration targets from a hidden true OD vector.

    x_star is sampled uniformly in the middle half of the bound range
    unless supplied explicitly (diagnostics hook); targets are averages
    over ``replications`` runs with seeds derived from ``gt_seed``.
    """
    if replications < 1:
        raise ValidationError("replications must be >= 1")
    if x_star is None:
        u = rng_for(gt_seed, "x-star").random(simulator.dimension)
        x_star = lower + (0.25 + 0.5 * u) * (upper - lower)
    else:
        x_star = np.asarray(x_star, dtype=float)

    counts = np.zeros(len(simulator.network.sensors))
    speeds = np.zeros_like(counts)
    for r in range(replications):
        result = simulator.simulate(x_star, derive_seed(gt_seed, "rep", r))
        counts += result.counts
        speeds += result.speeds
    counts /= replications
    speeds /= replications
    return GroundTruth(
        x_star=x_star,
        sensor_ids=simulator._sensor_ids,
        counts=counts,
        speeds=speeds,
        gt_seed=gt_seed,
        replications=replications,
        mode=simulator.config.mode,
    )
