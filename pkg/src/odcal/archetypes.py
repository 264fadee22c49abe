"""Parametric builders for the five benchmark network archetypes.

Each builder is a deterministic generator: identical parameters produce
identical networks. Sensors are placed one per mainline segment between
consecutive ramp attachment points (or between crossings in grids).
"""

from __future__ import annotations

from .errors import ConfigurationError, ValidationError
from .network import (
    DEFAULT_OD_BOUNDS,
    SIMPLE_RAMP_OD_BOUNDS,
    Link,
    Node,
    RoadNetwork,
    Sensor,
    TazPartition,
    Zone,
)

ARCHETYPES = ("simple-ramp", "one-way-corridor", "junction", "small-region", "region")

# link attribute presets: (lanes, free_flow_speed m/s, capacity veh/h, length m)
_MAINLINE = (4, 30.0, 8800.0, 1000.0)
_RAMP = (2, 15.0, 3000.0, 300.0)
_CONNECTOR = (2, 20.0, 3600.0, 500.0)


class _Builder:
    """Accumulates nodes/links/sensors with sequential ids."""

    def __init__(self):
        self.nodes: list[Node] = []
        self.links: list[Link] = []
        self.sensors: list[Sensor] = []
        self._node_ids: dict[str, int] = {}

    def node(self, name: str, x: float, y: float) -> int:
        if name in self._node_ids:
            return self._node_ids[name]
        nid = len(self.nodes)
        self.nodes.append(Node(nid, x, y))
        self._node_ids[name] = nid
        return nid

    def link(self, u: int, v: int, kind: str, preset=None,
             lanes=None, speed=None, capacity=None, length=None) -> int:
        preset = preset or {"mainline": _MAINLINE, "on-ramp": _RAMP,
                            "off-ramp": _RAMP, "connector": _CONNECTOR}[kind]
        lid = len(self.links)
        self.links.append(Link(
            lid, u, v,
            length if length is not None else preset[3],
            lanes if lanes is not None else preset[0],
            speed if speed is not None else preset[1],
            capacity if capacity is not None else preset[2],
            kind,
        ))
        return lid

    def sensor(self, link_id: int) -> int:
        sid = len(self.sensors)
        self.sensors.append(Sensor(sid, link_id))
        return sid

    def network(self, meta: dict) -> RoadNetwork:
        return RoadNetwork(tuple(self.nodes), tuple(self.links),
                           tuple(self.sensors), meta=meta)


def _meta(archetype: str, scale: int, bounds) -> dict:
    return {
        "archetype": archetype,
        "scale": scale,
        "od_lower": bounds[0],
        "od_upper": bounds[1],
    }


def build_simple_ramp(scale: int = 1) -> tuple[RoadNetwork, TazPartition]:
    """Linear mainline with one on-ramp and one off-ramp; 3 zones, 3 sensors.

    Zone 0 feeds the mainline entry, zone 1 owns the ramp pair, zone 2
    drains the mainline exit, giving exactly the feasible pairs
    (0,1), (0,2), (1,2).
    """
    if scale < 1:
        raise ValidationError("scale must be >= 1")
    b = _Builder()
    m0 = b.node("m0", 0, 0)
    m1 = b.node("m1", 1000, 0)
    m2 = b.node("m2", 2000, 0)
    m3 = b.node("m3", 3000, 0)
    r_on = b.node("r_on", 900, -300)
    r_off = b.node("r_off", 2100, -300)

    seg0 = b.link(m0, m1, "mainline")
    seg1 = b.link(m1, m2, "mainline")
    seg2 = b.link(m2, m3, "mainline")
    b.link(r_on, m1, "on-ramp")
    b.link(m2, r_off, "off-ramp")
    for seg in (seg0, seg1, seg2):
        b.sensor(seg)

    partition = TazPartition((
        Zone(0, sources=(m0,)),
        Zone(1, sources=(r_on,), sinks=(r_off,)),
        Zone(2, sinks=(m3,)),
    ))
    return b.network(_meta("simple-ramp", scale, SIMPLE_RAMP_OD_BOUNDS)), partition


def build_corridor(
    zones: int = 7,
    drop_sensor_segments: tuple[int, ...] = (),
) -> tuple[RoadNetwork, TazPartition]:
    """Unidirectional freeway corridor with one ramp pair per interior zone.

    Zone 0 is the mainline entry (source only); interior zone i has an
    off-ramp upstream of its on-ramp, so zone i can send demand only to
    zones j > i; the last zone owns the final on-ramp and the mainline
    exit. Feasible pairs are exactly {(i, j): i < j}.

    ``drop_sensor_segments`` removes the sensor from the given mainline
    segment indices, which makes the OD pairs whose single route crosses
    only those segments unobservable.
    """
    if zones < 2:
        raise ValidationError("corridor needs at least 2 zones")
    b = _Builder()
    # wider mainline than the simple ramp: many overlapping pairs share it
    mainline = {"lanes": 5, "capacity": 11000.0}
    ramp = {"capacity": 6500.0}

    chain = [b.node("entry", 0, 0)]
    zone_defs: list[Zone] = [Zone(0, sources=(chain[0],))]
    x = 0.0
    for i in range(1, zones):
        x += 1000
        if i < zones - 1:
            off_attach = b.node(f"off_attach_{i}", x, 0)
            chain.append(off_attach)
            x += 1000
        on_attach = b.node(f"on_attach_{i}", x, 0)
        chain.append(on_attach)
        r_on = b.node(f"ramp_on_{i}", x - 100, -300)
        b.link(r_on, on_attach, "on-ramp", **ramp)
        if i < zones - 1:
            r_off = b.node(f"ramp_off_{i}", x - 1100 + 100, -300)
            b.link(off_attach, r_off, "off-ramp", **ramp)
            zone_defs.append(Zone(i, sources=(r_on,), sinks=(r_off,)))
        else:
            exit_node = b.node("exit", x + 1000, 0)
            chain.append(exit_node)
            zone_defs.append(Zone(i, sources=(r_on,), sinks=(exit_node,)))

    for seg, (u, v) in enumerate(zip(chain[:-1], chain[1:])):
        link_id = b.link(u, v, "mainline", **mainline)
        if seg not in drop_sensor_segments:
            b.sensor(link_id)

    meta = _meta("one-way-corridor", zones, DEFAULT_OD_BOUNDS)
    if drop_sensor_segments:
        meta["dropped_sensor_segments"] = sorted(drop_sensor_segments)
    return b.network(meta), TazPartition(tuple(zone_defs))


def build_junction(ramp_zones_per_arm: int = 1) -> tuple[RoadNetwork, TazPartition]:
    """Two crossing bidirectional mainlines joined by turn connectors.

    Each arm (W, E, N, S) is a zone; each arm additionally carries
    ``ramp_zones_per_arm`` ramp-pair zones (on-ramp on the inbound side,
    off-ramp on the outbound side). No U-turn connectors exist, so
    same-arm pairs are infeasible.
    """
    if ramp_zones_per_arm < 1:
        raise ValidationError("scale must be >= 1")
    k = ramp_zones_per_arm
    b = _Builder()
    arm_geometry = {
        "w": (-1.0, 0.0), "e": (1.0, 0.0), "n": (0.0, 1.0), "s": (0.0, -1.0),
    }
    arm_len = 1000.0 * (2 * k + 2)
    zones: list[Zone] = []
    c_in: dict[str, int] = {}
    c_out: dict[str, int] = {}

    for ai, (arm, (dx, dy)) in enumerate(arm_geometry.items()):
        end_in = b.node(f"{arm}_in0", dx * arm_len, dy * arm_len)
        end_out = b.node(f"{arm}_out0", dx * arm_len + dy * 200, dy * arm_len + dx * 200)
        zones.append(Zone(ai, sources=(end_in,), sinks=(end_out,)))

        # inbound chain toward the center, with k on-ramps
        prev = end_in
        for t in range(k):
            d = arm_len * (k - t) / (k + 1)
            attach = b.node(f"{arm}_in_on{t}", dx * d, dy * d)
            seg = b.link(prev, attach, "mainline")
            b.sensor(seg)
            r_on = b.node(f"{arm}_ramp_on{t}", dx * d + dy * 300, dy * d + dx * 300)
            b.link(r_on, attach, "on-ramp")
            prev = attach
        c_in[arm] = b.node(f"{arm}_cin", dx * 200, dy * 200)
        seg = b.link(prev, c_in[arm], "mainline")
        b.sensor(seg)

        # outbound chain away from the center, with k off-ramps
        c_out[arm] = b.node(f"{arm}_cout", dx * 400 + dy * 100, dy * 400 + dx * 100)
        prev = c_out[arm]
        for t in range(k):
            d = arm_len * (t + 1) / (k + 1)
            attach = b.node(f"{arm}_out_off{t}", dx * d + dy * 100, dy * d + dx * 100)
            seg = b.link(prev, attach, "mainline")
            b.sensor(seg)
            r_off = b.node(f"{arm}_ramp_off{t}", dx * d + dy * 400, dy * d + dx * 400)
            b.link(attach, r_off, "off-ramp")
            prev = attach
            zones.append(Zone(
                len(arm_geometry) + ai * k + t,
                sources=(b._node_ids[f"{arm}_ramp_on{t}"],),
                sinks=(r_off,),
            ))
        seg = b.link(prev, end_out, "mainline")
        b.sensor(seg)

    # center movements (through + turns) are short connector links; keeping
    # them off the mainline kind keeps sensors out of the crossing box
    for arm in arm_geometry:
        for other in arm_geometry:
            if other != arm:
                b.link(c_in[arm], c_out[other], "connector", length=400.0)

    zones.sort(key=lambda z: z.id)
    meta = _meta("junction", ramp_zones_per_arm, DEFAULT_OD_BOUNDS)
    return b.network(meta), TazPartition(tuple(zones))


def build_grid(size: int = 2, archetype: str = "small-region") -> tuple[RoadNetwork, TazPartition]:
    """Grid of ``size`` horizontal and ``size`` vertical bidirectional freeways.

    Crossings are single nodes (all turning movements allowed). Every
    freeway end is a zone acting as both source and sink; every directed
    mainline segment between crossings carries a sensor.
    """
    if size < 1:
        raise ValidationError("scale must be >= 1")
    b = _Builder()
    spacing = 2000.0
    cross = {
        (i, j): b.node(f"x_{i}_{j}", (j + 1) * spacing, (i + 1) * spacing)
        for i in range(size)
        for j in range(size)
    }
    zones: list[Zone] = []

    def bidirectional(u: int, v: int):
        for a, c in ((u, v), (v, u)):
            b.sensor(b.link(a, c, "mainline", lanes=5, capacity=11000.0,
                            length=spacing))

    zid = 0
    for i in range(size):  # horizontal freeways
        west = b.node(f"h{i}_w", 0, (i + 1) * spacing)
        east = b.node(f"h{i}_e", (size + 1) * spacing, (i + 1) * spacing)
        chain = [west] + [cross[(i, j)] for j in range(size)] + [east]
        for u, v in zip(chain[:-1], chain[1:]):
            bidirectional(u, v)
        zones.append(Zone(zid, sources=(west,), sinks=(west,)))
        zones.append(Zone(zid + 1, sources=(east,), sinks=(east,)))
        zid += 2
    for j in range(size):  # vertical freeways
        south = b.node(f"v{j}_s", (j + 1) * spacing, 0)
        north = b.node(f"v{j}_n", (j + 1) * spacing, (size + 1) * spacing)
        chain = [south] + [cross[(i, j)] for i in range(size)] + [north]
        for u, v in zip(chain[:-1], chain[1:]):
            bidirectional(u, v)
        zones.append(Zone(zid, sources=(south,), sinks=(south,)))
        zones.append(Zone(zid + 1, sources=(north,), sinks=(north,)))
        zid += 2

    meta = _meta(archetype, size, DEFAULT_OD_BOUNDS)
    return b.network(meta), TazPartition(tuple(zones))


def build_archetype(kind: str, scale: int | None = None) -> tuple[RoadNetwork, TazPartition]:
    """Build one of the five benchmark archetypes at the given scale.

    Scale meaning: number of zones (corridor), ramp zones per arm
    (junction), grid dimension (small-region/region); ignored beyond
    validation for the simple ramp.
    """
    if kind not in ARCHETYPES:
        raise ConfigurationError(f"unknown archetype {kind!r}")
    if scale is not None and scale < 1:
        raise ValidationError("scale must be >= 1")
    if kind == "simple-ramp":
        return build_simple_ramp(scale or 1)
    if kind == "one-way-corridor":
        return build_corridor(zones=scale or 7)
    if kind == "junction":
        return build_junction(ramp_zones_per_arm=scale or 1)
    if kind == "small-region":
        return build_grid(size=scale or 2, archetype="small-region")
    return build_grid(size=scale or 3, archetype="region")
