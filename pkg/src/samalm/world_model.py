"""Per-robot spatio-temporal interaction graph and its canonical text form."""
from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field

from samalm.sim.geometry import Vec2
from samalm.sim.state import EntityView, LocalObservation, RobotPersona

EPS_TREND = 0.05


class NodeKind(str, enum.Enum):
    SELF = "self"
    ROBOT = "robot"
    HUMAN = "human"


class Trend(str, enum.Enum):
    APPROACHING = "approaching"
    RECEDING = "receding"
    STATIC = "static"


@dataclass(frozen=True)
class WmNode:
    kind: NodeKind
    id: int
    p: Vec2
    v: Vec2
    g: Vec2 | None = None

    @property
    def key(self) -> str:
        return "self" if self.kind is NodeKind.SELF else f"{self.kind.value}-{self.id}"


@dataclass(frozen=True)
class WmSpatialEdge:
    target: str
    distance: float
    trend: Trend
    closing_speed: float


@dataclass(frozen=True)
class WmTemporalEdge:
    node: str
    goal_distance: float | None = None
    accel: float | None = None
    p_next: Vec2 | None = None


@dataclass(frozen=True)
class WorldModelGraph:
    nodes: tuple[WmNode, ...]
    spatial_edges: tuple[WmSpatialEdge, ...]
    temporal_edges: tuple[WmTemporalEdge, ...]
    t: float

    @property
    def self_node(self) -> WmNode:
        return self.nodes[0]


@dataclass(frozen=True)
class TextualWorldModel:
    text: str
    line_index: dict[str, int] = field(default_factory=dict, compare=False)


def classify_trend(range_rate: float, eps: float = EPS_TREND) -> Trend:
    if range_rate < -eps:
        return Trend.APPROACHING
    if range_rate > eps:
        return Trend.RECEDING
    return Trend.STATIC


def _spatial_edge(me: WmNode, other: WmNode, eps: float) -> WmSpatialEdge:
    rel_p = other.p - me.p
    rel_v = other.v - me.v
    d = rel_p.norm()
    rate = rel_v.dot(rel_p) / d if d > 0.0 else 0.0
    return WmSpatialEdge(other.key, d, classify_trend(rate, eps), -rate)


def build_graph(
    obs: LocalObservation,
    prev_obs: LocalObservation | None = None,
    dt: float = 0.25,
    eps_trend: float = EPS_TREND,
) -> WorldModelGraph:
    me = obs.self_state
    self_node = WmNode(NodeKind.SELF, me.id, me.p, me.v, me.g)

    prev_speed: dict[str, float] = {}
    if prev_obs is not None:
        for kind, views in ((NodeKind.ROBOT, prev_obs.visible_robots), (NodeKind.HUMAN, prev_obs.visible_humans)):
            for e in views:
                prev_speed[f"{kind.value}-{e.id}"] = e.v.norm()

    def nodes_of(kind: NodeKind, views: tuple[EntityView, ...]) -> list[WmNode]:
        return [WmNode(kind, e.id, e.p, e.v) for e in sorted(views, key=lambda e: e.id)]

    others = nodes_of(NodeKind.ROBOT, obs.visible_robots) + nodes_of(NodeKind.HUMAN, obs.visible_humans)
    spatial = tuple(_spatial_edge(self_node, n, eps_trend) for n in others)

    temporal = [WmTemporalEdge("self", goal_distance=(me.g - me.p).norm())]
    for n in others:
        speed_before = prev_speed.get(n.key)
        accel = 0.0 if speed_before is None else (n.v.norm() - speed_before) / dt
        temporal.append(WmTemporalEdge(n.key, accel=accel, p_next=n.p + n.v * dt))

    return WorldModelGraph((self_node, *others), spatial, tuple(temporal), obs.t)


def fmt(x: float) -> str:
    s = f"{x:.2f}"
    return "0.00" if s == "-0.00" else s


def fmt_vec(v: Vec2) -> str:
    return f"({fmt(v.x)},{fmt(v.y)})"


def textualize(graph: WorldModelGraph, persona: RobotPersona) -> TextualWorldModel:
    me = graph.self_node
    temporal = {e.node: e for e in graph.temporal_edges}
    lines = [
        f"self: pos={fmt_vec(me.p)} vel={fmt_vec(me.v)} goal={fmt_vec(me.g)} "
        f"goal_dist={fmt(temporal['self'].goal_distance)} "
        f"pref_speed={fmt(persona.v_pref)} social_dist={fmt(persona.rho_pref)}"
    ]
    index = {"self": 0}
    for node, edge in zip(graph.nodes[1:], graph.spatial_edges):
        te = temporal[node.key]
        index[node.key] = len(lines)
        lines.append(
            f"{node.key}: pos={fmt_vec(node.p)} vel={fmt_vec(node.v)} dist={fmt(edge.distance)} "
            f"trend={edge.trend.value} accel={fmt(te.accel)} next={fmt_vec(te.p_next)}"
        )
    return TextualWorldModel("\n".join(lines), index)


@dataclass(frozen=True)
class ParsedEntity:
    key: str
    kind: NodeKind
    id: int
    p: Vec2
    v: Vec2
    distance: float
    trend: Trend
    accel: float
    p_next: Vec2


@dataclass(frozen=True)
class ParsedWorld:
    p: Vec2
    v: Vec2
    g: Vec2
    goal_dist: float
    pref_speed: float
    social_dist: float
    entities: tuple[ParsedEntity, ...]


_NUM = r"(-?\d+(?:\.\d+)?)"
_VEC = rf"\({_NUM},{_NUM}\)"
_SELF_RE = re.compile(
    rf"^self: pos={_VEC} vel={_VEC} goal={_VEC} goal_dist={_NUM} pref_speed={_NUM} social_dist={_NUM}$"
)
_ENTITY_RE = re.compile(
    rf"^(robot|human)-(\d+): pos={_VEC} vel={_VEC} dist={_NUM} trend=(approaching|receding|static) "
    rf"accel={_NUM} next={_VEC}$"
)


def parse_world_text(text: str) -> ParsedWorld:
    """Inverse of :func:`textualize` (up to the 2-decimal rounding).

    Lines that match neither grammar are ignored, so the world model can be
    embedded in a larger prompt.
    """
    me = None
    entities = []
    for line in text.splitlines():
        line = line.strip()
        m = _SELF_RE.match(line)
        if m and me is None:
            f = [float(x) for x in m.groups()]
            me = (Vec2(f[0], f[1]), Vec2(f[2], f[3]), Vec2(f[4], f[5]), f[6], f[7], f[8])
            continue
        m = _ENTITY_RE.match(line)
        if m:
            kind, eid, *rest = m.groups()
            trend = rest[5]
            f = [float(x) for x in rest[:5] + rest[6:]]
            entities.append(
                ParsedEntity(
                    f"{kind}-{eid}",
                    NodeKind(kind),
                    int(eid),
                    Vec2(f[0], f[1]),
                    Vec2(f[2], f[3]),
                    f[4],
                    Trend(trend),
                    f[5],
                    Vec2(f[6], f[7]),
                )
            )
    if me is None:
        raise ValueError("no self line in world model text")
    return ParsedWorld(*me, tuple(entities))
