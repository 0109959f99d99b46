"""Immutable simulation state records."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from samalm.sim.geometry import Vec2


class RobotKind(str, enum.Enum):
    MOBILE_ROBOT = "MobileRobot"
    ROBOT_DOG = "RobotDog"
    DRONE = "Drone"


@dataclass(frozen=True)
class RobotPersona:
    """Per-type navigation preferences.

    ``t_m`` is the average navigation time used by the global critic's
    overtime branch.
    """

    kind: RobotKind
    v_pref: float
    rho_pref: float
    rho_r: float = 0.3
    t_m: float = 24.0

    def __post_init__(self) -> None:
        if not (self.v_pref > 0 and self.rho_pref >= 0 and self.rho_r > 0 and self.t_m > 0):
            raise ValueError(f"invalid persona parameters: {self}")


# t_m = 30 m / v_pref: a 30 m course at preferred speed.
PERSONAS: dict[RobotKind, RobotPersona] = {
    RobotKind.MOBILE_ROBOT: RobotPersona(RobotKind.MOBILE_ROBOT, 1.25, 0.45, 0.3, 24.0),
    RobotKind.ROBOT_DOG: RobotPersona(RobotKind.ROBOT_DOG, 1.0, 0.3, 0.3, 30.0),
    RobotKind.DRONE: RobotPersona(RobotKind.DRONE, 1.5, 0.85, 0.3, 20.0),
}


def persona_for(kind: str | RobotKind, rho_r: float | None = None) -> RobotPersona:
    base = PERSONAS[RobotKind(kind)]
    if rho_r is None or rho_r == base.rho_r:
        return base
    return RobotPersona(base.kind, base.v_pref, base.rho_pref, rho_r, base.t_m)


class RobotStatus(str, enum.Enum):
    ACTIVE = "active"
    ARRIVED = "arrived"
    COLLIDED = "collided"


@dataclass(frozen=True)
class RobotState:
    id: int
    persona: RobotPersona
    p: Vec2
    v: Vec2
    g: Vec2
    heading: float
    status: RobotStatus = RobotStatus.ACTIVE

    @property
    def active(self) -> bool:
        return self.status is RobotStatus.ACTIVE


@dataclass(frozen=True)
class HumanState:
    id: int
    p: Vec2
    v: Vec2
    g: Vec2
    rho_h: float = 0.3
    v_pref_h: float = 1.0


@dataclass(frozen=True)
class SimState:
    t: float
    step_index: int
    robots: tuple[RobotState, ...]
    humans: tuple[HumanState, ...]
    rng_seed: int = 0

    def active_robots(self) -> list[RobotState]:
        return [r for r in self.robots if r.active]

    def robot(self, robot_id: int) -> RobotState:
        for r in self.robots:
            if r.id == robot_id:
                return r
        raise KeyError(f"no robot with id {robot_id}")


@dataclass(frozen=True)
class EntityView:
    """What a robot perceives of another entity: id, position, velocity."""

    id: int
    p: Vec2
    v: Vec2


@dataclass(frozen=True)
class LocalObservation:
    observer_id: int
    self_state: RobotState
    visible_humans: tuple[EntityView, ...]
    visible_robots: tuple[EntityView, ...]
    t: float


class EventKind(str, enum.Enum):
    ARRIVAL = "arrival"
    ROBOT_HUMAN_COLLISION = "robot_human_collision"
    ROBOT_ROBOT_COLLISION = "robot_robot_collision"
    TIMEOUT = "timeout"


@dataclass(frozen=True)
class EpisodeEvent:
    kind: EventKind
    t: float
    subjects: tuple[int, ...] = field(default_factory=tuple)

    def to_json(self) -> dict:
        return {"kind": self.kind.value, "t": self.t, "subjects": list(self.subjects)}


def heading_towards(p: Vec2, g: Vec2) -> float:
    d = g - p
    if d.x == 0.0 and d.y == 0.0:
        return 0.0
    return math.atan2(d.y, d.x)
