"""Ground-truth environment: kinematics, observation, events, pedestrians."""
from __future__ import annotations

import math
from dataclasses import replace
from typing import Sequence

import numpy as np

from samalm.sim.config import ScenarioConfig
from samalm.sim.geometry import ZERO, Vec2, dist, wrap_angle
from samalm.sim.orca import Neighbor, compute_velocity
from samalm.sim.state import (
    EntityView,
    EpisodeEvent,
    EventKind,
    HumanState,
    LocalObservation,
    RobotState,
    RobotStatus,
    SimState,
    heading_towards,
    persona_for,
)

_SPEED_TOL = 1e-9
_FULL_FOV = 2.0 * math.pi - 1e-12


class ContractViolation(ValueError):
    """Raised when a caller breaks an operation's preconditions."""


def in_fov(origin: Vec2, heading: float, target: Vec2, fov: float, max_range: float | None = None) -> bool:
    rel = target - origin
    if max_range is not None and rel.norm() > max_range:
        return False
    if fov >= _FULL_FOV:
        return True
    if rel.x == 0.0 and rel.y == 0.0:
        return True
    bearing = abs(wrap_angle(math.atan2(rel.y, rel.x) - heading))
    return bearing <= fov / 2.0 + 1e-12


def observe(state: SimState, robot_id: int, cfg: ScenarioConfig) -> LocalObservation:
    me = state.robot(robot_id)
    fov, rng = cfg.fov_rad, cfg.max_range_m
    humans = tuple(
        EntityView(h.id, h.p, h.v)
        for h in state.humans
        if in_fov(me.p, me.heading, h.p, fov, rng)
    )
    robots = tuple(
        EntityView(r.id, r.p, r.v)
        for r in state.robots
        if r.id != robot_id
        and r.status is not RobotStatus.ARRIVED
        and in_fov(me.p, me.heading, r.p, fov, rng)
    )
    return LocalObservation(robot_id, me, humans, robots, state.t)


def detect_events(state: SimState, cfg: ScenarioConfig) -> list[EpisodeEvent]:
    """Events on ``state`` for robots still marked active.

    Arrived robots have left the scene and take no part in collisions.
    Collided robots stay in place and can still be hit.
    """
    t = state.t
    events: list[EpisodeEvent] = []
    undecided = False
    for r in state.robots:
        if not r.active:
            continue
        collided = False
        for h in state.humans:
            if dist(r.p, h.p) < r.persona.rho_r + h.rho_h:
                events.append(EpisodeEvent(EventKind.ROBOT_HUMAN_COLLISION, t, (r.id, h.id)))
                collided = True
        for o in state.robots:
            if o.id == r.id or o.status is RobotStatus.ARRIVED:
                continue
            if o.active and o.id < r.id:
                # Pair already reported from the lower id's side.
                if dist(r.p, o.p) < r.persona.rho_r + o.persona.rho_r:
                    collided = True
                continue
            if dist(r.p, o.p) < r.persona.rho_r + o.persona.rho_r:
                events.append(EpisodeEvent(EventKind.ROBOT_ROBOT_COLLISION, t, (r.id, o.id)))
                collided = True
        if collided:
            continue
        if dist(r.p, r.g) < r.persona.rho_r:
            events.append(EpisodeEvent(EventKind.ARRIVAL, t, (r.id,)))
        else:
            undecided = True
    if undecided and t >= cfg.t_max_s - 1e-9:
        events.append(EpisodeEvent(EventKind.TIMEOUT, t))
    return events


def step(
    state: SimState,
    joint_actions: Sequence[Vec2],
    human_velocities: Sequence[Vec2],
    cfg: ScenarioConfig,
) -> tuple[SimState, list[EpisodeEvent]]:
    """Advance one tick. ``joint_actions`` lists one command per active robot, by id."""
    active = state.active_robots()
    if len(joint_actions) != len(active):
        raise ContractViolation(
            f"expected {len(active)} robot actions, got {len(joint_actions)}"
        )
    if len(human_velocities) != len(state.humans):
        raise ContractViolation(
            f"expected {len(state.humans)} human velocities, got {len(human_velocities)}"
        )
    dt = cfg.dt_s
    commands = {}
    for r, a in zip(active, joint_actions):
        a = Vec2(float(a[0]), float(a[1]))
        if not a.is_finite():
            raise ContractViolation(f"non-finite action for robot {r.id}: {a}")
        if a.norm() > r.persona.v_pref + _SPEED_TOL:
            raise ContractViolation(
                f"action {a} for robot {r.id} exceeds v_pref {r.persona.v_pref}"
            )
        commands[r.id] = a

    robots = []
    for r in state.robots:
        if r.id not in commands:
            robots.append(r)
            continue
        a = commands[r.id]
        heading = r.heading if (a.x == 0.0 and a.y == 0.0) else math.atan2(a.y, a.x)
        robots.append(replace(r, p=r.p + a * dt, v=a, heading=heading))
    humans = []
    for h, v in zip(state.humans, human_velocities):
        v = Vec2(float(v[0]), float(v[1]))
        humans.append(replace(h, p=h.p + v * dt, v=v))

    k = state.step_index + 1
    moved = SimState(k * dt, k, tuple(robots), tuple(humans), state.rng_seed)
    events = detect_events(moved, cfg)

    collided: set[int] = set()
    arrived: set[int] = set()
    for e in events:
        if e.kind is EventKind.ROBOT_HUMAN_COLLISION:
            collided.add(e.subjects[0])
        elif e.kind is EventKind.ROBOT_ROBOT_COLLISION:
            collided.update(i for i in e.subjects if i in commands)
        elif e.kind is EventKind.ARRIVAL:
            arrived.add(e.subjects[0])
    if collided or arrived:
        final = []
        for r in moved.robots:
            if r.id in collided:
                r = replace(r, v=ZERO, status=RobotStatus.COLLIDED)
            elif r.id in arrived:
                r = replace(r, v=ZERO, status=RobotStatus.ARRIVED)
            final.append(r)
        moved = replace(moved, robots=tuple(final))
    return moved, events


def sample_point(rng: np.random.Generator, half: float) -> Vec2:
    x, y = rng.uniform(-half, half, size=2)
    return Vec2(float(x), float(y))


def preferred_velocity(p: Vec2, g: Vec2, v_pref: float, dt: float) -> Vec2:
    to_goal = g - p
    d = to_goal.norm()
    if d == 0.0:
        return ZERO
    speed = min(v_pref, d / dt)
    return to_goal * (speed / d)


def human_policy_step(
    state: SimState, rng: np.random.Generator, cfg: ScenarioConfig
) -> tuple[list[Vec2], SimState]:
    """ORCA velocities for every human, plus the state with any resampled goals.

    One uniform draw per human is consumed every call so the random stream
    does not depend on which humans happen to be near their goals.
    """
    half = cfg.arena_side_m / 2.0
    humans = []
    for h in state.humans:
        u = rng.random()
        if u < cfg.orca.p_regoal or dist(h.p, h.g) < h.rho_h:
            g = sample_point(rng, half)
            while dist(h.p, g) < h.rho_h:
                g = sample_point(rng, half)
            h = replace(h, g=g)
        humans.append(h)

    robots = [r for r in state.robots if r.status is not RobotStatus.ARRIVED]
    margin = cfg.orca.safety_space
    velocities = []
    for h in humans:
        neighbors = [
            Neighbor(o.p, o.v, o.rho_h + margin, 0.5) for o in humans if o.id != h.id
        ]
        neighbors.extend(Neighbor(r.p, r.v, r.persona.rho_r + margin, 1.0) for r in robots)
        pref = preferred_velocity(h.p, h.g, h.v_pref_h, cfg.dt_s)
        v = compute_velocity(
            h.p,
            h.v,
            h.rho_h + margin,
            h.v_pref_h,
            pref,
            neighbors,
            cfg.orca.tau,
            cfg.dt_s,
            cfg.orca.neighbor_dist,
        )
        velocities.append(v)
    return velocities, replace(state, humans=tuple(humans))


def initial_state(cfg: ScenarioConfig, rng: np.random.Generator) -> SimState:
    """Circle-crossing layout: robots on a ring heading across it, humans scattered."""
    half = cfg.arena_side_m / 2.0
    ring = max(half - 1.0, 0.5)
    rho_r, rho_h = cfg.radii.robot, cfg.radii.human

    kinds = ("MobileRobot", "RobotDog", "Drone")
    if cfg.persona_assignment == "random":
        assigned = [kinds[int(rng.integers(0, 3))] for _ in range(cfg.n_robots)]
    else:
        assigned = list(cfg.persona_assignment)

    robots = []
    theta0 = float(rng.uniform(0.0, 2.0 * math.pi))
    for i in range(cfg.n_robots):
        theta = theta0 + 2.0 * math.pi * i / max(cfg.n_robots, 1)
        p = Vec2.polar(ring, theta)
        g = -p
        robots.append(
            RobotState(i, persona_for(assigned[i], rho_r), p, ZERO, g, heading_towards(p, g))
        )

    humans: list[HumanState] = []
    margin = half - 0.5
    clearance_h = 2.0 * rho_h + 0.3
    clearance_r = rho_r + rho_h + 1.0
    for j in range(cfg.n_humans):
        for _ in range(10_000):
            p = sample_point(rng, margin)
            if all(dist(p, o.p) >= clearance_h for o in humans) and all(
                dist(p, r.p) >= clearance_r and dist(p, r.g) >= clearance_r for r in robots
            ):
                break
        else:
            raise ContractViolation("could not place humans without overlap; arena too small")
        g = sample_point(rng, half)
        humans.append(HumanState(j, p, ZERO, g, rho_h, cfg.human_v_pref))

    return SimState(0.0, 0, tuple(robots), tuple(humans), cfg.seed)
