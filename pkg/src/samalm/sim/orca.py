"""Optimal reciprocal collision avoidance for the pedestrian crowd.

A direct port of the two-dimensional RVO2 velocity solver (agent-agent
constraints only, no static obstacles). Each neighbor contributes one
half-plane of permitted velocities; the solver returns the permitted
velocity closest to the preferred one, or, when the half-planes have no
common point, the velocity that minimizes the maximum violation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from samalm.sim.geometry import Vec2

RVO_EPSILON = 1e-5


@dataclass(frozen=True)
class Line:
    """Directed line; permitted velocities lie to its left."""

    point: Vec2
    direction: Vec2


@dataclass(frozen=True)
class Neighbor:
    p: Vec2
    v: Vec2
    radius: float
    # 0.5 for reciprocal avoidance, 1.0 when the agent takes full responsibility.
    responsibility: float = 0.5


def orca_line(
    p: Vec2,
    v: Vec2,
    radius: float,
    other: Neighbor,
    time_horizon: float,
    dt: float,
) -> Line:
    rel_pos = other.p - p
    rel_vel = v - other.v
    dist_sq = rel_pos.norm_sq()
    combined_radius = radius + other.radius
    combined_radius_sq = combined_radius * combined_radius

    if dist_sq > combined_radius_sq:
        inv_th = 1.0 / time_horizon
        # Vector from cutoff center to relative velocity.
        w = rel_vel - rel_pos * inv_th
        w_len_sq = w.norm_sq()
        dot1 = w.dot(rel_pos)
        if dot1 < 0.0 and dot1 * dot1 > combined_radius_sq * w_len_sq:
            # Project on cutoff circle.
            w_len = math.sqrt(w_len_sq)
            unit_w = w * (1.0 / w_len)
            direction = Vec2(unit_w.y, -unit_w.x)
            u = unit_w * (combined_radius * inv_th - w_len)
        else:
            # Project on legs.
            leg = math.sqrt(dist_sq - combined_radius_sq)
            if rel_pos.det(w) > 0.0:
                direction = Vec2(
                    rel_pos.x * leg - rel_pos.y * combined_radius,
                    rel_pos.x * combined_radius + rel_pos.y * leg,
                ) * (1.0 / dist_sq)
            else:
                direction = -Vec2(
                    rel_pos.x * leg + rel_pos.y * combined_radius,
                    -rel_pos.x * combined_radius + rel_pos.y * leg,
                ) * (1.0 / dist_sq)
            u = direction * rel_vel.dot(direction) - rel_vel
    else:
        # Already overlapping: resolve within one time step.
        inv_dt = 1.0 / dt
        w = rel_vel - rel_pos * inv_dt
        w_len = w.norm()
        if w_len == 0.0:
            # Degenerate coincident state; push along an arbitrary fixed axis.
            unit_w = Vec2(1.0, 0.0)
        else:
            unit_w = w * (1.0 / w_len)
        direction = Vec2(unit_w.y, -unit_w.x)
        u = unit_w * (combined_radius * inv_dt - w_len)

    return Line(v + u * other.responsibility, direction)


def _lp1(
    lines: Sequence[Line], line_no: int, radius: float, opt: Vec2, direction_opt: bool
) -> Vec2 | None:
    line = lines[line_no]
    dot = line.point.dot(line.direction)
    discriminant = dot * dot + radius * radius - line.point.norm_sq()
    if discriminant < 0.0:
        return None
    sqrt_d = math.sqrt(discriminant)
    t_left = -dot - sqrt_d
    t_right = -dot + sqrt_d

    for i in range(line_no):
        other = lines[i]
        denominator = line.direction.det(other.direction)
        numerator = other.direction.det(line.point - other.point)
        if abs(denominator) <= RVO_EPSILON:
            if numerator < 0.0:
                return None
            continue
        t = numerator / denominator
        if denominator >= 0.0:
            t_right = min(t_right, t)
        else:
            t_left = max(t_left, t)
        if t_left > t_right:
            return None

    if direction_opt:
        if opt.dot(line.direction) > 0.0:
            return line.point + line.direction * t_right
        return line.point + line.direction * t_left

    t = line.direction.dot(opt - line.point)
    if t < t_left:
        return line.point + line.direction * t_left
    if t > t_right:
        return line.point + line.direction * t_right
    return line.point + line.direction * t


def linear_program2(
    lines: Sequence[Line], radius: float, opt: Vec2, direction_opt: bool = False
) -> tuple[int, Vec2]:
    """Closest point to ``opt`` inside every half-plane and the speed disc.

    Returns ``(n, v)``; ``n < len(lines)`` is the index of the first line that
    could not be satisfied, with ``v`` the best velocity found before it.
    """
    if direction_opt:
        result = opt * radius
    elif opt.norm_sq() > radius * radius:
        result = opt.unit() * radius
    else:
        result = opt

    for i, line in enumerate(lines):
        if line.direction.det(line.point - result) > 0.0:
            candidate = _lp1(lines, i, radius, opt, direction_opt)
            if candidate is None:
                return i, result
            result = candidate
    return len(lines), result


def linear_program3(
    lines: Sequence[Line], begin_line: int, radius: float, result: Vec2
) -> Vec2:
    """Minimize the maximum half-plane violation (infeasible fallback)."""
    distance = 0.0
    for i in range(begin_line, len(lines)):
        line = lines[i]
        if line.direction.det(line.point - result) <= distance:
            continue
        proj_lines: list[Line] = []
        for j in range(i):
            other = lines[j]
            denominator = line.direction.det(other.direction)
            if abs(denominator) <= RVO_EPSILON:
                if line.direction.dot(other.direction) > 0.0:
                    continue
                point = (line.point + other.point) * 0.5
            else:
                point = line.point + line.direction * (
                    other.direction.det(line.point - other.point) / denominator
                )
            proj_lines.append(Line(point, (other.direction - line.direction).unit()))

        previous = result
        n, candidate = linear_program2(
            proj_lines, radius, Vec2(-line.direction.y, line.direction.x), True
        )
        # Only a floating-point failure can leave n short; keep the old result then.
        result = candidate if n >= len(proj_lines) else previous
        distance = line.direction.det(line.point - result)
    return result


def solve_velocity(lines: Sequence[Line], max_speed: float, pref_velocity: Vec2) -> Vec2:
    n, result = linear_program2(lines, max_speed, pref_velocity)
    if n < len(lines):
        result = linear_program3(lines, n, max_speed, result)
    return result


def compute_velocity(
    p: Vec2,
    v: Vec2,
    radius: float,
    max_speed: float,
    pref_velocity: Vec2,
    neighbors: Sequence[Neighbor],
    time_horizon: float,
    dt: float,
    neighbor_dist: float,
) -> Vec2:
    """New velocity for one agent given its neighbors' current state."""
    in_range = [
        nb for nb in neighbors if (nb.p - p).norm_sq() < neighbor_dist * neighbor_dist
    ]
    in_range.sort(key=lambda nb: (nb.p - p).norm_sq())
    lines = [orca_line(p, v, radius, nb, time_horizon, dt) for nb in in_range]
    return solve_velocity(lines, max_speed, pref_velocity)
