"""Deterministic stand-in LLM used for tests, replay fixtures and design targets.

The actor oracle reads the same world-model text a live model would see and
picks the best of a fixed candidate set: 24 headings spaced 15 degrees apart
(starting at the goal bearing) times 3 speeds, plus standing still.
"""
from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass

from samalm.llm.gateway import Prompt, ScriptedParams, TagKind
from samalm.sim.geometry import ZERO, Vec2, wrap_angle
from samalm.world_model import NodeKind, ParsedWorld, fmt, parse_world_text

N_HEADINGS = 24
SPEED_FRACTIONS = (1.0, 0.5, 0.25)
CONTACT_PENALTY = 50.0
FEEDBACK_WEIGHT = 2.0
_TIE_EPS = 1e-9


@dataclass(frozen=True)
class Candidate:
    action: Vec2
    heading_offset: int  # multiples of 15 degrees from the goal bearing; -1 for standing still
    speed_fraction: float
    progress: float
    penalty: float
    score: float
    heading_change: float


def _entity_penalty(
    d_next: float, dis_c: float, dis_s: float, near_margin: float
) -> float:
    if d_next < dis_c + near_margin:
        return 10.0
    if d_next < dis_s:
        return 5.0
    return 0.0


def evaluate_candidates(
    world: ParsedWorld,
    v_pref: float,
    rho_pref: float,
    rho_r: float,
    params: ScriptedParams,
    flagged: frozenset[str] = frozenset(),
) -> list[Candidate]:
    """Score every candidate: weighted goal progress minus predicted penalties."""
    dt, k, other_r = params.dt, params.lookahead, params.assumed_radius
    dis_c = rho_r + other_r
    dis_s = rho_pref + dis_c
    to_goal = world.g - world.p
    goal_d = to_goal.norm()
    goal_bearing = math.atan2(to_goal.y, to_goal.x) if goal_d > 0 else 0.0
    if world.v.norm() > 1e-9:
        current_heading = math.atan2(world.v.y, world.v.x)
    else:
        current_heading = goal_bearing

    options: list[tuple[Vec2, int, float]] = [(ZERO, -1, 0.0)]
    for j in range(N_HEADINGS):
        theta = goal_bearing + j * 2.0 * math.pi / N_HEADINGS
        for f in SPEED_FRACTIONS:
            options.append((Vec2.polar(f * v_pref, theta), j, f))

    out = []
    for a, j, f in options:
        p1 = world.p + a * dt
        progress = goal_d - (world.g - p1).norm()
        penalty = 0.0
        crowd = 0
        pk = world.p + a * (k * dt)
        for e in world.entities:
            weight = FEEDBACK_WEIGHT if e.key in flagged else 1.0
            e1 = e.p + e.v * dt
            d1 = (p1 - e1).norm()
            penalty += weight * _entity_penalty(d1, dis_c, dis_s if e.kind is NodeKind.HUMAN else 0.0, 0.1)
            # Others may deviate from constant velocity, so the first step
            # keeps a margin of roughly one step of their travel.
            # Graded so that, when every move is risky, backing off still wins.
            if d1 < dis_c + params.contact_margin:
                penalty += CONTACT_PENALTY * (1.0 + dis_c + params.contact_margin - d1)
            elif e.kind is NodeKind.ROBOT and (p1 - e.p).norm() < dis_c + params.robot_reach:
                # Another planner may turn anywhere within one step of travel.
                penalty += CONTACT_PENALTY * (1.0 + dis_c + params.robot_reach - (p1 - e.p).norm())
            else:
                for s in range(2, k + 1):
                    if (world.p + a * (s * dt) - (e.p + e.v * (s * dt))).norm() < dis_c:
                        penalty += CONTACT_PENALTY
                        break
            if e.kind is NodeKind.HUMAN and (pk - (e.p + e.v * (k * dt))).norm() < dis_s:
                crowd += 1
        if crowd > params.n_th:
            penalty += 5.0 * (crowd - params.n_th)
        heading_change = math.pi if j < 0 else abs(wrap_angle(goal_bearing + j * 2.0 * math.pi / N_HEADINGS - current_heading))
        score = params.progress_weight * progress - penalty
        out.append(Candidate(a, j, f, progress, penalty, score, heading_change))
    return out


def _best(cands: list[Candidate]) -> Candidate:
    top = max(c.score for c in cands)
    tied = [c for c in cands if c.score >= top - _TIE_EPS]
    return min(tied, key=lambda c: (c.heading_change, -c.speed_fraction))


def _worst(cands: list[Candidate]) -> Candidate:
    top = max(c.penalty for c in cands)
    tied = [c for c in cands if c.penalty >= top - _TIE_EPS]
    return max(tied, key=lambda c: (c.score, -c.heading_change))


def scripted_actor_policy(
    world: ParsedWorld,
    v_pref: float,
    rho_pref: float,
    rho_r: float,
    params: ScriptedParams = ScriptedParams(),
    flagged: frozenset[str] = frozenset(),
    unsafe: bool = False,
) -> tuple[Vec2, list[str]]:
    """Pick an action for one robot; ``unsafe`` selects the most penalized one instead."""
    if (world.g - world.p).norm() == 0.0:
        return ZERO, ["1. already at the goal; hold position"]
    cands = evaluate_candidates(world, v_pref, rho_pref, rho_r, params, flagged)
    choice = _worst(cands) if unsafe else _best(cands)
    near = sorted(world.entities, key=lambda e: e.distance)[:3]
    steps = [f"1. goal is {world.goal_dist:.2f} m away; preferred speed {v_pref:.2f} m/s"]
    for e in near:
        steps.append(f"{len(steps) + 1}. {e.key} at {e.distance:.2f} m, {e.trend.value}")
    if choice.heading_offset < 0:
        steps.append(f"{len(steps) + 1}. every move is penalized; stand still")
    else:
        steps.append(
            f"{len(steps) + 1}. heading {choice.heading_offset * 15} deg off the goal bearing at "
            f"{choice.speed_fraction:.2f} x preferred speed, predicted penalty {choice.penalty:.0f}"
        )
    return choice.action, steps


_FEEDBACK_SUBJECT_RE = re.compile(r"\b((?:human|robot)-\d+)\b")


def _fault_draw(prompt: Prompt) -> float:
    h = hashlib.sha256(f"{prompt.key}".encode()).digest()
    return int.from_bytes(h[:8], "big") / 2.0**64


def _action_json(reasoning: list[str], a: Vec2) -> str:
    return json.dumps({"reasoning": reasoning})[:-1] + f', "action": [{fmt(a.x)}, {fmt(a.y)}]}}'


def _is_unsafe(prompt: Prompt, params: ScriptedParams, has_feedback: bool) -> bool:
    mode = params.fault_mode
    if mode == "always":
        return True
    if mode == "first_attempt":
        return not has_feedback
    if mode == "random":
        return _fault_draw(prompt) < params.fault_rate
    return False


def _actor_reply(prompt: Prompt, params: ScriptedParams) -> str:
    from samalm.actors import FEEDBACK_HEADER, parse_persona_fragment

    if params.fault_mode == "garbage":
        return "I am not sure what to do here."
    world = parse_world_text(prompt.user)
    v_pref, rho_pref, rho_r = parse_persona_fragment(prompt.system)
    if params.fault_mode == "zero":
        return _action_json(["1. hold position"], ZERO)
    _, _, feedback = prompt.user.partition(FEEDBACK_HEADER)
    flagged = frozenset(_FEEDBACK_SUBJECT_RE.findall(feedback))
    unsafe = _is_unsafe(prompt, params, bool(feedback))
    a, reasoning = scripted_actor_policy(world, v_pref, rho_pref, rho_r, params, flagged, unsafe)
    return _action_json(reasoning, a)


def _central_reply(prompt: Prompt, params: ScriptedParams) -> str:
    from samalm.actors import parse_persona_fragment

    sections = re.split(r"^## robot-\d+\n", prompt.user, flags=re.M)[1:]
    actions = []
    for sec in sections:
        world = parse_world_text(sec)
        v_pref, rho_pref, rho_r = parse_persona_fragment(sec)
        if params.fault_mode == "zero":
            a = ZERO
        else:
            a, _ = scripted_actor_policy(world, v_pref, rho_pref, rho_r, params)
        actions.append(f"[{fmt(a.x)}, {fmt(a.y)}]")
    return '{"reasoning": ["1. plan each robot greedily"], "actions": [' + ", ".join(actions) + "]}"


def _critic_reply(prompt: Prompt) -> str:
    from samalm.critics import PENALTY_HEADER

    _, _, items = prompt.user.partition(PENALTY_HEADER)
    sentences = [line[2:].strip() for line in items.splitlines() if line.startswith("- ")]
    sentences = [s for s in sentences if s != "none"]
    if not sentences:
        return "Approved: the action respects every checklist item."
    return "; ".join(sentences)


def scripted_complete(prompt: Prompt, params: ScriptedParams) -> str:
    kind = prompt.tag.kind
    if kind is TagKind.ACTOR:
        return _actor_reply(prompt, params)
    if kind is TagKind.CENTRAL_ACTOR:
        return _central_reply(prompt, params)
    return _critic_reply(prompt)
