"""Per-robot LLM actors: prompt assembly, response parsing, re-proposal."""
from __future__ import annotations

import json
import logging
import math
import re
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

from samalm.llm.gateway import CENTRAL_ACTOR, Gateway, Prompt, PromptTag
from samalm.sim.geometry import ZERO, Vec2, clamp_speed
from samalm.sim.state import RobotPersona

log = logging.getLogger(__name__)

TASK_CONFIG = """\
You control one robot in a team of social robots crossing a crowd of pedestrians.
Objective: reach your goal quickly without colliding with anyone and without
entering people's personal space.

Coordinates are metres in a shared world frame (x to the right, y up); velocities
are metres per second. Every command is held for one control step of 0.25 s.

World model lines:
  self: your position, velocity, goal, distance to goal, preferred speed and
        socially acceptable distance.
  robot-<id> / human-<id>: an entity you can see, with its velocity, distance to
        you, whether it is approaching, receding or static relative to you, its
        change in speed, and its predicted position at the next step.

Social rules:
  - keep at least (social distance + both body radii) from every human;
  - never come within both body radii + 0.1 m of any human or robot;
  - avoid areas where more than 3 humans gather;
  - do not exceed your preferred speed.

Your command is a direct velocity [v_x, v_y]. Respond with a JSON object
{"reasoning": ["step 1 ...", "step 2 ..."], "action": [v_x, v_y]}."""

SCHEMA_INSTRUCTION = (
    'Output format: exactly one JSON object {"reasoning": [string, ...], "action": [number, number]}. '
    "No text after the JSON object."
)
COT_INSTRUCTION = (
    "Think step by step: list numbered reasoning steps about your goal, each nearby "
    "entity and its predicted position, then emit the JSON."
)

CENTRAL_SCHEMA_INSTRUCTION = (
    'Output format: exactly one JSON object {"reasoning": [string, ...], '
    '"actions": [[v_x, v_y], ...]} with one action per robot section, in the order given.'
)


def persona_fragment(persona: RobotPersona) -> str:
    return (
        f"Robot type: {persona.kind.value}. Preferred speed: {persona.v_pref:.2f} m/s. "
        f"Socially acceptable distance: {persona.rho_pref:.2f} m. "
        f"Body radius: {persona.rho_r:.2f} m."
    )


_PERSONA_RE = re.compile(
    r"Preferred speed: (\d+(?:\.\d+)?) m/s\. Socially acceptable distance: (\d+(?:\.\d+)?) m\. "
    r"Body radius: (\d+(?:\.\d+)?) m\."
)


def parse_persona_fragment(text: str) -> tuple[float, float, float]:
    """(v_pref, rho_pref, rho_r) from a rendered persona fragment."""
    m = _PERSONA_RE.search(text)
    if not m:
        raise ValueError("no persona fragment found")
    return float(m.group(1)), float(m.group(2)), float(m.group(3))


@dataclass(frozen=True)
class FeedbackEntry:
    attempt: int
    local_reason: str
    global_reason: str

    def render(self) -> str:
        parts = [f"attempt {self.attempt}:"]
        if self.local_reason:
            parts.append(f"local critic: {self.local_reason}")
        if self.global_reason:
            parts.append(f"global critic: {self.global_reason}")
        return " ".join(parts)


@dataclass
class FeedbackBuffer:
    """Critic feedback accumulated for one robot during a single step."""

    capacity: int = 3
    entries: deque = field(default_factory=deque)

    def push(self, attempt: int, local_reason: str, global_reason: str = "") -> None:
        self.entries.append(FeedbackEntry(attempt, local_reason, global_reason))
        while len(self.entries) > self.capacity:
            self.entries.popleft()

    def clear(self) -> None:
        self.entries.clear()

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


@dataclass(frozen=True)
class ActionProposal:
    robot_id: int
    action: Vec2
    reasoning_chain: tuple[str, ...] = ()
    attempt: int = 0
    raw_text: str = ""
    degraded: bool = False


class ParseError(ValueError):
    pass


FEEDBACK_HEADER = "Critic feedback on your previous proposals this step:"


def build_actor_prompt(
    world_text: str,
    task_config: str,
    persona_text: str,
    feedback: Sequence[FeedbackEntry] | FeedbackBuffer = (),
    robot_id: int = 0,
    attempt: int = 0,
) -> Prompt:
    system = "\n\n".join([task_config, persona_text, SCHEMA_INSTRUCTION, COT_INSTRUCTION])
    user = "Current world model:\n" + world_text
    entries = list(feedback)
    if entries:
        user += "\n\n" + FEEDBACK_HEADER + "\n" + "\n".join(f"- {e.render()}" for e in entries)
    return Prompt(system, user, PromptTag.actor(robot_id), attempt)


def _json_objects(raw: str):
    decoder = json.JSONDecoder()
    i = raw.find("{")
    while i != -1:
        try:
            obj, _ = decoder.raw_decode(raw, i)
        except json.JSONDecodeError:
            obj = None
        if isinstance(obj, dict):
            yield obj
        i = raw.find("{", i + 1)


def _as_action(value, persona: RobotPersona) -> Vec2:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ParseError(f"action must be a two-element array, got {value!r}")
    comps = []
    for c in value:
        if isinstance(c, bool) or not isinstance(c, (int, float)):
            raise ParseError(f"action components must be numbers, got {value!r}")
        if not math.isfinite(c):
            raise ParseError(f"non-finite action component in {value!r}")
        comps.append(float(c))
    return clamp_speed(Vec2(*comps), persona.v_pref)


def _as_reasoning(value) -> tuple[str, ...]:
    if value is None:
        return ()
    if isinstance(value, str):
        return (value,)
    if isinstance(value, list):
        return tuple(str(x) for x in value)
    return (str(value),)


def parse_action(raw: str, persona: RobotPersona, robot_id: int = 0, attempt: int = 0) -> ActionProposal:
    """First JSON object carrying an ``action`` key, clamped to ``v_pref``."""
    for obj in _json_objects(raw):
        if "action" not in obj:
            continue
        action = _as_action(obj["action"], persona)
        return ActionProposal(robot_id, action, _as_reasoning(obj.get("reasoning")), attempt, raw)
    raise ParseError("no JSON object with an 'action' field found")


def degraded_proposal(robot_id: int, attempt: int, raw: str = "") -> ActionProposal:
    return ActionProposal(robot_id, ZERO, ("fallback: unparseable responses",), attempt, raw, True)


def propose(
    robot_id: int,
    world_text: str,
    task_config: str,
    persona: RobotPersona,
    feedback: FeedbackBuffer,
    gateway: Gateway,
    attempt: int = 0,
) -> ActionProposal:
    """Query the actor; one parse retry, then a zero-velocity fallback."""
    persona_text = persona_fragment(persona)
    raw = ""
    for parse_try in range(2):
        prompt = build_actor_prompt(world_text, task_config, persona_text, feedback, robot_id, attempt)
        raw = gateway.complete(prompt).text
        try:
            return parse_action(raw, persona, robot_id, attempt)
        except ParseError as exc:
            log.info("robot %d attempt %d: unparseable response (%s)", robot_id, attempt, exc)
            if parse_try == 0:
                feedback.push(attempt, f"your last response could not be parsed: {exc}. Reply with the JSON object only.")
    return degraded_proposal(robot_id, attempt, raw)


def build_central_prompt(
    sections: Sequence[tuple[int, RobotPersona, str]], task_config: str, nonce: int = 0
) -> Prompt:
    """Single prompt over every robot's world model, for the centralized baseline."""
    system = "\n\n".join(
        [task_config, "You plan for all robots at once.", CENTRAL_SCHEMA_INSTRUCTION, COT_INSTRUCTION]
    )
    blocks = []
    for rid, persona, text in sections:
        blocks.append(f"## robot-{rid}\n{persona_fragment(persona)}\n{text}")
    return Prompt(system, "\n\n".join(blocks), CENTRAL_ACTOR, nonce)


def parse_joint_actions(
    raw: str, personas: Sequence[tuple[int, RobotPersona]], nonce: int = 0
) -> list[ActionProposal]:
    for obj in _json_objects(raw):
        actions = obj.get("actions")
        if not isinstance(actions, list):
            continue
        if len(actions) != len(personas):
            raise ParseError(f"expected {len(personas)} actions, got {len(actions)}")
        reasoning = _as_reasoning(obj.get("reasoning"))
        return [
            ActionProposal(rid, _as_action(a, persona), reasoning, nonce, raw)
            for (rid, persona), a in zip(personas, actions)
        ]
    raise ParseError("no JSON object with an 'actions' array found")
