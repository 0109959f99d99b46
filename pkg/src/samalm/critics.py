"""Local and global critics.

Scores come from deterministic penalty engines; an LLM (or a template in
scripted mode) only writes the accompanying reasoning text.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from itertools import combinations
from typing import Mapping

from samalm.llm.gateway import GLOBAL_CRITIC, Gateway, Mode, Prompt, PromptTag
from samalm.llm.errors import GatewayError
from samalm.sim.geometry import Vec2, dist
from samalm.sim.state import LocalObservation, RobotPersona

log = logging.getLogger(__name__)

PENALTY_HEADER = "Itemized penalties:"


@dataclass(frozen=True)
class CriticParams:
    n_th: int = 3
    k: int = 2
    t_soft: float = 30.0
    score_base: float = 100.0
    w_social: float = 5.0
    w_near: float = 10.0
    w_high_risk: float = 5.0
    w_robot: float = 10.0
    w_overtime: float = 1.25
    w_group: float = 15.0
    near_margin: float = 0.1
    rho_h: float = 0.3
    dt: float = 0.25

    def __post_init__(self) -> None:
        if self.n_th < 1 or self.k < 1:
            raise ValueError("n_th and k must be >= 1")


class Branch(str, enum.Enum):
    SOCIAL_ZONE = "SocialZone"
    NEAR_COLLISION = "NearCollision"
    HIGH_RISK_AREA = "HighRiskArea"
    ROBOT_PROXIMITY = "RobotProximity"
    OVERTIME = "Overtime"
    GROUP_CROWDING = "GroupCrowding"


@dataclass(frozen=True)
class PenaltyItem:
    branch: Branch
    magnitude: float
    subjects: tuple[str, ...] = ()
    detail: str = ""

    def sentence(self) -> str:
        who = ", ".join(self.subjects)
        if self.branch is Branch.NEAR_COLLISION:
            return f"action brings robot too close to {who} (near collision, -{self.magnitude:g})"
        if self.branch is Branch.SOCIAL_ZONE:
            return f"action enters the personal space of {who} (-{self.magnitude:g})"
        if self.branch is Branch.ROBOT_PROXIMITY:
            return f"{who} come within collision margin of each other (-{self.magnitude:g})"
        return f"{self.detail} (-{self.magnitude:g})"

    def to_json(self) -> dict:
        return {
            "branch": self.branch.value,
            "magnitude": self.magnitude,
            "subjects": list(self.subjects),
            "detail": self.detail,
        }


@dataclass(frozen=True)
class CriticVerdict:
    scope: str  # "local:<id>" or "global"
    score: float
    penalties: tuple[PenaltyItem, ...] = ()
    reasoning: str = ""

    def to_json(self) -> dict:
        return {
            "scope": self.scope,
            "score": self.score,
            "penalties": [p.to_json() for p in self.penalties],
            "reasoning": self.reasoning,
        }


def _verdict(scope: str, items: list[PenaltyItem], params: CriticParams) -> CriticVerdict:
    return CriticVerdict(scope, params.score_base - sum(i.magnitude for i in items), tuple(items))


def crowd_count(
    obs: LocalObservation, action: Vec2, persona: RobotPersona, params: CriticParams
) -> int:
    """Visible humans inside the social distance after ``k`` constant-velocity steps."""
    horizon = params.k * params.dt
    dis_s = persona.rho_pref + persona.rho_r + params.rho_h
    me = obs.self_state.p + action * horizon
    return sum(1 for h in obs.visible_humans if dist(me, h.p + h.v * horizon) < dis_s)


def local_penalty(
    obs: LocalObservation, action: Vec2, persona: RobotPersona, params: CriticParams
) -> CriticVerdict:
    dt = params.dt
    dis_c = persona.rho_r + params.rho_h
    dis_s = persona.rho_pref + dis_c
    me = obs.self_state.p + action * dt
    items: list[PenaltyItem] = []
    for h in sorted(obs.visible_humans, key=lambda h: h.id):
        d = dist(me, h.p + h.v * dt)
        subject = (f"human-{h.id}",)
        if d < dis_c + params.near_margin:
            items.append(PenaltyItem(Branch.NEAR_COLLISION, params.w_near, subject, f"predicted distance {d:.2f} m"))
        elif d < dis_s:
            items.append(PenaltyItem(Branch.SOCIAL_ZONE, params.w_social, subject, f"predicted distance {d:.2f} m"))

    n = crowd_count(obs, action, persona, params)
    if n > params.n_th:
        items.append(
            PenaltyItem(
                Branch.HIGH_RISK_AREA,
                params.w_high_risk * (n - params.n_th),
                (),
                f"action leads into a crowded area: {n} humans within social distance in {params.k} steps",
            )
        )
    return _verdict(f"local:{obs.observer_id}", items, params)


def global_penalty(
    observations: Mapping[int, LocalObservation],
    joint_actions: Mapping[int, Vec2],
    personas: Mapping[int, RobotPersona],
    t: float,
    params: CriticParams,
) -> CriticVerdict:
    ids = sorted(joint_actions)
    dt = params.dt
    predicted = {i: observations[i].self_state.p + joint_actions[i] * dt for i in ids}
    items: list[PenaltyItem] = []

    for i, j in combinations(ids, 2):
        threshold = personas[i].rho_r + personas[j].rho_r + params.near_margin
        d = dist(predicted[i], predicted[j])
        if d < threshold:
            items.append(
                PenaltyItem(Branch.ROBOT_PROXIMITY, params.w_robot, (f"robot-{i}", f"robot-{j}"), f"predicted distance {d:.2f} m")
            )

    if t > params.t_soft and ids:
        t_m = sum(personas[i].t_m for i in ids) / len(ids)
        magnitude = max(0.0, params.w_overtime * (t - t_m))
        if magnitude > 0.0:
            items.append(
                PenaltyItem(Branch.OVERTIME, magnitude, (), f"team is behind schedule: t={t:.2f} s vs average {t_m:.2f} s")
            )

    crowded = [
        i for i in ids if crowd_count(observations[i], joint_actions[i], personas[i], params) > params.n_th
    ]
    if len(crowded) > len(ids) / 2.0:
        items.append(
            PenaltyItem(
                Branch.GROUP_CROWDING,
                params.w_group * len(crowded),
                tuple(f"robot-{i}" for i in crowded),
                f"{len(crowded)} of {len(ids)} robots are heading into crowds",
            )
        )
    return _verdict("global", items, params)


def template_reasoning(verdict: CriticVerdict) -> str:
    if not verdict.penalties:
        return "Approved: the action respects every checklist item."
    return "; ".join(p.sentence() for p in verdict.penalties)


@lru_cache(maxsize=None)
def load_checklist(name: str) -> str:
    """``name`` is ``local`` or ``global``."""
    return resources.files("samalm.assets").joinpath(f"{name}_checklist.txt").read_text(encoding="utf-8")


def critic_prompt(verdict: CriticVerdict, context_text: str, checklist: str, nonce: int = 0) -> Prompt:
    if verdict.scope == "global":
        tag = GLOBAL_CRITIC
    else:
        tag = PromptTag.local_critic(int(verdict.scope.split(":")[1]))
    lines = [p.sentence() for p in verdict.penalties] or ["none"]
    user = (
        f"{context_text}\n\nScore: {verdict.score:.2f}\n{PENALTY_HEADER}\n"
        + "\n".join(f"- {s}" for s in lines)
    )
    return Prompt(checklist, user, tag, nonce)


def critique_with_llm(
    verdict: CriticVerdict,
    context_text: str,
    checklist: str,
    gateway: Gateway | None,
    nonce: int = 0,
) -> CriticVerdict:
    """Attach reasoning text to a deterministic verdict. The score never changes."""
    if gateway is None or gateway.cfg.mode is Mode.SCRIPTED:
        reasoning = template_reasoning(verdict)
    else:
        try:
            reasoning = gateway.complete(critic_prompt(verdict, context_text, checklist, nonce)).text.strip()
        except GatewayError as exc:
            log.warning("critic %s fell back to template reasoning: %s", verdict.scope, exc)
            reasoning = template_reasoning(verdict)
    return CriticVerdict(verdict.scope, verdict.score, verdict.penalties, reasoning)
