"""Verification loop: critique a joint action, re-query failing actors, release."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping

from samalm.actors import ActionProposal, FeedbackBuffer
from samalm.chain import ChainTopology, relay_to_leader
from samalm.critics import (
    CriticParams,
    CriticVerdict,
    critique_with_llm,
    global_penalty,
    load_checklist,
    local_penalty,
)
from samalm.fusion import FusionParams, FusionResult, fuse
from samalm.llm.gateway import Gateway, Mode
from samalm.sim.geometry import Vec2
from samalm.sim.state import LocalObservation, RobotPersona
from samalm.world_model import fmt_vec


@dataclass(frozen=True)
class TeamPacket:
    robot_id: int
    observation: LocalObservation
    action: Vec2
    persona: RobotPersona
    local_score: float


@dataclass
class RoundLog:
    step: int
    attempt: int
    robot_ids: list[int]
    actions: list[list[float]]
    Q: list[float]
    Q_global: float
    C: list[float]
    H: float
    omega: float
    Z: float
    targets: list[int]
    forced: bool = False

    def to_json(self) -> dict:
        return {
            "step": self.step,
            "attempt": self.attempt,
            "robot_ids": self.robot_ids,
            "actions": self.actions,
            "Q": self.Q,
            "Q_global": self.Q_global,
            "C": self.C,
            "H": self.H,
            "omega": self.omega,
            "Z": self.Z,
            "targets": self.targets,
            "forced": self.forced,
        }


@dataclass
class RoundOutcome:
    actions: dict[int, Vec2]
    logs: list[RoundLog]
    requeries: int
    forced: bool
    local_verdicts: dict[int, CriticVerdict] = field(default_factory=dict)
    global_verdict: CriticVerdict | None = None


Repropose = Callable[[int, int], ActionProposal]


def _evaluate(
    proposals: Mapping[int, ActionProposal],
    observations: Mapping[int, LocalObservation],
    personas: Mapping[int, RobotPersona],
    chain: ChainTopology,
    t: float,
    critic: CriticParams,
    fusion: FusionParams,
) -> tuple[dict[int, CriticVerdict], CriticVerdict, FusionResult]:
    ids = sorted(proposals)
    local = {
        i: local_penalty(observations[i], proposals[i].action, personas[i], critic) for i in ids
    }
    packets = {
        i: TeamPacket(i, observations[i], proposals[i].action, personas[i], local[i].score)
        for i in ids
    }
    at_leader = relay_to_leader(chain, packets).packets
    team = global_penalty(
        {i: p.observation for i, p in at_leader.items()},
        {i: p.action for i, p in at_leader.items()},
        {i: p.persona for i, p in at_leader.items()},
        t,
        critic,
    )
    result = fuse([local[i].score for i in ids], team.score, fusion)
    return local, team, result


def _global_context(proposals: Mapping[int, ActionProposal], observations: Mapping[int, LocalObservation]) -> str:
    lines = ["Team state and proposed commands:"]
    for i in sorted(proposals):
        me = observations[i].self_state
        lines.append(
            f"robot-{i}: pos={fmt_vec(me.p)} goal={fmt_vec(me.g)} action={fmt_vec(proposals[i].action)}"
        )
    return "\n".join(lines)


def verification_round(
    step: int,
    t: float,
    observations: Mapping[int, LocalObservation],
    proposals: Mapping[int, ActionProposal],
    personas: Mapping[int, RobotPersona],
    chain: ChainTopology,
    buffers: Mapping[int, FeedbackBuffer],
    repropose: Repropose,
    fusion: FusionParams = FusionParams(),
    critic: CriticParams = CriticParams(),
    gateway: Gateway | None = None,
    world_texts: Mapping[int, str] | None = None,
) -> RoundOutcome:
    """Run critics and fusion, re-querying low scorers until Z clears the threshold.

    At most ``fusion.max_requery`` re-query iterations run. If Z never
    clears the threshold the best joint action seen is released with
    ``forced`` set.
    """
    current = dict(proposals)
    ids = sorted(current)
    logs: list[RoundLog] = []

    def record(attempt: int, res: FusionResult, local, team) -> None:
        logs.append(
            RoundLog(
                step,
                attempt,
                ids,
                [[current[i].action.x, current[i].action.y] for i in ids],
                [local[i].score for i in ids],
                team.score,
                list(res.C),
                res.H,
                res.omega,
                res.Z,
                sorted(ids[k] for k in res.requery_targets),
            )
        )

    local, team, res = _evaluate(current, observations, personas, chain, t, critic, fusion)
    record(0, res, local, team)
    best = (res.Z, dict(current), local, team)
    requeries = 0

    while res.Z < fusion.z_th and requeries < fusion.max_requery:
        targets = [ids[k] for k in sorted(res.requery_targets)]
        ctx = _global_context(current, observations) if gateway is not None else ""
        team_r = critique_with_llm(team, ctx, load_checklist("global"), gateway, requeries)
        for rid in targets:
            local_ctx = ""
            if world_texts is not None:
                local_ctx = f"{world_texts[rid]}\nProposed action: {fmt_vec(current[rid].action)}"
            local_r = critique_with_llm(local[rid], local_ctx, load_checklist("local"), gateway, requeries)
            buffers[rid].push(requeries, local_r.reasoning, team_r.reasoning)
        requeries += 1
        if gateway is not None and gateway.cfg.mode is Mode.HTTP and len(targets) > 1:
            with ThreadPoolExecutor(max_workers=min(len(targets), gateway.cfg.max_workers)) as pool:
                fresh = dict(zip(targets, pool.map(lambda r: repropose(r, requeries), targets)))
        else:
            fresh = {rid: repropose(rid, requeries) for rid in targets}
        current.update(fresh)
        local, team, res = _evaluate(current, observations, personas, chain, t, critic, fusion)
        record(requeries, res, local, team)
        if res.Z > best[0]:
            best = (res.Z, dict(current), local, team)

    forced = res.Z < fusion.z_th
    if forced:
        _, current, local, team = best
        logs[-1].forced = True
    return RoundOutcome(
        {i: current[i].action for i in ids}, logs, requeries, forced, local, team
    )
