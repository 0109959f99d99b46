"""Constructed scenes for the verification-loop tests."""
from __future__ import annotations

import math

import numpy as np

from samalm.actors import TASK_CONFIG, FeedbackBuffer, propose
from samalm.chain import build_chain
from samalm.critics import CriticParams
from samalm.fusion import FusionParams
from samalm.llm.gateway import BackendConfig, Gateway, ScriptedParams
from samalm.orchestrator import verification_round
from samalm.sim.geometry import Vec2
from samalm.sim.state import PERSONAS, EntityView, LocalObservation, RobotKind, RobotState
from samalm.world_model import build_graph, textualize

MOBILE = PERSONAS[RobotKind.MOBILE_ROBOT]
ARC_DEG = (0.0, 36.0, -36.0, 72.0, -72.0)


def crowd_arc(seed: int, radius: float = 0.97):
    """One robot whose goal lies behind an arc of five standing people.

    The arc is centred on the goal bearing, so charging straight at the goal
    is a near collision while backing away is penalty free. Each seed
    rotates the scene and jitters every person by a few centimetres.
    """
    rng = np.random.default_rng(seed)
    rot = float(rng.uniform(0.0, 2.0 * math.pi))
    origin = Vec2(*rng.uniform(-2.0, 2.0, 2))
    humans = []
    for j, deg in enumerate(ARC_DEG):
        theta = rot + math.radians(deg) + float(rng.uniform(-0.03, 0.03))
        r = radius + float(rng.uniform(-0.02, 0.02))
        humans.append(EntityView(j, origin + Vec2.polar(r, theta), Vec2(0.0, 0.0)))
    goal = origin + Vec2.polar(5.0, rot)
    me = RobotState(0, MOBILE, origin, Vec2(0.0, 0.0), goal, rot)
    obs = LocalObservation(0, me, tuple(humans), (), 0.0)
    text = textualize(build_graph(obs), MOBILE).text
    return {0: obs}, {0: MOBILE}, {0: text}


def run_round(seed: int, fault_mode: str, fusion: FusionParams = FusionParams()):
    observations, personas, texts = crowd_arc(seed)
    gateway = Gateway(BackendConfig(scripted=ScriptedParams(fault_mode=fault_mode)))
    buffers = {0: FeedbackBuffer(fusion.max_requery)}

    def ask(rid: int, attempt: int):
        return propose(rid, texts[rid], TASK_CONFIG, personas[rid], buffers[rid], gateway, attempt)

    first = {0: ask(0, 0)}
    chain = build_chain({0: observations[0].self_state.p})
    outcome = verification_round(
        0, 0.0, observations, first, personas, chain, buffers, ask, fusion, CriticParams(), gateway, texts
    )
    return first, outcome
