import pytest

from fixtures import MOBILE, crowd_arc, run_round
from samalm.actors import ActionProposal, FeedbackBuffer
from samalm.chain import build_chain
from samalm.critics import Branch, CriticParams, local_penalty
from samalm.fusion import FusionParams
from samalm.orchestrator import verification_round
from samalm.sim.geometry import Vec2
from samalm.sim.state import EntityView, LocalObservation, RobotState

ZERO = Vec2(0.0, 0.0)


def test_clean_round_accepts_verbatim():
    first, out = run_round(1, "none")
    assert out.requeries == 0 and not out.forced and len(out.logs) == 1
    assert out.actions == {0: first[0].action}
    assert out.logs[0].Z >= 80


def test_adversarial_first_attempt_needs_one_requery():
    observations, _, _ = crowd_arc(2)
    first, out = run_round(2, "first_attempt")
    branches = {p.branch for p in local_penalty(observations[0], first[0].action, MOBILE, CriticParams()).penalties}
    assert Branch.NEAR_COLLISION in branches
    assert out.requeries == 1 and not out.forced
    assert out.logs[-1].Z >= 80
    final = local_penalty(observations[0], out.actions[0], MOBILE, CriticParams())
    assert all(p.branch is not Branch.NEAR_COLLISION for p in final.penalties)


def test_incorrigible_actor_forced_after_max_requery():
    for max_requery in (0, 1, 3, 5):
        _, out = run_round(3, "always", FusionParams(max_requery=max_requery))
        assert out.requeries == max_requery and out.forced
        assert len(out.logs) == max_requery + 1
        assert out.logs[-1].forced and not any(l.forced for l in out.logs[:-1])


def test_feedback_reaches_buffer_before_requery():
    observations, personas, texts = crowd_arc(4)
    buffers = {0: FeedbackBuffer()}
    seen = []

    def ask(rid, attempt):
        seen.append([e.local_reason for e in buffers[rid]])
        return ActionProposal(rid, Vec2(-1.0, 0.0), attempt=attempt)

    me = observations[0].self_state
    bad = {0: ActionProposal(0, (me.g - me.p).unit() * 1.25)}
    out = verification_round(0, 0.0, observations, bad, personas, build_chain({0: ZERO}), buffers, ask)
    assert out.requeries >= 1
    assert "human-" in seen[0][0] and "near collision" in seen[0][0]


def _scene(positions, humans_by_robot):
    observations, personas = {}, {}
    for i, p in enumerate(positions):
        me = RobotState(i, MOBILE, Vec2(*p), ZERO, Vec2(20.0, 0.0), 0.0)
        hs = tuple(EntityView(j, Vec2(*h), ZERO) for j, h in humans_by_robot.get(i, []))
        observations[i] = LocalObservation(i, me, hs, (), 0.0)
        personas[i] = MOBILE
    return observations, personas


def test_only_targets_are_requeried_and_others_unchanged():
    observations, personas = _scene(
        [(0, 0), (5, 0), (10, 0)], {1: [(0, (5.6, 0.0)), (1, (5.0, 0.6)), (2, (5.0, -0.6))]}
    )
    proposals = {i: ActionProposal(i, ZERO) for i in range(3)}
    asked = []

    def ask(rid, attempt):
        asked.append((rid, attempt))
        return ActionProposal(rid, Vec2(-1.0, 0.0), attempt=attempt)

    buffers = {i: FeedbackBuffer() for i in range(3)}
    out = verification_round(
        0, 0.0, observations, proposals, personas, build_chain({i: observations[i].self_state.p for i in range(3)}),
        buffers, ask, FusionParams(z_th=95),
    )
    assert {rid for rid, _ in asked} == {1}
    assert out.actions[0] == ZERO and out.actions[2] == ZERO
    assert len(buffers[0]) == 0 and len(buffers[1]) >= 1
    log = out.logs[0].to_json()
    assert set(log) >= {"step", "attempt", "Q", "Q_global", "C", "H", "omega", "Z", "targets", "forced"}
    assert log["targets"] == [1]


def test_best_z_is_released_when_forced():
    observations, personas, _ = crowd_arc(5)
    goalward = (observations[0].self_state.g - observations[0].self_state.p).unit()
    sequence = [goalward * 0.3, goalward * 1.25, goalward * 1.25]

    def ask(rid, attempt):
        return ActionProposal(rid, sequence[attempt - 1], attempt=attempt)

    first = {0: ActionProposal(0, goalward * 1.25)}
    out = verification_round(
        0, 0.0, observations, first, personas, build_chain({0: ZERO}), {0: FeedbackBuffer()}, ask,
        FusionParams(z_th=100, max_requery=3),
    )
    assert out.forced
    zs = [l.Z for l in out.logs]
    best = max(range(len(zs)), key=lambda k: zs[k])
    assert out.actions[0] == pytest.approx(out.logs[best].actions[0])
