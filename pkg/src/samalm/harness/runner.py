"""Episode and batch execution."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from samalm.actors import (
    TASK_CONFIG,
    ActionProposal,
    FeedbackBuffer,
    ParseError,
    build_central_prompt,
    parse_joint_actions,
    propose,
)
from samalm.chain import build_chain
from samalm.harness.config import ExperimentConfig, RunMode, episode_seed
from samalm.harness.metrics import EpisodeResult, MetricsReport, Outcome, make_report
from samalm.llm.errors import GatewayError
from samalm.llm.gateway import Gateway, Mode
from samalm.orchestrator import verification_round
from samalm.sim.core import human_policy_step, initial_state, observe, step
from samalm.sim.geometry import ZERO, dist
from samalm.sim.state import EventKind, LocalObservation, RobotStatus, SimState
from samalm.world_model import build_graph, textualize

log = logging.getLogger(__name__)


@dataclass
class EpisodeLogs:
    trajectory: list[dict] = field(default_factory=list)
    rounds: list[dict] = field(default_factory=list)
    transcript_path: str | None = None


def trajectory_record(state: SimState, events) -> dict:
    return {
        "step": state.step_index,
        "t": state.t,
        "robots": [
            {"id": r.id, "p": [r.p.x, r.p.y], "v": [r.v.x, r.v.y], "status": r.status.value}
            for r in state.robots
        ],
        "humans": [{"id": h.id, "p": [h.p.x, h.p.y], "v": [h.v.x, h.v.y]} for h in state.humans],
        "events": [e.to_json() for e in events],
    }


def _transcript_for(config: ExperimentConfig, index: int) -> str | None:
    """Where this episode's transcript is read from (replay) or written to."""
    backend = config.backend
    if backend.mode is Mode.REPLAY:
        path = Path(backend.transcript_path)
        if path.is_dir():
            return str(path / f"episode_{index:04d}.jsonl")
        return str(path)
    if config.record_transcripts and config.out_dir:
        d = Path(config.out_dir) / "transcripts"
        d.mkdir(parents=True, exist_ok=True)
        p = d / f"episode_{index:04d}.jsonl"
        if p.exists():
            p.unlink()
        return str(p)
    return backend.transcript_path


def _centralized_actions(
    gateway: Gateway, obs_texts: dict[int, str], state: SimState, nonce: int
) -> dict[int, ActionProposal]:
    active = state.active_robots()
    sections = [(r.id, r.persona, obs_texts[r.id]) for r in active]
    personas = [(r.id, r.persona) for r in active]
    raw = ""
    for attempt in range(2):
        prompt = build_central_prompt(sections, TASK_CONFIG, nonce + attempt)
        raw = gateway.complete(prompt).text
        try:
            return {p.robot_id: p for p in parse_joint_actions(raw, personas, nonce)}
        except ParseError as exc:
            log.info("centralized planner response unparseable (%s)", exc)
    return {r.id: ActionProposal(r.id, ZERO, (), nonce, raw, True) for r in active}


def run_episode(
    config: ExperimentConfig, seed: int, index: int = 0, gateway: Gateway | None = None
) -> tuple[EpisodeResult, EpisodeLogs]:
    scenario = replace(config.scenario, seed=seed)
    critic = config.resolved_critic()
    fusion = config.fusion
    logs = EpisodeLogs()
    own_gateway = gateway is None
    if own_gateway:
        transcript = _transcript_for(config, index)
        logs.transcript_path = transcript
        gateway = Gateway(replace(config.resolved_backend(), transcript_path=transcript))

    rng = np.random.default_rng(seed)
    state = initial_state(scenario, rng)
    result = EpisodeResult(index, seed, Outcome.TIMEOUT)
    result.t_m_mean = sum(r.persona.t_m for r in state.robots) / max(len(state.robots), 1)
    result.straight_lines = [dist(r.p, r.g) for r in state.robots]
    path = {r.id: 0.0 for r in state.robots}
    arrival: dict[int, float] = {}
    buffers = {r.id: FeedbackBuffer(max(fusion.max_requery, 1)) for r in state.robots}
    prev_obs: dict[int, LocalObservation] = {}
    logs.trajectory.append(trajectory_record(state, []))
    collided = False

    try:
        while state.active_robots():
            active = state.active_robots()
            personas = {r.id: r.persona for r in active}
            obs = {r.id: observe(state, r.id, scenario) for r in active}
            texts = {
                rid: textualize(build_graph(o, prev_obs.get(rid), scenario.dt_s), personas[rid]).text
                for rid, o in obs.items()
            }

            if config.mode is RunMode.CENTRALIZED:
                proposals = _centralized_actions(gateway, texts, state, 0)
                actions = {rid: p.action for rid, p in proposals.items()}
            else:
                for b in buffers.values():
                    b.clear()

                def ask(rid: int, attempt: int) -> ActionProposal:
                    return propose(rid, texts[rid], TASK_CONFIG, personas[rid], buffers[rid], gateway, attempt)

                if gateway.cfg.mode is Mode.HTTP and len(active) > 1:
                    from concurrent.futures import ThreadPoolExecutor

                    with ThreadPoolExecutor(max_workers=min(len(active), gateway.cfg.max_workers)) as pool:
                        proposals = dict(zip(personas, pool.map(lambda rid: ask(rid, 0), personas)))
                else:
                    proposals = {rid: ask(rid, 0) for rid in personas}

                if config.mode is RunMode.DECENTRALIZED:
                    chain = build_chain({r.id: r.p for r in active})
                    outcome = verification_round(
                        state.step_index,
                        state.t,
                        obs,
                        proposals,
                        personas,
                        chain,
                        buffers,
                        ask,
                        fusion,
                        critic,
                        gateway,
                        texts,
                    )
                    actions = outcome.actions
                    result.requery_count += outcome.requeries
                    result.forced_count += int(outcome.forced)
                    for entry in outcome.logs:
                        rec = entry.to_json()
                        rec["chain"] = list(chain.order)
                        logs.rounds.append(rec)
                else:
                    actions = {rid: p.action for rid, p in proposals.items()}

            joint = [actions[r.id] for r in active]
            human_v, state = human_policy_step(state, rng, scenario)
            state, events = step(state, joint, human_v, scenario)

            for r, a in zip(active, joint):
                path[r.id] += a.norm() * scenario.dt_s
                me = state.robot(r.id)
                dis_s = r.persona.rho_pref + r.persona.rho_r
                if any(dist(me.p, h.p) < dis_s + h.rho_h for h in state.humans):
                    result.discomfort_steps += 1
                result.robot_steps += 1
            for e in events:
                if e.kind is EventKind.ARRIVAL:
                    arrival[e.subjects[0]] = e.t
                elif e.kind is EventKind.ROBOT_ROBOT_COLLISION:
                    result.robot_robot_collisions += 1
                    collided = True
                elif e.kind is EventKind.ROBOT_HUMAN_COLLISION:
                    result.robot_human_collisions += 1
                    collided = True
            logs.trajectory.append(trajectory_record(state, events))
            prev_obs = obs
            if any(e.kind is EventKind.TIMEOUT for e in events):
                break
    except GatewayError as exc:
        log.error("episode %d aborted by backend: %s", index, exc)
        result.outcome = Outcome.ABORTED
        result.error = f"{type(exc).__name__}: {exc}"
    finally:
        if own_gateway:
            gateway.close()

    result.steps = state.step_index
    result.path_lengths = [path[r.id] for r in state.robots]
    result.nav_time_per_robot = [arrival.get(r.id, state.t) for r in state.robots]
    if result.outcome is not Outcome.ABORTED:
        if collided:
            result.outcome = Outcome.COLLISION
        elif all(r.status is RobotStatus.ARRIVED for r in state.robots):
            result.outcome = Outcome.SUCCESS
        else:
            result.outcome = Outcome.TIMEOUT
    return result, logs


def run_batch(config: ExperimentConfig, write: bool = True) -> tuple[MetricsReport, list[EpisodeLogs]]:
    """Run every episode of ``config`` and, if ``out_dir`` is set, export artifacts."""
    seeds = [episode_seed(config.seed, i) for i in range(config.episodes)]
    if config.jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            pairs = list(pool.map(lambda i: run_episode(config, seeds[i], i), range(config.episodes)))
    else:
        pairs = [run_episode(config, seeds[i], i) for i in range(config.episodes)]
    results = [p[0] for p in pairs]
    all_logs = [p[1] for p in pairs]
    report = make_report(results, config.to_json(), config.ss_weights)
    if write and config.out_dir:
        from samalm.harness.export import export

        export(report, all_logs, config.out_dir)
    return report, all_logs
