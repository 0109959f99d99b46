"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line that is printed in the terminal summary.
"""
import math
import os
import time
from dataclasses import replace

import numpy as np
import pytest

from conftest import acceptance_line
from fixtures import crowd_arc, run_round
from oracles import compare_scene, entropy_fusion_reference, random_scene
from samalm.critics import Branch, CriticParams, local_penalty
from samalm.fusion import FusionParams, fuse
from samalm.harness.config import ExperimentConfig, RunMode
from samalm.harness.metrics import Outcome
from samalm.harness.runner import run_batch
from samalm.llm.gateway import BackendConfig, Mode, ScriptedParams
from samalm.sim.config import ScenarioConfig
from samalm.sim.core import human_policy_step, initial_state, step
from samalm.sim.geometry import dist


def test_criterion_1_fusion_arithmetic():
    t0 = time.perf_counter()
    r = fuse([75, 25], 60)
    _, H, omega, Z = entropy_fusion_reference([75, 25], 60)
    # Closed forms, evaluated directly.
    H_closed = -(0.75 * math.log(0.75) + 0.25 * math.log(0.25))
    omega_closed = H_closed / math.log(2)
    Z_closed = omega_closed * 50 + (1 - omega_closed) * 60
    example_ok = (
        abs(r.H - H) < 1e-9 and abs(r.omega - omega) < 1e-9 and abs(r.Z - Z) < 1e-9
        and abs(r.H - H_closed) < 1e-9 and abs(r.Z - Z_closed) < 1e-9
        and round(r.H, 4) == 0.5623 and round(r.omega, 4) == 0.8113 and round(r.Z, 1) == 51.9
    )
    rng = np.random.default_rng(1)
    violations = 0
    for _ in range(10_000):
        n = int(rng.integers(1, 9))
        Q = list(rng.uniform(-200, 100, n))
        Qg = float(rng.uniform(-200, 100))
        res = fuse(Q, Qg)
        mean = sum(Q) / n
        if not (0.0 <= res.omega <= 1.0):
            violations += 1
        elif abs(sum(res.C) - 1.0) > 1e-12:
            violations += 1
        elif not (min(mean, Qg) - 1e-9 <= res.Z <= max(mean, Qg) + 1e-9):
            violations += 1
    elapsed = time.perf_counter() - t0
    passed = example_ok and violations == 0 and elapsed < 5.0
    acceptance_line(
        1, "fusion arithmetic", passed,
        f"H={r.H:.10f} omega={r.omega:.10f} Z={r.Z:.10f} (tol 1e-9); "
        f"{violations} invariant violations / 10^4; {elapsed:.2f}s < 5s",
    )
    assert passed


def test_criterion_2_critic_oracle_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240)
    params = CriticParams()
    mismatches = 0
    penalized = 0
    for _ in range(10_000):
        scene = random_scene(rng, max_humans=10, max_robots=5)
        if not compare_scene(*scene, params):
            mismatches += 1
        penalized += int(any(
            local_penalty(scene[0][i], scene[1][i], scene[2][i], params).penalties for i in scene[0]
        ))
    elapsed = time.perf_counter() - t0
    passed = mismatches == 0 and elapsed < 30.0
    acceptance_line(
        2, "critic oracle equivalence", passed,
        f"{mismatches} mismatches / 10^4 scenes ({penalized} with penalties); {elapsed:.1f}s < 30s",
    )
    assert passed


def test_criterion_3_requery_efficacy():
    good = 0
    for seed in range(100):
        observations, _, _ = crowd_arc(seed)
        first, out = run_round(seed, "first_attempt")
        me = observations[0].self_state
        first_items = local_penalty(observations[0], first[0].action, me.persona, CriticParams()).penalties
        final_items = local_penalty(observations[0], out.actions[0], me.persona, CriticParams()).penalties
        ok = (
            any(p.branch is Branch.NEAR_COLLISION for p in first_items)
            and not any(p.branch is Branch.NEAR_COLLISION for p in final_items)
            and out.requeries == 1
            and not out.forced
            and out.logs[-1].Z >= FusionParams().z_th
        )
        good += ok
    passed = good == 100
    acceptance_line(3, "re-query efficacy", passed, f"{good}/100 trials with exactly one re-query and final Z >= 80")
    assert passed


def test_criterion_4_loop_boundedness():
    fusion = FusionParams()
    good = 0
    t0 = time.perf_counter()
    for seed in range(100):
        _, out = run_round(seed, "always", fusion)
        good += out.requeries == fusion.max_requery and out.forced and out.logs[-1].forced
    elapsed = time.perf_counter() - t0
    passed = good == 100
    acceptance_line(
        4, "loop boundedness", passed,
        f"{good}/100 rounds ended after exactly {fusion.max_requery} re-queries with forced=True ({elapsed:.1f}s)",
    )
    assert passed


def _batch(mode=RunMode.DECENTRALIZED, fault="none", z_th=80.0, **kw):
    cfg = ExperimentConfig(
        scenario=ScenarioConfig(n_robots=3, n_humans=5),
        mode=mode,
        backend=BackendConfig(scripted=ScriptedParams(fault_mode=fault, fault_rate=0.1)),
        episodes=50,
        seed=0,
        fusion=FusionParams(z_th=z_th),
        record_transcripts=False,
        **kw,
    )
    t0 = time.perf_counter()
    report, logs = run_batch(cfg)
    return report, logs, time.perf_counter() - t0


def test_criterion_5_pipeline_design_target():
    report, _, elapsed = _batch()
    rr = sum(r.robot_robot_collisions for r in report.episodes)
    passed = report.SR >= 80.0 and rr == 0 and elapsed < 120.0
    acceptance_line(
        5, "pipeline design target", passed,
        f"SR={report.SR:.0f}% (>= 80), SS={report.SS}, robot-robot collisions={rr} (== 0), {elapsed:.0f}s < 120s",
    )
    assert passed


def test_criterion_6_ablation_direction():
    dec, _, _ = _batch(RunMode.DECENTRALIZED, "random")
    abl, _, _ = _batch(RunMode.NO_CRITIC, "random")
    calibrated, _, _ = _batch(RunMode.DECENTRALIZED, "random", z_th=97.5)
    passed = dec.SR >= abl.SR
    requeries = sum(r.requery_count for r in dec.episodes)
    acceptance_line(
        6, "ablation direction", passed,
        f"Decentralized SR={dec.SR:.0f}% vs NoCritic SR={abl.SR:.0f}% at Z_th=80 ({requeries} re-queries); "
        f"with Z_th=97.5 Decentralized SR={calibrated.SR:.0f}%",
    )
    assert passed


def test_criterion_7_determinism_and_replay(tmp_path, stub_server):
    small = ScenarioConfig(n_robots=3, n_humans=5)
    base = ExperimentConfig(scenario=small, episodes=5, seed=42)
    run_batch(replace(base, out_dir=str(tmp_path / "a")))
    run_batch(replace(base, out_dir=str(tmp_path / "b")))
    names = ["metrics.csv"] + [f"trajectories/episode_{i:04d}.jsonl" for i in range(5)]
    same = all((tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes() for n in names)

    # A live run through an OpenAI-compatible endpoint, then replayed offline.
    live_backend = BackendConfig(mode=Mode.HTTP, endpoint_url=stub_server.url, api_key="k", model_name="stub")
    live = replace(base, episodes=3, backend=live_backend, out_dir=str(tmp_path / "live"))
    live_report, _ = run_batch(live)
    replay_backend = BackendConfig(mode=Mode.REPLAY, transcript_path=str(tmp_path / "live" / "transcripts"))
    replayed = replace(base, episodes=3, backend=replay_backend, out_dir=str(tmp_path / "replay"), record_transcripts=False)
    replay_report, _ = run_batch(replayed)
    replay_names = [f"{sub}/episode_{i:04d}.jsonl" for sub in ("trajectories", "rounds") for i in range(3)]
    replay_same = all(
        (tmp_path / "live" / n).read_bytes() == (tmp_path / "replay" / n).read_bytes() for n in replay_names
    ) and (tmp_path / "live" / "metrics.csv").read_bytes() == (tmp_path / "replay" / "metrics.csv").read_bytes()
    no_aborts = live_report.aborted == 0 and replay_report.aborted == 0
    passed = same and replay_same and no_aborts
    acceptance_line(
        7, "determinism", passed,
        f"scripted rerun byte-identical={same}; live({len(stub_server.requests)} HTTP requests)->replay "
        f"trajectories/rounds/metrics byte-identical={replay_same}",
    )
    assert passed


def test_criterion_8_orca_sanity():
    cfg = ScenarioConfig(n_robots=0, n_humans=10)
    events = 0
    closest = math.inf
    t0 = time.perf_counter()
    for ep in range(100):
        rng = np.random.default_rng(1000 + ep)
        state = initial_state(replace(cfg, seed=1000 + ep), rng)
        for _ in range(int(cfg.t_max_s / cfg.dt_s)):
            vel, state = human_policy_step(state, rng, cfg)
            state, _ = step(state, [], vel, cfg)
            hs = state.humans
            for i in range(len(hs)):
                for j in range(i + 1, len(hs)):
                    d = dist(hs[i].p, hs[j].p)
                    closest = min(closest, d)
                    if d < hs[i].rho_h + hs[j].rho_h:
                        events += 1
    elapsed = time.perf_counter() - t0
    passed = events == 0
    acceptance_line(
        8, "ORCA sanity", passed,
        f"{events} interpenetrations in 100 episodes x 10 humans x 160 steps; closest pair {closest:.3f} m >= 0.6 ({elapsed:.0f}s)",
    )
    assert passed


@pytest.mark.skipif(not os.environ.get("SAMALM_API_URL"), reason="SAMALM_API_URL not set; live smoke test skipped")
def test_criterion_9_live_smoke(tmp_path):
    import json

    backend = BackendConfig.from_env(max_retries=3)
    cfg = ExperimentConfig(
        scenario=ScenarioConfig(n_robots=3, n_humans=5), backend=backend, episodes=3, out_dir=str(tmp_path)
    )
    report, _ = run_batch(cfg)
    # Every log line must parse as JSON.
    for sub in ("trajectories", "rounds", "transcripts"):
        for p in (tmp_path / sub).glob("*.jsonl"):
            for line in p.read_text().splitlines():
                json.loads(line)
    aborted = [r.error for r in report.episodes if r.outcome is Outcome.ABORTED]
    passed = not aborted
    acceptance_line(9, "live smoke", passed, f"3 episodes, aborts={aborted or 'none'}, SR={report.SR:.0f}%")
    assert passed
