"""Artifact export and metrics recomputation from exported files."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Sequence

from samalm.harness.config import SocialScoreWeights
from samalm.harness.metrics import (
    ABORT_EXCLUSION_FRACTION,
    EpisodeResult,
    MetricsReport,
    Outcome,
    episode_social_score,
    round_half_up,
    ss_of,
)

CSV_FIELDS = [
    "episode",
    "seed",
    "outcome",
    "steps",
    "nav_time_mean",
    "path_length_total",
    "straight_line_total",
    "discomfort_steps",
    "robot_steps",
    "t_m_mean",
    "requery_count",
    "forced_count",
    "robot_robot_collisions",
    "robot_human_collisions",
    "ss",
    "sr",
]


def _num(x: float) -> str:
    return repr(float(x))


def episode_row(r: EpisodeResult, weights: SocialScoreWeights) -> dict[str, str]:
    nav = r.nav_time_per_robot
    return {
        "episode": str(r.episode),
        "seed": str(r.seed),
        "outcome": r.outcome.value,
        "steps": str(r.steps),
        "nav_time_mean": _num(math.fsum(nav) / len(nav) if nav else 0.0),
        "path_length_total": _num(math.fsum(r.path_lengths)),
        "straight_line_total": _num(math.fsum(r.straight_lines)),
        "discomfort_steps": str(r.discomfort_steps),
        "robot_steps": str(r.robot_steps),
        "t_m_mean": _num(r.t_m_mean),
        "requery_count": str(r.requery_count),
        "forced_count": str(r.forced_count),
        "robot_robot_collisions": str(r.robot_robot_collisions),
        "robot_human_collisions": str(r.robot_human_collisions),
        "ss": _num(ss_of(r, weights)),
        "sr": "",
    }


def write_jsonl(path: Path, records: Sequence[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def export(report: MetricsReport, logs: Sequence, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    for sub in ("trajectories", "rounds", "transcripts"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    weights = SocialScoreWeights(**report.config.get("ss_weights", {}))

    written = []
    csv_path = out / "metrics.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in report.episodes:
            w.writerow(episode_row(r, weights))
        if report.episodes:
            w.writerow({**{k: "" for k in CSV_FIELDS}, "episode": "summary", "ss": str(report.SS), "sr": _num(report.SR)})
    written.append(csv_path)

    for r, lg in zip(report.episodes, logs):
        for sub, records in (("trajectories", lg.trajectory), ("rounds", lg.rounds)):
            p = out / sub / f"episode_{r.episode:04d}.jsonl"
            write_jsonl(p, records)
            written.append(p)

    cfg_path = out / "config.json"
    cfg_path.write_text(json.dumps(report.config, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    written.append(cfg_path)
    return written


def recompute_from_csv(path: str | Path, weights: SocialScoreWeights = SocialScoreWeights()) -> dict:
    """SR/SS recomputed from the per-episode rows of an exported metrics.csv."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    episodes = [r for r in rows if r["episode"] != "summary"]
    summary = next((r for r in rows if r["episode"] == "summary"), None)

    aborted = sum(1 for r in episodes if r["outcome"] == Outcome.ABORTED.value)
    counted = episodes
    if episodes and aborted >= ABORT_EXCLUSION_FRACTION * len(episodes):
        counted = [r for r in episodes if r["outcome"] != Outcome.ABORTED.value]

    ss_values = []
    for r in counted:
        if r["outcome"] != Outcome.SUCCESS.value:
            ss_values.append(0.0)
            continue
        ss_values.append(
            episode_social_score(
                int(r["discomfort_steps"]),
                int(r["robot_steps"]),
                float(r["straight_line_total"]),
                float(r["path_length_total"]),
                float(r["t_m_mean"]),
                float(r["nav_time_mean"]),
                weights,
            )
        )
    n = len(counted)
    sr = 100.0 * sum(1 for r in counted if r["outcome"] == Outcome.SUCCESS.value) / n if n else 0.0
    ss = round_half_up(math.fsum(ss_values) / n) if n else 0
    result = {"episodes": len(episodes), "aborted": aborted, "SR": sr, "SS": ss}
    if summary is not None:
        result["summary_SR"] = float(summary["sr"])
        result["summary_SS"] = int(summary["ss"])
        result["consistent"] = result["summary_SR"] == sr and result["summary_SS"] == ss
    return result
