"""Per-episode results, success rate and social score."""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

from samalm.harness.config import SocialScoreWeights

log = logging.getLogger(__name__)

ABORT_EXCLUSION_FRACTION = 0.10


class Outcome(str, enum.Enum):
    SUCCESS = "success"
    COLLISION = "collision"
    TIMEOUT = "timeout"
    ABORTED = "aborted_by_backend"


@dataclass
class EpisodeResult:
    episode: int
    seed: int
    outcome: Outcome
    steps: int = 0
    nav_time_per_robot: list[float] = field(default_factory=list)
    path_lengths: list[float] = field(default_factory=list)
    straight_lines: list[float] = field(default_factory=list)
    discomfort_steps: int = 0
    robot_steps: int = 0
    t_m_mean: float = 0.0
    requery_count: int = 0
    forced_count: int = 0
    robot_robot_collisions: int = 0
    robot_human_collisions: int = 0
    error: str = ""

    @property
    def success(self) -> bool:
        return self.outcome is Outcome.SUCCESS


def episode_social_score(
    discomfort_steps: int,
    robot_steps: int,
    straight_line_total: float,
    path_length_total: float,
    t_m_mean: float,
    mean_nav_time: float,
    weights: SocialScoreWeights = SocialScoreWeights(),
) -> float:
    """Social score of one successful episode, 0..100."""
    comfort = 1.0 - min(1.0, discomfort_steps / robot_steps) if robot_steps > 0 else 1.0
    denom = max(path_length_total, straight_line_total)
    path = straight_line_total / denom if denom > 0 else 1.0
    timeliness = min(1.0, t_m_mean / mean_nav_time) if mean_nav_time > 0 else 1.0
    return 100.0 * (weights.comfort * comfort + weights.path * path + weights.time * timeliness)


def ss_of(result: EpisodeResult, weights: SocialScoreWeights = SocialScoreWeights()) -> float:
    if not result.success:
        return 0.0
    nav = result.nav_time_per_robot
    return episode_social_score(
        result.discomfort_steps,
        result.robot_steps,
        math.fsum(result.straight_lines),
        math.fsum(result.path_lengths),
        result.t_m_mean,
        math.fsum(nav) / len(nav) if nav else 0.0,
        weights,
    )


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def scored_episodes(results: Sequence[EpisodeResult]) -> list[EpisodeResult]:
    """Episodes that count toward SR/SS.

    Backend aborts leave the denominator only when they reach 10% of the
    batch; below that they count as failures.
    """
    aborted = sum(1 for r in results if r.outcome is Outcome.ABORTED)
    if results and aborted >= ABORT_EXCLUSION_FRACTION * len(results):
        if aborted:
            log.error("%d of %d episodes aborted by the backend; excluded from SR/SS", aborted, len(results))
        return [r for r in results if r.outcome is not Outcome.ABORTED]
    if aborted:
        log.error("%d of %d episodes aborted by the backend; counted as failures", aborted, len(results))
    return list(results)


def success_rate(results: Sequence[EpisodeResult]) -> float:
    counted = scored_episodes(results)
    if not counted:
        return 0.0
    return 100.0 * sum(1 for r in counted if r.success) / len(counted)


def social_score(results: Sequence[EpisodeResult], weights: SocialScoreWeights = SocialScoreWeights()) -> int:
    counted = scored_episodes(results)
    if not counted:
        return 0
    return round_half_up(math.fsum(ss_of(r, weights) for r in counted) / len(counted))


@dataclass
class MetricsReport:
    SR: float
    SS: int
    episodes: list[EpisodeResult]
    config: dict[str, Any]
    aborted: int = 0

    @property
    def successes(self) -> int:
        return sum(1 for r in self.episodes if r.success)


def make_report(
    results: Sequence[EpisodeResult], config: dict[str, Any], weights: SocialScoreWeights = SocialScoreWeights()
) -> MetricsReport:
    aborted = sum(1 for r in results if r.outcome is Outcome.ABORTED)
    return MetricsReport(success_rate(results), social_score(results, weights), list(results), config, aborted)
