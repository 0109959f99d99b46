"""Experiment configuration (JSON-backed)."""
from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any

from samalm.critics import CriticParams
from samalm.fusion import FusionParams
from samalm.llm.gateway import BackendConfig
from samalm.sim.config import ScenarioConfig


class RunMode(str, enum.Enum):
    DECENTRALIZED = "decentralized"
    CENTRALIZED = "centralized"
    NO_CRITIC = "no-critic"


@dataclass(frozen=True)
class SocialScoreWeights:
    """Non-canonical weights over discomfort, path quality and timeliness."""

    comfort: float = 0.5
    path: float = 0.3
    time: float = 0.2


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    mode: RunMode = RunMode.DECENTRALIZED
    backend: BackendConfig = field(default_factory=BackendConfig)
    episodes: int = 50
    seed: int = 0
    fusion: FusionParams = field(default_factory=FusionParams)
    critic: CriticParams = field(default_factory=CriticParams)
    ss_weights: SocialScoreWeights = field(default_factory=SocialScoreWeights)
    out_dir: str | None = None
    record_transcripts: bool = True
    jobs: int = 1

    def __post_init__(self) -> None:
        if self.episodes < 1:
            raise ValueError("episodes must be >= 1")
        object.__setattr__(self, "mode", RunMode(self.mode))

    def resolved_critic(self) -> CriticParams:
        """Critic parameters aligned with the scenario's time step and human radius."""
        return replace(self.critic, rho_h=self.scenario.radii.human, dt=self.scenario.dt_s)

    def resolved_backend(self) -> BackendConfig:
        sp = replace(self.backend.scripted, dt=self.scenario.dt_s, assumed_radius=self.scenario.radii.human)
        return replace(self.backend, scripted=sp)

    def to_json(self) -> dict[str, Any]:
        return {
            "scenario": self.scenario.to_json(),
            "mode": self.mode.value,
            "backend": self.backend.to_json(),
            "episodes": self.episodes,
            "seed": self.seed,
            "fusion": asdict(self.fusion),
            "critic": asdict(self.critic),
            "ss_weights": asdict(self.ss_weights),
            "out_dir": self.out_dir,
            "record_transcripts": self.record_transcripts,
            "jobs": self.jobs,
        }

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> "ExperimentConfig":
        d = dict(d)
        if "scenario" in d:
            d["scenario"] = ScenarioConfig.from_json(d["scenario"])
        if "backend" in d:
            d["backend"] = BackendConfig.from_json(d["backend"])
        if "fusion" in d:
            d["fusion"] = FusionParams(**d["fusion"])
        if "critic" in d:
            d["critic"] = CriticParams(**d["critic"])
        if "ss_weights" in d:
            d["ss_weights"] = SocialScoreWeights(**d["ss_weights"])
        return cls(**d)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        # A bare scenario file is accepted too.
        if "scenario" not in data and "n_robots" in data:
            data = {"scenario": data}
        return cls.from_json(data)


def episode_seed(master_seed: int, episode_index: int) -> int:
    """Per-episode seed; identical across modes so every method sees the same cases."""
    h = hashlib.sha256(f"samalm:{master_seed}:{episode_index}".encode()).digest()
    return int.from_bytes(h[:8], "big") >> 1
