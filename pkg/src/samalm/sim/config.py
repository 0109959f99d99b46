"""Scenario configuration and its JSON form."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Any


@dataclass(frozen=True)
class OrcaParams:
    tau: float = 2.0
    neighbor_dist: float = 10.0
    p_regoal: float = 0.01
    # Planning margin added to every radius inside ORCA only; collision
    # checks still use the bare radii.
    safety_space: float = 0.05


@dataclass(frozen=True)
class Radii:
    robot: float = 0.3
    human: float = 0.3


@dataclass(frozen=True)
class ScenarioConfig:
    arena_side_m: float = 12.0
    dt_s: float = 0.25
    t_max_s: float = 40.0
    fov_rad: float = 2.0 * math.pi
    n_humans: int = 5
    n_robots: int = 3
    # "random" or an explicit list of persona kind names, one per robot.
    persona_assignment: str | tuple[str, ...] = "random"
    seed: int = 0
    orca: OrcaParams = field(default_factory=OrcaParams)
    radii: Radii = field(default_factory=Radii)
    human_v_pref: float = 1.0
    max_range_m: float | None = None

    def __post_init__(self) -> None:
        if not 0.0 < self.fov_rad <= 2.0 * math.pi + 1e-12:
            raise ValueError(f"fov_rad must lie in (0, 2*pi], got {self.fov_rad}")
        if self.dt_s <= 0 or self.t_max_s <= 0 or self.arena_side_m <= 0:
            raise ValueError("dt_s, t_max_s and arena_side_m must be positive")
        if self.n_robots < 0 or self.n_humans < 0:
            raise ValueError("entity counts must be non-negative")
        if not isinstance(self.persona_assignment, str):
            object.__setattr__(self, "persona_assignment", tuple(self.persona_assignment))
            if len(self.persona_assignment) != self.n_robots:
                raise ValueError("explicit persona_assignment needs one entry per robot")

    def to_json(self) -> dict[str, Any]:
        d = asdict(self)
        if not isinstance(self.persona_assignment, str):
            d["persona_assignment"] = list(self.persona_assignment)
        return d

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> "ScenarioConfig":
        d = dict(d)
        if "orca" in d:
            d["orca"] = OrcaParams(**d["orca"])
        if "radii" in d:
            d["radii"] = Radii(**d["radii"])
        pa = d.get("persona_assignment")
        if isinstance(pa, list):
            d["persona_assignment"] = tuple(pa)
        return cls(**d)
