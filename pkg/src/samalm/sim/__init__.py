from samalm.sim.config import OrcaParams, Radii, ScenarioConfig
from samalm.sim.core import (
    ContractViolation,
    detect_events,
    human_policy_step,
    initial_state,
    observe,
    step,
)
from samalm.sim.geometry import Vec2
from samalm.sim.state import (
    PERSONAS,
    EntityView,
    EpisodeEvent,
    EventKind,
    HumanState,
    LocalObservation,
    RobotKind,
    RobotPersona,
    RobotState,
    RobotStatus,
    SimState,
)

__all__ = [
    "PERSONAS",
    "ContractViolation",
    "EntityView",
    "EpisodeEvent",
    "EventKind",
    "HumanState",
    "LocalObservation",
    "OrcaParams",
    "Radii",
    "RobotKind",
    "RobotPersona",
    "RobotState",
    "RobotStatus",
    "ScenarioConfig",
    "SimState",
    "Vec2",
    "detect_events",
    "human_policy_step",
    "initial_state",
    "observe",
    "step",
]
