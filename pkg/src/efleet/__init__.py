"""Electric truck fleet routing: event-driven simulation and benchmarks."""

from .charging import StationState, cccv_power, integrate_charge
from .engine import EpisodeMetrics, StepResult, WorldState, collect_metrics, reset, run_episode, step
from .netmodel import (
    ChargerSpec,
    GeneratorParams,
    NetworkInstance,
    PoiNode,
    RewardParams,
    ScenarioConfig,
    StochasticParams,
    TruckSpec,
    generate_instance,
    load_instance,
    save_instance,
    validate_assignment,
    validate_instance,
)
from .stochastic import RandomStreams, ReplayDivergence

__all__ = [
    "ChargerSpec",
    "EpisodeMetrics",
    "GeneratorParams",
    "NetworkInstance",
    "PoiNode",
    "RandomStreams",
    "ReplayDivergence",
    "RewardParams",
    "ScenarioConfig",
    "StationState",
    "StepResult",
    "StochasticParams",
    "TruckSpec",
    "WorldState",
    "cccv_power",
    "collect_metrics",
    "generate_instance",
    "integrate_charge",
    "load_instance",
    "reset",
    "run_episode",
    "save_instance",
    "step",
    "validate_assignment",
    "validate_instance",
]

__version__ = "0.1.0"
