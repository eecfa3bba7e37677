"""Attack-graph RL simulator and near-ultrasound payload toolkit for voice-assistant intrusion chains."""

from .env import (
    Connect,
    EnvState,
    LocalExploit,
    RemoteExploit,
    StepResult,
    conquest_metrics,
    encode_features,
    enumerate_actions,
    reset,
    state_key,
    step,
)
from .scenario import Scenario, baseline_nuit, dump_scenario, load_scenario, validate
from .search import brute_force_optimal, dfs_optimal_length

__all__ = [
    "Connect",
    "EnvState",
    "LocalExploit",
    "RemoteExploit",
    "Scenario",
    "StepResult",
    "baseline_nuit",
    "brute_force_optimal",
    "conquest_metrics",
    "dfs_optimal_length",
    "dump_scenario",
    "encode_features",
    "enumerate_actions",
    "load_scenario",
    "reset",
    "state_key",
    "step",
    "validate",
]

__version__ = "0.1.0"
