"""Strategic combinatorial bandits: SCUCB, baselines, manipulating arms and regret tooling."""
from ._accel import NUMBA_ENABLED, backend_name
from .env import ProblemInstance, expected_reward
from .harness import ExperimentConfig, run_single, run_sweep
from .oracle import OracleSpec
from .policy import ucb_index

__version__ = "0.1.0"

__all__ = [
    "NUMBA_ENABLED",
    "ExperimentConfig",
    "OracleSpec",
    "ProblemInstance",
    "backend_name",
    "expected_reward",
    "run_single",
    "run_sweep",
    "ucb_index",
]
