"""Double deep Q-learning search over nanodisk geometries for target structural colours."""

__version__ = "0.1.0"

from .agent import AgentConfig, Trainer, train_run
from .env import DEFAULT_BOUNDS, PRESETS, DesignState, NanodiskEnv, SolverContext

__all__ = [
    "AgentConfig",
    "DesignState",
    "NanodiskEnv",
    "DEFAULT_BOUNDS",
    "PRESETS",
    "SolverContext",
    "Trainer",
    "train_run",
]
