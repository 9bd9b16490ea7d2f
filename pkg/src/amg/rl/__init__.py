"""Environment and state encoding for learning rewrite policies."""

from .env import (
    AlreadyBenign,
    EnvConfig,
    EpisodeFinished,
    RewriteEnv,
    Transition,
    REWARD_EVASION,
    REWARD_STEP,
)
from .observation import N_OBSERVATION, byte_histogram, observe, section_entropy

__all__ = [
    "AlreadyBenign",
    "EnvConfig",
    "EpisodeFinished",
    "RewriteEnv",
    "Transition",
    "REWARD_EVASION",
    "REWARD_STEP",
    "N_OBSERVATION",
    "byte_histogram",
    "observe",
    "section_entropy",
]
