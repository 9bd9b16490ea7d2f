"""Learning agents over the rewrite environment, built on plain numpy."""

from .base import (
    AgentHyper,
    discounted_return,
    discounted_returns,
    normalize,
    q_update,
)
from .checkpoint import AGENT_KINDS, CheckpointError, load_agent, make_agent, save_agent
from .dqn import DqnAgent
from .pg import ReinforceAgent
from .ppo import PpoAgent
from .random_agent import RandomAgent

__all__ = [
    "AgentHyper",
    "q_update",
    "discounted_return",
    "discounted_returns",
    "normalize",
    "DqnAgent",
    "ReinforceAgent",
    "PpoAgent",
    "RandomAgent",
    "AGENT_KINDS",
    "CheckpointError",
    "make_agent",
    "save_agent",
    "load_agent",
]
