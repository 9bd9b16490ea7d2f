"""Sequential rewrite environment around a black-box classifier.

An episode starts from one detected file.  Each step applies one of the ten
rewrite actions, re-serializes, and submits the result to the classifier —
exactly one query per step, verdict only.  Evasion ends the episode with a
bonus; every step costs a small penalty; the step budget caps the episode.
The environment never reads classifier internals (no margins, no feature
vectors), so an agent trained against it sees what a real query interface
would show.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .. import pe_model
from ..detector import Verdict
from ..pe_mods import (
    ACTION_COUNT,
    ActionId,
    BenignContentPool,
    Outcome,
    apply_action,
)
from ..seeds import fanout
from .observation import N_OBSERVATION, observe

REWARD_EVASION = 10.0
REWARD_STEP = -0.1


class AlreadyBenign(Exception):
    """The starting file is not detected, so there is nothing to evade."""


class EpisodeFinished(Exception):
    """step() was called after the episode ended; call reset() first."""


@dataclass
class EnvConfig:
    max_steps: int
    reward_evasion: float = REWARD_EVASION
    reward_step: float = REWARD_STEP
    seed: int = 0


@dataclass
class Transition:
    observation: np.ndarray
    action: int
    reward: float
    next_observation: np.ndarray
    done: bool
    info: dict = field(default_factory=dict)


class RewriteEnv:
    """One-file episode loop; ``classify`` is any bytes -> Verdict callable."""

    def __init__(
        self,
        raw: bytes,
        classify: Callable[[bytes], Verdict],
        pool: BenignContentPool,
        config: EnvConfig,
    ):
        self._raw = raw
        self._classify = classify
        self._pool = pool
        self.config = config
        self.queries = 0
        self.episode = -1
        self._img = None
        self._bytes = raw
        self._obs = None
        self._steps = 0
        self._done = True
        self.trace: list[dict] = []

    # -- episode control ----------------------------------------------------

    def reset(self) -> np.ndarray:
        self.episode += 1
        self._img = pe_model.parse(self._raw)
        self._bytes = self._raw
        self.queries += 1
        if self._classify(self._raw) is not Verdict.MALICIOUS:
            raise AlreadyBenign("starting file is not detected")
        self._steps = 0
        self._done = False
        self.trace = []
        self._obs = observe(self._img, self._bytes)
        return self._obs

    def step(self, action: int) -> Transition:
        if self._done:
            raise EpisodeFinished("episode is over; call reset()")
        if not 0 <= action < ACTION_COUNT:
            raise ValueError(f"action must be in [0, {ACTION_COUNT}), got {action}")
        seed = fanout(self.config.seed, "env", self.episode, self._steps, action)
        result = apply_action(self._img, ActionId(action), self._pool, seed=seed)
        if result.outcome is Outcome.APPLIED:
            self._img = result.image
            self._bytes = pe_model.serialize(self._img)
        self._steps += 1
        self.queries += 1
        evaded = self._classify(self._bytes) is not Verdict.MALICIOUS
        reward = self.config.reward_evasion if evaded else self.config.reward_step
        self._done = evaded or self._steps >= self.config.max_steps
        next_obs = observe(self._img, self._bytes)
        transition = Transition(
            observation=self._obs,
            action=action,
            reward=reward,
            next_observation=next_obs,
            done=self._done,
            info={
                "outcome": result.outcome.value,
                "evaded": evaded,
                "steps": self._steps,
                "delta_bytes": result.delta_bytes,
            },
        )
        self.trace.append(
            {
                "step": self._steps,
                "action": int(action),
                "outcome": result.outcome.value,
                "reward": reward,
                "evaded": evaded,
                "size": len(self._bytes),
            }
        )
        self._obs = next_obs
        return transition

    # -- views ----------------------------------------------------------------

    @property
    def done(self) -> bool:
        return self._done

    @property
    def steps(self) -> int:
        return self._steps

    @property
    def current_bytes(self) -> bytes:
        return self._bytes

    @property
    def observation_size(self) -> int:
        return N_OBSERVATION
