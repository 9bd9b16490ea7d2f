"""Clipped-surrogate policy optimization over a shared policy/value net.

Episodes accumulate into a batch; each update recomputes state values,
normalizes advantages (return minus value), and runs several epochs of
shuffled minibatches against the probabilities the actions were sampled
under."""

from __future__ import annotations

import numpy as np

from .base import AgentHyper, discounted_returns, normalize
from .net import Adam, PolicyValueNet, log_softmax, ppo_loss_and_grads


class PpoAgent:
    kind = "ppo"

    def __init__(self, obs_dim: int, n_actions: int, hyper: AgentHyper, seed: int = 0):
        self.obs_dim = obs_dim
        self.n_actions = n_actions
        self.hyper = hyper
        self.rng = np.random.default_rng(seed)
        self.net = PolicyValueNet(obs_dim, n_actions, hyper.hidden, seed=seed)
        self.optim = Adam(self.net.params, lr=hyper.alpha)
        self._last_logp = 0.0
        self._episode: list[tuple[np.ndarray, int, float, float]] = []
        self._batch: list[tuple[np.ndarray, int, float, float]] = []
        self._episodes_buffered = 0

    def select_action(self, obs: np.ndarray, greedy: bool = False) -> int:
        logits, _, _ = self.net.forward(obs)
        logp = log_softmax(logits)[0]
        if greedy:
            action = int(np.argmax(logp))
        else:
            action = int(self.rng.choice(self.n_actions, p=np.exp(logp)))
        self._last_logp = float(logp[action])
        return action

    def record(self, transition) -> None:
        logp = self._last_logp
        self._episode.append(
            (
                np.asarray(transition.observation, dtype=np.float64),
                int(transition.action),
                float(transition.reward),
                logp,
            )
        )

    def end_episode(self) -> None:
        if not self._episode:
            return
        rewards = [r for _, _, r, _ in self._episode]
        returns = discounted_returns(rewards, self.hyper.gamma)
        for (obs, action, _, logp), g in zip(self._episode, returns):
            self._batch.append((obs, action, float(g), logp))
        self._episode = []
        self._episodes_buffered += 1
        if self._episodes_buffered >= self.hyper.episodes_per_update:
            self._update()

    def _update(self) -> None:
        h = self.hyper
        obs = np.stack([b[0] for b in self._batch])
        actions = np.array([b[1] for b in self._batch])
        returns = np.array([b[2] for b in self._batch])
        old_logp = np.array([b[3] for b in self._batch])
        _, values, _ = self.net.forward(obs)
        advantages = normalize(returns - values)
        n = len(self._batch)
        for _ in range(h.ppo_epochs):
            order = self.rng.permutation(n)
            for start in range(0, n, h.minibatch):
                pick = order[start : start + h.minibatch]
                _, grads = ppo_loss_and_grads(
                    self.net,
                    obs[pick],
                    actions[pick],
                    old_logp[pick],
                    advantages[pick],
                    returns[pick],
                    clip=h.clip,
                    value_coef=h.value_coef,
                    entropy_coef=h.entropy_coef,
                )
                self.optim.step(self.net.params, grads)
        self._batch = []
        self._episodes_buffered = 0

    # -- checkpoint hooks -----------------------------------------------------

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {"net": self.net.get_flat()}

    def load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        self.net.set_flat(arrays["net"])
