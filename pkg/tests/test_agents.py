"""Agent math: exact update arithmetic, finite-difference gradient checks,
optimizer behavior, learning sanity on the corridor oracle, and checkpoint
persistence."""

from __future__ import annotations

import numpy as np
import pytest

import toy_chain
from amg.agents import (
    AgentHyper,
    CheckpointError,
    DqnAgent,
    RandomAgent,
    discounted_return,
    discounted_returns,
    load_agent,
    make_agent,
    normalize,
    q_update,
    save_agent,
)
from amg.agents.net import Adam, QNet, log_softmax, softmax
from grad_check import TRIALS

# ---------------------------------------------------------------------------
# exact arithmetic


def test_q_update_hand_case_exact():
    assert q_update(2.0, 1.0, 2.0, alpha=0.1, gamma=1.0) == 2.1


def test_q_update_terminal_style_case():
    # max_next contributes nothing when gamma is zero
    assert q_update(0.5, 1.0, 99.0, alpha=0.5, gamma=0.0) == 0.75


def test_discounted_return_hand_case_exact():
    assert discounted_return([1.0, 1.0, 1.0], gamma=0.5) == 1.75


def test_discounted_return_single_reward():
    assert discounted_return([3.0], gamma=0.9) == 3.0


def test_discounted_returns_vector_matches_backward_recursion():
    rewards = [1.0, -0.5, 2.0, 0.25]
    gamma = 0.7
    got = discounted_returns(rewards, gamma)
    expected = []
    acc = 0.0
    for r in reversed(rewards):
        acc = r + gamma * acc
        expected.append(acc)
    expected.reverse()
    assert np.allclose(got, expected)
    assert got[0] == pytest.approx(discounted_return(rewards, gamma))


def test_normalize_centers_and_scales():
    x = np.array([1.0, 2.0, 3.0, 4.0])
    z = normalize(x)
    assert z.mean() == pytest.approx(0.0)
    assert z.std() == pytest.approx(1.0)


def test_normalize_constant_vector_is_safe():
    z = normalize(np.array([5.0, 5.0, 5.0]))
    assert np.all(np.isfinite(z))
    assert np.allclose(z, 0.0)


# ---------------------------------------------------------------------------
# numerics


def test_softmax_rows_sum_to_one_under_extreme_logits():
    z = np.array([[1e4, -1e4, 0.0], [-1e4, -1e4, -1e4]])
    p = softmax(z)
    assert np.all(np.isfinite(p))
    assert np.allclose(p.sum(axis=1), 1.0)
    assert np.all(np.isfinite(log_softmax(z)))


@pytest.mark.parametrize("name", sorted(TRIALS))
def test_analytic_gradients_match_central_differences(name):
    trial = TRIALS[name]
    errors = [trial(seed) for seed in range(10)]
    assert max(errors) < 1e-4, f"{name}: worst relative error {max(errors):.3e}"


def test_adam_first_step_matches_closed_form():
    rng = np.random.default_rng(0)
    params = [rng.standard_normal((3, 2)), rng.standard_normal(2)]
    before = [p.copy() for p in params]
    grads = [rng.standard_normal(p.shape) for p in params]
    opt = Adam(params, lr=0.01)
    opt.step(params, grads)
    # After one step the bias-corrected moments equal g and g^2 exactly.
    for p0, p1, g in zip(before, params, grads):
        expected = p0 - 0.01 * g / (np.abs(g) + 1e-8)
        assert np.allclose(p1, expected, atol=1e-12)


def test_epsilon_schedule_endpoints_and_midpoint():
    agent = DqnAgent(3, 2, AgentHyper(eps_start=1.0, eps_end=0.05, eps_decay_steps=100))
    assert agent.epsilon == 1.0
    agent.total_steps = 50
    assert agent.epsilon == pytest.approx(0.525)
    agent.total_steps = 100
    assert agent.epsilon == pytest.approx(0.05)
    agent.total_steps = 10_000
    assert agent.epsilon == pytest.approx(0.05)  # clamps, never undershoots


# ---------------------------------------------------------------------------
# learning sanity (single seed here; the acceptance gate sweeps three)


@pytest.mark.parametrize("kind", ["dqn", "pg", "ppo"])
def test_agent_recovers_corridor_optimum(kind):
    optimum = toy_chain.optimal_policy(gamma=0.9)
    agent = toy_chain.train_chain_agent(kind, seed=0)
    assert toy_chain.greedy_chain_policy(agent) == optimum


def test_value_iteration_oracle_values():
    v, q = toy_chain.value_iteration(gamma=0.9)
    # Hand expansion: V(3)=1, V(2)=-0.01+0.9*1, V(1)=-0.01+0.9*V(2), ...
    assert v[3] == pytest.approx(1.0)
    assert v[2] == pytest.approx(-0.01 + 0.9 * v[3])
    assert v[1] == pytest.approx(-0.01 + 0.9 * v[2])
    assert v[0] == pytest.approx(-0.01 + 0.9 * v[1])
    assert list(q.argmax(axis=1)) == [1, 1, 1, 1]


def test_random_agent_ignores_observations_but_honors_seed():
    a = RandomAgent(5, 4, seed=3)
    b = RandomAgent(5, 4, seed=3)
    obs = np.zeros(5)
    seq_a = [a.select_action(obs) for _ in range(50)]
    seq_b = [b.select_action(obs) for _ in range(50)]
    assert seq_a == seq_b
    assert set(seq_a) == {0, 1, 2, 3}


# ---------------------------------------------------------------------------
# persistence


@pytest.mark.parametrize("kind", ["dqn", "pg", "ppo", "random"])
def test_checkpoint_round_trip_preserves_policy(tmp_path, kind):
    agent = make_agent(kind, 6, 3, AgentHyper(alpha=0.002, gamma=0.95), seed=4)
    if kind != "random":  # nudge weights off their init so the test is not vacuous
        toy_train = np.random.default_rng(0).standard_normal(agent.net.n_params) * 0.01
        agent.net.set_flat(agent.net.get_flat() + toy_train)
    path = tmp_path / f"{kind}.agent"
    save_agent(path, agent)
    clone = load_agent(path)
    assert clone.kind == kind
    assert clone.hyper == agent.hyper
    assert (clone.obs_dim, clone.n_actions) == (6, 3)
    for name, arr in agent.state_arrays().items():
        assert np.array_equal(clone.state_arrays()[name], arr)
    if kind != "random":
        rng = np.random.default_rng(1)
        for _ in range(10):
            obs = rng.standard_normal(6)
            if kind == "dqn":
                assert clone.select_action(obs, epsilon=0.0) == agent.select_action(
                    obs, epsilon=0.0
                )
            else:
                assert clone.select_action(obs, greedy=True) == agent.select_action(
                    obs, greedy=True
                )


def test_checkpoint_rejects_bad_magic(tmp_path):
    path = tmp_path / "bogus.agent"
    path.write_bytes(b"NOTANAGT" + b"\x00" * 64)
    with pytest.raises(CheckpointError):
        load_agent(path)


def test_checkpoint_rejects_truncation(tmp_path):
    agent = make_agent("pg", 4, 2, seed=0)
    path = tmp_path / "pg.agent"
    save_agent(path, agent)
    blob = path.read_bytes()
    path.write_bytes(blob[: len(blob) // 2])
    with pytest.raises(CheckpointError):
        load_agent(path)


def test_make_agent_rejects_unknown_kind():
    with pytest.raises(CheckpointError):
        make_agent("sarsa", 4, 2)
