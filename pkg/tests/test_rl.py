import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vdb_lab.envs import c_maze
from vdb_lab.errors import ConfigError, ShapeError
from vdb_lab.nn import check_gradients
from vdb_lab.rl import (
    ExpertConfig,
    GaussianPolicy,
    PpoConfig,
    ValueNet,
    collect,
    collect_demos,
    gae_advantages,
    load_demos,
    normalize_advantages,
    ppo_surrogate_loss,
    ppo_update,
    replay_demos,
    save_demos,
    train_expert,
    value_loss,
)
from vdb_lab.nn.optim import make_optimizer
from vdb_lab.rl.rollout import TransitionBatch


def small_policy(seed=0, hidden=((6, "tanh"),)):
    return GaussianPolicy(2, 2, np.random.default_rng(seed), hidden=hidden, mean_scale=1.0)


# -- GAE ----------------------------------------------------------------------


def test_gae_lambda_zero_is_one_step_td():
    rng = np.random.default_rng(0)
    rewards = rng.normal(size=(3, 7))
    values = rng.normal(size=(3, 8))
    gamma = 0.97
    adv, returns = gae_advantages(rewards, values, gamma, 0.0)
    expected = rewards + gamma * values[:, 1:] - values[:, :-1]
    assert np.allclose(adv, expected, atol=1e-15)
    assert np.allclose(returns, adv + values[:, :-1], atol=1e-15)


def test_gae_lambda_one_zero_values_is_return_to_go():
    rng = np.random.default_rng(1)
    rewards = rng.normal(size=(2, 9))
    values = np.zeros((2, 10))
    gamma = 0.9
    adv, _ = gae_advantages(rewards, values, gamma, 1.0)
    horizon = rewards.shape[1]
    for t in range(horizon):
        expected = sum(gamma ** (k - t) * rewards[:, k] for k in range(t, horizon))
        assert np.allclose(adv[:, t], expected, atol=1e-12)


def test_gae_matches_double_loop_oracle():
    rng = np.random.default_rng(2)
    rewards = rng.normal(size=(4, 11))
    values = rng.normal(size=(4, 12))
    gamma, lam = 0.99, 0.95
    adv, _ = gae_advantages(rewards, values, gamma, lam)
    deltas = rewards + gamma * values[:, 1:] - values[:, :-1]
    horizon = rewards.shape[1]
    oracle = np.zeros_like(adv)
    for t in range(horizon):
        for k in range(t, horizon):
            oracle[:, t] += (gamma * lam) ** (k - t) * deltas[:, k]
    assert np.allclose(adv, oracle, atol=1e-12)


def test_gae_shape_errors():
    with pytest.raises(ShapeError):
        gae_advantages(np.zeros((2, 5)), np.zeros((2, 5)), 0.99, 0.95)
    with pytest.raises(ShapeError):
        gae_advantages(np.zeros(5), np.zeros(6), 0.99, 0.95)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_advantage_normalization_invariant(seed):
    rng = np.random.default_rng(seed)
    adv = rng.normal(loc=rng.uniform(-5, 5), scale=rng.uniform(0.1, 10), size=256)
    out = normalize_advantages(adv)
    assert abs(out.mean()) < 1e-10
    assert abs(out.std() - 1.0) < 1e-10


# -- policy -------------------------------------------------------------------


def test_log_prob_matches_direct_formula():
    policy = small_policy()
    rng = np.random.default_rng(3)
    obs = rng.normal(size=(5, 2))
    actions = rng.normal(size=(5, 2))
    mu = policy.mean(obs)
    sigma = np.exp(policy.log_std.values)
    logp = policy.log_prob(obs, actions)
    expected = np.sum(
        -0.5 * ((actions - mu) / sigma) ** 2 - np.log(sigma) - 0.5 * math.log(2 * math.pi),
        axis=1,
    )
    assert np.allclose(logp, expected, atol=1e-14)
    assert np.all(np.isfinite(logp))


def test_act_log_probs_consistent():
    policy = small_policy()
    rng = np.random.default_rng(4)
    obs = rng.normal(size=(8, 2))
    actions, logp = policy.act(obs, rng)
    recomputed = policy.log_prob(obs, actions)
    assert np.allclose(logp, recomputed, atol=1e-12)


def test_act_sampling_statistics():
    policy = small_policy()
    rng = np.random.default_rng(5)
    obs = np.tile([[0.3, -0.2]], (20_000, 1))
    actions, _ = policy.act(obs, rng)
    mu = policy.mean(obs[:1])[0]
    sigma = np.exp(policy.log_std.values)
    se = sigma / math.sqrt(len(actions))
    assert np.all(np.abs(actions.mean(axis=0) - mu) < 5 * se)
    assert np.all(np.abs(actions.std(axis=0) - sigma) < 5 * se)


def test_entropy_closed_form():
    policy = small_policy()
    sigma = np.exp(policy.log_std.values)
    expected = 0.5 * np.sum(np.log(2 * math.pi * math.e * sigma**2))
    assert policy.entropy() == pytest.approx(expected, abs=1e-12)


def test_log_prob_gradients_match_fd():
    policy = small_policy()
    rng = np.random.default_rng(6)
    obs = rng.normal(size=(4, 2))
    actions = rng.normal(size=(4, 2))
    weights = rng.normal(size=4)

    def value_fn():
        return float(np.dot(weights, policy.log_prob(obs, actions)))

    def grad_fn():
        policy.zero_grad()
        policy.log_prob(obs, actions)
        policy.backward_log_prob(weights)

    ok, worst = check_gradients(value_fn, grad_fn, policy.named_parameters())
    assert ok, worst


def test_value_net_loss_gradients_match_fd():
    net = ValueNet(2, np.random.default_rng(7), hidden=((6, "tanh"),))
    rng = np.random.default_rng(8)
    obs = rng.normal(size=(5, 2))
    targets = rng.normal(size=5)

    def value_fn():
        return value_loss(net, obs, targets)

    def grad_fn():
        net.zero_grad()
        value_loss(net, obs, targets, compute_grads=True)

    ok, worst = check_gradients(value_fn, grad_fn, net.named_parameters())
    assert ok, worst


# -- PPO surrogate ------------------------------------------------------------


def surrogate_case(seed, clip=0.2, margin=1e-3):
    """Random loss inputs resampled until no ratio sits near a clip kink."""
    for attempt in range(100):
        rng = np.random.default_rng(seed * 1000 + attempt)
        policy = small_policy(seed=seed)
        obs = rng.normal(size=(12, 2))
        actions = rng.normal(scale=0.5, size=(12, 2))
        logp_now = policy.log_prob(obs, actions)
        logp_old = logp_now + rng.uniform(-0.4, 0.4, size=12)
        adv = rng.normal(size=12)
        ratio = np.exp(logp_now - logp_old)
        if np.all(np.abs(ratio - (1 - clip)) > margin) and np.all(
            np.abs(ratio - (1 + clip)) > margin
        ):
            return policy, obs, actions, logp_old, adv
    raise AssertionError("could not find a kink-free configuration")


def test_surrogate_gradients_match_fd():
    for seed in range(5):
        policy, obs, actions, logp_old, adv = surrogate_case(seed)

        def value_fn():
            loss, _ = ppo_surrogate_loss(policy, obs, actions, logp_old, adv, 0.2, 0.01)
            return loss

        def grad_fn():
            policy.zero_grad()
            ppo_surrogate_loss(policy, obs, actions, logp_old, adv, 0.2, 0.01,
                               compute_grads=True)

        ok, worst = check_gradients(value_fn, grad_fn, policy.named_parameters())
        assert ok, (seed, worst)


def test_clipped_samples_have_zero_gradient():
    policy = small_policy(seed=9)
    rng = np.random.default_rng(9)
    obs = rng.normal(size=(1, 2))
    actions = rng.normal(size=(1, 2))
    logp_now = policy.log_prob(obs, actions)
    # ratio = 1.5 with positive advantage: min() selects the clipped branch
    logp_old = logp_now - math.log(1.5)
    policy.zero_grad()
    ppo_surrogate_loss(policy, obs, actions, logp_old, np.array([1.0]), 0.2, 0.0,
                       compute_grads=True)
    for name, p in policy.named_parameters():
        assert np.array_equal(p.grad, np.zeros_like(p.grad)), name
    # negative advantage on the low side clips identically
    logp_old = logp_now + math.log(2.0)
    policy.zero_grad()
    ppo_surrogate_loss(policy, obs, actions, logp_old, np.array([-1.0]), 0.2, 0.0,
                       compute_grads=True)
    for name, p in policy.named_parameters():
        assert np.array_equal(p.grad, np.zeros_like(p.grad)), name


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=50, deadline=None)
def test_clipped_surrogate_never_exceeds_unclipped(seed):
    rng = np.random.default_rng(seed)
    ratio = rng.uniform(0.0, 3.0, size=32)
    adv = rng.normal(size=32)
    clipped = np.clip(ratio, 0.8, 1.2)
    assert np.all(np.minimum(ratio * adv, clipped * adv) <= ratio * adv + 1e-15)


def make_batch(policy, spec, episodes, seed):
    return collect(policy, spec, episodes, np.random.default_rng(seed), reward_source="env")


def test_zero_advantages_leave_policy_unchanged():
    spec = c_maze()
    policy = GaussianPolicy(2, 2, np.random.default_rng(10))
    value_net = ValueNet(2, np.random.default_rng(11))
    batch = make_batch(policy, spec, 2, seed=12)
    batch.advantages[:] = 0.0
    cfg = PpoConfig(epochs=2, minibatch=64, entropy_coef=0.0)
    popt = make_optimizer("adam", policy.named_parameters(), cfg.policy_lr)
    vopt = make_optimizer("adam", value_net.named_parameters(), cfg.value_lr)
    before = {k: p.values.copy() for k, p in policy.named_parameters()}
    ppo_update(policy, value_net, popt, vopt, batch, cfg, np.random.default_rng(13))
    for name, p in policy.named_parameters():
        assert np.array_equal(p.values, before[name]), name


def test_zero_advantages_with_entropy_bonus_move_only_log_std():
    spec = c_maze()
    policy = GaussianPolicy(2, 2, np.random.default_rng(10))
    value_net = ValueNet(2, np.random.default_rng(11))
    batch = make_batch(policy, spec, 2, seed=12)
    batch.advantages[:] = 0.0
    cfg = PpoConfig(epochs=1, minibatch=512, entropy_coef=0.01)
    popt = make_optimizer("adam", policy.named_parameters(), cfg.policy_lr)
    vopt = make_optimizer("adam", value_net.named_parameters(), cfg.value_lr)
    before = {k: p.values.copy() for k, p in policy.named_parameters()}
    ppo_update(policy, value_net, popt, vopt, batch, cfg, np.random.default_rng(13))
    for name, p in policy.named_parameters():
        if name == "log_std":
            assert not np.array_equal(p.values, before[name])
        else:
            assert np.array_equal(p.values, before[name]), name


def test_positive_advantage_increases_log_prob():
    policy = small_policy(seed=14)
    value_net = ValueNet(2, np.random.default_rng(15), hidden=((6, "tanh"),))
    obs = np.array([[0.2, -0.4]])
    actions = np.array([[0.1, 0.3]])
    logp_before = policy.log_prob(obs, actions).copy()
    batch = TransitionBatch(
        observations=obs,
        actions=actions,
        log_probs=logp_before.copy(),
        rewards=np.ones(1),
        env_rewards=np.ones(1),
        next_observations=obs,
        advantages=np.ones(1),
        returns=np.ones(1),
        episodes=1,
        horizon=1,
    )
    cfg = PpoConfig(epochs=1, minibatch=1, entropy_coef=0.0)
    popt = make_optimizer("adam", policy.named_parameters(), cfg.policy_lr)
    vopt = make_optimizer("adam", value_net.named_parameters(), cfg.value_lr)
    ppo_update(policy, value_net, popt, vopt, batch, cfg, np.random.default_rng(16))
    assert policy.log_prob(obs, actions)[0] > logp_before[0]


# -- collection ---------------------------------------------------------------


def test_collect_env_rewards_match_ground_truth():
    spec = c_maze()
    policy = GaussianPolicy(2, 2, np.random.default_rng(17))
    batch = make_batch(policy, spec, 3, seed=18)
    assert batch.n_transitions == 3 * spec.horizon
    assert np.array_equal(batch.rewards, batch.env_rewards)


def test_collect_reward_substitution():
    spec = c_maze()
    policy = GaussianPolicy(2, 2, np.random.default_rng(19))
    batch = collect(
        policy,
        spec,
        2,
        np.random.default_rng(20),
        reward_source="discriminator",
        reward_fn=lambda obs, nxt: np.full(obs.shape[0], math.log(2.0)),
    )
    assert np.allclose(batch.rewards, math.log(2.0), atol=1e-15)
    assert not np.allclose(batch.env_rewards, math.log(2.0))


def test_collect_log_probs_match_recompute():
    spec = c_maze()
    policy = GaussianPolicy(2, 2, np.random.default_rng(21))
    batch = make_batch(policy, spec, 2, seed=22)
    recomputed = policy.log_prob(batch.observations, batch.actions)
    assert np.allclose(batch.log_probs, recomputed, atol=1e-12)


def test_collect_validation():
    spec = c_maze()
    policy = GaussianPolicy(2, 2, np.random.default_rng(23))
    with pytest.raises(ConfigError):
        collect(policy, spec, 1, np.random.default_rng(0), reward_source="oracle")
    with pytest.raises(ConfigError):
        collect(policy, spec, 1, np.random.default_rng(0), reward_source="discriminator")


# -- expert -------------------------------------------------------------------


def test_expert_beats_zero_policy_by_factor_five():
    spec = c_maze()
    cfg = ExpertConfig(iterations=300, episodes_per_iter=32, eval_episodes=50)
    res = train_expert(spec, cfg, seed=0)
    assert res.reached_goal, res.failure

    def still(obs, rng):
        return np.zeros_like(obs)

    from vdb_lab.envs import evaluate_return

    zero = evaluate_return(still, spec, 50, np.random.default_rng(99)).mean_return
    det = evaluate_return(
        res.policy.as_act_fn(deterministic=True), spec, 50, np.random.default_rng(99)
    ).mean_return
    assert det >= zero / 5.0


def test_expert_failure_reported_on_tiny_budget():
    spec = c_maze()
    cfg = ExpertConfig(iterations=1, episodes_per_iter=4, eval_episodes=10, demo_count=2)
    res = train_expert(spec, cfg, seed=0)
    assert not res.reached_goal
    assert res.failure is not None and "goal region" in res.failure


def test_demos_replay_exactly():
    spec = c_maze()
    policy = GaussianPolicy(2, 2, np.random.default_rng(24))
    demos = collect_demos(policy, spec, 5, np.random.default_rng(25))
    assert demos.count == 5
    replayed = replay_demos(demos, spec)
    assert np.array_equal(replayed, demos.observations)


def test_demo_save_load_round_trip(tmp_path):
    spec = c_maze()
    policy = GaussianPolicy(2, 2, np.random.default_rng(26))
    demos = collect_demos(policy, spec, 3, np.random.default_rng(27))
    path = tmp_path / "demos.csv"
    save_demos(path, demos)
    loaded = load_demos(path)
    assert np.array_equal(loaded.observations, demos.observations)
    assert np.array_equal(loaded.actions, demos.actions)
    assert np.array_equal(loaded.next_observations, demos.next_observations)


def test_entropy_decays_no_faster_with_bonus():
    spec = c_maze()
    finals = {"with": [], "without": []}
    for seed in (0, 1, 2):
        for key, coef in (("with", 0.005), ("without", 0.0)):
            cfg = ExpertConfig(
                iterations=30,
                episodes_per_iter=16,
                eval_episodes=4,
                demo_count=1,
                ppo=PpoConfig(entropy_coef=coef),
            )
            res = train_expert(spec, cfg, seed=seed)
            entropy = res.metrics[-1]["entropy"]
            assert math.isfinite(entropy)
            finals[key].append(entropy)
    assert np.median(finals["with"]) >= np.median(finals["without"])


def test_ppo_config_validation():
    with pytest.raises(ConfigError):
        PpoConfig(clip=0.0)
    with pytest.raises(ConfigError):
        PpoConfig(gamma=1.5)
    with pytest.raises(ConfigError):
        PpoConfig(lam=-0.1)
    with pytest.raises(ConfigError):
        PpoConfig(entropy_coef=-1.0)
    with pytest.raises(ConfigError):
        ExpertConfig(iterations=0)
