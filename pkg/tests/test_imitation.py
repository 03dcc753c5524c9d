"""VAIL reward/discriminator behavior and the two-branch inverse-RL score."""

import numpy as np
import pytest
from scipy import stats

from vdb_lab.bottleneck import (
    DiscriminatorHead,
    DualState,
    GaussianEncoder,
    kl_per_sample,
    vdb_discriminator_step,
)
from vdb_lab.envs import c_maze, evaluate_return
from vdb_lab.errors import ConfigError
from vdb_lab.imitation import (
    MAX_REWARD,
    RecoveredReward,
    VailConfig,
    VailDiscriminator,
    VairlConfig,
    VairlDiscriminator,
    transfer,
    vail_train,
    vairl_disc_loss,
    vairl_gradient_penalty,
    vairl_train,
)
from vdb_lab.nn import Adam, check_gradients, sigmoid
from vdb_lab.rl import GaussianPolicy
from vdb_lab.rl.expert import DemoSet

from helpers import FixedNoise, all_params

# -- small builders --------------------------------------------------------------


def tiny_vail_cfg(**overrides):
    base = dict(
        latent_dim=3,
        encoder_hidden=((6, "tanh"),),
        iterations=2,
        episodes_per_iter=2,
        disc_updates=3,
        disc_batch=8,
        eval_episodes=2,
    )
    base.update(overrides)
    return VailConfig(**base)


def tiny_vairl_cfg(**overrides):
    base = dict(
        latent_dim=3,
        encoder_hidden=((6, "tanh"),),
        iterations=2,
        episodes_per_iter=2,
        disc_updates=3,
        disc_batch=8,
        eval_episodes=2,
    )
    base.update(overrides)
    return VairlConfig(**base)


def random_demos(rng, episodes=3, horizon=None, spec=None):
    spec = spec if spec is not None else c_maze()
    horizon = horizon if horizon is not None else spec.horizon
    obs = rng.uniform(-1, 1, size=(episodes, horizon, 2))
    acts = rng.uniform(-spec.max_accel, spec.max_accel, size=(episodes, horizon, 2))
    nxt = obs + 0.01 * rng.normal(size=obs.shape)
    return DemoSet(observations=obs, actions=acts, next_observations=nxt)


def zero_head(head):
    head.linear.weight.values[:] = 0.0
    head.linear.bias.values[:] = 0.0


# -- VAIL reward -----------------------------------------------------------------


def test_reward_at_indifferent_head_is_log_two():
    rng = np.random.default_rng(0)
    disc = VailDiscriminator(rng, tiny_vail_cfg())
    zero_head(disc.head)
    r = disc.reward(rng.normal(size=(5, 2)))
    assert np.allclose(r, np.log(2.0), rtol=0, atol=1e-15)


def test_reward_vanishes_when_state_is_confidently_fake():
    rng = np.random.default_rng(1)
    disc = VailDiscriminator(rng, tiny_vail_cfg())
    zero_head(disc.head)
    disc.head.linear.bias.values[:] = -50.0  # D ~ 2e-22, clamped to 1e-7
    r = disc.reward(rng.normal(size=(4, 2)))
    assert np.all(r > 0.0)
    assert np.all(r < 1e-6)


def test_reward_matches_scalar_reimplementation():
    rng = np.random.default_rng(2)
    disc = VailDiscriminator(rng, tiny_vail_cfg())
    xs = rng.normal(size=(6, 2))

    def scalar_reward(x):
        h = x
        for layer in disc.encoder.trunk.layers:
            if hasattr(layer, "weight"):
                h = h @ layer.weight.values + layer.bias.values
            else:
                h = np.tanh(h)
        mu = h @ disc.encoder.mean_head.weight.values + disc.encoder.mean_head.bias.values
        t = mu @ disc.head.linear.weight.values[:, 0] + disc.head.linear.bias.values[0]
        p = 1.0 / (1.0 + np.exp(-t))
        return -np.log1p(-p)

    expected = np.array([scalar_reward(x) for x in xs])
    assert np.allclose(disc.reward(xs), expected, rtol=1e-12)


def test_reward_range_and_determinism():
    rng = np.random.default_rng(3)
    for _ in range(20):
        disc = VailDiscriminator(rng, tiny_vail_cfg())
        disc.head.linear.bias.values[:] = rng.uniform(-60, 60)
        xs = rng.normal(scale=3.0, size=(8, 2))
        r = disc.reward(xs)
        assert np.all(np.isfinite(r))
        assert np.all(r > 0.0)
        # log1p rounding can land a hair above the exact clamp value
        assert np.all(r <= MAX_REWARD + 1e-6)
        assert np.array_equal(r, disc.reward(xs))


def test_indistinguishable_halves_give_chance_accuracy_and_log2_reward():
    # both "expert" and "agent" batches come from the same distribution, so
    # the trained head should sit near indifference: accuracy consistent
    # with a fair coin, reward near log 2
    rng = np.random.default_rng(4)
    cfg = tiny_vail_cfg(latent_dim=4, kl_target=0.5)
    disc = VailDiscriminator(rng, cfg)
    opt = Adam(disc.named_parameters(), 1e-3)
    for _ in range(300):
        real = rng.normal(size=(32, 2))
        fake = rng.normal(size=(32, 2))
        _, _, disc.dual = vdb_discriminator_step(
            real, fake, disc.encoder, disc.head, disc.dual, opt, rng
        )
    held_a = rng.normal(size=(1000, 2))
    held_b = rng.normal(size=(1000, 2))
    acc = disc.accuracy(held_a, held_b)
    hits = int(round(acc * 2000))
    assert stats.binomtest(hits, 2000, 0.5).pvalue > 0.01
    assert abs(float(np.mean(disc.reward(held_a))) - np.log(2.0)) < 0.1


def test_vail_config_validation():
    with pytest.raises(ConfigError):
        tiny_vail_cfg(beta_mode="soft")
    with pytest.raises(ConfigError):
        tiny_vail_cfg(kl_target=0.0)
    with pytest.raises(ConfigError):
        tiny_vail_cfg(gp_coefficient=-0.1)
    with pytest.raises(ConfigError):
        tiny_vail_cfg(iterations=0)


def test_vail_train_rejects_bad_demos():
    with pytest.raises(ConfigError):
        vail_train([], c_maze(), tiny_vail_cfg())
    empty = DemoSet(
        observations=np.zeros((0, 4, 2)),
        actions=np.zeros((0, 4, 2)),
        next_observations=np.zeros((0, 4, 2)),
    )
    with pytest.raises(ConfigError):
        vail_train(empty, c_maze(), tiny_vail_cfg())


def test_vail_train_smoke_and_seed_determinism():
    rng = np.random.default_rng(5)
    demos = random_demos(rng)
    a = vail_train(demos, c_maze(), tiny_vail_cfg(), seed=9)
    b = vail_train(demos, c_maze(), tiny_vail_cfg(), seed=9)
    assert [row["iteration"] for row in a.metrics] == [0, 1]
    for row in a.metrics:
        assert set(row) == {
            "iteration", "env_return", "disc_reward", "batch_kl", "beta",
            "disc_accuracy",
        }
    assert a.metrics == b.metrics
    assert a.mean_return == b.mean_return
    c = vail_train(demos, c_maze(), tiny_vail_cfg(), seed=10)
    assert c.metrics != a.metrics


# -- VAIRL score function --------------------------------------------------------


def test_f_reduces_to_g_branch_when_shaping_is_off():
    rng = np.random.default_rng(6)
    disc = VairlDiscriminator(rng, tiny_vairl_cfg(discount=0.0))
    zero_head(disc.h_head)
    s = rng.normal(size=(7, 2))
    s_next = rng.normal(size=(7, 2))
    g_only = disc.g_head.logits(disc.g_encoder.forward(s, sample=False).sample)
    assert np.allclose(disc.f(s, s_next), g_only, rtol=0, atol=0)


def test_f_with_constant_h_is_discounted_difference():
    rng = np.random.default_rng(7)
    disc = VairlDiscriminator(rng, tiny_vairl_cfg(discount=0.9))
    zero_head(disc.g_head)
    zero_head(disc.h_head)
    disc.h_head.linear.bias.values[:] = 1.7
    f = disc.f(rng.normal(size=(5, 2)), rng.normal(size=(5, 2)))
    assert np.allclose(f, 0.9 * 1.7 - 1.7, rtol=1e-15)


def test_f_matches_scalar_reimplementation():
    rng = np.random.default_rng(8)
    disc = VairlDiscriminator(rng, tiny_vairl_cfg(discount=0.97))
    s = rng.normal(size=(4, 2))
    s_next = rng.normal(size=(4, 2))

    def branch(encoder, head, x):
        h = x
        for layer in encoder.trunk.layers:
            if hasattr(layer, "weight"):
                h = h @ layer.weight.values + layer.bias.values
            else:
                h = np.tanh(h)
        mu = h @ encoder.mean_head.weight.values + encoder.mean_head.bias.values
        return mu @ head.linear.weight.values[:, 0] + head.linear.bias.values[0]

    expected = np.array(
        [
            branch(disc.g_encoder, disc.g_head, si)
            + 0.97 * branch(disc.h_encoder, disc.h_head, ni)
            - branch(disc.h_encoder, disc.h_head, si)
            for si, ni in zip(s, s_next)
        ]
    )
    assert np.allclose(disc.f(s, s_next), expected, rtol=1e-12)


def test_f_shape_mismatch_rejected():
    rng = np.random.default_rng(9)
    disc = VairlDiscriminator(rng, tiny_vairl_cfg())
    with pytest.raises(Exception):
        disc.f(rng.normal(size=(3, 2)), rng.normal(size=(4, 2)))


def test_disc_prob_log_space_matches_direct_ratio():
    rng = np.random.default_rng(10)
    disc = VairlDiscriminator(rng, tiny_vairl_cfg())
    s = rng.normal(size=(20, 2))
    s_next = s + 0.01 * rng.normal(size=(20, 2))
    a = rng.normal(size=(20, 2))
    logp = rng.uniform(-3, 3, size=20)
    p = disc.disc_prob(s, a, s_next, logp)
    f = disc.f(s, s_next)
    direct = np.exp(f) / (np.exp(f) + np.exp(logp))
    assert np.all((p > 0) & (p < 1))
    assert np.allclose(p, direct, rtol=1e-12)


def test_disc_prob_balanced_and_saturated_limits():
    rng = np.random.default_rng(11)
    disc = VairlDiscriminator(rng, tiny_vairl_cfg())
    zero_head(disc.g_head)
    zero_head(disc.h_head)
    s = rng.normal(size=(5, 2))
    a = rng.normal(size=(5, 2))
    # f = 0 everywhere, so log pi = 0 balances the classifier exactly
    assert np.array_equal(disc.disc_prob(s, a, s, np.zeros(5)), np.full(5, 0.5))
    # f - log pi -> +inf drives D -> 1
    assert np.all(disc.disc_prob(s, a, s, np.full(5, -800.0)) > 1.0 - 1e-12)


def test_vairl_config_validation():
    with pytest.raises(ConfigError):
        tiny_vairl_cfg(beta_mode="none")
    with pytest.raises(ConfigError):
        tiny_vairl_cfg(discount=1.2)
    with pytest.raises(ConfigError):
        tiny_vairl_cfg(kl_target=-0.5)


# -- summed KL vs the joint-code oracle -------------------------------------------


def test_summed_branch_kl_matches_monte_carlo_joint_kl():
    # the three codes are independent Gaussians, so the joint KL to the
    # product prior is the sum of branch KLs; check by direct sampling
    rng = np.random.default_rng(12)
    disc = VairlDiscriminator(rng, tiny_vairl_cfg(latent_dim=2))
    s = rng.normal(size=(1, 2))
    s_next = rng.normal(size=(1, 2))
    g = disc.g_encoder.forward(s, sample=False)
    h = disc.h_encoder.forward(np.vstack([s, s_next]), sample=False)
    mu = np.concatenate([g.mean[0], h.mean[0], h.mean[1]])
    var = np.concatenate([g.var[0], h.var[0], h.var[1]])

    analytic = float(
        kl_per_sample(g.mean, g.var)[0]
        + kl_per_sample(h.mean[:1], h.var[:1])[0]
        + kl_per_sample(h.mean[1:], h.var[1:])[0]
    )
    n = 400_000
    z = mu + np.sqrt(var) * rng.standard_normal((n, mu.size))
    log_q = np.sum(
        -0.5 * ((z - mu) ** 2 / var + np.log(2 * np.pi * var)), axis=1
    )
    log_p = np.sum(-0.5 * (z**2 + np.log(2 * np.pi)), axis=1)
    draws = log_q - log_p
    se = float(np.std(draws) / np.sqrt(n))
    assert abs(float(np.mean(draws)) - analytic) < 4 * se


# -- gradients of the composite losses --------------------------------------------


def _policy_logprob_fn(policy):
    def fn(states, actions):
        return policy.log_prob(states, actions)

    return fn


def _loss_fixture(seed):
    rng = np.random.default_rng(seed)
    disc = VairlDiscriminator(rng, tiny_vairl_cfg(latent_dim=3, discount=0.95))
    disc.dual = DualState(beta=0.41, kl_target=0.5, step_size=0.0)
    policy = GaussianPolicy(2, 2, rng, log_std_init=np.log(0.015))
    b = 4
    s_e = rng.normal(size=(b, 2))
    n_e = s_e + 0.01 * rng.normal(size=(b, 2))
    s_a = rng.normal(size=(b, 2))
    n_a = s_a + 0.01 * rng.normal(size=(b, 2))
    a_e, _ = policy.act(s_e, rng)
    a_a, _ = policy.act(s_a, rng)
    noise = [rng.standard_normal((2 * b, 3)), rng.standard_normal((4 * b, 3))]
    return disc, policy, (s_e, a_e, n_e), (s_a, a_a, n_a), noise


def test_vairl_disc_loss_gradients_match_fd():
    # saturated classifier probabilities amplify roundoff in the difference
    # quotient, so the step is the coarser of the two fd settings
    for seed in range(6):
        disc, policy, expert, agent, noise = _loss_fixture(100 + seed)
        params = [("d." + n, t) for n, t in disc.named_parameters()]
        fn = _policy_logprob_fn(policy)

        def value_fn():
            return vairl_disc_loss(
                disc, expert, agent, fn, rng=FixedNoise(noise)
            ).total

        def grad_fn():
            disc.zero_grad()
            vairl_disc_loss(
                disc, expert, agent, fn, rng=FixedNoise(noise), compute_grads=True
            )

        ok, worst = check_gradients(value_fn, grad_fn, params, h=1e-4)
        assert ok, worst


def test_vairl_gradient_penalty_matches_fd():
    for seed in range(6):
        rng = np.random.default_rng(200 + seed)
        disc = VairlDiscriminator(rng, tiny_vairl_cfg(latent_dim=3, discount=0.9))
        b = 4
        s = rng.normal(size=(b, 2))
        s_next = s + 0.01 * rng.normal(size=(b, 2))
        noise = [rng.standard_normal((b, 3)), rng.standard_normal((2 * b, 3))]
        params = [("d." + n, t) for n, t in disc.named_parameters()]

        def value_fn():
            value, _ = vairl_gradient_penalty(
                disc, s, s_next, 0.37, rng=FixedNoise(noise)
            )
            return value

        def grad_fn():
            disc.zero_grad()
            vairl_gradient_penalty(
                disc, s, s_next, 0.37, rng=FixedNoise(noise), compute_grads=True
            )

        ok, worst = check_gradients(value_fn, grad_fn, params)
        assert ok, worst


def test_fixed_zero_beta_contributes_nothing_while_sampling_stays_on():
    disc, policy, expert, agent, noise = _loss_fixture(300)
    disc.dual = DualState(beta=0.0, kl_target=0.5, step_size=0.0)
    fn = _policy_logprob_fn(policy)
    report = vairl_disc_loss(disc, expert, agent, fn, rng=FixedNoise(noise))
    assert report.total == report.expert_term + report.agent_term
    assert report.batch_kl > 0.0
    # different noise draws move the loss, so sampling is demonstrably live
    rng = np.random.default_rng(301)
    other = [rng.standard_normal(a.shape) for a in noise]
    report_b = vairl_disc_loss(disc, expert, agent, fn, rng=FixedNoise(other))
    assert report_b.total != report.total


# -- recovered reward and transfer -------------------------------------------------


def test_recovered_reward_is_deterministic_and_grid_shaped():
    rng = np.random.default_rng(13)
    disc = VairlDiscriminator(rng, tiny_vairl_cfg())
    rec = RecoveredReward(disc.g_encoder, disc.g_head)
    xs = rng.normal(size=(10, 2))
    assert np.array_equal(rec.reward(xs), rec.reward(xs))
    gx, gy, grid = rec.grid(c_maze(), resolution=21)
    assert gx.shape == (21,) and gy.shape == (21,) and grid.shape == (21, 21)
    # batched and single-row matmuls can differ in the final ulp
    assert np.isclose(grid[3, 5], rec.reward(np.array([[gx[5], gy[3]]]))[0], rtol=1e-12)


def test_recovered_reward_round_trip(tmp_path):
    rng = np.random.default_rng(14)
    disc = VairlDiscriminator(rng, tiny_vairl_cfg(latent_dim=5))
    rec = RecoveredReward(disc.g_encoder, disc.g_head)
    path = tmp_path / "reward.npz"
    rec.save(path)
    loaded = RecoveredReward.load(path)
    xs = rng.normal(size=(30, 2))
    assert np.array_equal(rec.reward(xs), loaded.reward(xs))


def test_recovered_reward_load_rejects_other_checkpoints(tmp_path):
    from vdb_lab.nn.checkpoint import save_checkpoint

    path = tmp_path / "other.npz"
    save_checkpoint(path, [("w", __import__("vdb_lab.nn", fromlist=["Tensor"]).Tensor(np.zeros(3)))],
                    meta={"kind": "policy"})
    with pytest.raises(ConfigError):
        RecoveredReward.load(path)


def test_constant_reward_transfers_no_better_than_zero_policy():
    rng = np.random.default_rng(15)
    spec = c_maze()
    disc = VairlDiscriminator(rng, tiny_vairl_cfg())
    zero_head(disc.g_head)
    disc.g_head.linear.bias.values[:] = 0.8
    rec = RecoveredReward(disc.g_encoder, disc.g_head)
    result = transfer(
        rec, spec, seed=3, iterations=5, episodes_per_iter=4, eval_episodes=8,
        eval_runs=1,
    )
    zero_policy = evaluate_return(
        lambda obs, _rng: np.zeros_like(obs), spec, 32, np.random.default_rng(16)
    )
    assert result.mean_return <= zero_policy.mean_return + 10.0


def test_vairl_train_smoke_and_seed_determinism():
    rng = np.random.default_rng(17)
    demos = random_demos(rng, episodes=2)
    a = vairl_train(demos, c_maze(), tiny_vairl_cfg(), seed=21)
    b = vairl_train(demos, c_maze(), tiny_vairl_cfg(), seed=21)
    for row in a.metrics:
        assert set(row) == {
            "iteration", "env_return", "disc_reward", "batch_kl", "beta",
            "disc_accuracy",
        }
    assert a.metrics == b.metrics
    xs = rng.normal(size=(6, 2))
    assert np.array_equal(a.recovered.reward(xs), b.recovered.reward(xs))
