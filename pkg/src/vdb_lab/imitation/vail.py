"""Adversarial imitation from state demonstrations.

The discriminator observes single states. Expert states are the "real"
class, fresh agent states the "fake" class; the policy is rewarded with
r(s) = -log(1 - D(mu_E(s))), evaluated at the encoder mean so the reward
is deterministic. Three discriminator modes:

  adaptive  bottleneck with dual-ascent beta (the full method)
  zero      beta pinned at 0, latent sampling still on (noise-only ablation)
  none      deterministic mean-path classifier: a plain adversarial
            baseline with the identical architecture and update budget
"""

import math
from dataclasses import dataclass, field

import numpy as np

from vdb_lab.bottleneck import (
    DualState,
    GaussianEncoder,
    DiscriminatorHead,
    PROB_EPS,
    discriminator_accuracy,
    vdb_discriminator_step,
)
from vdb_lab.envs import evaluate_return
from vdb_lab.errors import ConfigError, DivergenceError, NonFiniteError
from vdb_lab.nn.optim import make_optimizer
from vdb_lab.rl import GaussianPolicy, PpoConfig, ValueNet, collect, ppo_update
from vdb_lab.rl.expert import DemoSet

BETA_MODES = ("adaptive", "zero", "fixed", "none")

MAX_REWARD = -math.log(PROB_EPS)


@dataclass(frozen=True)
class VailConfig:
    latent_dim: int = 32
    encoder_hidden: tuple = ((32, "relu"), (32, "relu"))
    kl_target: float = 0.5
    dual_step_size: float = 1e-3
    beta_mode: str = "adaptive"
    fixed_beta: float | None = None
    gp_coefficient: float = 0.1
    iterations: int = 80
    episodes_per_iter: int = 16
    disc_updates: int = 100
    disc_batch: int = 32
    disc_lr: float = 5e-5
    ppo: PpoConfig = field(default_factory=PpoConfig)
    eval_episodes: int = 32

    def __post_init__(self):
        if self.beta_mode not in BETA_MODES:
            raise ConfigError(f"beta_mode must be one of {BETA_MODES}, got {self.beta_mode!r}")
        if self.beta_mode == "fixed" and (self.fixed_beta is None or self.fixed_beta < 0):
            raise ConfigError("fixed beta_mode needs a nonnegative fixed_beta")
        if self.kl_target <= 0:
            raise ConfigError("kl_target must be positive")
        if self.gp_coefficient < 0:
            raise ConfigError("gp_coefficient must be nonnegative")
        if self.iterations < 1 or self.disc_updates < 0 or self.disc_batch < 1:
            raise ConfigError("iteration counts must be positive")


class VailDiscriminator:
    """Bottlenecked state classifier with the imitation reward on top."""

    def __init__(self, rng, cfg):
        self.encoder = GaussianEncoder(2, cfg.latent_dim, rng, hidden=cfg.encoder_hidden)
        self.head = DiscriminatorHead(cfg.latent_dim, rng)
        step = cfg.dual_step_size if cfg.beta_mode == "adaptive" else 0.0
        beta = cfg.fixed_beta if cfg.beta_mode == "fixed" else 0.0
        self.dual = DualState(beta=beta, kl_target=cfg.kl_target, step_size=step)
        self.stochastic = cfg.beta_mode != "none"
        self.beta_mode = cfg.beta_mode

    def reward(self, states):
        """r(s) = -log(1 - D(mu_E(s))), clamped into (0, -log eps]."""
        out = self.encoder.forward(states, sample=False)
        p = np.clip(self.head.prob(out.sample), PROB_EPS, 1.0 - PROB_EPS)
        return -np.log1p(-p)

    def accuracy(self, expert_states, agent_states, rng=None, draws=1):
        """Accuracy of the discriminator as trained.

        Stochastic modes classify at sampled codes (pass `rng`); the
        deterministic baseline always reads the encoder mean, so the metric
        measures each variant exactly as it operates. `draws` averages that
        per-draw accuracy to cut estimator variance; it never changes what
        is being estimated.
        """
        if not self.stochastic:
            rng = None
        if rng is None:
            draws = 1
        vals = [
            discriminator_accuracy(
                self.encoder, self.head, expert_states, agent_states, rng=rng
            )
            for _ in range(draws)
        ]
        return float(np.mean(vals))

    def named_parameters(self):
        return self.encoder.named_parameters() + self.head.named_parameters()


@dataclass
class VailResult:
    policy: GaussianPolicy
    value_net: ValueNet
    discriminator: VailDiscriminator
    metrics: list
    mean_return: float
    reach_fraction: float


def vail_train(demos, spec, cfg, seed=0, on_iteration=None):
    """Alternate policy improvement against a bottlenecked discriminator.

    Each iteration: collect rollouts rewarded by the frozen discriminator,
    one PPO update, then cfg.disc_updates discriminator steps on equal
    halves of demo states and fresh agent states, each followed by a dual
    update of beta (in adaptive mode).
    """
    if not isinstance(demos, DemoSet) or demos.count == 0:
        raise ConfigError("demos must be a non-empty DemoSet")
    root = np.random.SeedSequence(seed)
    init_ss, roll_ss, update_ss, disc_ss, eval_ss, metric_ss = root.spawn(6)
    init_rng = np.random.default_rng(init_ss)
    roll_rng = np.random.default_rng(roll_ss)
    update_rng = np.random.default_rng(update_ss)
    disc_rng = np.random.default_rng(disc_ss)
    # metrics draw from their own stream so instrumentation can never shift
    # the training trajectory
    metric_rng = np.random.default_rng(metric_ss)

    policy = GaussianPolicy(2, 2, init_rng, log_std_init=float(np.log(0.5 * spec.max_accel)))
    value_net = ValueNet(2, init_rng)
    disc = VailDiscriminator(init_rng, cfg)
    policy_opt = make_optimizer(cfg.ppo.optimizer, policy.named_parameters(), cfg.ppo.policy_lr)
    value_opt = make_optimizer(cfg.ppo.optimizer, value_net.named_parameters(), cfg.ppo.value_lr)
    disc_opt = make_optimizer("adam", disc.named_parameters(), cfg.disc_lr)

    demo_states = demos.states()
    metrics = []
    for it in range(cfg.iterations):
        try:
            batch = collect(
                policy, spec, cfg.episodes_per_iter, roll_rng,
                reward_source="discriminator",
                reward_fn=lambda s, s_next: disc.reward(s),
                value_net=value_net, gamma=cfg.ppo.gamma, lam=cfg.ppo.lam,
            )
            ppo_update(policy, value_net, policy_opt, value_opt, batch, cfg.ppo, update_rng)

            agent_states = batch.observations
            kl_sum = 0.0
            for _ in range(cfg.disc_updates):
                expert_half = demo_states[
                    disc_rng.integers(0, demo_states.shape[0], cfg.disc_batch)
                ]
                agent_half = agent_states[
                    disc_rng.integers(0, agent_states.shape[0], cfg.disc_batch)
                ]
                report, _, disc.dual = vdb_discriminator_step(
                    expert_half, agent_half, disc.encoder, disc.head, disc.dual,
                    disc_opt, disc_rng,
                    gp_coefficient=cfg.gp_coefficient,
                    sample=disc.stochastic,
                    adapt_beta=(cfg.beta_mode == "adaptive"),
                )
                kl_sum += report.batch_kl
        except NonFiniteError as err:
            raise DivergenceError(
                f"imitation run diverged at iteration {it} (seed {seed}): {err}",
                getattr(err, "diagnostics", None),
            ) from err

        acc_expert = demo_states[metric_rng.integers(0, demo_states.shape[0], 512)]
        acc_agent = agent_states[metric_rng.integers(0, agent_states.shape[0], 512)]
        row = {
            "iteration": it,
            "env_return": float(
                batch.env_rewards.reshape(cfg.episodes_per_iter, -1).sum(axis=1).mean()
            ),
            "disc_reward": float(batch.rewards.mean()),
            "batch_kl": kl_sum / max(cfg.disc_updates, 1),
            "beta": disc.dual.beta,
            "disc_accuracy": disc.accuracy(acc_expert, acc_agent, rng=metric_rng, draws=4),
        }
        metrics.append(row)
        if on_iteration is not None:
            on_iteration(row)

    eval_rng = np.random.default_rng(eval_ss)
    report = evaluate_return(policy.as_act_fn(deterministic=True), spec, cfg.eval_episodes,
                             eval_rng)
    return VailResult(
        policy=policy,
        value_net=value_net,
        discriminator=disc,
        metrics=metrics,
        mean_return=report.mean_return,
        reach_fraction=report.reach_fraction,
    )
