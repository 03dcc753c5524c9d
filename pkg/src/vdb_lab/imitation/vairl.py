"""Adversarial inverse RL with a bottlenecked two-branch discriminator.

The discriminator scores transitions through a potential-shaped decomposition

    f(s, s') = g(z_g(s)) + discount * h(z_h(s')) - h(z_h(s))

with separate stochastic encoders for the g and h branches; the same
h-encoder embeds both s and s', so the joint code distribution factorizes
and the KL budget is the sum of the three branch KLs. Against a policy
with known density the classifier is D = sigmoid(f - log pi(a|s)).

Freezing the g branch afterwards yields a state-only reward that can train
new policies in modified environments (reward transfer).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from vdb_lab.bottleneck import (
    DiscriminatorHead,
    DualState,
    GaussianEncoder,
    dual_update,
    kl_per_sample,
)
from vdb_lab.bottleneck.losses import _clamped_prob
from vdb_lab.envs import evaluate_return
from vdb_lab.errors import ConfigError, DivergenceError, NonFiniteError, ShapeError
from vdb_lab.nn import sigmoid
from vdb_lab.nn.checkpoint import load_checkpoint, restore_into, save_checkpoint
from vdb_lab.nn.optim import make_optimizer
from vdb_lab.rl import GaussianPolicy, PpoConfig, ValueNet, collect, ppo_update
from vdb_lab.rl.expert import DemoSet

VAIRL_BETA_MODES = ("adaptive", "fixed-zero")


@dataclass(frozen=True)
class VairlConfig:
    latent_dim: int = 32
    encoder_hidden: tuple = ((32, "relu"), (32, "relu"))
    kl_target: float = 0.5
    dual_step_size: float = 1e-3
    beta_mode: str = "adaptive"
    gp_coefficient: float = 0.1
    discount: float = 0.99
    iterations: int = 200
    episodes_per_iter: int = 32
    disc_updates: int = 100
    disc_batch: int = 32
    disc_lr: float = 5e-5
    ppo: PpoConfig = field(default_factory=PpoConfig)
    eval_episodes: int = 32

    def __post_init__(self):
        if self.beta_mode not in VAIRL_BETA_MODES:
            raise ConfigError(
                f"beta_mode must be one of {VAIRL_BETA_MODES}, got {self.beta_mode!r}"
            )
        if self.kl_target <= 0:
            raise ConfigError("kl_target must be positive")
        if not 0.0 <= self.discount <= 1.0:
            raise ConfigError("discount must be in [0, 1]")
        if self.gp_coefficient < 0:
            raise ConfigError("gp_coefficient must be nonnegative")


class VairlDiscriminator:
    """g/h branch pair over (s, s') with a shared h-encoder."""

    def __init__(self, rng, cfg):
        self.g_encoder = GaussianEncoder(2, cfg.latent_dim, rng, hidden=cfg.encoder_hidden)
        self.g_head = DiscriminatorHead(cfg.latent_dim, rng)
        self.h_encoder = GaussianEncoder(2, cfg.latent_dim, rng, hidden=cfg.encoder_hidden)
        self.h_head = DiscriminatorHead(cfg.latent_dim, rng)
        self.discount = cfg.discount
        step = cfg.dual_step_size if cfg.beta_mode == "adaptive" else 0.0
        self.dual = DualState(beta=0.0, kl_target=cfg.kl_target, step_size=step)
        self.beta_mode = cfg.beta_mode

    def f(self, states, next_states, rng=None, sample=False):
        """f = g(z_g(s)) + discount*h(z_h(s')) - h(z_h(s)).

        sample=True draws one reparameterized code per branch (training);
        sample=False evaluates every branch at its mean (deterministic).
        """
        states = np.asarray(states, dtype=np.float64)
        next_states = np.asarray(next_states, dtype=np.float64)
        if states.shape != next_states.shape:
            raise ShapeError("states and next_states must share shape")
        n = states.shape[0]
        g_out = self.g_encoder.forward(states, rng=rng, sample=sample)
        # one pooled pass embeds s and s' so the shared encoder caches a
        # single forward; rows [:n] are s, rows [n:] are s'
        h_out = self.h_encoder.forward(
            np.vstack([states, next_states]), rng=rng, sample=sample
        )
        t_g = self.g_head.logits(g_out.sample)
        t_h = self.h_head.logits(h_out.sample)
        return t_g + self.discount * t_h[n:] - t_h[:n]

    def reward(self, states, next_states):
        """Policy training signal: f on the deterministic mean path."""
        return self.f(states, next_states, sample=False)

    def disc_prob(self, states, actions, next_states, policy_logprob, rng=None, sample=False):
        """D = exp(f) / (exp(f) + pi(a|s)), computed as sigmoid(f - log pi)."""
        f = self.f(states, next_states, rng=rng, sample=sample)
        return sigmoid(f - np.asarray(policy_logprob, dtype=np.float64))

    def named_parameters(self):
        out = self.g_encoder.named_parameters(prefix="g.")
        out += [("g." + n, t) for n, t in self.g_head.named_parameters()]
        out += self.h_encoder.named_parameters(prefix="h.")
        out += [("h." + n, t) for n, t in self.h_head.named_parameters()]
        return out

    def zero_grad(self):
        for _, t in self.named_parameters():
            t.zero_grad()


@dataclass
class VairlDiscReport:
    total: float
    expert_term: float
    agent_term: float
    batch_kl: float
    kl_g: float
    kl_h: float
    kl_h_next: float
    accuracy: float


def vairl_disc_loss(disc, expert, agent, policy_logprob_fn, rng, sample=True,
                    compute_grads=False):
    """BCE on sigmoid(f - log pi) plus the beta-weighted summed-KL budget.

    expert/agent are (s, a, s') triples; both halves pool through each
    encoder in one pass. The batch KL is mean KL_g(s) + mean KL_h(s) +
    mean KL_h(s') over the pooled mixture.
    """
    s_e, a_e, n_e = expert
    s_a, a_a, n_a = agent
    ne, na = s_e.shape[0], s_a.shape[0]
    if ne == 0 or na == 0:
        raise ShapeError("expert and agent halves must be non-empty")
    states = np.vstack([s_e, s_a])
    nexts = np.vstack([n_e, n_a])
    actions = np.vstack([a_e, a_a])
    n = ne + na

    g_out = disc.g_encoder.forward(states, rng=rng, sample=sample)
    h_out = disc.h_encoder.forward(np.vstack([states, nexts]), rng=rng, sample=sample)
    t_g = disc.g_head.logits(g_out.sample)
    t_h = disc.h_head.logits(h_out.sample)
    f = t_g + disc.discount * t_h[n:] - t_h[:n]
    logp = policy_logprob_fn(states, actions)
    logits = f - logp
    p, pc, live = _clamped_prob(logits)

    expert_term = float(np.mean(-np.log(pc[:ne])))
    agent_term = float(np.mean(-np.log1p(-pc[ne:])))
    kl_g = float(np.mean(kl_per_sample(g_out.mean, g_out.var)))
    kls_h = kl_per_sample(h_out.mean, h_out.var)
    kl_h = float(np.mean(kls_h[:n]))
    kl_h_next = float(np.mean(kls_h[n:]))
    batch_kl = kl_g + kl_h + kl_h_next
    beta_on = disc.dual.beta != 0.0 and disc.dual.constrained
    kl_term = disc.dual.beta * (batch_kl - disc.dual.kl_target) if beta_on else 0.0
    total = expert_term + agent_term + kl_term

    correct = int(np.sum(p[:ne] > 0.5)) + int(np.sum(p[ne:] < 0.5))
    accuracy = correct / n

    if compute_grads:
        d_logit = np.zeros_like(logits)
        d_logit[:ne] = np.where(live[:ne], -(1.0 - pc[:ne]) / ne, 0.0)
        d_logit[ne:] = np.where(live[ne:], pc[ne:] / na, 0.0)
        d_tg = d_logit
        d_th = np.concatenate([-d_logit, disc.discount * d_logit])
        d_zg = disc.g_head.backward_logits(d_tg, accumulate=True)
        d_zh = disc.h_head.backward_logits(d_th, accumulate=True)
        if beta_on:
            scale = disc.dual.beta / n
            disc.g_encoder.backward(
                scale * g_out.mean, scale * 0.5 * (g_out.var - 1.0), d_zg, accumulate=True
            )
            disc.h_encoder.backward(
                scale * h_out.mean, scale * 0.5 * (h_out.var - 1.0), d_zh, accumulate=True
            )
        else:
            disc.g_encoder.backward(None, None, d_zg, accumulate=True)
            disc.h_encoder.backward(None, None, d_zh, accumulate=True)

    return VairlDiscReport(
        total=total,
        expert_term=expert_term,
        agent_term=agent_term,
        batch_kl=batch_kl,
        kl_g=kl_g,
        kl_h=kl_h,
        kl_h_next=kl_h_next,
        accuracy=accuracy,
    )


def vairl_gradient_penalty(disc, states, next_states, coefficient, rng, compute_grads=False):
    """coefficient * mean 0.5 |grad_(s,s') f|^2 over expert transitions.

    The penalty regularizes the learned score f itself (the policy density
    shift is the generator's, not the discriminator's). Codes are sampled
    per branch; gradients are exact by the same tangent argument as the
    single-encoder penalty.
    """
    if coefficient < 0.0:
        raise ValueError(f"penalty coefficient must be nonnegative, got {coefficient}")
    n = states.shape[0]

    g_out = disc.g_encoder.forward(states, rng=rng, sample=True)
    h_out = disc.h_encoder.forward(np.vstack([states, next_states]), rng=rng, sample=True)
    disc.g_head.logits(g_out.sample)
    disc.h_head.logits(h_out.sample)
    ones = np.ones(n)
    d_zg = disc.g_head.backward_logits(ones, accumulate=False)
    d_zh = disc.h_head.backward_logits(
        np.concatenate([-ones, disc.discount * ones]), accumulate=False
    )
    grad_g = disc.g_encoder.backward(None, None, d_zg, accumulate=False)
    grad_h = disc.h_encoder.backward(None, None, d_zh, accumulate=False)
    # f's gradient w.r.t. s collects the g branch and the -h(s) term;
    # w.r.t. s' only the discounted h(s') term
    grad_s = grad_g + grad_h[:n]
    grad_next = grad_h[n:]
    sq_norms = np.sum(grad_s * grad_s, axis=1) + np.sum(grad_next * grad_next, axis=1)
    value = coefficient * float(np.mean(0.5 * sq_norms))

    if compute_grads and coefficient > 0.0:
        upstream_dot = np.full(n, coefficient / n)
        zg, zg_dot = disc.g_encoder.tangent_forward(states, grad_s)
        _, tg_dot = disc.g_head.tangent_logits(zg, zg_dot)
        zh, zh_dot = disc.h_encoder.tangent_forward(
            np.vstack([states, next_states]), np.vstack([grad_s, grad_next])
        )
        _, th_dot = disc.h_head.tangent_logits(zh, zh_dot)
        # f is linear in the head outputs, so only the dot components carry
        # upstream signal; the primal d_logit of the penalty is zero
        zeros = np.zeros(n)
        dzg, dzg_dot = disc.g_head.tangent_backward_logits(zeros, upstream_dot,
                                                           accumulate=True)
        dzh, dzh_dot = disc.h_head.tangent_backward_logits(
            np.concatenate([zeros, zeros]),
            np.concatenate([-upstream_dot, disc.discount * upstream_dot]),
            accumulate=True,
        )
        disc.g_encoder.tangent_backward(dzg, dzg_dot, accumulate=True)
        disc.h_encoder.tangent_backward(dzh, dzh_dot, accumulate=True)

    return value, sq_norms


def vairl_disc_step(disc, expert, agent, policy_logprob_fn, optimizer, rng,
                    gp_coefficient=0.0, adapt_beta=True):
    optimizer.zero_grad()
    report = vairl_disc_loss(
        disc, expert, agent, policy_logprob_fn, rng, sample=True, compute_grads=True
    )
    gp_value = 0.0
    if gp_coefficient > 0.0:
        gp_value, _ = vairl_gradient_penalty(
            disc, expert[0], expert[2], gp_coefficient, rng, compute_grads=True
        )
    optimizer.step()
    if adapt_beta:
        disc.dual = dual_update(disc.dual, report.batch_kl)
    return report, gp_value


class RecoveredReward:
    """Frozen g branch: a deterministic state-only reward r(s) = g(mu_g(s))."""

    def __init__(self, g_encoder, g_head):
        self.encoder = g_encoder
        self.head = g_head

    def reward(self, states):
        out = self.encoder.forward(states, sample=False)
        return self.head.logits(out.sample)

    def grid(self, spec, resolution=61):
        """Reward over a position grid spanning the maze bounds."""
        xmin, xmax, ymin, ymax = spec.bounds
        xs = np.linspace(xmin, xmax, resolution)
        ys = np.linspace(ymin, ymax, resolution)
        gx, gy = np.meshgrid(xs, ys)
        values = self.reward(np.column_stack([gx.ravel(), gy.ravel()]))
        return xs, ys, values.reshape(resolution, resolution)

    def named_parameters(self):
        out = self.encoder.named_parameters(prefix="g.")
        out += [("g." + n, t) for n, t in self.head.named_parameters()]
        return out

    def save(self, path):
        layers = self.encoder.trunk.layers
        hidden = [[layers[i].out_dim, layers[i + 1].name] for i in range(0, len(layers), 2)]
        save_checkpoint(path, self.named_parameters(),
                        meta={"kind": "recovered-reward",
                              "latent_dim": self.encoder.latent_dim,
                              "encoder_hidden": hidden})

    @classmethod
    def load(cls, path):
        arrays, meta = load_checkpoint(path)
        if meta.get("kind") != "recovered-reward":
            raise ConfigError(f"{path} is not a recovered-reward checkpoint")
        hidden = tuple((int(w), str(a)) for w, a in meta["encoder_hidden"])
        rng = np.random.default_rng(0)
        encoder = GaussianEncoder(2, int(meta["latent_dim"]), rng, hidden=hidden)
        head = DiscriminatorHead(int(meta["latent_dim"]), rng)
        out = cls(encoder, head)
        restore_into(out.named_parameters(), arrays)
        return out


@dataclass
class VairlResult:
    policy: GaussianPolicy
    value_net: ValueNet
    discriminator: VairlDiscriminator
    recovered: RecoveredReward
    metrics: list
    mean_return: float
    reach_fraction: float


def vairl_train(demos, spec, cfg, seed=0, on_iteration=None):
    """AIRL-style alternating training with the VDB budget on summed KLs."""
    if not isinstance(demos, DemoSet) or demos.count == 0:
        raise ConfigError("demos must be a non-empty DemoSet")
    root = np.random.SeedSequence(seed)
    init_ss, roll_ss, update_ss, disc_ss, eval_ss = root.spawn(5)
    init_rng = np.random.default_rng(init_ss)
    roll_rng = np.random.default_rng(roll_ss)
    update_rng = np.random.default_rng(update_ss)
    disc_rng = np.random.default_rng(disc_ss)

    policy = GaussianPolicy(2, 2, init_rng, log_std_init=float(np.log(0.5 * spec.max_accel)))
    value_net = ValueNet(2, init_rng)
    disc = VairlDiscriminator(init_rng, cfg)
    policy_opt = make_optimizer(cfg.ppo.optimizer, policy.named_parameters(), cfg.ppo.policy_lr)
    value_opt = make_optimizer(cfg.ppo.optimizer, value_net.named_parameters(), cfg.ppo.value_lr)
    disc_opt = make_optimizer("adam", disc.named_parameters(), cfg.disc_lr)

    demo_s, demo_a, demo_next = demos.transitions()
    n_demo = demo_s.shape[0]

    def policy_logprob_fn(states, actions):
        return policy.log_prob(states, actions)

    metrics = []
    for it in range(cfg.iterations):
        try:
            batch = collect(
                policy, spec, cfg.episodes_per_iter, roll_rng,
                reward_source="discriminator",
                reward_fn=disc.reward,
                value_net=value_net, gamma=cfg.ppo.gamma, lam=cfg.ppo.lam,
            )
            ppo_update(policy, value_net, policy_opt, value_opt, batch, cfg.ppo, update_rng)

            n_agent = batch.observations.shape[0]
            kl_sum = 0.0
            acc_sum = 0.0
            for _ in range(cfg.disc_updates):
                ei = disc_rng.integers(0, n_demo, cfg.disc_batch)
                ai = disc_rng.integers(0, n_agent, cfg.disc_batch)
                report, _ = vairl_disc_step(
                    disc,
                    (demo_s[ei], demo_a[ei], demo_next[ei]),
                    (batch.observations[ai], batch.actions[ai], batch.next_observations[ai]),
                    policy_logprob_fn, disc_opt, disc_rng,
                    gp_coefficient=cfg.gp_coefficient,
                    adapt_beta=(cfg.beta_mode == "adaptive"),
                )
                kl_sum += report.batch_kl
                acc_sum += report.accuracy
        except NonFiniteError as err:
            raise DivergenceError(
                f"inverse-RL run diverged at iteration {it} (seed {seed}): {err}",
                getattr(err, "diagnostics", None),
            ) from err

        row = {
            "iteration": it,
            "env_return": float(
                batch.env_rewards.reshape(cfg.episodes_per_iter, -1).sum(axis=1).mean()
            ),
            "disc_reward": float(batch.rewards.mean()),
            "batch_kl": kl_sum / max(cfg.disc_updates, 1),
            "beta": disc.dual.beta,
            "disc_accuracy": acc_sum / max(cfg.disc_updates, 1),
        }
        metrics.append(row)
        if on_iteration is not None:
            on_iteration(row)

    eval_rng = np.random.default_rng(eval_ss)
    report = evaluate_return(policy.as_act_fn(deterministic=True), spec, cfg.eval_episodes,
                             eval_rng)
    return VairlResult(
        policy=policy,
        value_net=value_net,
        discriminator=disc,
        recovered=RecoveredReward(disc.g_encoder, disc.g_head),
        metrics=metrics,
        mean_return=report.mean_return,
        reach_fraction=report.reach_fraction,
    )


@dataclass
class TransferResult:
    policy: GaussianPolicy
    metrics: list
    mean_return: float
    std_return: float
    reach_fraction: float
    eval_means: list


def transfer(recovered, spec, cfg=None, seed=0, iterations=300, episodes_per_iter=32,
             eval_episodes=50, eval_runs=5, on_iteration=None):
    """Train a fresh policy from scratch using only the recovered reward.

    Evaluation always uses the environment's ground-truth reward: eval_runs
    independent evaluations give the reported mean and spread.
    """
    ppo_cfg = cfg if cfg is not None else PpoConfig()
    root = np.random.SeedSequence(seed)
    init_ss, roll_ss, update_ss, eval_ss = root.spawn(4)
    init_rng = np.random.default_rng(init_ss)
    roll_rng = np.random.default_rng(roll_ss)
    update_rng = np.random.default_rng(update_ss)

    policy = GaussianPolicy(2, 2, init_rng, log_std_init=float(np.log(0.5 * spec.max_accel)))
    value_net = ValueNet(2, init_rng)
    policy_opt = make_optimizer(ppo_cfg.optimizer, policy.named_parameters(), ppo_cfg.policy_lr)
    value_opt = make_optimizer(ppo_cfg.optimizer, value_net.named_parameters(), ppo_cfg.value_lr)

    metrics = []
    for it in range(iterations):
        batch = collect(
            policy, spec, episodes_per_iter, roll_rng,
            reward_source="recovered",
            reward_fn=lambda s, s_next: recovered.reward(s),
            value_net=value_net, gamma=ppo_cfg.gamma, lam=ppo_cfg.lam,
        )
        ppo_update(policy, value_net, policy_opt, value_opt, batch, ppo_cfg, update_rng)
        row = {
            "iteration": it,
            "env_return": float(
                batch.env_rewards.reshape(episodes_per_iter, -1).sum(axis=1).mean()
            ),
            "recovered_reward": float(batch.rewards.mean()),
        }
        metrics.append(row)
        if on_iteration is not None:
            on_iteration(row)

    eval_rng = np.random.default_rng(eval_ss)
    means, reaches = [], []
    for _ in range(eval_runs):
        rep = evaluate_return(policy.as_act_fn(deterministic=True), spec, eval_episodes,
                              eval_rng)
        means.append(rep.mean_return)
        reaches.append(rep.reach_fraction)
    return TransferResult(
        policy=policy,
        metrics=metrics,
        mean_return=float(np.mean(means)),
        std_return=float(np.std(means)),
        reach_fraction=float(np.mean(reaches)),
        eval_means=means,
    )
