"""Clipped-surrogate policy optimization with a regressed value baseline."""

from dataclasses import dataclass

import numpy as np

from vdb_lab.errors import ConfigError, NonFiniteError
from vdb_lab.rl.gae import normalize_advantages


@dataclass(frozen=True)
class PpoConfig:
    clip: float = 0.2
    policy_lr: float = 1e-3
    value_lr: float = 1e-3
    gamma: float = 0.99
    lam: float = 0.95
    epochs: int = 10
    minibatch: int = 256
    entropy_coef: float = 0.005
    optimizer: str = "adam"

    def __post_init__(self):
        if not 0.0 < self.clip < 1.0:
            raise ConfigError(f"clip must be in (0, 1), got {self.clip}")
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigError(f"gamma must be in (0, 1], got {self.gamma}")
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError(f"lam must be in [0, 1], got {self.lam}")
        if self.policy_lr <= 0 or self.value_lr <= 0:
            raise ConfigError("learning rates must be positive")
        if self.epochs < 1 or self.minibatch < 1:
            raise ConfigError("epochs and minibatch must be positive")
        if self.entropy_coef < 0:
            raise ConfigError("entropy_coef must be nonnegative")


def ppo_surrogate_loss(
    policy, obs, actions, logp_old, advantages, clip, entropy_coef, compute_grads=False
):
    """Negative clipped surrogate minus entropy bonus, with exact gradients.

    Returns (loss, stats). The min over {ratio*A, clip(ratio)*A} means any
    sample whose clipped branch is strictly smaller contributes no policy
    gradient: when clip(ratio)*A < ratio*A the ratio sits at a clamp, so
    d clip(ratio)/d ratio = 0 there.
    """
    logp = policy.log_prob(obs, actions)
    ratio = np.exp(logp - logp_old)
    clipped = np.clip(ratio, 1.0 - clip, 1.0 + clip)
    surr_raw = ratio * advantages
    surr_clip = clipped * advantages
    objective = np.minimum(surr_raw, surr_clip)
    entropy = policy.entropy()
    loss = -float(np.mean(objective)) - entropy_coef * entropy
    if compute_grads:
        n = obs.shape[0]
        d_ratio = np.where(surr_raw <= surr_clip, advantages, 0.0)
        policy.backward_log_prob(-(d_ratio * ratio) / n)
        if entropy_coef != 0.0:
            policy.add_entropy_grad(-entropy_coef)
    stats = {
        "clip_fraction": float(np.mean(surr_clip < surr_raw)),
        "approx_kl": float(np.mean(logp_old - logp)),
        "entropy": entropy,
    }
    return loss, stats


def value_loss(value_net, obs, returns, compute_grads=False):
    """0.5 * mean squared error against the value targets."""
    v = value_net.value(obs)
    err = v - returns
    loss = 0.5 * float(np.mean(err * err))
    if compute_grads:
        value_net.backward(err / err.shape[0])
    return loss


@dataclass
class PpoStats:
    policy_loss: float
    value_loss: float
    clip_fraction: float
    approx_kl: float
    entropy: float


def ppo_update(policy, value_net, policy_opt, value_opt, batch, cfg, rng):
    """Run cfg.epochs of minibatched surrogate ascent + value regression."""
    advantages = normalize_advantages(batch.advantages)
    n = advantages.shape[0]
    for _ in range(cfg.epochs):
        perm = rng.permutation(n)
        for lo in range(0, n, cfg.minibatch):
            idx = perm[lo : lo + cfg.minibatch]
            policy.zero_grad()
            loss, _ = ppo_surrogate_loss(
                policy,
                batch.observations[idx],
                batch.actions[idx],
                batch.log_probs[idx],
                advantages[idx],
                cfg.clip,
                cfg.entropy_coef,
                compute_grads=True,
            )
            if not np.isfinite(loss):
                raise NonFiniteError(f"policy loss is {loss}", {"minibatch_start": lo})
            policy_opt.step()
            value_net.zero_grad()
            vloss = value_loss(value_net, batch.observations[idx], batch.returns[idx],
                               compute_grads=True)
            if not np.isfinite(vloss):
                raise NonFiniteError(f"value loss is {vloss}", {"minibatch_start": lo})
            value_opt.step()
    final_loss, stats = ppo_surrogate_loss(
        policy, batch.observations, batch.actions, batch.log_probs, advantages,
        cfg.clip, cfg.entropy_coef,
    )
    final_vloss = value_loss(value_net, batch.observations, batch.returns)
    return PpoStats(
        policy_loss=final_loss,
        value_loss=final_vloss,
        clip_fraction=stats["clip_fraction"],
        approx_kl=stats["approx_kl"],
        entropy=stats["entropy"],
    )
