"""Batched experience collection with pluggable reward sources."""

from dataclasses import dataclass

import numpy as np

from vdb_lab.envs import reset_batch, step_batch
from vdb_lab.errors import ConfigError

REWARD_SOURCES = ("env", "discriminator", "recovered")


@dataclass
class TransitionBatch:
    """Flattened (episodes * horizon) transition arrays for one update.

    `rewards` carries the training signal for the selected source;
    `env_rewards` always carries the ground-truth signal in parallel so
    progress stays measurable when training on a learned reward.
    """

    observations: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    rewards: np.ndarray
    env_rewards: np.ndarray
    next_observations: np.ndarray
    advantages: np.ndarray
    returns: np.ndarray
    episodes: int
    horizon: int

    @property
    def n_transitions(self):
        return self.observations.shape[0]


def collect(policy, spec, episodes, rng, reward_source="env", reward_fn=None, value_net=None,
            gamma=0.99, lam=0.95):
    """Roll out whole episodes in lockstep and assemble a TransitionBatch.

    reward_fn(obs, next_obs) -> per-transition rewards; required for the
    discriminator and recovered sources, ignored for env.
    """
    if reward_source not in REWARD_SOURCES:
        raise ConfigError(f"reward_source must be one of {REWARD_SOURCES}, got {reward_source!r}")
    if reward_source != "env" and reward_fn is None:
        raise ConfigError(f"reward_source={reward_source!r} needs a reward_fn")

    from vdb_lab.rl.gae import gae_advantages

    pos, vel = reset_batch(spec, episodes, rng)
    m, horizon = episodes, spec.horizon
    obs = np.zeros((m, horizon, 2))
    nxt = np.zeros((m, horizon, 2))
    acts = np.zeros((m, horizon, 2))
    logps = np.zeros((m, horizon))
    env_rews = np.zeros((m, horizon))
    for t in range(horizon):
        obs[:, t] = pos
        a, lp = policy.act(pos, rng)
        pos, vel, r, _ = step_batch(pos, vel, a, spec)
        acts[:, t] = a
        logps[:, t] = lp
        env_rews[:, t] = r
        nxt[:, t] = pos

    if reward_source == "env":
        rews = env_rews
    else:
        flat = reward_fn(obs.reshape(-1, 2), nxt.reshape(-1, 2))
        rews = np.asarray(flat, dtype=np.float64).reshape(m, horizon)

    if value_net is not None:
        values = np.concatenate(
            [
                value_net.value(obs.reshape(-1, 2)).reshape(m, horizon),
                value_net.value(pos)[:, None],
            ],
            axis=1,
        )
    else:
        values = np.zeros((m, horizon + 1))
    advantages, returns = gae_advantages(rews, values, gamma, lam)

    return TransitionBatch(
        observations=obs.reshape(-1, 2),
        actions=acts.reshape(-1, 2),
        log_probs=logps.reshape(-1),
        rewards=rews.reshape(-1),
        env_rewards=env_rews.reshape(-1),
        next_observations=nxt.reshape(-1, 2),
        advantages=advantages.reshape(-1),
        returns=returns.reshape(-1),
        episodes=m,
        horizon=horizon,
    )
