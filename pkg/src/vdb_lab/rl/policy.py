"""Gaussian policy and value function over flat observations.

The policy is a state-conditioned diagonal Gaussian: an MLP produces the
action mean, while the log standard deviations are free per-dimension
parameters shared across states. Log-probabilities therefore stay finite
for every finite (s, a) pair.
"""

import math

import numpy as np

from vdb_lab.errors import ShapeError, StateError
from vdb_lab.nn import Mlp, MlpSpec, Tensor, as_batch

LOG_2PI = math.log(2.0 * math.pi)


class GaussianPolicy:
    def __init__(
        self,
        obs_dim,
        action_dim,
        rng,
        hidden=((32, "relu"), (32, "relu")),
        init="uniform-fan-in",
        log_std_init=-1.0,
        mean_scale=0.01,
    ):
        # small final layer keeps early action means near zero so
        # exploration is governed by log_std_init alone
        self.mean_net = Mlp(MlpSpec(obs_dim, hidden, action_dim), rng, output_scale=mean_scale)
        self.log_std = Tensor(np.full(action_dim, float(log_std_init)))
        self.obs_dim = obs_dim
        self.action_dim = action_dim
        self._z = None
        self._sigma = None

    def mean(self, obs):
        obs = as_batch(obs, self.obs_dim, "observations")
        return self.mean_net.forward(obs)

    def act(self, obs, rng):
        """Sample actions and return (actions, log_probs)."""
        mu = self.mean(obs)
        sigma = np.exp(self.log_std.values)
        eps = rng.standard_normal(mu.shape)
        actions = mu + sigma * eps
        log_probs = -0.5 * np.sum(eps * eps, axis=1) - np.sum(self.log_std.values) \
            - 0.5 * self.action_dim * LOG_2PI
        return actions, log_probs

    def log_prob(self, obs, actions):
        """Differentiable log-density; caches intermediates for backward."""
        actions = as_batch(actions, self.action_dim, "actions")
        mu = self.mean(obs)
        if actions.shape != mu.shape:
            raise ShapeError(f"actions {actions.shape} do not match means {mu.shape}")
        sigma = np.exp(self.log_std.values)
        z = (actions - mu) / sigma
        self._z, self._sigma = z, sigma
        return -0.5 * np.sum(z * z, axis=1) - np.sum(self.log_std.values) \
            - 0.5 * self.action_dim * LOG_2PI

    def backward_log_prob(self, d_logp, accumulate=True):
        """Accumulate d(sum_i d_logp_i * logp_i)/d(params)."""
        if self._z is None:
            raise StateError("backward_log_prob before log_prob")
        z, sigma = self._z, self._sigma
        d_logp = np.asarray(d_logp, dtype=np.float64)
        d_mu = d_logp[:, None] * z / sigma
        self.mean_net.backward(d_mu, accumulate=accumulate)
        d_log_std = np.sum(d_logp[:, None] * (z * z - 1.0), axis=0)
        if accumulate:
            self.log_std.grad += d_log_std
        else:
            self.log_std.grad = d_log_std

    def entropy(self):
        """State-independent for a constant-covariance Gaussian."""
        return float(np.sum(self.log_std.values) + 0.5 * self.action_dim * (1.0 + LOG_2PI))

    def add_entropy_grad(self, coefficient):
        self.log_std.grad += coefficient

    def named_parameters(self):
        params = self.mean_net.named_parameters(prefix="mean.")
        params.append(("log_std", self.log_std))
        return params

    def zero_grad(self):
        for _, p in self.named_parameters():
            p.zero_grad()

    def as_act_fn(self, deterministic=False):
        """Adapter matching the rollout signature act_fn(obs, rng)."""
        if deterministic:
            return lambda obs, rng: self.mean(obs)
        return lambda obs, rng: self.act(obs, rng)[0]


class ValueNet:
    def __init__(self, obs_dim, rng, hidden=((32, "relu"), (32, "relu")), init="uniform-fan-in"):
        self.net = Mlp(MlpSpec(obs_dim, hidden, 1), rng)
        self.obs_dim = obs_dim

    def value(self, obs):
        obs = as_batch(obs, self.obs_dim, "observations")
        return self.net.forward(obs)[:, 0]

    def backward(self, d_value, accumulate=True):
        d_value = np.asarray(d_value, dtype=np.float64)
        self.net.backward(d_value[:, None], accumulate=accumulate)

    def named_parameters(self):
        return self.net.named_parameters()

    def zero_grad(self):
        self.net.zero_grad()
