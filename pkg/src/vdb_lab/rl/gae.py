"""Generalized advantage estimation over lockstep episode batches."""

import numpy as np

from vdb_lab.errors import ShapeError


def gae_advantages(rewards, values, gamma, lam):
    """Advantages and value targets for (m, T) rewards.

    `values` must be (m, T+1): estimates at every visited state plus the
    bootstrap at the final state. Episodes here are time-limited rather
    than absorbing, so the bootstrap term is kept at the boundary.
    Advantages are returned raw; normalization happens at update time.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if rewards.ndim != 2:
        raise ShapeError(f"rewards must be (episodes, steps), got {rewards.shape}")
    m, horizon = rewards.shape
    if values.shape != (m, horizon + 1):
        raise ShapeError(
            f"values must be {(m, horizon + 1)} (steps plus bootstrap), got {values.shape}"
        )
    deltas = rewards + gamma * values[:, 1:] - values[:, :-1]
    advantages = np.zeros_like(deltas)
    acc = np.zeros(m)
    for t in range(horizon - 1, -1, -1):
        acc = deltas[:, t] + gamma * lam * acc
        advantages[:, t] = acc
    returns = advantages + values[:, :-1]
    return advantages, returns


def normalize_advantages(advantages):
    """Shift/scale to zero mean, unit std. Exact division keeps std at 1.

    A single-sample batch is returned unchanged: centering it would erase
    the one advantage signal present.
    """
    flat = np.asarray(advantages, dtype=np.float64)
    if flat.shape[0] < 2:
        return flat.copy()
    centered = flat - flat.mean()
    std = centered.std()
    if std > 0.0:
        centered = centered / std
    return centered
