"""Lagrange-multiplier state for the KL budget, updated by dual ascent."""

import math
from dataclasses import dataclass, replace


@dataclass(frozen=True)
class DualState:
    """Multiplier and budget for the expected-KL constraint.

    beta is the nonnegative multiplier on (batch KL - kl_target); kl_target
    is the budget in nats (math.inf disables the constraint entirely);
    step_size is the dual-ascent rate (0 freezes beta, giving fixed-beta
    ablations); running_kl is an EMA of observed batch KLs, for logging only.
    """

    beta: float = 0.0
    kl_target: float = 0.5
    step_size: float = 1e-5
    running_kl: float = math.nan
    ema: float = 0.99

    def __post_init__(self):
        if not self.kl_target > 0.0:
            raise ValueError(f"kl_target must be positive, got {self.kl_target}")
        if self.step_size < 0.0:
            raise ValueError(f"step_size must be nonnegative, got {self.step_size}")
        if self.beta < 0.0:
            raise ValueError(f"beta must be nonnegative, got {self.beta}")
        if not 0.0 <= self.ema < 1.0:
            raise ValueError(f"ema must lie in [0, 1), got {self.ema}")

    @property
    def constrained(self):
        return math.isfinite(self.kl_target)


def dual_update(dual, batch_kl):
    """One projected dual-ascent step: beta <- max(0, beta + a*(KL - budget)).

    Returns a new DualState; the input is never mutated. The EMA of batch KL
    is refreshed regardless of step size so fixed-beta runs still log it.
    """
    batch_kl = float(batch_kl)
    if dual.step_size == 0.0 or not dual.constrained:
        beta = dual.beta
    else:
        beta = max(0.0, dual.beta + dual.step_size * (batch_kl - dual.kl_target))
    if math.isnan(dual.running_kl):
        running = batch_kl
    else:
        running = dual.ema * dual.running_kl + (1.0 - dual.ema) * batch_kl
    return replace(dual, beta=beta, running_kl=running)
