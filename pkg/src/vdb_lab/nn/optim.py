"""First-order optimizers over named Tensor parameters.

Every optimizer validates gradients before applying an update and raises
NonFiniteError with a per-parameter diagnostics dump if anything is NaN or
infinite, so a diverging run fails at the step that produced the bad values
rather than corrupting parameters silently.
"""

import numpy as np

from vdb_lab.errors import ConfigError, NonFiniteError


def _check_finite(named_params, step_count):
    bad = []
    for name, p in named_params:
        if not np.all(np.isfinite(p.grad)):
            bad.append(f"  grad[{name}]: max|g| = {np.max(np.abs(p.grad))!r}")
        if not np.all(np.isfinite(p.values)):
            bad.append(f"  param[{name}]: max|p| = {np.max(np.abs(p.values))!r}")
    if bad:
        raise NonFiniteError(
            f"non-finite gradient or parameter at optimizer step {step_count}",
            "\n".join(bad),
        )


class _Optimizer:
    def __init__(self, named_params, lr):
        if lr <= 0:
            raise ConfigError(f"learning rate must be positive, got {lr}")
        self.named_params = list(named_params)
        self.lr = lr
        self.step_count = 0

    def zero_grad(self):
        for _, p in self.named_params:
            p.zero_grad()

    def step(self):
        self.step_count += 1
        _check_finite(self.named_params, self.step_count)
        self._apply()

    def _apply(self):
        raise NotImplementedError


class SgdMomentum(_Optimizer):
    """Classic momentum: v <- momentum * v + g; p <- p - lr * v."""

    def __init__(self, named_params, lr, momentum=0.9):
        super().__init__(named_params, lr)
        self.momentum = momentum
        self._velocity = [np.zeros_like(p.values) for _, p in self.named_params]

    def _apply(self):
        for v, (_, p) in zip(self._velocity, self.named_params):
            v *= self.momentum
            v += p.grad
            p.values -= self.lr * v


class RmsProp(_Optimizer):
    """Gradient-normalized descent with an EMA of squared gradients."""

    def __init__(self, named_params, lr, decay=0.9, eps=1e-8):
        super().__init__(named_params, lr)
        self.decay = decay
        self.eps = eps
        self._sq = [np.zeros_like(p.values) for _, p in self.named_params]

    def _apply(self):
        for s, (_, p) in zip(self._sq, self.named_params):
            s *= self.decay
            s += (1.0 - self.decay) * p.grad * p.grad
            p.values -= self.lr * p.grad / (np.sqrt(s) + self.eps)


class Adam(_Optimizer):
    """Adam with bias correction (Kingma & Ba defaults)."""

    def __init__(self, named_params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        super().__init__(named_params, lr)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self._m = [np.zeros_like(p.values) for _, p in self.named_params]
        self._v = [np.zeros_like(p.values) for _, p in self.named_params]

    def _apply(self):
        t = self.step_count
        c1 = 1.0 - self.beta1**t
        c2 = 1.0 - self.beta2**t
        for m, v, (_, p) in zip(self._m, self._v, self.named_params):
            m *= self.beta1
            m += (1.0 - self.beta1) * p.grad
            v *= self.beta2
            v += (1.0 - self.beta2) * p.grad * p.grad
            p.values -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


_KINDS = {"sgd-momentum": SgdMomentum, "rmsprop": RmsProp, "adam": Adam}


def make_optimizer(kind, named_params, lr, **kwargs):
    if kind not in _KINDS:
        raise ConfigError(f"unknown optimizer {kind!r}; choose from {sorted(_KINDS)}")
    return _KINDS[kind](named_params, lr, **kwargs)
