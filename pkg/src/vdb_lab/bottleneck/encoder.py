"""Stochastic encoders mapping inputs to diagonal-Gaussian latent codes.

The encoder is the information valve of the whole lab: a classifier head
only ever sees z drawn from N(mean(x), diag(var(x))), and training budgets
the average KL between that code distribution and the standard normal prior.

Gradients w.r.t. the three upstream signals (mean, log-variance, sample) are
combined here so loss code never has to know about the reparameterization.
All log-variance gradients are taken in log space.
"""

from dataclasses import dataclass

import numpy as np

from vdb_lab.errors import ShapeError, StateError
from vdb_lab.nn.layers import Chain, Linear, make_activation
from vdb_lab.nn.tensor import Tensor


@dataclass
class EncoderOutput:
    """One encoder pass: per-sample mean, variance, and (optionally) a draw.

    `sample` equals `mean` when sampling is off; `noise` holds the standard
    normal draw used by the reparameterization, or None in mean mode.
    """

    mean: np.ndarray
    var: np.ndarray
    sample: np.ndarray
    noise: np.ndarray | None


def _build_trunk(input_dim, hidden, rng, init):
    layers = []
    d = input_dim
    for width, act in hidden:
        layers.append(Linear(d, width, rng, init))
        layers.append(make_activation(act))
        d = width
    return Chain(layers), d


class GaussianEncoder:
    """Trunk MLP with separate affine heads for mean and log-variance."""

    def __init__(
        self,
        input_dim,
        latent_dim,
        rng,
        hidden=((32, "relu"), (32, "relu")),
        init="uniform-fan-in",
    ):
        self.input_dim = input_dim
        self.latent_dim = latent_dim
        self.trunk, trunk_dim = _build_trunk(input_dim, hidden, rng, init)
        self.mean_head = Linear(trunk_dim, latent_dim, rng, init)
        self.logvar_head = Linear(trunk_dim, latent_dim, rng, init)
        self._noise = None
        self._mode = None

    # -- plain reverse-mode -------------------------------------------------

    def forward(self, x, rng=None, sample=True):
        h = self.trunk.forward(x)
        mean = self.mean_head.forward(h)
        logvar = self.logvar_head.forward(h)
        var = np.exp(logvar)
        if sample:
            if rng is None:
                raise ValueError("sampling forward pass needs an rng")
            noise = rng.standard_normal(mean.shape)
            z = mean + np.sqrt(var) * noise
        else:
            noise = None
            z = mean
        self._noise = noise
        self._var = var
        self._mode = "forward"
        return EncoderOutput(mean=mean, var=var, sample=z, noise=noise)

    def backward(self, d_mean, d_logvar, d_sample, accumulate=True):
        """Push upstream gradients back to the input.

        d_mean/d_logvar act on the heads directly (log-variance space);
        d_sample is routed through the reparameterization z = mean + sigma*eps.
        Any of the three may be None.
        """
        if self._mode != "forward":
            raise StateError("encoder: backward called before forward")
        d_mean_total, d_logvar_total = self._fold_sample_grad(d_mean, d_logvar, d_sample)
        grad_h = self.mean_head.backward(d_mean_total, accumulate=accumulate)
        grad_h = grad_h + self.logvar_head.backward(d_logvar_total, accumulate=accumulate)
        return self.trunk.backward(grad_h, accumulate=accumulate)

    def _fold_sample_grad(self, d_mean, d_logvar, d_sample):
        zeros = np.zeros((self._var.shape[0], self.latent_dim))
        d_mean_total = zeros if d_mean is None else np.array(d_mean, dtype=np.float64)
        d_logvar_total = zeros.copy() if d_logvar is None else np.array(d_logvar, dtype=np.float64)
        if d_sample is not None:
            d_mean_total = d_mean_total + d_sample
            if self._noise is not None:
                # z = mean + exp(logvar/2) * eps, so dz/dlogvar = sigma*eps/2
                d_logvar_total = d_logvar_total + 0.5 * np.sqrt(self._var) * self._noise * d_sample
        return d_mean_total, d_logvar_total

    # -- tangent (forward-over-reverse) path for the gradient penalty -------

    def tangent_forward(self, x, x_dot):
        """Propagate an input direction; reuses the noise of the last forward."""
        if self._mode != "forward":
            raise StateError("encoder: tangent_forward needs a preceding forward")
        h, h_dot = self.trunk.tangent_forward(x, x_dot)
        mean, mean_dot = self.mean_head.tangent_forward(h, h_dot)
        logvar, logvar_dot = self.logvar_head.tangent_forward(h, h_dot)
        sigma = np.exp(0.5 * logvar)
        if self._noise is None:
            z = mean
            z_dot = mean_dot
        else:
            z = mean + sigma * self._noise
            z_dot = mean_dot + 0.5 * sigma * self._noise * logvar_dot
        self._tangent_cache = (sigma, logvar_dot)
        self._mode = "tangent"
        return z, z_dot

    def tangent_backward(self, d_z, d_z_dot, accumulate=True):
        if self._mode != "tangent":
            raise StateError("encoder: tangent_backward without tangent_forward")
        sigma, logvar_dot = self._tangent_cache
        d_mean, d_mean_dot = d_z, d_z_dot
        if self._noise is None:
            d_logvar = np.zeros_like(d_z)
            d_logvar_dot = np.zeros_like(d_z)
        else:
            half_se = 0.5 * sigma * self._noise
            # z: sigma*eps term; z_dot: 0.5*sigma*eps*logvar_dot term (both via sigma(logvar))
            d_logvar = half_se * d_z + 0.5 * half_se * logvar_dot * d_z_dot
            d_logvar_dot = half_se * d_z_dot
        gh, gh_dot = self.mean_head.tangent_backward(d_mean, d_mean_dot, accumulate=accumulate)
        gh2, gh2_dot = self.logvar_head.tangent_backward(
            d_logvar, d_logvar_dot, accumulate=accumulate
        )
        self._mode = "forward"
        return self.trunk.tangent_backward(gh + gh2, gh_dot + gh2_dot, accumulate=accumulate)

    def named_parameters(self, prefix=""):
        out = self.trunk.named_parameters(prefix=f"{prefix}trunk.")
        out += [(f"{prefix}mean_head.{n}", t) for n, t in self.mean_head.parameters()]
        out += [(f"{prefix}logvar_head.{n}", t) for n, t in self.logvar_head.parameters()]
        return out

    def zero_grad(self):
        for _, t in self.named_parameters():
            t.zero_grad()


class SharedVarianceEncoder(GaussianEncoder):
    """Encoder whose variance is one learned scalar, shared by every input.

    This is the variant the capacity-floor theorem speaks about: the code is
    N(mean(x), sigma^2 I) with a single input-independent sigma, so pointwise
    KL reduces to (K sigma^2 + |mean|^2 - K - K log sigma^2) / 2.
    """

    def __init__(self, input_dim, latent_dim, rng, hidden=((32, "relu"), (32, "relu")),
                 init="uniform-fan-in"):
        super().__init__(input_dim, latent_dim, rng, hidden=hidden, init=init)
        self.logvar_head = None
        self.log_variance = Tensor(0.0)

    def forward(self, x, rng=None, sample=True):
        h = self.trunk.forward(x)
        mean = self.mean_head.forward(h)
        var = np.full_like(mean, np.exp(self.log_variance.values))
        if sample:
            if rng is None:
                raise ValueError("sampling forward pass needs an rng")
            noise = rng.standard_normal(mean.shape)
            z = mean + np.sqrt(var) * noise
        else:
            noise = None
            z = mean
        self._noise = noise
        self._var = var
        self._mode = "forward"
        return EncoderOutput(mean=mean, var=var, sample=z, noise=noise)

    def backward(self, d_mean, d_logvar, d_sample, accumulate=True):
        if self._mode != "forward":
            raise StateError("encoder: backward called before forward")
        d_mean_total, d_logvar_total = self._fold_sample_grad(d_mean, d_logvar, d_sample)
        if accumulate:
            self.log_variance.grad += d_logvar_total.sum()
        grad_h = self.mean_head.backward(d_mean_total, accumulate=accumulate)
        return self.trunk.backward(grad_h, accumulate=accumulate)

    def tangent_forward(self, x, x_dot):
        if self._mode != "forward":
            raise StateError("encoder: tangent_forward needs a preceding forward")
        h, h_dot = self.trunk.tangent_forward(x, x_dot)
        mean, mean_dot = self.mean_head.tangent_forward(h, h_dot)
        sigma = np.exp(0.5 * float(self.log_variance.values))
        if self._noise is None:
            z, z_dot = mean, mean_dot
        else:
            z = mean + sigma * self._noise
            z_dot = mean_dot  # the shared sigma does not depend on the input
        self._tangent_cache = (sigma, None)
        self._mode = "tangent"
        return z, z_dot

    def tangent_backward(self, d_z, d_z_dot, accumulate=True):
        if self._mode != "tangent":
            raise StateError("encoder: tangent_backward without tangent_forward")
        sigma, _ = self._tangent_cache
        if accumulate and self._noise is not None:
            self.log_variance.grad += float(np.sum(0.5 * sigma * self._noise * d_z))
        gh, gh_dot = self.mean_head.tangent_backward(d_z, d_z_dot, accumulate=accumulate)
        self._mode = "forward"
        return self.trunk.tangent_backward(gh, gh_dot, accumulate=accumulate)

    def named_parameters(self, prefix=""):
        out = self.trunk.named_parameters(prefix=f"{prefix}trunk.")
        out += [(f"{prefix}mean_head.{n}", t) for n, t in self.mean_head.parameters()]
        out.append((f"{prefix}log_variance", self.log_variance))
        return out
