"""Dense layers with handwritten forward, backward, and tangent rules.

Every layer implements `forward`/`backward` with explicitly derived adjoints;
there is no tape. Layers additionally implement a forward-mode pair
(`tangent_forward`/`tangent_backward`) that propagates a directional
derivative alongside the primal values and lets a caller differentiate
through an input-gradient computation. That second-order path is what the
gradient penalty needs; ordinary training never touches it.

Backward must follow the matching forward on the same layer instance: the
cache is a single slot, so one network services one loss evaluation at a
time (see the concurrency note in the README).
"""

from dataclasses import dataclass

import numpy as np

from vdb_lab.errors import ConfigError, ShapeError, StateError
from vdb_lab.nn.tensor import Tensor, as_batch


class Activation:
    """Elementwise nonlinearity defined by its value and first two derivatives."""

    def __init__(self, name, fn, d1, d2):
        self.name = name
        self._fn = fn
        self._d1 = d1
        self._d2 = d2
        self._h = None
        self._h_dot = None

    def forward(self, h):
        self._h = h
        self._h_dot = None
        return self._fn(h)

    def backward(self, grad_out, accumulate=True):
        if self._h is None:
            raise StateError(f"{self.name}: backward called before forward")
        return self._d1(self._h) * grad_out

    def tangent_forward(self, h, h_dot):
        self._h = h
        self._h_dot = h_dot
        return self._fn(h), self._d1(h) * h_dot

    def tangent_backward(self, grad_out, grad_out_dot, accumulate=True):
        if self._h_dot is None:
            raise StateError(f"{self.name}: tangent_backward without tangent_forward")
        d1 = self._d1(self._h)
        grad_h = d1 * grad_out + self._d2(self._h) * self._h_dot * grad_out_dot
        grad_h_dot = d1 * grad_out_dot
        return grad_h, grad_h_dot

    def parameters(self):
        return []


def _tanh_d1(h):
    t = np.tanh(h)
    return 1.0 - t * t


def _tanh_d2(h):
    t = np.tanh(h)
    return -2.0 * t * (1.0 - t * t)


def sigmoid(h):
    out = np.empty_like(h)
    pos = h >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-h[pos]))
    eh = np.exp(h[~pos])
    out[~pos] = eh / (1.0 + eh)
    return out


def _sigmoid_d1(h):
    s = sigmoid(h)
    return s * (1.0 - s)


def _sigmoid_d2(h):
    s = sigmoid(h)
    return s * (1.0 - s) * (1.0 - 2.0 * s)


ACTIVATIONS = {
    "relu": (
        lambda h: np.maximum(h, 0.0),
        lambda h: (h > 0).astype(np.float64),
        lambda h: np.zeros_like(h),
    ),
    "tanh": (np.tanh, _tanh_d1, _tanh_d2),
    "sigmoid": (sigmoid, _sigmoid_d1, _sigmoid_d2),
    "identity": (
        lambda h: h,
        lambda h: np.ones_like(h),
        lambda h: np.zeros_like(h),
    ),
}


def make_activation(name):
    if name not in ACTIVATIONS:
        raise ConfigError(f"unknown activation {name!r}; choose from {sorted(ACTIVATIONS)}")
    return Activation(name, *ACTIVATIONS[name])


def init_weights(in_dim, out_dim, rng, scheme="uniform-fan-in", scale=1.0):
    """Draw a (in_dim, out_dim) weight matrix.

    uniform-fan-in: U(-a, a) with a = 1/sqrt(in_dim).
    normal-scaled:  N(0, 1/in_dim).
    """
    if scheme == "uniform-fan-in":
        limit = scale / np.sqrt(max(1, in_dim))
        return rng.uniform(-limit, limit, size=(in_dim, out_dim))
    if scheme == "normal-scaled":
        return rng.normal(0.0, scale / np.sqrt(max(1, in_dim)), size=(in_dim, out_dim))
    raise ConfigError(f"unknown init scheme {scheme!r}")


class Linear:
    """Affine map y = x W + b with W of shape (in_dim, out_dim)."""

    def __init__(self, in_dim, out_dim, rng, init="uniform-fan-in", scale=1.0):
        if in_dim < 1 or out_dim < 1:
            raise ConfigError(f"layer dims must be positive, got ({in_dim}, {out_dim})")
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.weight = Tensor(init_weights(in_dim, out_dim, rng, init, scale))
        self.bias = Tensor(np.zeros(out_dim))
        self._x = None
        self._x_dot = None

    def forward(self, x):
        x = as_batch(x, self.in_dim)
        self._x = x
        self._x_dot = None
        return x @ self.weight.values + self.bias.values

    def backward(self, grad_out, accumulate=True):
        if self._x is None:
            raise StateError("linear: backward called before forward")
        if accumulate:
            self.weight.grad += self._x.T @ grad_out
            self.bias.grad += grad_out.sum(axis=0)
        return grad_out @ self.weight.values.T

    def tangent_forward(self, x, x_dot):
        x = as_batch(x, self.in_dim)
        self._x = x
        self._x_dot = x_dot
        w = self.weight.values
        return x @ w + self.bias.values, x_dot @ w

    def tangent_backward(self, grad_out, grad_out_dot, accumulate=True):
        if self._x_dot is None:
            raise StateError("linear: tangent_backward without tangent_forward")
        if accumulate:
            self.weight.grad += self._x.T @ grad_out + self._x_dot.T @ grad_out_dot
            self.bias.grad += grad_out.sum(axis=0)
        wt = self.weight.values.T
        return grad_out @ wt, grad_out_dot @ wt

    def parameters(self):
        return [("weight", self.weight), ("bias", self.bias)]


@dataclass(frozen=True)
class MlpSpec:
    """Architecture of a fully connected net.

    hidden is a tuple of (width, activation-name) pairs; the output layer is
    always affine with no nonlinearity.
    """

    input_dim: int
    hidden: tuple
    output_dim: int
    init: str = "uniform-fan-in"

    def __post_init__(self):
        if self.input_dim < 1 or self.output_dim < 1:
            raise ConfigError("input_dim and output_dim must be positive")
        for width, act in self.hidden:
            if width < 1:
                raise ConfigError(f"hidden width must be positive, got {width}")
            if act not in ACTIVATIONS:
                raise ConfigError(f"unknown activation {act!r}")
        if self.init not in ("uniform-fan-in", "normal-scaled"):
            raise ConfigError(f"unknown init scheme {self.init!r}")


class Chain:
    """A sequence of layers applied in order, with matching reverse passes."""

    def __init__(self, layers):
        self.layers = list(layers)
        self._has_forward = False
        self._has_tangent = False

    def forward(self, x):
        for layer in self.layers:
            x = layer.forward(x)
        self._has_forward = True
        self._has_tangent = False
        return x

    def backward(self, grad_out, accumulate=True):
        if not self._has_forward:
            raise StateError("chain: backward called before forward")
        for layer in reversed(self.layers):
            grad_out = layer.backward(grad_out, accumulate=accumulate)
        return grad_out

    def tangent_forward(self, x, x_dot):
        for layer in self.layers:
            x, x_dot = layer.tangent_forward(x, x_dot)
        self._has_forward = True
        self._has_tangent = True
        return x, x_dot

    def tangent_backward(self, grad_out, grad_out_dot, accumulate=True):
        if not self._has_tangent:
            raise StateError("chain: tangent_backward without tangent_forward")
        for layer in reversed(self.layers):
            grad_out, grad_out_dot = layer.tangent_backward(
                grad_out, grad_out_dot, accumulate=accumulate
            )
        return grad_out, grad_out_dot

    def named_parameters(self, prefix=""):
        out = []
        idx = 0
        for layer in self.layers:
            params = layer.parameters()
            if params:
                for name, tensor in params:
                    out.append((f"{prefix}layer{idx}.{name}", tensor))
                idx += 1
        return out

    def zero_grad(self):
        for _, t in self.named_parameters():
            t.zero_grad()


class Mlp(Chain):
    """Fully connected net built from an MlpSpec; output layer is affine."""

    def __init__(self, spec, rng, output_scale=1.0):
        layers = []
        d = spec.input_dim
        for width, act in spec.hidden:
            layers.append(Linear(d, width, rng, spec.init))
            layers.append(make_activation(act))
            d = width
        layers.append(Linear(d, spec.output_dim, rng, spec.init, scale=output_scale))
        super().__init__(layers)
        self.spec = spec


class PhaseBlendedLinear:
    """Affine layer whose parameters are interpolated along a cyclic phase.

    Holds `anchors` parameter sets pinned to a uniform grid on [0, 1]; a
    per-sample phase selects the surrounding pair and blends them linearly.
    Blend weights form a partition of unity with at most two nonzero entries,
    and gradients route to both active anchor sets scaled by those weights.
    """

    def __init__(self, in_dim, out_dim, rng, anchors=5, init="uniform-fan-in"):
        if anchors < 2:
            raise ConfigError(f"need at least 2 anchors, got {anchors}")
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.anchors = anchors
        self.grid = np.linspace(0.0, 1.0, anchors)
        self.weights = [Tensor(init_weights(in_dim, out_dim, rng, init)) for _ in range(anchors)]
        self.biases = [Tensor(np.zeros(out_dim)) for _ in range(anchors)]
        self._x = None
        self._blend = None

    def blend_weights(self, phase):
        """Per-sample anchor weights, shape (n, anchors)."""
        phase = np.asarray(phase, dtype=np.float64)
        if phase.ndim != 1:
            raise ShapeError(f"phase must be a 1-d array, got shape {phase.shape}")
        if np.any(phase < 0.0) or np.any(phase > 1.0):
            raise ValueError("phase values must lie in [0, 1]")
        seg = np.minimum((phase * (self.anchors - 1)).astype(int), self.anchors - 2)
        frac = phase * (self.anchors - 1) - seg
        out = np.zeros((phase.shape[0], self.anchors))
        rows = np.arange(phase.shape[0])
        out[rows, seg] = 1.0 - frac
        out[rows, seg + 1] = frac
        return out

    def effective_parameters(self, phase):
        """Blended (W, b) for a single scalar phase."""
        blend = self.blend_weights(np.array([float(phase)]))[0]
        w = sum(c * t.values for c, t in zip(blend, self.weights))
        b = sum(c * t.values for c, t in zip(blend, self.biases))
        return w, b

    def forward(self, x, phase):
        x = as_batch(x, self.in_dim)
        blend = self.blend_weights(phase)
        if blend.shape[0] != x.shape[0]:
            raise ShapeError("phase and input batch sizes differ")
        self._x = x
        self._blend = blend
        y = np.zeros((x.shape[0], self.out_dim))
        for i in range(self.anchors):
            active = blend[:, i] != 0.0
            if not np.any(active):
                continue
            y += blend[:, i : i + 1] * (x @ self.weights[i].values + self.biases[i].values)
        return y

    def backward(self, grad_out, accumulate=True):
        if self._x is None:
            raise StateError("phase-blended linear: backward called before forward")
        grad_x = np.zeros_like(self._x)
        for i in range(self.anchors):
            coeff = self._blend[:, i : i + 1]
            if not np.any(coeff):
                continue
            scaled = coeff * grad_out
            if accumulate:
                self.weights[i].grad += self._x.T @ scaled
                self.biases[i].grad += scaled.sum(axis=0)
            grad_x += scaled @ self.weights[i].values.T
        return grad_x

    def parameters(self):
        out = []
        for i in range(self.anchors):
            out.append((f"anchor{i}.weight", self.weights[i]))
            out.append((f"anchor{i}.bias", self.biases[i]))
        return out
