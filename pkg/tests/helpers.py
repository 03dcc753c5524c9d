"""Shared test utilities: fixed-noise rngs and finite-difference scaffolding."""

import numpy as np

from vdb_lab.bottleneck import DiscriminatorHead, GaussianEncoder


class FixedNoise:
    """Stands in for a Generator but replays a fixed list of normal draws.

    Finite-difference checks re-evaluate a stochastic loss many times; the
    draws must be identical on every evaluation, so each evaluation builds a
    fresh FixedNoise over the same arrays.
    """

    def __init__(self, arrays):
        self.arrays = list(arrays)
        self.i = 0

    def standard_normal(self, shape):
        arr = self.arrays[self.i]
        assert arr.shape == tuple(shape), f"noise shape {arr.shape} != requested {shape}"
        self.i += 1
        return arr


def make_encoder_head(rng, input_dim=2, latent_dim=3, hidden=((6, "tanh"),)):
    enc = GaussianEncoder(input_dim, latent_dim, rng, hidden=hidden)
    head = DiscriminatorHead(latent_dim, rng)
    return enc, head


def all_params(*models):
    out = []
    for i, m in enumerate(models):
        out += m.named_parameters(prefix=f"m{i}.")
    return out


def relu_margin(chain, floor=1e-3):
    """Smallest |pre-activation| cached by any relu in a layer chain."""
    margin = np.inf
    for layer in chain.layers:
        if getattr(layer, "name", None) == "relu" and layer._h is not None:
            m = float(np.min(np.abs(layer._h)))
            margin = min(margin, m)
    return margin
