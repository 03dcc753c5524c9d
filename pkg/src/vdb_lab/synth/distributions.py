"""Planar target distributions for the toy generation experiments."""

import numpy as np

from vdb_lab.errors import ConfigError


class MixtureOfGaussians:
    """Mixture of isotropic 2D Gaussians with per-component std and weight."""

    def __init__(self, means, stds, weights=None):
        self.means = np.asarray(means, dtype=np.float64).reshape(-1, 2)
        m = self.means.shape[0]
        self.stds = np.broadcast_to(np.asarray(stds, dtype=np.float64), (m,)).copy()
        if weights is None:
            weights = np.full(m, 1.0 / m)
        self.weights = np.asarray(weights, dtype=np.float64)
        if np.any(self.stds <= 0.0):
            raise ConfigError("component stds must be positive")
        if self.weights.shape != (m,) or abs(self.weights.sum() - 1.0) > 1e-12:
            raise ConfigError("weights must sum to 1, one per component")

    @property
    def n_components(self):
        return self.means.shape[0]

    def sample(self, n, rng):
        comp = rng.choice(self.n_components, size=n, p=self.weights)
        return self.means[comp] + self.stds[comp, None] * rng.standard_normal((n, 2))


def gaussian(mean, std):
    return MixtureOfGaussians([mean], [std])


def two_gaussians(mean_a=(-4.0, 0.0), mean_b=(4.0, 0.0), std=1.0):
    """Well-separated pair used for the decision-boundary studies."""
    return MixtureOfGaussians([mean_a, mean_b], [std, std])


def ring(n_modes=8, radius=2.0, std=0.05):
    """Equally spaced modes on a circle; the classic mode-collapse probe."""
    angles = 2.0 * np.pi * np.arange(n_modes) / n_modes
    means = np.stack([radius * np.cos(angles), radius * np.sin(angles)], axis=1)
    return MixtureOfGaussians(means, np.full(n_modes, std))


def mode_coverage(samples, target, radius_mult=3.0, min_fraction=0.02):
    """Count target components owning at least min_fraction of the samples.

    A sample belongs to its nearest component mean and counts as on-mode if
    it lies within radius_mult * std of it.
    """
    samples = np.asarray(samples, dtype=np.float64)
    d2 = ((samples[:, None, :] - target.means[None, :, :]) ** 2).sum(axis=2)
    nearest = np.argmin(d2, axis=1)
    within = np.sqrt(d2[np.arange(len(samples)), nearest]) <= radius_mult * target.stds[nearest]
    covered = 0
    for k in range(target.n_components):
        hits = np.sum((nearest == k) & within)
        if hits >= min_fraction * len(samples):
            covered += 1
    return covered
