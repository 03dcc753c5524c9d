"""Capacity limits of a bottlenecked classifier, in closed form.

A KL budget of I_c nats per input confines the shared variance of a code
N(mean(x), sigma^2 I) to a window [lower, upper):

  lower(I_c) = exp(-2 I_c / K - 1)        from sigma^2 >= exp(-2I_c/K - 1)
  upper(I_c) = 4 I_c / K + 2              from sigma^2 < 4I_c/K + 2

and, together with |mean|^2 <= 2 I_c per side, floors the Gaussian weight
any real input's code distribution can assign to a generated sample's mean
embedding:

  C(I_c) = exp(-4 I_c exp(2I_c/K + 1)
               - K/2 log(4I_c/K + 2)
               - K/2 log 2 pi)

The worst case packs the two means 2 sqrt(2 I_c) apart at the smallest
variance while the normalizer uses the largest, so C is conservative but
strictly positive, and it decays monotonically as the budget grows.
`empirical_floor_check` tests a trained shared-variance encoder against the
floor on the pairs that actually satisfy the pointwise budget; the training
constraint is only an average, so over-budget pairs are reported rather
than counted as violations.
"""

import math
from dataclasses import dataclass

import numpy as np

from vdb_lab.bottleneck import kl_per_sample
from vdb_lab.errors import ConfigError, ShapeError


def _validate(ic, k):
    if not np.all(np.asarray(ic) > 0.0):
        raise ConfigError("I_c must be strictly positive")
    if k < 1:
        raise ConfigError(f"latent dimension K must be >= 1, got {k}")


def sigma_bounds(ic, k):
    """Window [lower, upper) confining sigma^2 under a pointwise budget of ic nats.

    Accepts a scalar or array ic; k is the latent dimension.
    """
    _validate(ic, k)
    ic = np.asarray(ic, dtype=np.float64)
    lower = np.exp(-2.0 * ic / k - 1.0)
    upper = 4.0 * ic / k + 2.0
    return lower, upper


def log_coefficient_floor(ic, k):
    """log C(I_c); finite for every positive budget.

    The floor itself underflows float64 once the leading term passes ~745
    (around I_c = 3.2 at K = 2), so shape claims about C are checked on this
    log scale where the closed form stays exactly representable.
    """
    _validate(ic, k)
    ic = np.asarray(ic, dtype=np.float64)
    return (
        -4.0 * ic * np.exp(2.0 * ic / k + 1.0)
        - 0.5 * k * np.log(4.0 * ic / k + 2.0)
        - 0.5 * k * math.log(2.0 * math.pi)
    )


def coefficient_floor(ic, k):
    """Smallest Gaussian weight a budget-respecting code pair can produce."""
    return np.exp(log_coefficient_floor(ic, k))


@dataclass
class BoundReport:
    """Grid evaluation of the three closed forms plus sanity verdicts.

    Verdicts about the coefficient use log_coefficient: positivity of C is
    finiteness of its log, and strict decrease is a strict decrease of the
    log, both immune to the underflow that zeroes `coefficient` itself at
    large budgets.
    """

    ic_grid: np.ndarray
    k: int
    lower: np.ndarray
    upper: np.ndarray
    coefficient: np.ndarray
    log_coefficient: np.ndarray
    lower_decreasing: bool
    upper_increasing: bool
    coefficient_decreasing: bool
    ordering_strict: bool          # lower < upper everywhere on the grid
    coefficient_positive: bool
    limit_estimate: float          # C at the smallest grid point
    limit_analytic: float          # (4 pi)^(-K/2), the I_c -> 0 limit

    def rows(self):
        for i in range(len(self.ic_grid)):
            yield {
                "ic": float(self.ic_grid[i]),
                "lower": float(self.lower[i]),
                "upper": float(self.upper[i]),
                "coefficient": float(self.coefficient[i]),
                "log_coefficient": float(self.log_coefficient[i]),
            }


def bound_report(k, ic_grid):
    """Evaluate the bounds on a grid and check shape claims numerically."""
    ic_grid = np.asarray(ic_grid, dtype=np.float64)
    if ic_grid.ndim != 1 or ic_grid.size < 2:
        raise ConfigError("ic_grid must be a 1-D grid with at least 2 points")
    if np.any(np.diff(ic_grid) <= 0.0):
        raise ConfigError("ic_grid must be strictly increasing")
    _validate(ic_grid, k)
    lower, upper = sigma_bounds(ic_grid, k)
    log_coeff = log_coefficient_floor(ic_grid, k)
    return BoundReport(
        ic_grid=ic_grid,
        k=k,
        lower=lower,
        upper=upper,
        coefficient=np.exp(log_coeff),
        log_coefficient=log_coeff,
        lower_decreasing=bool(np.all(np.diff(lower) < 0.0)),
        upper_increasing=bool(np.all(np.diff(upper) > 0.0)),
        coefficient_decreasing=bool(np.all(np.diff(log_coeff) < 0.0)),
        ordering_strict=bool(np.all(lower < upper)),
        coefficient_positive=bool(np.all(np.isfinite(log_coeff))),
        limit_estimate=float(np.exp(log_coeff[0])),
        limit_analytic=float((4.0 * math.pi) ** (-0.5 * k)),
    )


@dataclass
class FloorCheckReport:
    """Pairwise floor check on a trained shared-variance encoder.

    `eligible` counts pairs whose two pointwise KLs both fit the budget;
    `conditional_violations` counts eligible pairs at or below the floor,
    which the theorem says must be zero. Everything else is diagnostic.
    """

    ic: float
    k: int
    floor: float
    n_pairs: int
    coefficients: np.ndarray
    log_coefficients: np.ndarray
    kl_generated: np.ndarray
    kl_real: np.ndarray
    sigma_sq: float
    eligible: int
    conditional_violations: int
    fraction_below_floor: float
    min_coefficient: float
    max_pointwise_kl: float


def pair_coefficients(gen_means, real_means, sigma_sq, k):
    """log N(gen_mean; real_mean, sigma^2 I) for row-aligned mean pairs."""
    gen_means = np.asarray(gen_means, dtype=np.float64)
    real_means = np.asarray(real_means, dtype=np.float64)
    if gen_means.shape != real_means.shape:
        raise ShapeError(
            f"mean pair shape mismatch: {gen_means.shape} vs {real_means.shape}"
        )
    sq = np.sum((gen_means - real_means) ** 2, axis=1)
    return -0.5 * sq / sigma_sq - 0.5 * k * np.log(2.0 * math.pi * sigma_sq)


def empirical_floor_check(generator, encoder, target, ic, n_pairs, rng):
    """Check a trained generator/encoder pair against the coefficient floor.

    Draws n_pairs generated and real inputs, embeds both through the frozen
    encoder's mean path, and evaluates each generated mean's Gaussian weight
    under the paired real input's code distribution N(mean(x), sigma^2 I).
    The encoder must have input-independent variance; anything else is
    outside what the floor covers and is rejected here.
    """
    if n_pairs < 1:
        raise ConfigError("n_pairs must be positive")
    _validate(ic, encoder.latent_dim)
    noise_dim = generator.spec.input_dim
    fake = generator.forward(rng.standard_normal((n_pairs, noise_dim)))
    real = target.sample(n_pairs, rng)

    out_fake = encoder.forward(fake, sample=False)
    out_real = encoder.forward(real, sample=False)
    var_flat = np.unique(np.concatenate([out_fake.var.ravel(), out_real.var.ravel()]))
    if var_flat.size != 1:
        raise ConfigError(
            "floor check needs an input-independent encoder variance; "
            f"saw {var_flat.size} distinct values"
        )
    sigma_sq = float(var_flat[0])
    k = encoder.latent_dim

    kl_fake = kl_per_sample(out_fake.mean, out_fake.var)
    kl_real = kl_per_sample(out_real.mean, out_real.var)
    log_coeff = pair_coefficients(out_fake.mean, out_real.mean, sigma_sq, k)
    coeff = np.exp(log_coeff)

    log_floor = float(log_coefficient_floor(ic, k))
    floor = float(math.exp(log_floor)) if log_floor > -745.0 else 0.0
    eligible = (kl_fake <= ic) & (kl_real <= ic)
    violations = int(np.sum(eligible & (log_coeff <= log_floor)))
    return FloorCheckReport(
        ic=float(ic),
        k=k,
        floor=floor,
        n_pairs=n_pairs,
        coefficients=coeff,
        log_coefficients=log_coeff,
        kl_generated=kl_fake,
        kl_real=kl_real,
        sigma_sq=sigma_sq,
        eligible=int(np.sum(eligible)),
        conditional_violations=violations,
        fraction_below_floor=float(np.mean(log_coeff <= log_floor)),
        min_coefficient=float(coeff.min()),
        max_pointwise_kl=float(max(kl_fake.max(), kl_real.max())),
    )
