"""Adversarial training on planar targets with a bottlenecked discriminator.

Two entry points:

  train_vgan                full generator/discriminator alternation
  train_discriminator_only  the decision-boundary study: fixed class
                            distributions, no generator, varying KL budget

Both are driven by a single integer seed expanded into independent streams
(init / data / model noise / eval) so repeated runs are bit-identical.
"""

from dataclasses import dataclass

import numpy as np

from vdb_lab.bottleneck import (
    DiscriminatorHead,
    DualState,
    GaussianEncoder,
    SharedVarianceEncoder,
    discriminator_accuracy,
    discriminator_loss,
    dual_update,
    generator_objective,
    gradient_penalty,
)
from vdb_lab.errors import ConfigError, DivergenceError, NonFiniteError
from vdb_lab.nn import Mlp, MlpSpec, make_optimizer
from vdb_lab.nn.layers import sigmoid
from vdb_lab.synth.distributions import mode_coverage


@dataclass(frozen=True)
class VganConfig:
    latent_dim: int = 32
    noise_dim: int = 8
    gen_hidden: tuple = ((64, "relu"), (64, "relu"))
    disc_hidden: tuple = ((32, "relu"), (32, "relu"))
    kl_target: float = 0.5
    dual_step_size: float = 1e-2
    fixed_beta: float | None = None
    sample_codes: bool = True
    gp_coefficient: float = 0.0
    steps: int = 6000
    batch: int = 128
    disc_lr: float = 1e-3
    gen_lr: float = 5e-4
    optimizer: str = "adam"
    init: str = "uniform-fan-in"
    eval_every: int = 250
    eval_samples: int = 2000

    def __post_init__(self):
        if self.steps < 1 or self.batch < 1:
            raise ConfigError("steps and batch must be positive")
        if self.kl_target <= 0:
            raise ConfigError("kl_target must be positive (math.inf disables it)")
        if self.gp_coefficient < 0:
            raise ConfigError("gp_coefficient must be nonnegative")
        if self.fixed_beta is not None and self.fixed_beta < 0:
            raise ConfigError("fixed_beta must be nonnegative")


@dataclass
class VganResult:
    generator: Mlp
    encoder: GaussianEncoder
    head: DiscriminatorHead
    dual: DualState
    kl_history: np.ndarray
    coverage_history: list
    metrics: list
    final_samples: np.ndarray


def _make_dual(cfg):
    if cfg.fixed_beta is not None:
        return DualState(beta=cfg.fixed_beta, kl_target=cfg.kl_target, step_size=0.0)
    return DualState(beta=0.0, kl_target=cfg.kl_target, step_size=cfg.dual_step_size)


def _streams(seed, n=4):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def train_vgan(target, cfg, seed=0, shared_variance=False, on_step=None):
    """Alternate discriminator and generator steps against `target`.

    Returns a VganResult; raises DivergenceError (with seed and step) if any
    update produces non-finite values. `on_step` is an optional callback
    receiving each metrics row, letting callers stream a CSV.
    """
    init_rng, data_rng, model_rng, eval_rng = _streams(seed)
    generator = Mlp(MlpSpec(cfg.noise_dim, cfg.gen_hidden, 2, cfg.init), init_rng)
    if shared_variance:
        enc = SharedVarianceEncoder(2, cfg.latent_dim, init_rng, hidden=cfg.disc_hidden,
                                    init=cfg.init)
    else:
        enc = GaussianEncoder(2, cfg.latent_dim, init_rng, hidden=cfg.disc_hidden, init=cfg.init)
    head = DiscriminatorHead(cfg.latent_dim, init_rng, init=cfg.init)
    dual = _make_dual(cfg)

    disc_params = enc.named_parameters("enc.") + head.named_parameters("disc.")
    disc_opt = make_optimizer(cfg.optimizer, disc_params, cfg.disc_lr)
    gen_opt = make_optimizer(cfg.optimizer, generator.named_parameters("gen."), cfg.gen_lr)
    adapt = cfg.fixed_beta is None

    kl_history = np.zeros(cfg.steps)
    coverage_history = []
    metrics = []
    try:
        for t in range(cfg.steps):
            real = target.sample(cfg.batch, data_rng)
            u = model_rng.standard_normal((cfg.batch, cfg.noise_dim))
            fake = generator.forward(u)

            disc_opt.zero_grad()
            report = discriminator_loss(
                real, fake, enc, head, dual, rng=model_rng,
                sample=cfg.sample_codes, compute_grads=True,
            )
            gp_value = 0.0
            if cfg.gp_coefficient > 0.0:
                gp_value, _ = gradient_penalty(
                    real, enc, head, cfg.gp_coefficient, model_rng, compute_grads=True
                )
            disc_opt.step()
            if adapt:
                dual = dual_update(dual, report.batch_kl)

            u2 = model_rng.standard_normal((cfg.batch, cfg.noise_dim))
            fake2 = generator.forward(u2)
            gen_value, grad_x = generator_objective(fake2, enc, head, compute_input_grad=True)
            gen_opt.zero_grad()
            generator.backward(-grad_x)
            gen_opt.step()

            kl_history[t] = report.batch_kl
            row = {
                "step": t,
                "disc_loss": report.total + gp_value,
                "gen_loss": -gen_value,
                "batch_kl": report.batch_kl,
                "beta": dual.beta,
                "gp_term": gp_value,
                "mode_coverage": "",
            }
            if cfg.eval_every and (t + 1) % cfg.eval_every == 0:
                samples = generator.forward(
                    eval_rng.standard_normal((cfg.eval_samples, cfg.noise_dim))
                )
                covered = mode_coverage(samples, target)
                coverage_history.append((t, covered))
                row["mode_coverage"] = covered
            metrics.append(row)
            if on_step is not None:
                on_step(row)
    except NonFiniteError as exc:
        raise DivergenceError(
            f"vgan run diverged at step {t} (seed {seed})", getattr(exc, "diagnostics", "")
        ) from exc

    final_samples = generator.forward(
        eval_rng.standard_normal((cfg.eval_samples, cfg.noise_dim))
    )
    return VganResult(
        generator=generator,
        encoder=enc,
        head=head,
        dual=dual,
        kl_history=kl_history,
        coverage_history=coverage_history,
        metrics=metrics,
        final_samples=final_samples,
    )


@dataclass(frozen=True)
class DiscStudyConfig:
    latent_dim: int = 32
    disc_hidden: tuple = ((32, "relu"), (32, "relu"))
    kl_target: float = 0.5
    dual_step_size: float = 1e-2
    steps: int = 1500
    batch: int = 64
    lr: float = 1e-3
    optimizer: str = "adam"
    init: str = "uniform-fan-in"
    heldout: int = 10_000

    def __post_init__(self):
        if self.kl_target <= 0:
            raise ConfigError("kl_target must be positive (math.inf disables it)")


@dataclass
class DiscStudyResult:
    encoder: GaussianEncoder
    head: DiscriminatorHead
    dual: DualState
    kl_history: np.ndarray
    accuracy: float
    mean_accuracy: float
    kl_target: float


def train_discriminator_only(dist_a, dist_b, cfg, seed=0, on_step=None):
    """Train the bottlenecked classifier to separate two fixed distributions.

    dist_a plays the data side, dist_b the model side. kl_target may be
    math.inf, which leaves beta pinned at zero: the unconstrained baseline.
    Held-out `accuracy` is measured at sampled codes, the channel the
    classifier actually trained through; `mean_accuracy` is the
    deterministic mean-path figure.
    """
    init_rng, data_rng, model_rng, eval_rng = _streams(seed)
    enc = GaussianEncoder(2, cfg.latent_dim, init_rng, hidden=cfg.disc_hidden, init=cfg.init)
    head = DiscriminatorHead(cfg.latent_dim, init_rng, init=cfg.init)
    dual = DualState(beta=0.0, kl_target=cfg.kl_target, step_size=cfg.dual_step_size)
    opt = make_optimizer(
        cfg.optimizer, enc.named_parameters("enc.") + head.named_parameters("disc."), cfg.lr
    )

    kl_history = np.zeros(cfg.steps)
    try:
        for t in range(cfg.steps):
            a = dist_a.sample(cfg.batch, data_rng)
            b = dist_b.sample(cfg.batch, data_rng)
            opt.zero_grad()
            report = discriminator_loss(
                a, b, enc, head, dual, rng=model_rng, compute_grads=True
            )
            opt.step()
            dual = dual_update(dual, report.batch_kl)
            kl_history[t] = report.batch_kl
            if on_step is not None:
                on_step({
                    "step": t,
                    "disc_loss": report.total,
                    "batch_kl": report.batch_kl,
                    "beta": dual.beta,
                    "train_accuracy": report.accuracy,
                })
    except NonFiniteError as exc:
        raise DivergenceError(
            f"discriminator study diverged at step {t} (seed {seed})",
            getattr(exc, "diagnostics", ""),
        ) from exc

    held_a = dist_a.sample(cfg.heldout, eval_rng)
    held_b = dist_b.sample(cfg.heldout, eval_rng)
    accuracy = discriminator_accuracy(enc, head, held_a, held_b, rng=eval_rng)
    mean_accuracy = discriminator_accuracy(enc, head, held_a, held_b)
    return DiscStudyResult(
        encoder=enc, head=head, dual=dual, kl_history=kl_history,
        accuracy=accuracy, mean_accuracy=mean_accuracy, kl_target=cfg.kl_target,
    )


def decision_grids(encoder, head, extent=(-6.0, 6.0, -6.0, 6.0), resolution=121):
    """D(mean(x)) and |grad_x D(mean(x))| on a square lattice.

    Returns (xs, ys, d_grid, gradnorm_grid) with grids indexed [iy, ix].
    """
    x0, x1, y0, y1 = extent
    xs = np.linspace(x0, x1, resolution)
    ys = np.linspace(y0, y1, resolution)
    gx, gy = np.meshgrid(xs, ys)
    points = np.stack([gx.ravel(), gy.ravel()], axis=1)

    out = encoder.forward(points, sample=False)
    logits = head.logits(out.sample)
    p = sigmoid(logits)
    d_logit = p * (1.0 - p)
    d_sample = head.backward_logits(d_logit, accumulate=False)
    grad_x = encoder.backward(None, None, d_sample, accumulate=False)
    norms = np.sqrt(np.sum(grad_x * grad_x, axis=1))
    return xs, ys, p.reshape(resolution, resolution), norms.reshape(resolution, resolution)


def between_modes_band(xs, ys, center_a, center_b, inner=0.25, outer=0.75, lateral=2.0):
    """Boolean mask over the (ys, xs) lattice: the corridor between two modes.

    Covers grid points whose projection onto the mode axis lies between
    inner and outer fractions of the half-gap on either side of the
    midpoint, within `lateral` of the axis. The strip around the midpoint
    is excluded on purpose: a saturating classifier concentrates all of its
    remaining slope there, so including it would hide exactly the
    flat-region failure this band is meant to expose. The mode cores are
    excluded too, since every classifier goes flat on points it already
    classifies with confidence.
    """
    a = np.asarray(center_a, dtype=np.float64)
    b = np.asarray(center_b, dtype=np.float64)
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    gap = float(np.sqrt(np.sum(half * half)))
    if gap == 0.0:
        raise ValueError("mode centers coincide; no between-modes band exists")
    axis = half / gap
    gx, gy = np.meshgrid(xs, ys)
    rel = np.stack([gx - mid[0], gy - mid[1]], axis=-1)
    along = rel @ axis
    across = rel[..., 0] * -axis[1] + rel[..., 1] * axis[0]
    frac = np.abs(along) / gap
    return (frac >= inner) & (frac <= outer) & (np.abs(across) <= lateral)
