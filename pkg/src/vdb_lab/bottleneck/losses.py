"""Loss surface of the constrained discriminator.

All pieces operate on one encoder + one scalar classifier head:

  discriminator_loss   binary cross-entropy on sampled codes plus the
                       beta-weighted KL budget violation
  generator_objective  the nonsaturating generator score, evaluated at the
                       encoder mean (no sampling, no KL term)
  gradient_penalty     w * E[ 0.5 |grad_x D|^2 ] over data-side samples,
                       differentiated exactly through the input-gradient
                       computation via the layers' tangent rules
  vdb_discriminator_step  one optimizer step over loss + penalty followed by
                       one dual-ascent update of beta

Probabilities are clamped to [PROB_EPS, 1 - PROB_EPS] inside every log, and
the clamp is a genuine flat region: clamped samples contribute zero gradient,
so analytic gradients agree with finite differences of the actual loss.
"""

from dataclasses import dataclass

import numpy as np

from vdb_lab.bottleneck.dual import dual_update
from vdb_lab.errors import ShapeError
from vdb_lab.nn.layers import Linear, sigmoid
from vdb_lab.nn.tensor import as_batch

PROB_EPS = 1e-7


def kl_per_sample(mean, var):
    """KL( N(mean, diag(var)) || N(0, I) ) per row, in nats.

    Closed form: 0.5 * sum_k (var_k + mean_k^2 - 1 - log var_k).
    """
    mean = np.asarray(mean, dtype=np.float64)
    var = np.asarray(var, dtype=np.float64)
    if mean.shape != var.shape:
        raise ShapeError(f"mean/var shape mismatch: {mean.shape} vs {var.shape}")
    if np.any(var <= 0.0):
        raise ValueError("variances must be strictly positive")
    terms = var + mean * mean - 1.0 - np.log(var)
    if terms.ndim == 1:
        return 0.5 * float(terms.sum())
    return 0.5 * terms.sum(axis=1)


class DiscriminatorHead:
    """Single affine unit on the latent code; probability via sigmoid."""

    def __init__(self, latent_dim, rng, init="uniform-fan-in"):
        self.linear = Linear(latent_dim, 1, rng, init)

    def logits(self, z):
        return self.linear.forward(z)[:, 0]

    def prob(self, z):
        return sigmoid(self.logits(z))

    def backward_logits(self, d_logit, accumulate=True):
        return self.linear.backward(d_logit[:, None], accumulate=accumulate)

    def tangent_logits(self, z, z_dot):
        y, y_dot = self.linear.tangent_forward(z, z_dot)
        return y[:, 0], y_dot[:, 0]

    def tangent_backward_logits(self, d_logit, d_logit_dot, accumulate=True):
        return self.linear.tangent_backward(
            d_logit[:, None], d_logit_dot[:, None], accumulate=accumulate
        )

    def named_parameters(self, prefix=""):
        return [(f"{prefix}head.{n}", t) for n, t in self.linear.parameters()]

    def zero_grad(self):
        for _, t in self.named_parameters():
            t.zero_grad()


def _clamped_prob(logits):
    p = sigmoid(logits)
    clamped = np.clip(p, PROB_EPS, 1.0 - PROB_EPS)
    live = (p > PROB_EPS) & (p < 1.0 - PROB_EPS)
    return p, clamped, live


def _kl_term(dual, batch_kl):
    # An unconstrained budget contributes nothing even if beta were nonzero.
    if dual.beta == 0.0 or not dual.constrained:
        return 0.0
    return dual.beta * (batch_kl - dual.kl_target)


@dataclass
class DiscLossReport:
    total: float
    real_term: float
    fake_term: float
    batch_kl: float
    kl_term: float
    accuracy: float


def discriminator_loss(
    real_x, fake_x, encoder, head, dual, rng=None, sample=True, compute_grads=False
):
    """Classification loss plus KL-budget term over one pooled batch.

    Both halves pass through the encoder in a single pooled forward, the
    batch KL is the mean over all pooled rows, and beta enters as a constant
    (it only changes through dual_update). With compute_grads, parameter
    gradients of the full scalar accumulate into encoder and head.
    """
    real_x = as_batch(real_x, encoder.input_dim, "real batch")
    fake_x = as_batch(fake_x, encoder.input_dim, "fake batch")
    n_real, n_fake = real_x.shape[0], fake_x.shape[0]
    if n_real == 0 or n_fake == 0:
        raise ShapeError("real and fake batches must be non-empty")

    pooled = np.vstack([real_x, fake_x])
    out = encoder.forward(pooled, rng=rng, sample=sample)
    logits = head.logits(out.sample)
    p, pc, live = _clamped_prob(logits)

    real_term = float(np.mean(-np.log(pc[:n_real])))
    fake_term = float(np.mean(-np.log1p(-pc[n_real:])))
    kls = kl_per_sample(out.mean, out.var)
    batch_kl = float(np.mean(kls))
    kl_term = _kl_term(dual, batch_kl)
    total = real_term + fake_term + kl_term

    correct = int(np.sum(p[:n_real] > 0.5)) + int(np.sum(p[n_real:] < 0.5))
    accuracy = correct / (n_real + n_fake)

    if compute_grads:
        d_logit = np.zeros_like(logits)
        d_logit[:n_real] = np.where(live[:n_real], -(1.0 - pc[:n_real]) / n_real, 0.0)
        d_logit[n_real:] = np.where(live[n_real:], pc[n_real:] / n_fake, 0.0)
        d_sample = head.backward_logits(d_logit, accumulate=True)
        if dual.beta != 0.0 and dual.constrained:
            scale = dual.beta / pooled.shape[0]
            d_mean = scale * out.mean
            d_logvar = scale * 0.5 * (out.var - 1.0)
        else:
            d_mean = None
            d_logvar = None
        encoder.backward(d_mean, d_logvar, d_sample, accumulate=True)

    return DiscLossReport(
        total=total,
        real_term=real_term,
        fake_term=fake_term,
        batch_kl=batch_kl,
        kl_term=kl_term,
        accuracy=accuracy,
    )


def generator_objective(fake_x, encoder, head, compute_input_grad=False):
    """mean(-log(1 - D(mean_code(x)))) and, optionally, its input gradient.

    The generator maximizes this value; a trainer minimizes its negation by
    pushing -grad_x into the generator net. Codes are taken at the encoder
    mean: generator updates see no sampling noise and no KL term.
    """
    fake_x = as_batch(fake_x, encoder.input_dim, "generated batch")
    out = encoder.forward(fake_x, sample=False)
    logits = head.logits(out.sample)
    _, pc, live = _clamped_prob(logits)
    value = float(np.mean(-np.log1p(-pc)))
    if not compute_input_grad:
        return value, None
    n = fake_x.shape[0]
    d_logit = np.where(live, pc / n, 0.0)
    d_sample = head.backward_logits(d_logit, accumulate=False)
    grad_x = encoder.backward(None, None, d_sample, accumulate=False)
    return value, grad_x


def gradient_penalty(real_x, encoder, head, coefficient, rng, compute_grads=False,
                     sample=True):
    """w * mean_i 0.5 |grad_x D(z_i)|^2 over data-side samples.

    z_i is one reparameterized draw per input (fresh noise each call), and
    the spatial gradient is taken through mean and variance heads alike. The
    parameter gradient is exact: with v_i = grad_x D_i held constant, the
    directional derivative of D along v_i equals |v_i|^2, and its parameter
    gradient (via the tangent-augmented backward pass) is the gradient of
    the squared norm. With sample=False the whole computation runs on the
    deterministic mean path instead.
    """
    if coefficient < 0.0:
        raise ValueError(f"penalty coefficient must be nonnegative, got {coefficient}")
    real_x = as_batch(real_x, encoder.input_dim, "data batch")
    n = real_x.shape[0]

    out = encoder.forward(real_x, rng=rng, sample=sample)
    logits = head.logits(out.sample)
    p = sigmoid(logits)
    d_logit = p * (1.0 - p)  # dD/dlogit, per row
    d_sample = head.backward_logits(d_logit, accumulate=False)
    grad_x = encoder.backward(None, None, d_sample, accumulate=False)
    sq_norms = np.sum(grad_x * grad_x, axis=1)
    value = coefficient * float(np.mean(0.5 * sq_norms))

    if compute_grads and coefficient > 0.0:
        z, z_dot = encoder.tangent_forward(real_x, grad_x)
        logit, logit_dot = head.tangent_logits(z, z_dot)
        s = sigmoid(logit)
        ds1 = s * (1.0 - s)
        ds2 = ds1 * (1.0 - 2.0 * s)
        # d/dtheta of 0.5*|g|^2 equals d/dtheta of <v, g> at v = g (no half:
        # both factors of the quadratic vary), hence the seed is w/n, not w/2n.
        upstream_dot = np.full(n, coefficient / n)
        d_logit = ds2 * logit_dot * upstream_dot
        d_logit_dot = ds1 * upstream_dot
        dz, dz_dot = head.tangent_backward_logits(d_logit, d_logit_dot, accumulate=True)
        encoder.tangent_backward(dz, dz_dot, accumulate=True)

    return value, sq_norms


def vdb_discriminator_step(
    real_x,
    fake_x,
    encoder,
    head,
    dual,
    optimizer,
    rng,
    gp_coefficient=0.0,
    sample=True,
    adapt_beta=True,
):
    """One full discriminator update: loss (+ penalty), step, dual ascent.

    Returns (report, gp_value, new_dual). beta is constant inside the loss;
    the returned DualState carries the post-step multiplier. A zero penalty
    coefficient skips the penalty entirely, so the combined loss is
    bit-for-bit the plain bottleneck loss.
    """
    if real_x.shape[0] != fake_x.shape[0]:
        raise ShapeError(
            f"real/fake halves must match: {real_x.shape[0]} vs {fake_x.shape[0]}"
        )
    optimizer.zero_grad()
    report = discriminator_loss(
        real_x, fake_x, encoder, head, dual, rng=rng, sample=sample, compute_grads=True
    )
    gp_value = 0.0
    if gp_coefficient > 0.0:
        gp_value, _ = gradient_penalty(
            real_x, encoder, head, gp_coefficient, rng, compute_grads=True, sample=sample
        )
    optimizer.step()
    new_dual = dual_update(dual, report.batch_kl) if adapt_beta else dual
    return report, gp_value, new_dual


def discriminator_accuracy(encoder, head, xs_real, xs_fake, rng=None):
    """Held-out accuracy of the classifier as it runs.

    With `rng` each input is classified at one sampled code, which is what a
    stochastic discriminator actually sees during training; without it the
    encoder mean is used (the deterministic evaluation path).
    """
    sample = rng is not None
    pr = head.prob(encoder.forward(xs_real, rng=rng, sample=sample).sample)
    pf = head.prob(encoder.forward(xs_fake, rng=rng, sample=sample).sample)
    correct = int(np.sum(pr > 0.5)) + int(np.sum(pf < 0.5))
    return correct / (len(pr) + len(pf))
