"""Randomized finite-difference verification of every differentiable piece.

Each configuration draws fresh shapes, weights, and inputs, then compares
analytic gradients against central differences at rtol 1e-4. Families cover
the plain layers, the reparameterized encoder, and the composite objectives
the training loops assemble: the constrained classification loss, the
generator objective, both gradient penalties, the clipped policy surrogate,
and the factored transition score.
"""

from dataclasses import dataclass

import numpy as np

from vdb_lab.bottleneck import (
    DiscriminatorHead,
    DualState,
    GaussianEncoder,
    discriminator_loss,
    generator_objective,
    gradient_penalty,
)
from vdb_lab.imitation import VairlConfig, VairlDiscriminator, vairl_disc_loss
from vdb_lab.imitation.vairl import vairl_gradient_penalty
from vdb_lab.nn import (
    Mlp,
    MlpSpec,
    PhaseBlendedLinear,
    Tensor,
    check_gradients,
)
from vdb_lab.rl import GaussianPolicy, ppo_surrogate_loss


@dataclass(frozen=True)
class CheckResult:
    """Outcome of one random configuration of one family."""

    family: str
    seed: int
    ok: bool
    worst: dict


class _FrozenNoise:
    """Replays a fixed sequence of draws so sampled paths are deterministic.

    check_gradients re-evaluates the loss once per perturbed coordinate;
    every evaluation must see the identical noise or the finite difference
    measures the noise, not the parameter.
    """

    def __init__(self, arrays):
        self.arrays = [np.asarray(a, dtype=np.float64) for a in arrays]
        self.calls = 0

    def standard_normal(self, size):
        arr = self.arrays[self.calls % len(self.arrays)]
        self.calls += 1
        want = tuple(size) if np.iterable(size) else (size,)
        if arr.shape != want:
            raise AssertionError(f"frozen draw {self.calls}: shape {arr.shape} != {want}")
        return arr


def _dims(rng):
    return int(rng.integers(1, 5)), int(rng.integers(1, 4)), int(rng.integers(1, 6))


def _check_net(net, x, coeffs, forward, backward):
    def value_fn():
        return float(np.sum(coeffs * forward()))

    def grad_fn():
        net.zero_grad()
        forward()
        backward(coeffs)

    return check_gradients(value_fn, grad_fn, net.named_parameters())


def _mlp_family(activation):
    def run(rng):
        in_dim, out_dim, batch = _dims(rng)
        width = int(rng.integers(2, 7))
        net = Mlp(MlpSpec(in_dim, ((width, activation),), out_dim), rng)
        coeffs = rng.normal(size=(batch, out_dim))
        if activation == "relu":
            # keep every pre-activation clear of the kink: fd steps move
            # them by O(|x| * h), far below this margin
            first = net.layers[0]
            for _ in range(200):
                x = rng.normal(size=(batch, in_dim))
                if np.min(np.abs(first.forward(x))) > 1e-2:
                    break
            else:
                raise AssertionError("no kink-free relu input found")
        else:
            x = rng.normal(size=(batch, in_dim))
        return _check_net(net, x, coeffs, lambda: net.forward(x), net.backward)

    return run


def _linear_family(rng):
    in_dim, out_dim, batch = _dims(rng)
    net = Mlp(MlpSpec(in_dim, (), out_dim), rng)  # bare affine map
    x = rng.normal(size=(batch, in_dim))
    coeffs = rng.normal(size=(batch, out_dim))
    return _check_net(net, x, coeffs, lambda: net.forward(x), net.backward)


def _deep_mlp_family(rng):
    in_dim, out_dim, batch = _dims(rng)
    depth = int(rng.integers(2, 4))
    acts = ["tanh", "sigmoid", "identity"]
    hidden = tuple((int(rng.integers(2, 6)), acts[int(rng.integers(0, 3))]) for _ in range(depth))
    net = Mlp(MlpSpec(in_dim, hidden, out_dim), rng)
    x = rng.normal(size=(batch, in_dim))
    coeffs = rng.normal(size=(batch, out_dim))
    return _check_net(net, x, coeffs, lambda: net.forward(x), net.backward)


def _phase_blended_family(rng):
    in_dim, out_dim, batch = _dims(rng)
    anchors = int(rng.integers(2, 7))
    net = PhaseBlendedLinear(in_dim, out_dim, rng, anchors=anchors)
    x = rng.normal(size=(batch, in_dim))
    phase = rng.uniform(0.0, 1.0, size=batch)
    coeffs = rng.normal(size=(batch, out_dim))
    params = net.parameters()

    def value_fn():
        return float(np.sum(coeffs * net.forward(x, phase)))

    def grad_fn():
        for _, t in params:
            t.zero_grad()
        net.forward(x, phase)
        net.backward(coeffs)

    return check_gradients(value_fn, grad_fn, params)


def _random_encoder_head(rng):
    in_dim = int(rng.integers(1, 4))
    latent = int(rng.integers(2, 5))
    width = int(rng.integers(3, 8))
    enc = GaussianEncoder(in_dim, latent, rng, hidden=((width, "tanh"),))
    head = DiscriminatorHead(latent, rng)
    return enc, head


def _encoder_sample_family(rng):
    """Reparameterized head: gradient through mean, variance, and draw."""
    enc, head = _random_encoder_head(rng)
    batch = int(rng.integers(1, 6))
    x = rng.normal(size=(batch, enc.input_dim))
    coeffs = rng.normal(size=(batch, enc.latent_dim))
    eps = rng.standard_normal((batch, enc.latent_dim))
    params = list(enc.named_parameters())

    def value_fn():
        out = enc.forward(x, rng=_FrozenNoise([eps]), sample=True)
        return float(np.sum(coeffs * out.sample))

    def grad_fn():
        enc.zero_grad()
        enc.forward(x, rng=_FrozenNoise([eps]), sample=True)
        enc.backward(None, None, coeffs, accumulate=True)

    return check_gradients(value_fn, grad_fn, params)


def _all_params(enc, head):
    params = list(enc.named_parameters("enc."))
    params += [("head." + n, t) for n, t in head.linear.parameters()]
    return params


def _disc_loss_family(rng):
    enc, head = _random_encoder_head(rng)
    n_real = int(rng.integers(1, 5))
    n_fake = int(rng.integers(1, 5))
    real = rng.normal(size=(n_real, enc.input_dim))
    fake = rng.normal(size=(n_fake, enc.input_dim))
    beta = float(rng.uniform(0.0, 1.2)) if rng.uniform() > 0.25 else 0.0
    dual = DualState(beta=beta, kl_target=0.5, step_size=1e-3)
    eps = rng.standard_normal((n_real + n_fake, enc.latent_dim))
    params = _all_params(enc, head)

    def value_fn():
        rep = discriminator_loss(real, fake, enc, head, dual, rng=_FrozenNoise([eps]))
        return rep.total

    def grad_fn():
        for _, t in params:
            t.zero_grad()
        discriminator_loss(
            real, fake, enc, head, dual, rng=_FrozenNoise([eps]), compute_grads=True
        )

    return check_gradients(value_fn, grad_fn, params)


def _generator_family(rng):
    """Input gradient of the generator objective (the generator's signal)."""
    enc, head = _random_encoder_head(rng)
    batch = int(rng.integers(1, 6))
    probe = Tensor(rng.normal(size=(batch, enc.input_dim)))

    def value_fn():
        return generator_objective(probe.values, enc, head)[0]

    def grad_fn():
        probe.zero_grad()
        _, gx = generator_objective(probe.values, enc, head, compute_input_grad=True)
        probe.grad += gx

    return check_gradients(value_fn, grad_fn, [("x", probe)])


def _gp_family(rng):
    enc, head = _random_encoder_head(rng)
    batch = int(rng.integers(1, 5))
    x = rng.normal(size=(batch, enc.input_dim))
    coeff = float(rng.uniform(0.05, 1.0))
    eps = rng.standard_normal((batch, enc.latent_dim))
    params = _all_params(enc, head)

    def value_fn():
        val, _ = gradient_penalty(x, enc, head, coeff, _FrozenNoise([eps]))
        return val

    def grad_fn():
        for _, t in params:
            t.zero_grad()
        gradient_penalty(x, enc, head, coeff, _FrozenNoise([eps]), compute_grads=True)

    return check_gradients(value_fn, grad_fn, params)


def _surrogate_family(rng):
    obs_dim = int(rng.integers(1, 4))
    act_dim = int(rng.integers(1, 3))
    batch = int(rng.integers(4, 13))
    clip = 0.2
    policy = GaussianPolicy(obs_dim, act_dim, rng, hidden=((6, "tanh"),), mean_scale=0.5)
    # resample until every ratio clears the clip kinks; fd steps shift
    # log-probs by far less than this margin
    for _ in range(200):
        obs = rng.normal(size=(batch, obs_dim))
        actions = rng.normal(scale=0.5, size=(batch, act_dim))
        logp_old = policy.log_prob(obs, actions) + rng.uniform(-0.4, 0.4, size=batch)
        adv = rng.normal(size=batch)
        ratio = np.exp(policy.log_prob(obs, actions) - logp_old)
        if np.all(np.abs(ratio - (1 - clip)) > 1e-3) and np.all(
            np.abs(ratio - (1 + clip)) > 1e-3
        ):
            break
    else:
        raise AssertionError("no kink-free surrogate configuration found")
    ent = float(rng.uniform(0.0, 0.05))

    def value_fn():
        loss, _ = ppo_surrogate_loss(policy, obs, actions, logp_old, adv, clip, ent)
        return loss

    def grad_fn():
        policy.zero_grad()
        ppo_surrogate_loss(policy, obs, actions, logp_old, adv, clip, ent,
                           compute_grads=True)

    return check_gradients(value_fn, grad_fn, policy.named_parameters())


def _tiny_vairl_disc(rng):
    cfg = VairlConfig(
        latent_dim=int(rng.integers(2, 5)),
        encoder_hidden=((int(rng.integers(3, 7)), "tanh"),),
        kl_target=0.5,
        dual_step_size=1e-3,
        discount=float(rng.uniform(0.5, 0.999)),
        iterations=1,
        episodes_per_iter=1,
        disc_updates=1,
        eval_episodes=1,
    )
    return VairlDiscriminator(rng, cfg), cfg


def _vairl_transitions(rng, policy, n):
    states = rng.normal(scale=0.5, size=(n, 2))
    actions, _ = policy.act(states, rng)
    nexts = states + rng.normal(scale=0.1, size=(n, 2))
    return states, actions, nexts


def _vairl_loss_family(rng):
    disc, cfg = _tiny_vairl_disc(rng)
    policy = GaussianPolicy(2, 2, rng, hidden=((4, "tanh"),), mean_scale=0.5)
    ne = int(rng.integers(2, 5))
    na = int(rng.integers(2, 5))
    expert = _vairl_transitions(rng, policy, ne)
    agent = _vairl_transitions(rng, policy, na)
    disc.dual = DualState(beta=float(rng.uniform(0.0, 0.8)), kl_target=cfg.kl_target,
                          step_size=cfg.dual_step_size)
    n = ne + na
    noise = [rng.standard_normal((n, cfg.latent_dim)),
             rng.standard_normal((2 * n, cfg.latent_dim))]
    params = disc.named_parameters()

    def value_fn():
        rep = vairl_disc_loss(disc, expert, agent, policy.log_prob,
                              _FrozenNoise(noise))
        return rep.total

    def grad_fn():
        disc.zero_grad()
        vairl_disc_loss(disc, expert, agent, policy.log_prob, _FrozenNoise(noise),
                        compute_grads=True)

    # clamp saturation amplifies fd roundoff; h=1e-4 keeps the quotient clean
    return check_gradients(value_fn, grad_fn, params, h=1e-4)


def _vairl_gp_family(rng):
    disc, cfg = _tiny_vairl_disc(rng)
    batch = int(rng.integers(2, 5))
    states = rng.normal(scale=0.5, size=(batch, 2))
    nexts = states + rng.normal(scale=0.1, size=(batch, 2))
    coeff = float(rng.uniform(0.05, 0.5))
    noise = [rng.standard_normal((batch, cfg.latent_dim)),
             rng.standard_normal((2 * batch, cfg.latent_dim))]
    params = disc.named_parameters()

    def value_fn():
        val, _ = vairl_gradient_penalty(disc, states, nexts, coeff, _FrozenNoise(noise))
        return val

    def grad_fn():
        disc.zero_grad()
        vairl_gradient_penalty(disc, states, nexts, coeff, _FrozenNoise(noise),
                               compute_grads=True)

    return check_gradients(value_fn, grad_fn, params, h=1e-4)


FAMILIES = (
    ("linear", _linear_family),
    ("relu", _mlp_family("relu")),
    ("tanh", _mlp_family("tanh")),
    ("sigmoid", _mlp_family("sigmoid")),
    ("mlp", _deep_mlp_family),
    ("phase-blended", _phase_blended_family),
    ("encoder-sample", _encoder_sample_family),
    ("disc-loss", _disc_loss_family),
    ("generator", _generator_family),
    ("grad-penalty", _gp_family),
    ("ppo-surrogate", _surrogate_family),
    ("transition-score", _vairl_loss_family),
    ("transition-penalty", _vairl_gp_family),
)


def run_gradient_suite(n_configs=100, seed=0):
    """Round-robin the families over n_configs random draws.

    Returns a list of CheckResult; len == n_configs. Every family appears
    at least floor(n_configs / len(FAMILIES)) times.
    """
    root = np.random.SeedSequence(seed)
    results = []
    for i, child in enumerate(root.spawn(n_configs)):
        name, runner = FAMILIES[i % len(FAMILIES)]
        ok, worst = runner(np.random.default_rng(child))
        results.append(CheckResult(family=name, seed=i, ok=bool(ok), worst=worst))
    return results


def summarize_suite(results):
    """Per-family (passed, total) counts keyed by family name."""
    counts = {}
    for r in results:
        passed, total = counts.get(r.family, (0, 0))
        counts[r.family] = (passed + int(r.ok), total + 1)
    return counts
