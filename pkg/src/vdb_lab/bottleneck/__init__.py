from vdb_lab.bottleneck.encoder import (
    EncoderOutput,
    GaussianEncoder,
    SharedVarianceEncoder,
)
from vdb_lab.bottleneck.dual import DualState, dual_update
from vdb_lab.bottleneck.losses import (
    PROB_EPS,
    DiscLossReport,
    DiscriminatorHead,
    discriminator_accuracy,
    discriminator_loss,
    generator_objective,
    gradient_penalty,
    kl_per_sample,
    vdb_discriminator_step,
)

__all__ = [
    "PROB_EPS",
    "DiscLossReport",
    "DiscriminatorHead",
    "DualState",
    "EncoderOutput",
    "GaussianEncoder",
    "SharedVarianceEncoder",
    "discriminator_accuracy",
    "discriminator_loss",
    "dual_update",
    "generator_objective",
    "gradient_penalty",
    "kl_per_sample",
    "vdb_discriminator_step",
]
