from vdb_lab.synth.distributions import (
    MixtureOfGaussians,
    gaussian,
    mode_coverage,
    ring,
    two_gaussians,
)
from vdb_lab.synth.vgan import (
    DiscStudyConfig,
    DiscStudyResult,
    VganConfig,
    VganResult,
    between_modes_band,
    decision_grids,
    train_discriminator_only,
    train_vgan,
)

__all__ = [
    "DiscStudyConfig",
    "DiscStudyResult",
    "MixtureOfGaussians",
    "VganConfig",
    "VganResult",
    "between_modes_band",
    "decision_grids",
    "gaussian",
    "mode_coverage",
    "ring",
    "train_discriminator_only",
    "train_vgan",
    "two_gaussians",
]
