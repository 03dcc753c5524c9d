from vdb_lab.imitation.vail import (
    BETA_MODES,
    MAX_REWARD,
    VailConfig,
    VailDiscriminator,
    VailResult,
    vail_train,
)
from vdb_lab.imitation.vairl import (
    VAIRL_BETA_MODES,
    RecoveredReward,
    TransferResult,
    VairlConfig,
    VairlDiscReport,
    VairlDiscriminator,
    VairlResult,
    transfer,
    vairl_disc_loss,
    vairl_disc_step,
    vairl_gradient_penalty,
    vairl_train,
)

__all__ = [
    "BETA_MODES",
    "MAX_REWARD",
    "RecoveredReward",
    "TransferResult",
    "VAIRL_BETA_MODES",
    "VailConfig",
    "VailDiscriminator",
    "VailResult",
    "VairlConfig",
    "VairlDiscReport",
    "VairlDiscriminator",
    "VairlResult",
    "transfer",
    "vail_train",
    "vairl_disc_loss",
    "vairl_disc_step",
    "vairl_gradient_penalty",
    "vairl_train",
]
