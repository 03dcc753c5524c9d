from vdb_lab.nn.tensor import Tensor, as_batch
from vdb_lab.nn.layers import (
    ACTIVATIONS,
    Activation,
    Chain,
    Linear,
    Mlp,
    MlpSpec,
    PhaseBlendedLinear,
    make_activation,
    sigmoid,
)
from vdb_lab.nn.optim import Adam, RmsProp, SgdMomentum, make_optimizer
from vdb_lab.nn.checkpoint import load_checkpoint, save_checkpoint
from vdb_lab.nn.gradcheck import check_gradients, numeric_gradient

__all__ = [
    "ACTIVATIONS",
    "Activation",
    "Adam",
    "Chain",
    "Linear",
    "Mlp",
    "MlpSpec",
    "PhaseBlendedLinear",
    "RmsProp",
    "SgdMomentum",
    "Tensor",
    "as_batch",
    "check_gradients",
    "load_checkpoint",
    "make_activation",
    "make_optimizer",
    "numeric_gradient",
    "save_checkpoint",
    "sigmoid",
]
