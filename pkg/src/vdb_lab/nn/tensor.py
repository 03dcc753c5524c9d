"""Parameter container: a float64 array paired with a gradient accumulator."""

import numpy as np

from vdb_lab.errors import ShapeError


class Tensor:
    """A dense float64 array with a same-shape gradient buffer.

    Gradients accumulate across backward calls until `zero_grad`, which is
    what lets several loss terms contribute to one optimizer step.
    """

    __slots__ = ("values", "grad")

    def __init__(self, values):
        self.values = np.array(values, dtype=np.float64)
        if self.values.ndim > 2:
            raise ShapeError(f"rank-{self.values.ndim} tensor; only rank 0..2 supported")
        self.grad = np.zeros_like(self.values)

    @property
    def shape(self):
        return self.values.shape

    @property
    def size(self):
        return self.values.size

    def zero_grad(self):
        self.grad[...] = 0.0

    def copy(self):
        out = Tensor(self.values)
        out.grad = self.grad.copy()
        return out

    def __repr__(self):
        return f"Tensor(shape={self.values.shape})"


def as_batch(x, dim, what="input"):
    """Validate and return `x` as a (n, dim) float64 array."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise ShapeError(f"{what} must have shape (n, {dim}), got {arr.shape}")
    return arr
