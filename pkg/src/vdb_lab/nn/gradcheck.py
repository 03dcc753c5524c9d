"""Central-finite-difference verification of analytic gradients.

The contract used throughout the test suite and the `gradcheck` CLI command:
`value_fn` evaluates the scalar loss from current parameter values (forward
only), `grad_fn` zeroes gradients and fills them via the analytic backward
pass. The checker perturbs every coordinate of every tensor.
"""

import numpy as np


def numeric_gradient(value_fn, tensor, h=1e-5):
    """Central differences of value_fn w.r.t. every coordinate of `tensor`."""
    grad = np.zeros_like(tensor.values)
    flat = tensor.values.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        hi = value_fn()
        flat[i] = orig - h
        lo = value_fn()
        flat[i] = orig
        gflat[i] = (hi - lo) / (2.0 * h)
    return grad


def check_gradients(value_fn, grad_fn, named_tensors, rtol=1e-4, atol=1e-8, h=1e-5):
    """Compare analytic and numeric gradients.

    Returns (ok, worst) where worst is a dict naming the largest violation.
    A coordinate passes when |a - n| <= atol + rtol * max(|a|, |n|).
    """
    grad_fn()
    analytic = {name: t.grad.copy() for name, t in named_tensors}
    worst = {"name": None, "analytic": 0.0, "numeric": 0.0, "error": 0.0}
    ok = True
    for name, tensor in named_tensors:
        numeric = numeric_gradient(value_fn, tensor, h=h)
        a, n = analytic[name], numeric
        err = np.abs(a - n) - (atol + rtol * np.maximum(np.abs(a), np.abs(n)))
        idx = np.unravel_index(np.argmax(err), err.shape) if err.size else None
        if idx is not None and err[idx] > worst["error"]:
            worst = {
                "name": name,
                "analytic": float(a[idx]),
                "numeric": float(n[idx]),
                "error": float(err[idx]),
            }
        if idx is not None and err[idx] > 0:
            ok = False
    return ok, worst
