"""Checkpoint files: a flat archive of named float64 arrays plus metadata.

Format (documented for external consumers): a numpy .npz archive whose keys
are parameter names, with two reserved entries:

  __format_version__  0-d int array, currently 1
  __meta__            0-d string array holding a JSON object of run metadata

Loading rejects unknown format versions rather than guessing.
"""

import json

import numpy as np

from vdb_lab.errors import ConfigError

FORMAT_VERSION = 1
_RESERVED = ("__format_version__", "__meta__")


def save_checkpoint(path, named_arrays, meta=None):
    """Write named arrays (dict or (name, Tensor/array) pairs) to `path`."""
    if not isinstance(named_arrays, dict):
        named_arrays = dict(named_arrays)
    payload = {}
    for name, arr in named_arrays.items():
        if name in _RESERVED:
            raise ConfigError(f"parameter name {name!r} is reserved")
        values = getattr(arr, "values", arr)
        payload[name] = np.asarray(values, dtype=np.float64)
    payload["__format_version__"] = np.array(FORMAT_VERSION)
    payload["__meta__"] = np.array(json.dumps(meta or {}, sort_keys=True))
    with open(path, "wb") as fh:
        np.savez(fh, **payload)


def load_checkpoint(path):
    """Read a checkpoint; returns (arrays: dict[str, ndarray], meta: dict)."""
    with np.load(path, allow_pickle=False) as data:
        version = int(data["__format_version__"])
        if version != FORMAT_VERSION:
            raise ConfigError(f"unsupported checkpoint format version {version}")
        meta = json.loads(str(data["__meta__"]))
        arrays = {k: data[k] for k in data.files if k not in _RESERVED}
    return arrays, meta


def restore_into(named_params, arrays):
    """Copy checkpoint arrays into existing parameters, validating shapes."""
    for name, tensor in named_params:
        if name not in arrays:
            raise ConfigError(f"checkpoint is missing parameter {name!r}")
        if arrays[name].shape != tensor.values.shape:
            raise ConfigError(
                f"checkpoint shape mismatch for {name!r}: "
                f"{arrays[name].shape} vs {tensor.values.shape}"
            )
        tensor.values[...] = arrays[name]
