"""Flat key = value run configuration: serialization, echo, and round-trips.

Every run directory gets a `config.txt` written before training starts. The
format is deliberately plain — one `dotted.key = value` pair per line, keys
sorted — so that a rerun can be reconstructed from the echo alone and two
echoes can be compared with diff. Floats are serialized with repr, which
round-trips exactly in both directions.
"""

import math

from vdb_lab import __version__
from vdb_lab.errors import ConfigError


def format_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return "none"
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    return str(value)


def parse_value(text):
    """Inverse of format_value with untyped strings passing through."""
    text = text.strip()
    lowered = text.lower()
    if lowered == "true":
        return True
    if lowered == "false":
        return False
    if lowered == "none":
        return None
    if lowered == "inf":
        return math.inf
    if lowered == "-inf":
        return -math.inf
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def format_config(mapping):
    lines = []
    for key in sorted(mapping):
        if not key or any(c.isspace() for c in key) or "=" in key:
            raise ConfigError(f"config key {key!r} must be a bare dotted name")
        lines.append(f"{key} = {format_value(mapping[key])}")
    return "\n".join(lines) + "\n"


def parse_config(text):
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno} has no '=': {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError(f"config line {lineno} has an empty key")
        out[key] = parse_value(value)
    return out


def write_config(path, mapping):
    """Echo the full configuration (plus the code version) to `path`."""
    stamped = dict(mapping)
    stamped.setdefault("version", __version__)
    with open(path, "w") as fh:
        fh.write(format_config(stamped))
    return stamped
