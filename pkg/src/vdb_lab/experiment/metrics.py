"""Append-only CSV metric logging with a byte-deterministic float format.

Rows are written as they arrive; the header is fixed at construction so
every file of a given experiment kind has an identical schema. Floats go
through repr (shortest exact round-trip), so two runs that produce the same
numbers produce the same bytes.
"""

import csv
import math

from vdb_lab.errors import ConfigError, StateError


def format_cell(value):
    if value is None or value == "":
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        if math.isnan(value):
            return "nan"
        return repr(value)
    return str(value)


class MetricsLog:
    """CSV writer bound to a fixed header, with monotone step enforcement."""

    def __init__(self, path, fieldnames, step_key=None):
        if not fieldnames:
            raise ConfigError("fieldnames must be non-empty")
        self.path = path
        self.fieldnames = list(fieldnames)
        self.step_key = step_key if step_key is not None else self.fieldnames[0]
        if self.step_key not in self.fieldnames:
            raise ConfigError(f"step key {self.step_key!r} not in fieldnames")
        self._last_step = None
        self._fh = open(path, "w", newline="")
        self._writer = csv.writer(self._fh)
        self._writer.writerow(self.fieldnames)

    def log(self, row):
        if set(row) != set(self.fieldnames):
            missing = set(self.fieldnames) - set(row)
            extra = set(row) - set(self.fieldnames)
            raise ConfigError(
                f"row keys do not match header (missing {sorted(missing)}, "
                f"extra {sorted(extra)})"
            )
        step = row[self.step_key]
        if self._last_step is not None and step <= self._last_step:
            raise StateError(
                f"metric steps must increase: {step} after {self._last_step}"
            )
        self._last_step = step
        self._writer.writerow([format_cell(row[k]) for k in self.fieldnames])

    def close(self):
        if not self._fh.closed:
            self._fh.flush()
            self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


def write_csv(path, fieldnames, rows):
    """One-shot table dump with the same cell formatting as MetricsLog."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(fieldnames))
        for row in rows:
            if isinstance(row, dict):
                writer.writerow([format_cell(row[k]) for k in fieldnames])
            else:
                writer.writerow([format_cell(v) for v in row])


def read_csv(path):
    """Rows as dicts with parse-back of the numeric cells."""
    import csv as _csv

    with open(path, newline="") as fh:
        reader = _csv.DictReader(fh)
        rows = []
        for raw in reader:
            row = {}
            for key, value in raw.items():
                row[key] = _parse_cell(value)
            rows.append(row)
    return rows


def _parse_cell(text):
    if text is None or text == "":
        return ""
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    if text == "true":
        return True
    if text == "false":
        return False
    return text
