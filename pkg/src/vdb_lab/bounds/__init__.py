"""Closed-form capacity bounds and the empirical floor check."""

from vdb_lab.bounds.analysis import (
    BoundReport,
    FloorCheckReport,
    bound_report,
    coefficient_floor,
    empirical_floor_check,
    log_coefficient_floor,
    pair_coefficients,
    sigma_bounds,
)

__all__ = [
    "BoundReport",
    "FloorCheckReport",
    "bound_report",
    "coefficient_floor",
    "empirical_floor_check",
    "log_coefficient_floor",
    "pair_coefficients",
    "sigma_bounds",
]
