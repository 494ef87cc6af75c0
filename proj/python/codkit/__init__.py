"""Conditional operator discrepancy metrics and domain adaptation regression."""

from codkit._core import (
    REPORT_SCHEMA_VERSION,
    CodkitError,
    ConfigError,
    DataError,
    NumericalError,
    ShapeError,
    center_gram,
    finite_diff_check,
    gen_synthetic,
    kernel_matrix,
    median_heuristic,
    metric,
    metric_grad,
    metric_names,
    nuclear_norm,
    reference_config,
    run_config,
)

__all__ = [
    "REPORT_SCHEMA_VERSION",
    "CodkitError",
    "ConfigError",
    "DataError",
    "NumericalError",
    "ShapeError",
    "center_gram",
    "finite_diff_check",
    "gen_synthetic",
    "kernel_matrix",
    "median_heuristic",
    "metric",
    "metric_grad",
    "metric_names",
    "nuclear_norm",
    "reference_config",
    "run_config",
]
