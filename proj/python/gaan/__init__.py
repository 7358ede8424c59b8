"""Python bindings for the gaan library."""

from ._gaan import (
    GaanError,
    aggregate,
    aggregator_kinds,
    forecast_metrics,
    gradcheck,
    hierarchy_sizes,
    micro_f1,
    run_cli,
)

__all__ = [
    "GaanError",
    "aggregate",
    "aggregator_kinds",
    "forecast_metrics",
    "gradcheck",
    "hierarchy_sizes",
    "micro_f1",
    "run_cli",
]
