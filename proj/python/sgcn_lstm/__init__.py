"""Graph-convolution + LSTM traffic forecasting core.

Thin re-export of the compiled module; all numerics live in C++.
"""

from ._core import (
    DimensionError,
    Error,
    IndexError,
    IoError,
    Model,
    NumericError,
    ParseError,
    TrainConfig,
    ValidationError,
    combined_loss,
    compute_metrics,
    generate_synthetic,
    normalized_adjacency,
)

__all__ = [
    "DimensionError",
    "Error",
    "IndexError",
    "IoError",
    "Model",
    "NumericError",
    "ParseError",
    "TrainConfig",
    "ValidationError",
    "combined_loss",
    "compute_metrics",
    "generate_synthetic",
    "normalized_adjacency",
]
