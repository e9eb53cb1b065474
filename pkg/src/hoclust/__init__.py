"""Detection and support recovery of planted high-order clusters in noisy tensors."""

from hoclust.errors import (
    BudgetError,
    ContractError,
    ConvergenceError,
    DegenerateInputError,
    HoclustError,
    ModeIndexError,
    ParameterError,
    ShapeError,
    SliceError,
)
from hoclust.rng import RngStream

__version__ = "0.1.0"

__all__ = [
    "BudgetError",
    "ContractError",
    "ConvergenceError",
    "DegenerateInputError",
    "HoclustError",
    "ModeIndexError",
    "ParameterError",
    "RngStream",
    "ShapeError",
    "SliceError",
]
