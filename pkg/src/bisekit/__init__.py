"""Random walks on lattice trees, continuum random trees and their skeletons."""

from .errors import ArgumentError, DisconnectedError, ResourceBudgetError, ShapeMismatchError

__version__ = "0.1.0"

__all__ = [
    "ArgumentError",
    "DisconnectedError",
    "ResourceBudgetError",
    "ShapeMismatchError",
    "__version__",
]
