"""Numerical laboratory for a heat equation with noise coupled to the local
time of a stable process, its Wiener-chaos second-moment theory, and the
companion disordered pinning model in correlated environments."""

__version__ = "0.1.0"

from .errors import (
    ConditioningError,
    DivergentRegimeError,
    GridMismatchError,
    InvalidParameterError,
    QuadratureError,
    ShelabError,
)
from .stable import StableParams, StablePath

__all__ = [
    "__version__",
    "ShelabError",
    "InvalidParameterError",
    "GridMismatchError",
    "QuadratureError",
    "DivergentRegimeError",
    "ConditioningError",
    "StableParams",
    "StablePath",
]
