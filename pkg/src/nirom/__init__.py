"""Non-intrusive reduced-order modeling of parameterized dynamical systems."""

__version__ = "0.1.0"

from .core import (
    CapabilityError,
    ConvergenceError,
    DivergenceError,
    DomainError,
    DynamicalSystem,
    EvaluationError,
    ParameterDomain,
    StageError,
    TimeGrid,
)

__all__ = [
    "CapabilityError",
    "ConvergenceError",
    "DivergenceError",
    "DomainError",
    "DynamicalSystem",
    "EvaluationError",
    "ParameterDomain",
    "StageError",
    "TimeGrid",
    "__version__",
]
