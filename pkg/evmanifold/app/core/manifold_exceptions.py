# Custom Exception Classes
from typing import Optional, Tuple


class ManifoldError(Exception):
    """Base exception for evmanifold operations"""
    def __init__(
        self,
        message: str,
        stage: Optional[str] = None,
        index: Optional[int] = None,
        point: Optional[Tuple[float, ...]] = None,
        cell: Optional[Tuple[int, int]] = None,
    ):
        super().__init__(message)
        self.stage = stage
        self.index = index
        self.point = point
        self.cell = cell


class ValidationError(ManifoldError):
    """Raised when an argument or parameter fails validation"""
    pass


class DomainError(ValidationError):
    """Raised when a value lies outside the support of a distribution"""
    pass


class ConfigurationError(ManifoldError):
    """Raised when a config or scenario file is missing or invalid"""
    pass


class DataError(ManifoldError):
    """Raised when input data is empty, malformed or degenerate"""
    pass


class InsufficientExceedancesError(DataError):
    """Raised when too few pairs exceed the radius threshold"""
    pass


class NumericalError(ManifoldError):
    """Raised when a numerical routine fails"""
    pass


class FitError(NumericalError):
    """Raised when a likelihood optimisation fails or the likelihood is flat"""
    pass


class SolverError(NumericalError):
    """Raised when conditional-quantile root finding fails"""
    pass


class QuadratureError(NumericalError):
    """Raised when the quadrature refinement check disagrees"""
    pass
