import json
import sys
from typing import Dict, Type

from evmanifold.app.core.manifold_exceptions import (
    ManifoldError, ValidationError, DomainError, ConfigurationError, DataError,
    InsufficientExceedancesError, NumericalError, FitError, SolverError, QuadratureError
)
from evmanifold.app.schemas.common import ErrorDetail, ErrorResponse
from evmanifold.app.utilities.telemetry import logger


EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4

# Map exception types to process exit codes
EXIT_CODE_MAP: Dict[Type[BaseException], int] = {
    ValidationError: EXIT_USAGE,
    DomainError: EXIT_USAGE,
    ConfigurationError: EXIT_USAGE,
    DataError: EXIT_DATA,
    InsufficientExceedancesError: EXIT_DATA,
    FileNotFoundError: EXIT_DATA,
    NumericalError: EXIT_NUMERICAL,
    FitError: EXIT_NUMERICAL,
    SolverError: EXIT_NUMERICAL,
    QuadratureError: EXIT_NUMERICAL,
    FloatingPointError: EXIT_NUMERICAL,
    ManifoldError: EXIT_NUMERICAL,  # Generic fallback
}


def exit_code_for(exc: BaseException) -> int:
    """Resolve the exit code of an exception, walking its class hierarchy"""
    for klass in type(exc).__mro__:
        if klass in EXIT_CODE_MAP:
            return EXIT_CODE_MAP[klass]
    return EXIT_NUMERICAL


def build_error_detail(exc: BaseException) -> ErrorDetail:
    point = getattr(exc, 'point', None)
    cell = getattr(exc, 'cell', None)
    return ErrorDetail(
        error_type=type(exc).__name__,
        message=str(exc),
        stage=getattr(exc, 'stage', None),
        index=getattr(exc, 'index', None),
        point=list(point) if point is not None else None,
        cell=list(cell) if cell is not None else None,
        exit_code=exit_code_for(exc),
    )


def report_error(exc: BaseException) -> int:
    """Log the failure, print its ErrorDetail as JSON on stderr and return the exit code"""
    detail = build_error_detail(exc)

    logger.error(f"{detail.error_type} - {detail.message}", extra={
        "error_type": detail.error_type,
        "stage": detail.stage,
        "index": detail.index,
        "exit_code": detail.exit_code,
    })

    sys.stderr.write(json.dumps(ErrorResponse(detail=detail).model_dump(), sort_keys=True) + "\n")
    return detail.exit_code
