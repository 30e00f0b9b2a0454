import json
import logging
import sys
from typing import Dict, Any, Optional, TextIO
from facilitation.core.logging import log_run_context

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERIC = 3


class ModelError(Exception):
    """Base error for every failure the library reports to callers"""

    def __init__(self, message: str, exit_code: int = EXIT_NUMERIC, details: Dict[str, Any] = None):
        self.message = message
        self.exit_code = exit_code
        self.details = details or {}
        super().__init__(self.message)

# =============================================================================
# PARAMETER / VALIDATION ERRORS (exit 2)
# =============================================================================

class ParameterError(ModelError):
    """Parameter validation errors"""

    def __init__(self, message: str = "Invalid parameters", details: Dict[str, Any] = None):
        super().__init__(message, EXIT_VALIDATION, details)


class GenericRegimeError(ParameterError):
    """Vegetation equilibria are not two distinct positive roots"""

    def __init__(self, message: str = "Parameters outside the generic regime", details: Dict[str, Any] = None):
        super().__init__(message, details)


class ConsumerDecoupledError(ParameterError):
    """Consumption or efficiency is zero, so F and xe are undefined"""

    def __init__(self, message: str = "Consumer is decoupled from the resource", details: Dict[str, Any] = None):
        super().__init__(message, details)


class TranscriticalError(ParameterError):
    """xe coincides with a vegetation equilibrium"""

    def __init__(self, message: str = "Transcritical configuration xe = x0 or xe = x1", details: Dict[str, Any] = None):
        super().__init__(message, details)


class DomainError(ParameterError):
    """Argument outside the domain of an operation"""

    def __init__(self, message: str = "Argument outside the operation domain", details: Dict[str, Any] = None):
        super().__init__(message, details)

# =============================================================================
# NUMERIC / SOLVER ERRORS (exit 3)
# =============================================================================

class SolverError(ModelError):
    """Numeric failure"""

    def __init__(self, message: str = "Numeric solver failed", details: Dict[str, Any] = None):
        super().__init__(message, EXIT_NUMERIC, details)


class StiffnessError(SolverError):
    """Step size underflow; carries the last valid state"""

    def __init__(self, message: str = "Step size underflow", last_time: float = None,
                 last_state: Optional[tuple] = None, details: Dict[str, Any] = None):
        self.last_time = last_time
        self.last_state = last_state
        details = dict(details or {})
        details.update({"last_time": last_time, "last_state": list(last_state) if last_state is not None else None})
        super().__init__(message, details)


class NoCrossingError(SolverError):
    """A traced manifold never reached the section"""

    def __init__(self, side: str, message: str = None, details: Dict[str, Any] = None):
        self.side = side
        details = dict(details or {})
        details["side"] = side
        super().__init__(message or f"{side} did not cross the section", details)


class BracketError(SolverError):
    """Section gap has the same sign at both bracket ends"""

    def __init__(self, gap_low: float, gap_high: float, message: str = None, details: Dict[str, Any] = None):
        self.gap_low = gap_low
        self.gap_high = gap_high
        details = dict(details or {})
        details.update({"gap_low": gap_low, "gap_high": gap_high})
        super().__init__(message or "Heteroclinic bracket does not change sign", details)


class InconclusiveError(SolverError):
    """Return-map iteration budget exhausted without a verdict"""

    def __init__(self, message: str = "Return map did not converge", details: Dict[str, Any] = None):
        super().__init__(message, details)


class ChatteringError(SolverError):
    """Too many switching-manifold events in a piecewise-linear run"""

    def __init__(self, message: str = "Chattering on the switching line", details: Dict[str, Any] = None):
        super().__init__(message, details)

# =============================================================================
# CLI HANDLERS
# =============================================================================

def _emit(payload: Dict[str, Any], stream: TextIO) -> None:
    stream.write(json.dumps(payload, default=str, sort_keys=True) + "\n")
    stream.flush()


def model_error_handler(exc: ModelError, command: str = "unknown", stream: TextIO = None) -> int:
    """Log a library error and report it as JSON on stderr; returns the exit code"""

    context = log_run_context(command)
    context.update({
        "error_type": exc.__class__.__name__,
        "exit_code": exc.exit_code,
    })

    if exc.exit_code >= EXIT_NUMERIC:
        logger.error(f"Model error: {exc.message}", extra={"context": context})
    else:
        logger.warning(f"Model error: {exc.message}", extra={"context": context})

    _emit({
        "error": True,
        "type": exc.__class__.__name__,
        "message": exc.message,
        "details": exc.details,
        "timestamp": context["timestamp"],
    }, stream or sys.stderr)
    return exc.exit_code


def general_exception_handler(exc: Exception, command: str = "unknown", stream: TextIO = None) -> int:
    """Handle unexpected exceptions"""

    context = log_run_context(command)
    context["error_type"] = exc.__class__.__name__

    logger.error(f"Unexpected error: {str(exc)}", extra={"context": context}, exc_info=True)

    _emit({
        "error": True,
        "type": exc.__class__.__name__,
        "message": "Internal error",
        "timestamp": context["timestamp"],
    }, stream or sys.stderr)
    return EXIT_NUMERIC
