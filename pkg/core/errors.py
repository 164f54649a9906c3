"""
Error taxonomy and exit-code mapping for numerical operations.

Provides typed errors for expression parsing, field evaluation, solvers and
verification, and maps each to the command-line exit code contract.
"""

import json
from dataclasses import dataclass
from enum import Enum, IntEnum
from typing import Any, Dict, Optional

import pydantic


class ErrorCategory(str, Enum):
    """Error category classification."""

    INPUT = "input"
    DOMAIN = "domain"
    SINGULAR = "singular"
    CONVERGENCE = "convergence"
    BREAKING = "breaking"
    SUPPORT = "support"
    PRECONDITION = "precondition"
    INTERNAL = "internal"


class ExitCode(IntEnum):
    """Process exit codes of the command-line front end."""

    OK = 0
    INTERNAL = 1
    INPUT = 2
    NUMERIC = 3
    PRECONDITION = 4


@dataclass
class ErrorDetail:
    """Detailed error information."""

    category: ErrorCategory
    code: str
    message: str
    exit_code: ExitCode
    details: Optional[Dict[str, Any]] = None

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for JSON error documents."""
        result: Dict[str, Any] = {
            "category": self.category.value,
            "code": self.code,
            "message": self.message,
            "exit_code": int(self.exit_code),
        }
        if self.details:
            result["details"] = self.details
        return result


class ToeplitzError(Exception):
    """Base exception for all library errors."""

    def __init__(
        self,
        message: str,
        category: ErrorCategory,
        code: str,
        exit_code: ExitCode = ExitCode.INTERNAL,
        details: Optional[Dict[str, Any]] = None,
    ):
        super().__init__(message)
        self.error_detail = ErrorDetail(
            category=category,
            code=code,
            message=message,
            exit_code=exit_code,
            details=details or {},
        )

    @property
    def exit_code(self) -> int:
        return int(self.error_detail.exit_code)


# Input errors (exit 2)


class ExpressionSyntaxError(ToeplitzError):
    """Expression text does not parse."""

    def __init__(self, message: str = "Syntax error", offset: int = 0, source: str = ""):
        super().__init__(
            message=f"{message} at byte {offset}",
            category=ErrorCategory.INPUT,
            code="SYNTAX_ERROR",
            exit_code=ExitCode.INPUT,
            details={"offset": offset, "source": source},
        )
        self.offset = offset


class UnknownIdentifierError(ToeplitzError):
    """Identifier is neither a variable, a constant nor a function."""

    def __init__(self, name: str, offset: int = 0):
        super().__init__(
            message=f"Unknown identifier '{name}' at byte {offset}",
            category=ErrorCategory.INPUT,
            code="UNKNOWN_IDENTIFIER",
            exit_code=ExitCode.INPUT,
            details={"identifier": name, "offset": offset},
        )


class ArityMismatchError(ToeplitzError):
    """Field variable index or vector length disagrees with the declared arity."""

    def __init__(self, message: str = "Arity mismatch", expected: int = 0, got: int = 0):
        super().__init__(
            message=message,
            category=ErrorCategory.INPUT,
            code="ARITY_MISMATCH",
            exit_code=ExitCode.INPUT,
            details={"expected": expected, "got": got},
        )


class DescriptorError(ToeplitzError):
    """JSON descriptor is missing, malformed or inconsistent."""

    def __init__(
        self, message: str = "Invalid descriptor", details: Optional[Dict[str, Any]] = None
    ):
        super().__init__(
            message=message,
            category=ErrorCategory.INPUT,
            code="DESCRIPTOR_ERROR",
            exit_code=ExitCode.INPUT,
            details=details,
        )


class GridError(ToeplitzError):
    """Grid specification is empty or malformed."""

    def __init__(self, message: str = "Empty grid"):
        super().__init__(
            message=message,
            category=ErrorCategory.INPUT,
            code="GRID_ERROR",
            exit_code=ExitCode.INPUT,
        )


# Numeric domain errors (exit 3)


class FieldDomainError(ToeplitzError):
    """Expression left its real domain (log of non-positive, division by zero)."""

    def __init__(self, message: str = "Domain error", subexpression: Optional[str] = None):
        details = {"subexpression": subexpression} if subexpression else None
        text = f"{message} in '{subexpression}'" if subexpression else message
        super().__init__(
            message=text,
            category=ErrorCategory.DOMAIN,
            code="DOMAIN_ERROR",
            exit_code=ExitCode.NUMERIC,
            details=details,
        )


class NonDifferentiableError(ToeplitzError):
    """Derivative requested at a non-differentiable point."""

    def __init__(self, message: str = "Not differentiable", subexpression: Optional[str] = None):
        details = {"subexpression": subexpression} if subexpression else None
        text = f"{message} in '{subexpression}'" if subexpression else message
        super().__init__(
            message=text,
            category=ErrorCategory.DOMAIN,
            code="NON_DIFFERENTIABLE",
            exit_code=ExitCode.NUMERIC,
            details=details,
        )


class QuadratureError(ToeplitzError):
    """Adaptive quadrature did not converge."""

    def __init__(
        self, message: str = "Quadrature did not converge", interval: Optional[tuple] = None
    ):
        details = {"interval": list(interval)} if interval else None
        super().__init__(
            message=message,
            category=ErrorCategory.CONVERGENCE,
            code="QUADRATURE_FAILED",
            exit_code=ExitCode.NUMERIC,
            details=details,
        )


class SingularLocusError(ToeplitzError):
    """Evaluation hit a singular locus of a formula."""

    def __init__(self, message: str = "Singular locus", quantity: str = "", value: float = 0.0):
        super().__init__(
            message=message,
            category=ErrorCategory.SINGULAR,
            code="SINGULAR_LOCUS",
            exit_code=ExitCode.NUMERIC,
            details={"quantity": quantity, "value": value},
        )


class BracketNotFoundError(ToeplitzError):
    """No sign change of the characteristic relation inside the search window."""

    def __init__(
        self,
        message: str = "No bracket for the characteristic variable",
        x: float = 0.0,
        t: float = 0.0,
        category: ErrorCategory = ErrorCategory.CONVERGENCE,
        code: str = "NO_BRACKET",
    ):
        super().__init__(
            message=message,
            category=category,
            code=code,
            exit_code=ExitCode.NUMERIC,
            details={"x": x, "t": t},
        )


class OutOfSupportError(BracketNotFoundError):
    """Evaluation outside the tabulated support of initial data."""

    def __init__(self, message: str = "Outside data support", x: float = 0.0, t: float = 0.0):
        super().__init__(
            message=message, x=x, t=t, category=ErrorCategory.SUPPORT, code="OUT_OF_SUPPORT"
        )


class WaveBreakingError(ToeplitzError):
    """Characteristics crossed: x_sigma is non-positive at the root."""

    def __init__(self, x: float = 0.0, t: float = 0.0, jacobian: float = 0.0):
        super().__init__(
            message=f"Characteristics crossed at (x={x}, t={t}), x_sigma={jacobian}",
            category=ErrorCategory.BREAKING,
            code="WAVE_BREAKING",
            exit_code=ExitCode.NUMERIC,
            details={"x": x, "t": t, "x_sigma": jacobian},
        )


class ClosureError(ToeplitzError):
    """Closure ODE integration failed (singular right-hand side or step rejection)."""

    def __init__(
        self, message: str = "Closure integration failed", details: Optional[Dict[str, Any]] = None
    ):
        super().__init__(
            message=message,
            category=ErrorCategory.CONVERGENCE,
            code="CLOSURE_FAILED",
            exit_code=ExitCode.NUMERIC,
            details=details,
        )


class StencilError(ToeplitzError):
    """A finite-difference stencil touched a flagged point."""

    def __init__(
        self, message: str = "Stencil hits a flagged point", x: float = 0.0, t: float = 0.0
    ):
        super().__init__(
            message=message,
            category=ErrorCategory.DOMAIN,
            code="STENCIL_FLAGGED",
            exit_code=ExitCode.NUMERIC,
            details={"x": x, "t": t},
        )


class VerificationError(ToeplitzError):
    """Verification could not be carried out."""

    def __init__(
        self, message: str = "Verification failed", details: Optional[Dict[str, Any]] = None
    ):
        super().__init__(
            message=message,
            category=ErrorCategory.CONVERGENCE,
            code="VERIFICATION_FAILED",
            exit_code=ExitCode.NUMERIC,
            details=details,
        )


# Precondition errors (exit 4)


class PreconditionError(ToeplitzError):
    """A mathematical precondition of the operation does not hold."""

    def __init__(
        self, message: str = "Precondition failed", details: Optional[Dict[str, Any]] = None
    ):
        super().__init__(
            message=message,
            category=ErrorCategory.PRECONDITION,
            code="PRECONDITION_FAILED",
            exit_code=ExitCode.PRECONDITION,
            details=details,
        )


class DegenerateMetricError(PreconditionError):
    """Metric determinant vanishes."""

    def __init__(
        self, message: str = "Degenerate metric", details: Optional[Dict[str, Any]] = None
    ):
        super().__init__(message=message, details=details)
        self.error_detail.code = "DEGENERATE_METRIC"


class InternalError(ToeplitzError):
    """Unexpected internal failure."""

    def __init__(self, message: str = "Internal error", details: Optional[Dict[str, Any]] = None):
        super().__init__(
            message=message,
            category=ErrorCategory.INTERNAL,
            code="INTERNAL_ERROR",
            exit_code=ExitCode.INTERNAL,
            details=details,
        )


# Foreign exception type to our error mapping
NUMERIC_ERROR_MAP: Dict[type, type[ToeplitzError]] = {
    ZeroDivisionError: FieldDomainError,
    OverflowError: FieldDomainError,
    FloatingPointError: FieldDomainError,
    FileNotFoundError: DescriptorError,
    IsADirectoryError: DescriptorError,
    json.JSONDecodeError: DescriptorError,
    pydantic.ValidationError: DescriptorError,
}


def map_numeric_exception(exception: Exception) -> ToeplitzError:
    """
    Map a foreign exception to our typed error.

    Args:
        exception: Exception raised by numpy, the standard library or pydantic

    Returns:
        Mapped ToeplitzError instance
    """
    if isinstance(exception, ToeplitzError):
        return exception

    message = str(exception)
    for exc_type in type(exception).__mro__:
        error_class = NUMERIC_ERROR_MAP.get(exc_type)
        if error_class is None:
            continue
        if error_class is DescriptorError:
            return DescriptorError(message=message, details={"original_error": exc_type.__name__})
        return error_class(message=message)

    if isinstance(exception, ValueError) and "domain" in message:
        return FieldDomainError(message=message)

    return InternalError(message=message, details={"original_error": type(exception).__name__})
