"""Error types and centralized error handling."""

import logging
from collections import Counter
from enum import Enum
from typing import Any, Dict, Optional

logger = logging.getLogger(__name__)


class ErrorSeverity(Enum):
    """Error severity levels."""

    INFO = "INFO"
    WARNING = "WARNING"
    ERROR = "ERROR"
    CRITICAL = "CRITICAL"


class ErrorCategory(Enum):
    """Error categories."""

    INPUT = "INPUT"
    FORMAT = "FORMAT"
    CONFIGURATION = "CONFIGURATION"
    GEOMETRY = "GEOMETRY"
    NUMERICAL = "NUMERICAL"
    SYSTEM = "SYSTEM"


# Process exit code per category; anything not listed is a bad-input failure.
EXIT_CODES = {
    ErrorCategory.NUMERICAL: 2,
}


class MetricHumanError(Exception):
    """Base exception for the metrichuman package."""

    def __init__(
        self,
        message: str,
        category: ErrorCategory = ErrorCategory.SYSTEM,
        severity: ErrorSeverity = ErrorSeverity.ERROR,
        user_message: Optional[str] = None,
        details: Optional[Dict[str, Any]] = None,
    ):
        """Initialize error.

        Args:
            message: Technical error message
            category: Error category
            severity: Error severity
            user_message: Short message suitable for the CLI summary
            details: Additional error details (file, frame, diagnostics)
        """
        super().__init__(message)
        self.category = category
        self.severity = severity
        self.user_message = user_message or self._generate_user_message(category)
        self.details = details or {}

    @staticmethod
    def _generate_user_message(category: ErrorCategory) -> str:
        """Generate a generic message for a category.

        Args:
            category: Error category

        Returns:
            Human-readable message
        """
        category_messages = {
            ErrorCategory.INPUT: "Invalid input. Check the scene directory layout.",
            ErrorCategory.FORMAT: "Malformed file. Check the file contents.",
            ErrorCategory.CONFIGURATION: "Invalid configuration. Check the config file.",
            ErrorCategory.GEOMETRY: "Geometric precondition violated.",
            ErrorCategory.NUMERICAL: "Numerical failure. See diagnostics.json.",
            ErrorCategory.SYSTEM: "Unexpected error.",
        }
        return category_messages.get(category, "An error occurred.")


class InputError(MetricHumanError):
    """Missing or inconsistent inputs."""

    def __init__(
        self,
        message: str,
        file_path: Optional[str] = None,
        frame: Optional[int] = None,
        **kwargs: Any,
    ):
        details = kwargs.pop("details", None) or {}
        if file_path is not None:
            details["file_path"] = str(file_path)
        if frame is not None:
            details["frame"] = frame
        super().__init__(
            message, category=ErrorCategory.INPUT, details=details, **kwargs
        )


class FormatError(MetricHumanError):
    """File content that cannot be parsed."""

    def __init__(self, message: str, file_path: Optional[str] = None, **kwargs: Any):
        details = kwargs.pop("details", None) or {}
        if file_path is not None:
            details["file_path"] = str(file_path)
        super().__init__(
            message, category=ErrorCategory.FORMAT, details=details, **kwargs
        )


class ConfigurationError(MetricHumanError):
    """Unknown or invalid configuration keys."""

    def __init__(self, message: str, key: Optional[str] = None, **kwargs: Any):
        details = kwargs.pop("details", None) or {}
        if key is not None:
            details["key"] = key
        super().__init__(
            message, category=ErrorCategory.CONFIGURATION, details=details, **kwargs
        )


class DomainError(MetricHumanError, ValueError):
    """Geometric or algebraic precondition violated."""

    def __init__(self, message: str, **kwargs: Any):
        super().__init__(message, category=ErrorCategory.GEOMETRY, **kwargs)


class NoSupportError(MetricHumanError):
    """Depth calibration has no overlap pixels to work with."""

    def __init__(self, message: str, **kwargs: Any):
        super().__init__(
            message,
            category=ErrorCategory.INPUT,
            user_message="No overlap between body masks and rasterized meshes; "
            "calibration impossible.",
            **kwargs,
        )


class NumericalError(MetricHumanError):
    """Optimizer divergence, non-finite values or non-convergence."""

    def __init__(
        self,
        message: str,
        diagnostics: Optional[Dict[str, Any]] = None,
        **kwargs: Any,
    ):
        self.diagnostics = diagnostics or {}
        details = kwargs.pop("details", None) or {}
        details["diagnostics"] = self.diagnostics
        super().__init__(
            message, category=ErrorCategory.NUMERICAL, details=details, **kwargs
        )


class ErrorHandler:
    """Centralized error handling for the command line."""

    def __init__(self) -> None:
        """Initialize error handler."""
        self.error_count = 0
        self.category_counts: Counter = Counter()

    def handle_exception(self, exc: Exception, context: str = "") -> MetricHumanError:
        """Handle any exception and convert to MetricHumanError.

        Args:
            exc: Exception to handle
            context: Context where error occurred (stage name)

        Returns:
            MetricHumanError instance
        """
        if isinstance(exc, MetricHumanError):
            error = exc
        else:
            error = self._convert_exception(exc, context)

        self._log_error(error, context)
        self.error_count += 1
        self.category_counts[error.category.value] += 1
        return error

    @staticmethod
    def exit_code(error: MetricHumanError) -> int:
        """Map an error to the process exit code.

        Args:
            error: Handled error

        Returns:
            2 for numerical failures, 1 otherwise
        """
        return EXIT_CODES.get(error.category, 1)

    def _convert_exception(self, exc: Exception, context: str) -> MetricHumanError:
        """Convert generic exception to MetricHumanError.

        Args:
            exc: Exception to convert
            context: Context where error occurred

        Returns:
            MetricHumanError instance
        """
        if isinstance(exc, (FileNotFoundError, PermissionError, IsADirectoryError)):
            category = ErrorCategory.INPUT
        elif isinstance(exc, (ValueError, KeyError, TypeError)):
            category = ErrorCategory.FORMAT
        elif isinstance(exc, (FloatingPointError, ArithmeticError)):
            category = ErrorCategory.NUMERICAL
        else:
            category = ErrorCategory.SYSTEM

        if isinstance(exc, MemoryError):
            severity = ErrorSeverity.CRITICAL
        else:
            severity = ErrorSeverity.ERROR

        details: Dict[str, Any] = {"exception_type": type(exc).__name__}
        filename = getattr(exc, "filename", None)
        if filename:
            details["file_path"] = str(filename)

        return MetricHumanError(
            f"{context}: {exc}" if context else str(exc),
            category=category,
            severity=severity,
            details=details,
        )

    def _log_error(self, error: MetricHumanError, context: str) -> None:
        """Log error with appropriate level.

        Args:
            error: Error to log
            context: Context where error occurred
        """
        log_message = f"{context}: {error}" if context else str(error)

        if error.severity == ErrorSeverity.CRITICAL:
            logger.critical(log_message, exc_info=True)
        elif error.severity == ErrorSeverity.ERROR:
            logger.error(log_message)
        elif error.severity == ErrorSeverity.WARNING:
            logger.warning(log_message)
        else:
            logger.info(log_message)

        if error.details:
            logger.debug(f"Error details: {error.details}")

    def get_error_stats(self) -> Dict[str, Any]:
        """Get error statistics.

        Returns:
            Error statistics dictionary
        """
        return {
            "total_errors": self.error_count,
            "by_category": dict(sorted(self.category_counts.items())),
        }
