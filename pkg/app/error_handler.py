"""Error types and classification for the mrcap benchmark harness."""

import time
from enum import Enum
from typing import Any, Dict, Optional
from dataclasses import dataclass

import structlog

logger = structlog.get_logger(__name__)


class MrcapError(Exception):
    """Base exception for harness errors."""
    pass


class UsageError(MrcapError):
    """Raised when an operation is called with arguments outside its domain."""
    pass


class CapabilityError(MrcapError):
    """Raised when a power backend cannot read or control the hardware."""
    pass


class InvariantViolation(MrcapError):
    """Raised when an internal invariant of the runtime is broken."""
    pass


class WorkloadError(MrcapError):
    """Raised when a benchmark cell fails to run."""
    pass


class ErrorCategory(Enum):
    """Categories of errors that can occur in the harness."""
    CONFIGURATION = "configuration"
    USAGE = "usage"
    CAPABILITY = "capability"
    INVARIANT = "invariant"
    WORKLOAD = "workload"
    IO = "io"
    UNKNOWN = "unknown"


class ErrorSeverity(Enum):
    """Severity levels for errors."""
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"
    CRITICAL = "critical"


@dataclass
class ErrorContext:
    """Context information for error handling."""
    operation: str
    parameters: Optional[Dict[str, Any]] = None
    start_time: Optional[float] = None


@dataclass
class ErrorInfo:
    """Structured error information."""
    category: ErrorCategory
    severity: ErrorSeverity
    message: str
    suggestion: str
    details: Optional[str] = None
    exit_code: int = 1
    user_actionable: bool = True

    def format(self) -> str:
        """Render the error for a terminal user."""
        parts = [self.message]
        if self.suggestion:
            parts.append(f"Suggestion: {self.suggestion}")
        if self.details:
            parts.append(f"Details: {self.details}")
        return ". ".join(parts)


class ErrorClassifier:
    """Classifies errors and provides structured error information."""

    @staticmethod
    def classify_error(
        error: BaseException,
        context: Optional[ErrorContext] = None
    ) -> ErrorInfo:
        """
        Classify an error and return structured error information.

        Args:
            error: The exception to classify
            context: Optional context information

        Returns:
            Structured error information
        """
        if isinstance(error, UsageError):
            return ErrorInfo(
                category=ErrorCategory.USAGE,
                severity=ErrorSeverity.MEDIUM,
                message="Invalid usage",
                suggestion="Check the command-line flags and their combinations (see --help)",
                details=str(error),
                exit_code=2
            )

        elif isinstance(error, CapabilityError):
            return ErrorInfo(
                category=ErrorCategory.CAPABILITY,
                severity=ErrorSeverity.HIGH,
                message="Power backend unavailable",
                suggestion=(
                    "Run with --backend sim, or check that the powercap sysfs tree exists "
                    "and is readable/writable (MRCAP_POWERCAP_ROOT)"
                ),
                details=str(error)
            )

        elif isinstance(error, InvariantViolation):
            return ErrorInfo(
                category=ErrorCategory.INVARIANT,
                severity=ErrorSeverity.CRITICAL,
                message="Internal invariant violated",
                suggestion="This is a bug in the runtime; please report it with the failing configuration",
                details=str(error),
                user_actionable=False
            )

        elif isinstance(error, WorkloadError):
            return ErrorInfo(
                category=ErrorCategory.WORKLOAD,
                severity=ErrorSeverity.HIGH,
                message="Benchmark run failed",
                suggestion="Check the logs for the failing cell and its parameters",
                details=str(error)
            )

        elif isinstance(error, (FileNotFoundError, PermissionError, IsADirectoryError)):
            return ErrorInfo(
                category=ErrorCategory.IO,
                severity=ErrorSeverity.MEDIUM,
                message="File access failed",
                suggestion="Check that the input path exists and output directories are writable",
                details=str(error)
            )

        # Handle validation errors
        elif 'ValidationError' in error.__class__.__name__:
            return ErrorInfo(
                category=ErrorCategory.USAGE,
                severity=ErrorSeverity.MEDIUM,
                message="Parameter validation failed",
                suggestion="Check parameter types and values",
                details=str(error),
                exit_code=2
            )

        # Handle configuration errors
        elif 'ConfigurationError' in error.__class__.__name__:
            return ErrorInfo(
                category=ErrorCategory.CONFIGURATION,
                severity=ErrorSeverity.CRITICAL,
                message="Configuration error",
                suggestion="Check environment variables and configuration settings",
                details=str(error)
            )

        else:
            return ErrorInfo(
                category=ErrorCategory.UNKNOWN,
                severity=ErrorSeverity.MEDIUM,
                message="Unexpected error occurred",
                suggestion="Check logs for more details and try again",
                details=str(error),
                user_actionable=False
            )


class ErrorStatistics:
    """Tracks success and error counts per operation."""

    def __init__(self):
        """Initialize error statistics."""
        self.operation_stats: Dict[str, Dict[str, Any]] = {}
        self.error_counts: Dict[str, int] = {}
        self.start_time = time.monotonic()

    def _stats_for(self, operation: str) -> Dict[str, Any]:
        if operation not in self.operation_stats:
            self.operation_stats[operation] = {
                "success_count": 0,
                "error_count": 0,
                "total_duration": 0.0,
                "avg_duration": 0.0
            }
        return self.operation_stats[operation]

    def record_success(self, operation: str, duration: float) -> None:
        """Record successful operation."""
        stats = self._stats_for(operation)
        stats["success_count"] += 1
        stats["total_duration"] += duration
        stats["avg_duration"] = stats["total_duration"] / stats["success_count"]

    def record_error(self, operation: str, error_category: ErrorCategory) -> None:
        """Record error for operation."""
        self._stats_for(operation)["error_count"] += 1

        category_key = error_category.value
        self.error_counts[category_key] = self.error_counts.get(category_key, 0) + 1

    def get_statistics(self) -> Dict[str, Any]:
        """Get comprehensive statistics."""
        return {
            "uptime_seconds": time.monotonic() - self.start_time,
            "operation_stats": {k: v.copy() for k, v in self.operation_stats.items()},
            "error_counts_by_category": self.error_counts.copy(),
            "total_operations": sum(
                stats["success_count"] + stats["error_count"]
                for stats in self.operation_stats.values()
            ),
            "total_errors": sum(self.error_counts.values())
        }
