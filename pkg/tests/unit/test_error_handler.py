"""Unit tests for error classification and statistics."""

import pytest
from pydantic import BaseModel, Field, ValidationError

from app.config import ConfigurationError
from app.error_handler import (
    CapabilityError,
    ErrorCategory,
    ErrorClassifier,
    ErrorContext,
    ErrorInfo,
    ErrorSeverity,
    ErrorStatistics,
    InvariantViolation,
    MrcapError,
    UsageError,
    WorkloadError,
)


class _Params(BaseModel):
    reps: int = Field(ge=1)


class TestExceptionHierarchy:
    """Test the harness exception types."""

    @pytest.mark.parametrize("exc_type", [UsageError, CapabilityError, InvariantViolation, WorkloadError])
    def test_errors_derive_from_base(self, exc_type):
        """Test that every harness error is an MrcapError."""
        assert issubclass(exc_type, MrcapError)


class TestErrorClassifier:
    """Test cases for ErrorClassifier."""

    def test_usage_error(self):
        """Test that usage errors exit with code 2."""
        info = ErrorClassifier.classify_error(UsageError("bad flag"))

        assert info.category == ErrorCategory.USAGE
        assert info.exit_code == 2
        assert info.details == "bad flag"

    def test_capability_error_suggests_sim(self):
        """Test that capability errors point at the sim backend."""
        info = ErrorClassifier.classify_error(CapabilityError("no intel-rapl:0"))

        assert info.category == ErrorCategory.CAPABILITY
        assert info.severity == ErrorSeverity.HIGH
        assert "--backend sim" in info.suggestion
        assert info.exit_code == 1

    def test_invariant_violation(self):
        """Test that invariant violations are critical and not user actionable."""
        info = ErrorClassifier.classify_error(InvariantViolation("misrouted KV"))

        assert info.category == ErrorCategory.INVARIANT
        assert info.severity == ErrorSeverity.CRITICAL
        assert info.user_actionable is False

    def test_workload_error(self):
        """Test classification of a failed cell."""
        info = ErrorClassifier.classify_error(WorkloadError("cell failed"))

        assert info.category == ErrorCategory.WORKLOAD

    def test_file_not_found(self):
        """Test that missing files are IO errors."""
        info = ErrorClassifier.classify_error(FileNotFoundError("results.csv"))

        assert info.category == ErrorCategory.IO

    def test_pydantic_validation_error(self):
        """Test that parameter validation failures exit with code 2."""
        with pytest.raises(ValidationError) as exc_info:
            _Params(reps=0)

        info = ErrorClassifier.classify_error(exc_info.value)

        assert info.category == ErrorCategory.USAGE
        assert info.exit_code == 2

    def test_configuration_error(self):
        """Test classification of configuration errors."""
        info = ErrorClassifier.classify_error(ConfigurationError("bad env"))

        assert info.category == ErrorCategory.CONFIGURATION
        assert info.severity == ErrorSeverity.CRITICAL

    def test_unknown_error(self):
        """Test the fallback category."""
        info = ErrorClassifier.classify_error(RuntimeError("boom"), ErrorContext(operation="cell"))

        assert info.category == ErrorCategory.UNKNOWN
        assert info.details == "boom"


class TestErrorInfo:
    """Test cases for ErrorInfo rendering."""

    def test_format_includes_all_parts(self):
        """Test that message, suggestion and details are joined."""
        info = ErrorInfo(
            category=ErrorCategory.USAGE,
            severity=ErrorSeverity.MEDIUM,
            message="Invalid usage",
            suggestion="See --help",
            details="unknown flag --foo",
        )

        assert info.format() == "Invalid usage. Suggestion: See --help. Details: unknown flag --foo"

    def test_format_without_details(self):
        """Test rendering without details."""
        info = ErrorInfo(
            category=ErrorCategory.IO,
            severity=ErrorSeverity.LOW,
            message="File access failed",
            suggestion="",
        )

        assert info.format() == "File access failed"


class TestErrorStatistics:
    """Test cases for ErrorStatistics."""

    def test_success_and_error_counts(self):
        """Test per-operation and per-category counting."""
        stats = ErrorStatistics()
        stats.record_success("cell", 0.5)
        stats.record_success("cell", 1.5)
        stats.record_error("cell", ErrorCategory.WORKLOAD)

        result = stats.get_statistics()

        assert result["operation_stats"]["cell"]["success_count"] == 2
        assert result["operation_stats"]["cell"]["error_count"] == 1
        assert result["operation_stats"]["cell"]["avg_duration"] == 1.0
        assert result["error_counts_by_category"] == {"workload": 1}
        assert result["total_operations"] == 3
        assert result["total_errors"] == 1

    def test_empty_statistics(self):
        """Test statistics before anything was recorded."""
        result = ErrorStatistics().get_statistics()

        assert result["total_operations"] == 0
        assert result["total_errors"] == 0
        assert result["uptime_seconds"] >= 0
