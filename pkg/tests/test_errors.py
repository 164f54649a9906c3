"""Tests for the error taxonomy and exit-code mapping."""

import json

import pydantic
import pytest

from core.errors import (
    BracketNotFoundError,
    DegenerateMetricError,
    DescriptorError,
    ErrorCategory,
    ExitCode,
    ExpressionSyntaxError,
    FieldDomainError,
    GridError,
    InternalError,
    OutOfSupportError,
    PreconditionError,
    SingularLocusError,
    ToeplitzError,
    WaveBreakingError,
    map_numeric_exception,
)


class TestErrorDetail:
    """Tests for structured error details."""

    def test_to_dict_includes_exit_code_and_details(self):
        """Test that the error document carries category, code and details."""
        # Setup
        error = SingularLocusError("mu vanishes", quantity="mu", value=0.0)

        # Test
        document = error.error_detail.to_dict()

        # Verify
        assert document["category"] == "singular"
        assert document["code"] == "SINGULAR_LOCUS"
        assert document["exit_code"] == 3
        assert document["details"] == {"quantity": "mu", "value": 0.0}

    def test_empty_details_are_omitted(self):
        """Test that errors without details produce no details key."""
        error = GridError("nx must be positive")

        assert "details" not in error.error_detail.to_dict()

    def test_syntax_error_reports_byte_offset(self):
        """Test that syntax errors name the offending byte offset."""
        error = ExpressionSyntaxError("Unexpected token", offset=4, source="u1 +* u2")

        assert error.offset == 4
        assert "byte 4" in str(error)
        assert error.error_detail.details["source"] == "u1 +* u2"


class TestExitCodes:
    """Tests for the exit-code contract."""

    @pytest.mark.parametrize(
        "error, code",
        [
            (DescriptorError(), ExitCode.INPUT),
            (GridError(), ExitCode.INPUT),
            (FieldDomainError(), ExitCode.NUMERIC),
            (WaveBreakingError(x=1.0, t=2.0, jacobian=-0.5), ExitCode.NUMERIC),
            (PreconditionError(), ExitCode.PRECONDITION),
            (DegenerateMetricError(), ExitCode.PRECONDITION),
            (InternalError(), ExitCode.INTERNAL),
        ],
    )
    def test_exit_code_by_error_type(self, error, code):
        """Test that each error type maps to its documented exit code."""
        assert error.exit_code == int(code)

    def test_degenerate_metric_keeps_its_code(self):
        """Test that the degenerate metric error is a precondition failure with its own code."""
        error = DegenerateMetricError("g12 = 0")

        assert isinstance(error, PreconditionError)
        assert error.error_detail.code == "DEGENERATE_METRIC"
        assert error.error_detail.category is ErrorCategory.PRECONDITION

    def test_out_of_support_is_a_bracket_failure(self):
        """Test that out-of-support is caught by bracket handlers."""
        error = OutOfSupportError("outside", x=3.0, t=0.5)

        assert isinstance(error, BracketNotFoundError)
        assert error.error_detail.category is ErrorCategory.SUPPORT
        assert error.error_detail.details == {"x": 3.0, "t": 0.5}


class TestMapNumericException:
    """Tests for foreign exception mapping."""

    def test_zero_division_maps_to_domain_error(self):
        """Test that ZeroDivisionError becomes a numeric domain error."""
        mapped = map_numeric_exception(ZeroDivisionError("division by zero"))

        assert isinstance(mapped, FieldDomainError)
        assert mapped.exit_code == 3

    def test_file_and_json_errors_map_to_descriptor_error(self):
        """Test that missing files and malformed JSON are input errors."""
        # Setup
        try:
            json.loads("{not json")
        except json.JSONDecodeError as e:
            decode_error = e

        # Test
        missing = map_numeric_exception(FileNotFoundError("fixtures/none.json"))
        malformed = map_numeric_exception(decode_error)

        # Verify
        assert isinstance(missing, DescriptorError)
        assert isinstance(malformed, DescriptorError)
        assert malformed.error_detail.details["original_error"] == "JSONDecodeError"

    def test_validation_error_maps_to_descriptor_error(self):
        """Test that pydantic validation failures are input errors."""

        class Model(pydantic.BaseModel):
            size: int

        with pytest.raises(pydantic.ValidationError) as exc_info:
            Model.model_validate({"size": "big"})

        mapped = map_numeric_exception(exc_info.value)

        assert isinstance(mapped, DescriptorError)
        assert mapped.exit_code == 2

    def test_library_errors_pass_through(self):
        """Test that typed errors are returned unchanged."""
        error = PreconditionError("not degenerate")

        assert map_numeric_exception(error) is error

    def test_unknown_errors_are_internal(self):
        """Test that unexpected exceptions map to the internal error."""
        mapped = map_numeric_exception(RuntimeError("boom"))

        assert isinstance(mapped, InternalError)
        assert isinstance(mapped, ToeplitzError)
        assert mapped.error_detail.details["original_error"] == "RuntimeError"
