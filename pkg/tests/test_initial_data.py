"""Tests for initial-data curves."""

import numpy as np
import pytest

from core.dual import Dual
from core.errors import DescriptorError, OutOfSupportError
from core.initial_data import (
    ComposedCurve,
    ExpressionCurve,
    InitialData,
    SplineCurve,
    intersect_supports,
)


class TestExpressionCurve:
    """Test cases for expression curves."""

    def test_value_and_derivatives(self):
        """Test the exact first derivative and the dual second derivative."""
        # Setup
        curve = ExpressionCurve.parse("s^3", "s", "cube")

        # Test
        slope = curve.slope(Dual.variable(2.0, 0, 1))

        # Verify
        assert curve(2.0) == pytest.approx(8.0)
        assert curve.derivative(2.0) == pytest.approx(12.0)
        assert slope.value == pytest.approx(12.0)
        assert slope.tangent[0] == pytest.approx(12.0, rel=1e-6)
        assert curve.support is None

    def test_other_identifiers_rejected(self):
        """Test that a curve in u2 may not mention sigma."""
        with pytest.raises(DescriptorError):
            ExpressionCurve.parse("s + u2", "u2", "f1")


class TestSplineCurve:
    """Test cases for not-a-knot splines."""

    @pytest.fixture
    def cubic(self):
        """Tabulated s^3 on five knots, reproduced exactly by not-a-knot ends."""
        knots = [0.0, 1.0, 2.0, 3.0, 4.0]
        return SplineCurve(knots, [k**3 for k in knots], "cubic")

    def test_reproduces_cubic(self, cubic):
        """Test values and analytic derivatives inside the knots."""
        assert cubic(1.5) == pytest.approx(3.375)
        assert cubic.derivative(1.5) == pytest.approx(6.75)
        assert cubic.slope(Dual.variable(1.5, 0, 1)).tangent[0] == pytest.approx(9.0)

    def test_dual_value(self, cubic):
        """Test that dual evaluation carries the spline slope."""
        result = cubic(Dual.variable(2.5, 0, 2))

        assert result.value == pytest.approx(15.625)
        np.testing.assert_allclose(result.tangent, [18.75, 0.0])

    def test_outside_support(self, cubic):
        """Test that evaluation outside the knots raises OutOfSupportError."""
        assert cubic.support == (0.0, 4.0)

        with pytest.raises(OutOfSupportError):
            cubic(4.5)

    def test_unsorted_knots_are_sorted(self):
        """Test that knots may be given in any order."""
        spline = SplineCurve([3.0, 0.0, 2.0, 1.0], [9.0, 0.0, 4.0, 1.0])

        assert spline(1.5) == pytest.approx(2.25)

    @pytest.mark.parametrize(
        "knots, values",
        [([0.0, 1.0, 2.0], [0.0, 1.0, 2.0]), ([0.0, 1.0, 1.0, 2.0], [0.0, 1.0, 1.0, 2.0])],
    )
    def test_invalid_knots(self, knots, values):
        """Test that short or repeated knot vectors are rejected."""
        with pytest.raises(DescriptorError):
            SplineCurve(knots, values)


class TestInitialData:
    """Test cases for the initial-data container."""

    def test_composed_curve(self):
        """Test F(sigma) = f(u0(sigma)) and its support."""
        inner = SplineCurve([0.0, 1.0, 2.0, 3.0], [0.0, 1.0, 2.0, 3.0], "u03")
        outer = ExpressionCurve.parse("2*u3", "u3", "f1")

        composed = ComposedCurve(outer, inner)

        assert composed(1.5) == pytest.approx(3.0)
        assert composed.support == (0.0, 3.0)

    def test_support_from_sigma_curves_only(self):
        """Test that functions of field values do not restrict the support."""
        # Setup
        data = InitialData(
            curves={
                "u01": SplineCurve([0.0, 1.0, 2.0, 3.0], [0.0, 1.0, 4.0, 9.0]),
                "u02": SplineCurve([1.0, 2.0, 3.0, 4.0], [1.0, 2.0, 3.0, 4.0]),
            },
            functions={"f1": SplineCurve([10.0, 11.0, 12.0, 13.0], [0.0, 0.0, 0.0, 0.0])},
        )

        # Test / Verify
        assert data.support == (1.0, 3.0)
        assert data.values_at(["u01", "u02"], 2.0) == pytest.approx((4.0, 2.0))

    def test_missing_name(self):
        with pytest.raises(DescriptorError):
            InitialData().get("u01")

    def test_disjoint_supports(self):
        """Test that non-overlapping supports are rejected."""
        with pytest.raises(DescriptorError):
            intersect_supports([(0.0, 1.0), None, (2.0, 3.0)])
