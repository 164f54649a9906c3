"""Tests for bracketed root finding."""

import math

import numpy as np
import pytest

from core.errors import BracketNotFoundError
from core.rootfind import newton_bisection, scan_brackets


def _square_minus_two(x):
    return x * x - 2.0, 2.0 * x


class TestScanBrackets:
    """Test cases for the sign-change scan."""

    def test_sign_changes(self):
        """Test that non-finite samples never bracket."""
        values = np.array([1.0, -1.0, np.nan, 1.0, 2.0, -3.0])

        assert scan_brackets(values) == [0, 4]

    def test_exact_zero_brackets(self):
        """Test that a sampled zero counts as a sign change."""
        assert scan_brackets(np.array([0.0, 1.0, 2.0])) == [0]

    def test_no_change(self):
        assert scan_brackets(np.array([1.0, 2.0, 3.0])) == []


class TestNewtonBisection:
    """Test cases for safeguarded Newton iteration."""

    def test_converges(self):
        """Test convergence to sqrt(2) with a small residual."""
        # Test
        root = newton_bisection(_square_minus_two, 0.0, 2.0)

        # Verify
        assert root.x == pytest.approx(math.sqrt(2.0), abs=1e-12)
        assert root.residual < 1e-12
        assert root.slope == pytest.approx(2.0 * math.sqrt(2.0))

    def test_decreasing_function(self):
        """Test that brackets with g(lo) > 0 are reoriented."""
        root = newton_bisection(lambda x: (2.0 - x * x, -2.0 * x), 0.0, 2.0)

        assert root.x == pytest.approx(math.sqrt(2.0), abs=1e-12)

    def test_endpoint_root(self):
        """Test that a root at the bracket end returns without iterating."""
        root = newton_bisection(lambda x: (x - 1.0, 1.0), 1.0, 3.0)

        assert root.x == 1.0
        assert root.iterations == 0

    def test_triple_root(self):
        """Test convergence on a root where the slope vanishes."""
        root = newton_bisection(lambda x: (x**3, 3.0 * x**2), -1.0, 1.0 + 1e-3)

        assert abs(root.x) < 1e-4

    def test_no_bracket(self):
        """Test that equal end signs raise BracketNotFoundError."""
        with pytest.raises(BracketNotFoundError):
            newton_bisection(_square_minus_two, 2.0, 3.0)
