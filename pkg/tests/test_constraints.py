"""Tests for compatibility residuals and closed-form constraints."""

import math

import numpy as np
import pytest

from core.catalog import build_system, create_system
from core.constraints import (
    ConstraintSpec,
    compat_residual_2x2,
    compat_residual_two_block,
    hardrod_case1_numerators,
    hardrod_case2_numerators,
    hardrod_f_residual,
    hardrod_phi,
    involution_residual,
    phi_closed_form_2x2,
    two_block_residual_labels,
)
from core.errors import ArityMismatchError, PreconditionError, SingularLocusError
from core.fieldfn import Point, parse_expression
from core.initial_data import ExpressionCurve
from core.sampling import sample_points


class TestCompatResidual2x2:
    """Test cases for the 2x2 block conditions."""

    @pytest.fixture
    def canonical(self):
        return create_system("canonical")

    def test_exponential_constraint_is_compatible(self, canonical):
        """Test that u2_x = exp(u1) satisfies both conditions."""
        # Setup
        constraint = ConstraintSpec.for_blocks(canonical, [parse_expression("exp(u1)", 2)])

        # Test
        r_a, r_b = compat_residual_2x2(canonical, constraint, Point(u=(0.4, 1.7)))

        # Verify
        assert r_a == 0.0
        assert r_b == pytest.approx(0.0, abs=1e-12)

    def test_counterexample_fails_eigenvalue_condition(self):
        """Test that a u1-dependent eigenvalue gives r_a = 1."""
        system = create_system("counterexample")
        constraint = ConstraintSpec.for_blocks(system, [parse_expression("1", 2)])

        r_a, _ = compat_residual_2x2(system, constraint, Point(u=(0.4, 1.7)))

        assert r_a == 1.0

    def test_needs_single_2x2_block(self):
        """Test that other shapes are precondition failures."""
        system = create_system("wdvv-t")
        constraint = ConstraintSpec.for_blocks(system, [parse_expression("1", 3)])

        with pytest.raises(PreconditionError):
            compat_residual_2x2(system, constraint, Point(u=(1.0, 1.0, 1.0)))

    def test_constraint_count_must_match_blocks(self, canonical):
        """Test that one field is needed per block."""
        with pytest.raises(ArityMismatchError):
            ConstraintSpec.for_blocks(canonical, [])


class TestClosedForm:
    """Test cases for the closed-form 2x2 constraint."""

    def test_canonical_gives_exponential(self):
        """Test that f1 = 1 on the canonical block gives exp(u1)."""
        # Setup
        system = create_system("canonical")

        # Test
        phi = phi_closed_form_2x2(system, parse_expression("1", 2))
        value, gradient = phi.value_and_grad(Point(u=(0.5, 2.0)))

        # Verify
        assert value == pytest.approx(math.exp(0.5), rel=1e-10)
        assert gradient[2] == pytest.approx(math.exp(0.5), rel=1e-10)
        assert gradient[3] == pytest.approx(0.0, abs=1e-10)

    def test_closed_form_is_compatible(self):
        """Test that the closed form satisfies the 2x2 conditions for mu = u1 + 1."""
        # Setup
        system = build_system([["u2", "u1 + 1"]], "metric-example")
        phi = phi_closed_form_2x2(system, parse_expression("u2^2", 2))
        constraint = ConstraintSpec.for_blocks(system, [phi])

        # Test
        for u in [(0.3, 0.8), (1.2, 1.5), (0.9, 2.0)]:
            point = Point(u=u)
            r_a, r_b = compat_residual_2x2(system, constraint, point)

            # Verify
            assert phi.eval(point) == pytest.approx(u[1] ** 2 * (u[0] + 1.0), rel=1e-9)
            assert r_a == 0.0
            assert r_b == pytest.approx(0.0, abs=1e-8)

    def test_not_linearly_degenerate_is_rejected(self):
        """Test that the closed form needs a linearly degenerate block."""
        with pytest.raises(PreconditionError):
            phi_closed_form_2x2(create_system("counterexample"), parse_expression("1", 2))

    def test_f1_must_depend_on_u2_only(self):
        """Test that f1 mentioning u1 is rejected."""
        with pytest.raises(PreconditionError):
            phi_closed_form_2x2(create_system("canonical"), parse_expression("u1", 2))

    def test_vanishing_mu_on_path_is_singular(self):
        """Test that quadrature across mu = 0 reports the singular locus."""
        system = build_system([["u2", "u1 - 1"]])
        phi = phi_closed_form_2x2(system, parse_expression("1", 2))

        with pytest.raises(SingularLocusError):
            phi.eval(Point(u=(1.0, 0.5)))

    @pytest.mark.parametrize("f1", ["1", "u2", "u2^2"])
    def test_canonical_closed_form_is_compatible(self, f1):
        """Test that phi = f1(u2) exp(u1) satisfies both conditions at 100 points."""
        # Setup
        system = create_system("canonical")
        phi = phi_closed_form_2x2(system, parse_expression(f1, 2))
        constraint = ConstraintSpec.for_blocks(system, [phi])

        # Test
        residuals = [
            compat_residual_2x2(system, constraint, point)
            for point in sample_points(2, 100, (0.5, 2.0), seed=11)
        ]

        # Verify
        np.testing.assert_allclose(residuals, 0.0, atol=1e-9)


class TestTwoBlock:
    """Test cases for the two-block residual."""

    def test_labels_match_residual_length(self):
        """Test that every component has a label."""
        # Setup
        system = create_system("hard-rod", {"a": 1.0})
        phi1 = parse_expression("u2 - u4", 4)
        phi2 = parse_expression("u1*u3", 4)

        # Test
        residual = compat_residual_two_block(system, phi1, phi2, Point(u=(0.7, 1.1, 0.9, 0.4)))

        # Verify
        assert len(residual) == len(two_block_residual_labels(2, 2))
        np.testing.assert_allclose(residual[:2], 0.0, atol=1e-12)

    def test_hardrod_case1_constraint_is_compatible(self):
        """Test the two-block conditions for the first integrated hard-rod case."""
        # Setup
        system = create_system("hard-rod", {"a": 1.0})
        c1 = ExpressionCurve.parse("1", "u2", "c1")
        constraint = hardrod_phi(hardrod_case1_numerators(c1, k=1.0, a=1.0), system)
        phi1, phi2 = constraint.fields[0], constraint.fields[1]

        def separated(point):
            gap = np.diff(system.block_eigenvalues(point))[0]
            return abs(point.u[1] - point.u[3]) > 0.1 and abs(gap) > 0.05

        points = [p for p in sample_points(4, 2000, (0.5, 2.0), seed=13) if separated(p)]

        # Test
        residuals = [compat_residual_two_block(system, phi1, phi2, p) for p in points[:100]]

        # Verify
        assert len(points) >= 100
        np.testing.assert_allclose(residuals, 0.0, atol=1e-9)

    def test_requires_two_blocks(self):
        """Test that one block is a precondition failure."""
        system = create_system("canonical")
        phi = parse_expression("1", 2)

        with pytest.raises(PreconditionError):
            compat_residual_two_block(system, phi, phi, Point(u=(1.0, 1.0)))


class TestHardRod:
    """Test cases for the hard-rod numerator conditions."""

    @pytest.fixture
    def c1(self):
        return ExpressionCurve.parse("1", "u2", "c1")

    @pytest.fixture
    def point(self):
        return Point(u=(1.2, 0.9, 1.5, 0.3))

    def test_case1_numerators_are_compatible(self, c1, point):
        """Test that the first integrated case satisfies the corrected conditions."""
        f1, f2, f3 = hardrod_case1_numerators(c1, k=1.0, a=1.0)

        residual = hardrod_f_residual(f1, f2, f3, point, a=1.0)

        np.testing.assert_allclose(residual, 0.0, atol=1e-12)

    def test_case1_fails_printed_sign(self, c1, point):
        """Test that the typeset sign breaks the middle condition."""
        f1, f2, f3 = hardrod_case1_numerators(c1, k=1.0, a=1.0)

        r1, r2, _ = hardrod_f_residual(f1, f2, f3, point, a=1.0, printed=True)

        assert r1 == pytest.approx(0.0, abs=1e-12)
        assert abs(r2) > 1e-3

    def test_case2_numerators_are_compatible(self, c1, point):
        """Test that the second integrated case satisfies the corrected conditions."""
        f1, f2, f3 = hardrod_case2_numerators(c1, k=1.0)

        residual = hardrod_f_residual(f1, f2, f3, point, a=1.0)

        np.testing.assert_allclose(residual, 0.0, atol=1e-12)

    def test_expression_numerators_match(self, point):
        """Test parsed numerators against the built-in ones."""
        f = [
            parse_expression(src, 4, {"a": 1.0, "k": 1.0})
            for src in ("(u2 - u4)/(u1 + a)", "-k*(u2 - u4)/(u3 + a)", "0")
        ]

        residual = hardrod_f_residual(*f, point, a=1.0)

        np.testing.assert_allclose(residual, 0.0, atol=1e-12)

    def test_coinciding_u2_u4_is_singular(self, c1):
        """Test that u2 = u4 is rejected."""
        f1, f2, f3 = hardrod_case1_numerators(c1, k=1.0, a=1.0)

        with pytest.raises(SingularLocusError):
            hardrod_f_residual(f1, f2, f3, Point(u=(1.0, 0.5, 1.0, 0.5)), a=1.0)

    def test_hardrod_phi_divides_by_speed_gap(self, point):
        """Test phi = f / (lambda2 - lambda1) on the constrained variables."""
        # Setup
        system = create_system("hard-rod", {"a": 1.0})
        f = [parse_expression(src, 4) for src in ("1", "2", "3")]

        # Test
        constraint = hardrod_phi(f, system)

        # Verify
        gap = system.block_eigenvalues(point)[1] - system.block_eigenvalues(point)[0]
        assert constraint.variables == (1, 3, 2)
        assert constraint.fields[1].eval(point) == pytest.approx(2.0 / gap)


class TestInvolution:
    """Test cases for the cross-differentiation residual."""

    def test_canonical_exponential_vanishes(self):
        """Test that a compatible constraint gives a zero residual."""
        system = create_system("canonical")
        constraint = ConstraintSpec.for_blocks(system, [parse_expression("exp(u1)", 2)])

        residual = involution_residual(system, constraint, Point(u=(0.4, 1.7)))

        np.testing.assert_allclose(residual, 0.0, atol=1e-12)

    def test_counterexample_does_not_vanish(self):
        """Test that the same constraint on the counterexample leaves a residual."""
        system = create_system("counterexample")
        constraint = ConstraintSpec.for_blocks(system, [parse_expression("exp(u1)", 2)])

        residual = involution_residual(system, constraint, Point(u=(0.4, 1.7)))

        assert residual[0] == pytest.approx(math.exp(0.8))

    def test_rows_with_free_derivatives_rejected(self):
        """Test that a constraint on the first block variable is refused."""
        system = create_system("canonical")
        constraint = ConstraintSpec((parse_expression("1", 2),), (0,))

        with pytest.raises(PreconditionError):
            involution_residual(system, constraint, Point(u=(1.0, 1.0)))
