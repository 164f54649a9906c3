"""Tests for Hankel metrics and the Hamiltonian conditions."""

import math

import numpy as np
import pytest

from core.catalog import build_system, create_system
from core.errors import DegenerateMetricError, PreconditionError
from core.fieldfn import Point, constant_field, parse_expression
from core.hamiltonian import (
    HankelMetric2,
    build_metric,
    flatness_residual,
    hamiltonian_report,
    theta,
    tsarev_residual,
)
from core.sampling import sample_points


class TestBuildMetric:
    """Test cases for metric construction."""

    def test_canonical_metric(self):
        """Test that f1 = 1 on the canonical block gives g12 = exp(u1)."""
        metric = build_metric(create_system("canonical"), parse_expression("1", 2))

        assert metric.g12.eval(Point(u=(0.4, 1.3))) == pytest.approx(math.exp(0.4), rel=1e-10)
        np.testing.assert_allclose(
            metric.matrix(Point(u=(0.0, 1.0))), [[0.0, 1.0], [1.0, 0.0]], atol=1e-12
        )

    def test_mu_cancels_exponential(self):
        """Test that lambda = u2, mu = u1 + 1 gives g12 = f1."""
        system = build_system([["u2", "u1 + 1"]], "metric-example")

        metric = build_metric(system, parse_expression("1", 2))

        assert metric.g12.eval(Point(u=(1.0, 0.5))) == pytest.approx(1.0, rel=1e-10)

    def test_zero_f1_is_degenerate(self):
        """Test that f1 = 0 makes det g vanish."""
        with pytest.raises(DegenerateMetricError):
            build_metric(create_system("canonical"), parse_expression("0", 2))

    def test_not_linearly_degenerate(self):
        """Test that the counterexample has no metric."""
        with pytest.raises(PreconditionError):
            build_metric(create_system("counterexample"), parse_expression("1", 2))


class TestTsarevResidual:
    """Test cases for the symmetry and covariant conditions."""

    def test_canonical_metric_is_hamiltonian(self):
        """Test that both residuals vanish for the canonical metric."""
        # Setup
        system = create_system("canonical")
        metric = build_metric(system, parse_expression("1", 2))

        # Test
        for point in sample_points(2, 5, seed=1):
            residual = tsarev_residual(system, metric, point)

            # Verify
            assert residual.r_sym == pytest.approx(0.0, abs=1e-12)
            assert residual.r_cov < 1e-9

    def test_constant_metric_fails_covariant_condition(self):
        """Test that g12 = 1 is symmetric but not covariantly compatible."""
        system = create_system("canonical")
        metric = HankelMetric2(constant_field(1.0, 2))

        residual = tsarev_residual(system, metric, Point(u=(0.3, 1.2)))

        assert residual.r_sym == 0.0
        assert residual.r_cov == pytest.approx(1.0)


class TestCurvatureAndTheta:
    """Test cases for flatness and theta."""

    def test_canonical_metric_is_flat(self):
        """Test that the exp(u1) metric has vanishing scalar curvature."""
        metric = build_metric(create_system("canonical"), parse_expression("1", 2))

        assert flatness_residual(metric, Point(u=(0.3, 1.2))) < 1e-6

    def test_theta_coincides_with_phi(self):
        """Test that theta matches the closed-form constraint and its u1-slope is g12."""
        system = create_system("canonical")

        result = theta(system, parse_expression("1", 2), 0.0, Point(u=(0.6, 1.0)))

        assert result.difference == pytest.approx(0.0, abs=1e-12)
        assert result.g12 == pytest.approx(math.exp(0.6), rel=1e-10)
        assert not result.degenerate


class TestHamiltonianReport:
    """Test cases for the summary report."""

    def test_report_fields(self):
        """Test the report on the canonical block."""
        # Setup
        system = create_system("canonical")
        points = sample_points(2, 4, seed=2)

        # Test
        report = hamiltonian_report(system, parse_expression("1", 2), points, seed=2)

        # Verify
        assert report.system == "canonical"
        assert report.samples == 4
        assert report.seed == 2
        assert report.r_sym == pytest.approx(0.0, abs=1e-12)
        assert report.r_cov < 1e-9
        assert report.theta_phi == pytest.approx(0.0, abs=1e-12)
        assert report.notes == []
        assert report.model_dump(mode="json")["f1"] == "1"
