"""Tests for exact solution families."""

import io
import math

import numpy as np
import pytest

import core.solutions as solutions_module
from core.descriptors import load_family
from core.errors import (
    DescriptorError,
    GridError,
    OutOfSupportError,
    PreconditionError,
    WaveBreakingError,
)
from core.initial_data import ExpressionCurve, InitialData
from core.solutions import (
    Family,
    FamilyConfig,
    GridSpec,
    PointStatus,
    Variant,
    close_initial_data,
    create_family,
    eval_grid,
    eval_solution,
    jacobian_x_sigma,
    solve_sigma,
    write_grid_csv,
)


def _data(curves=None, functions=None):
    """Initial data from sigma-curve expressions and (expression, variable) functions."""
    return InitialData(
        curves={
            name: ExpressionCurve.parse(src, "s", name) for name, src in (curves or {}).items()
        },
        functions={
            name: ExpressionCurve.parse(src, variable, name)
            for name, (src, variable) in (functions or {}).items()
        },
    )


class TestCanonical2:
    """Test cases for the canonical 2x2 family."""

    @pytest.fixture
    def config(self):
        """u01 = 0, u02 = sigma, f1 = 1."""
        data = _data({"u01": "0", "u02": "s"}, {"f1": ("1", "u2")})
        return FamilyConfig(Family.CANONICAL2, data)

    def test_known_point(self, config):
        """Test u(1, 0.5) = (ln 2, 2) on the characteristic sigma = 2."""
        # Test
        root = solve_sigma(config, 1.0, 0.5)
        u = eval_solution(config, 1.0, 0.5)

        # Verify
        assert root.sigma == pytest.approx(2.0, abs=1e-10)
        assert root.jacobian == pytest.approx(0.5, abs=1e-10)
        np.testing.assert_allclose(u, [math.log(2.0), 2.0], atol=1e-10)

    def test_initial_time_is_identity(self, config):
        """Test that sigma = x at t = 0."""
        root = solve_sigma(config, 0.7, 0.0)

        assert root.sigma == 0.7
        np.testing.assert_allclose(eval_solution(config, 0.7, 0.0), [0.0, 0.7], atol=1e-14)

    def test_root_finder_runs_only_after_initial_time(self, config, mocker):
        """Test that t = 0 skips the bracket search and t > 0 refines a bracket."""
        # Setup
        spy = mocker.spy(solutions_module, "newton_bisection")

        # Test
        solve_sigma(config, 0.7, 0.0)
        calls_at_initial_time = spy.call_count
        solve_sigma(config, 1.0, 0.5)

        # Verify
        assert calls_at_initial_time == 0
        assert spy.call_count >= 1
        assert spy.spy_return.residual < 1e-10

    @pytest.mark.parametrize("offset", [-0.05, 0.05])
    def test_perturbed_guess_finds_same_root(self, config, offset):
        """Test that re-solving from a shifted guess returns the same sigma."""
        # Setup
        root = solve_sigma(config, 1.0, 0.5)

        # Test
        again = solve_sigma(config, 1.0, 0.5, guess=root.sigma + offset)

        # Verify
        assert again.sigma == pytest.approx(root.sigma, abs=1e-10)
        assert again.jacobian == pytest.approx(root.jacobian, abs=1e-10)

    def test_jacobian(self, config):
        """Test that x_sigma = 1 - t."""
        assert jacobian_x_sigma(config, 1.3, 0.25) == pytest.approx(0.75)

    def test_constraint_holds_along_x(self, config):
        """Test u2_x = exp(u1) by central differences."""
        # Setup
        x, t, h = 0.8, 0.4, 1e-4

        # Test
        plus = eval_solution(config, x + h, t)
        minus = eval_solution(config, x - h, t)
        centre = eval_solution(config, x, t)

        # Verify
        assert (plus[1] - minus[1]) / (2 * h) == pytest.approx(math.exp(centre[0]), rel=1e-6)

    def test_crossed_characteristics_break(self, config):
        """Test that x_sigma < 0 after the breaking time is reported."""
        with pytest.raises(WaveBreakingError):
            solve_sigma(config, 1.0, 2.0)

    def test_closure_integrates_u02(self, fixtures_dir):
        """Test that closing u01 = sigma with f1 = 1 gives u02 = exp(sigma) - 1."""
        # Setup
        config = load_family(fixtures_dir / "families" / "canonical2_closure.json")

        # Test
        u02 = config.data.get("u02")

        # Verify
        for sigma in np.linspace(0.0, 1.0, 11):
            assert u02(float(sigma)) == pytest.approx(math.expm1(sigma), abs=1e-8)
        assert config.data.closure is not None
        assert config.data.closure.produced == ("u02",)
        assert config.data.support == (0.0, 1.0)

    def test_closure_needs_anchor(self):
        """Test that a closure without anchor values is rejected."""
        config = FamilyConfig(Family.CANONICAL2, _data({"u01": "s"}, {"f1": ("1", "u2")}))

        with pytest.raises(DescriptorError):
            close_initial_data(config, config.data, (0.0, 1.0), 0.01)

    def test_outside_closed_support(self, fixtures_dir):
        """Test that points outside the tabulated data are out of support."""
        config = load_family(fixtures_dir / "families" / "canonical2_closure.json")

        with pytest.raises(OutOfSupportError):
            solve_sigma(config, 3.0, 0.0)

    def test_support_miss_is_not_retried(self, fixtures_dir, mocker):
        """Test that leaving the data support fails on the first search window."""
        # Setup
        family = create_family(load_family(fixtures_dir / "families" / "canonical2_closure.json"))
        spy = mocker.spy(family, "_solve_in_window")

        # Test
        with pytest.raises(OutOfSupportError):
            family.solve_sigma(3.0, 0.1)

        # Verify
        assert spy.call_count == 1


class TestGrid:
    """Test cases for grid evaluation and CSV output."""

    @pytest.fixture
    def config(self):
        """Canonical data with f1 = 3 so that exp(-u1) reaches zero at t = 1/3."""
        data = _data({"u01": "0", "u02": "s"}, {"f1": ("3", "u2")})
        return FamilyConfig(Family.CANONICAL2, data)

    def test_parse(self):
        """Test grid parsing and node placement."""
        grid = GridSpec.parse("0, 2, 3, 0, 1, 1")

        np.testing.assert_allclose(grid.xs, [0.0, 1.0, 2.0])
        np.testing.assert_allclose(grid.ts, [0.0])

    @pytest.mark.parametrize("text", ["0,1,0,0,1,1", "0,1,2,0,1", "0,1,two,0,1,1"])
    def test_malformed_grids(self, text):
        """Test that empty or malformed grids raise GridError."""
        with pytest.raises(GridError):
            GridSpec.parse(text)

    def test_statuses_flag_singular_points(self, config):
        """Test that failures become per-point statuses, t-major."""
        # Test
        rows = eval_grid(config, GridSpec.parse("0,1,3,0,0.5,2"))

        # Verify
        assert [(row.x, row.t) for row in rows[:3]] == [(0.0, 0.0), (0.5, 0.0), (1.0, 0.0)]
        assert all(row.status is PointStatus.OK for row in rows[:3])
        assert all(row.status is PointStatus.SINGULAR for row in rows[3:])
        assert all(math.isnan(value) for value in rows[3].u)

    def test_csv_format(self, config):
        """Test the CSV header, status column and nan cells."""
        # Setup
        rows = eval_grid(config, GridSpec.parse("0,1,2,0,0.5,2"))
        stream = io.StringIO()

        # Test
        write_grid_csv(rows, 2, stream)

        # Verify
        lines = stream.getvalue().splitlines()
        assert lines[0] == "x,t,status,u1,u2"
        assert lines[1] == "0,0,ok,0,0"
        assert lines[-1] == "1,0.5,singular,nan,nan"


class TestFamilies:
    """Test cases shared by the fixture families."""

    @pytest.mark.parametrize(
        "name, n",
        [
            ("canonical2.json", 2),
            ("canonical2_closure.json", 2),
            ("wdvv_t.json", 3),
            ("wdvv_s.json", 3),
            ("hardrod1.json", 4),
            ("hardrod2.json", 4),
        ],
    )
    def test_fixture_families_evaluate(self, fixtures_dir, name, n):
        """Test that every fixture family loads complete and evaluates to finite values."""
        # Setup
        config = load_family(fixtures_dir / "families" / name)
        family = create_family(config)

        # Test
        family.require_complete()
        point = family.evaluate(0.5, 0.25)

        # Verify
        assert family.n == n
        assert point.u.shape == (n,)
        assert np.all(np.isfinite(point.u))
        assert point.jacobian > 0.0

    def test_missing_parameters(self):
        """Test that parameterized families demand their constants."""
        config = FamilyConfig(Family.HARDROD1, InitialData(), params={"a": 1.0})

        with pytest.raises(DescriptorError):
            create_family(config)

    def test_typeset_hardrod2_needs_nonzero_k(self):
        """Test that the typeset HardRod2 form refuses k = 0."""
        config = FamilyConfig(
            Family.HARDROD2, InitialData(), params={"a": 1.0, "k": 0.0}, variant=Variant.PAPER
        )

        with pytest.raises(PreconditionError):
            create_family(config)

    def test_hardrod2_characteristic_forms_agree(self):
        """Test the typeset and log1p characteristics, and the k = 0 limit."""
        # Setup
        data = _data(
            {"u01": "3", "u02": "2 + 0.1*s", "u03": "5", "u04": "1"}, {"c1": ("1", "u2")}
        )

        def family(k, variant):
            config = FamilyConfig(
                Family.HARDROD2, data, params={"a": 1.0, "k": k}, variant=variant
            )
            return create_family(config)

        # Test
        paper = family(1.0, Variant.PAPER).characteristic(0.5, 0.3)
        rederived = family(1.0, Variant.REDERIVED).characteristic(0.5, 0.3)
        limit = family(0.0, Variant.REDERIVED).characteristic(0.5, 0.3)
        small = family(1e-9, Variant.REDERIVED).characteristic(0.5, 0.3)

        # Verify
        assert paper == pytest.approx(rederived, rel=1e-12)
        assert small == pytest.approx(limit, rel=1e-8)
