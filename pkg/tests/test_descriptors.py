"""Tests for JSON descriptors."""

import json

import numpy as np
import pytest

from core.catalog import create_system
from core.constraints import phi_closed_form_2x2
from core.descriptors import (
    ConstraintDescriptor,
    FamilyDescriptor,
    SystemDescriptor,
    build_family_config,
    build_initial_data,
    field_descriptor,
    load_constraint,
    load_family,
    load_system,
    parse_anchors,
    read_json,
    validate,
)
from core.errors import DescriptorError
from core.fieldfn import Point, parse_expression
from core.solutions import Family, K1Reading, Variant


class TestSystemDescriptor:
    """Test cases for system descriptors."""

    def test_load_explicit_blocks(self, fixtures_dir):
        """Test that an explicit block file builds the named system."""
        system, descriptor = load_system(fixtures_dir / "systems" / "canonical.json")

        assert system.name == "canonical"
        assert system.n == 2
        assert descriptor.params == {}

    def test_explicit_matches_catalog(self, fixtures_dir):
        """Test that the explicit hard-rod blocks equal the catalog entry."""
        # Setup
        point = Point(u=(0.7, 1.1, 0.9, 0.4))

        # Test
        explicit, _ = load_system(fixtures_dir / "systems" / "hardrod.json")
        catalog, descriptor = load_system(fixtures_dir / "systems" / "hardrod_catalog.json")

        # Verify
        np.testing.assert_allclose(explicit.assemble(point), catalog.assemble(point))
        assert descriptor.params == {"a": 1.0}

    @pytest.mark.parametrize(
        "data",
        [
            {"blocks": [{"size": 2, "entries": ["u2", "1"]}], "catalog": "canonical"},
            {"n": 3, "blocks": [{"size": 2, "entries": ["u2", "1"]}]},
            {"blocks": [{"size": 2, "entries": ["u2"]}]},
            {"catalog": "canonical", "colour": "blue"},
            {},
        ],
    )
    def test_invalid_descriptors(self, data):
        """Test that inconsistent descriptors are input errors naming their source."""
        with pytest.raises(DescriptorError) as exc_info:
            validate(SystemDescriptor, data, "inline")

        assert exc_info.value.error_detail.details["source"] == "inline"
        assert exc_info.value.exit_code == 2

    def test_unnamed_system_is_custom(self):
        """Test the default name of explicit systems."""
        descriptor = validate(SystemDescriptor, {"blocks": [{"size": 1, "entries": ["u1"]}]})

        assert descriptor.build().name == "custom"


class TestFiles:
    """Test cases for file reading."""

    def test_malformed_json(self, tmp_path):
        """Test that malformed JSON is a descriptor error."""
        path = tmp_path / "broken.json"
        path.write_text("{\"blocks\": [")

        with pytest.raises(DescriptorError):
            read_json(path)

    def test_missing_file(self, tmp_path):
        """Test that a missing file is a descriptor error."""
        with pytest.raises(DescriptorError):
            load_system(tmp_path / "absent.json")


class TestConstraintDescriptor:
    """Test cases for constraint descriptors."""

    def test_hardrod_constants_merge(self, fixtures_dir):
        """Test that a comes from the system and k from the constraint file."""
        # Setup
        system, descriptor = load_system(fixtures_dir / "systems" / "hardrod.json")
        constraint = load_constraint(fixtures_dir / "constraints" / "hardrod_case1.json")
        point = Point(u=(1.2, 0.9, 1.5, 0.3))

        # Test
        f1, f2, f3 = constraint.fields(system, descriptor.params)

        # Verify
        assert f1.eval(point) == pytest.approx(0.6 / 2.2)
        assert f2.eval(point) == pytest.approx(-0.6 / 2.5)
        assert f3.eval(point) == 0.0

    def test_build_block_constraint(self, fixtures_dir):
        """Test one constraint per block on the last block variable."""
        system, descriptor = load_system(fixtures_dir / "systems" / "canonical.json")
        constraint = load_constraint(fixtures_dir / "constraints" / "canonical_exp.json")

        spec = constraint.build(system, descriptor.params)

        assert spec.variables == (1,)
        assert spec.labels == ("u2_x",)

    @pytest.mark.parametrize(
        "data",
        [
            {"phi": ["1"], "hardrod_f": ["1", "2", "3"]},
            {"hardrod_f": ["1", "2"]},
            {"params": {"k": 1.0}},
        ],
    )
    def test_invalid_constraints(self, data):
        """Test that constraint descriptors need exactly one well-formed source."""
        with pytest.raises(DescriptorError):
            validate(ConstraintDescriptor, data)


class TestFamilyDescriptor:
    """Test cases for family descriptors and closure anchors."""

    def test_defaults(self):
        """Test the default variant and k1 reading."""
        descriptor = validate(FamilyDescriptor, {"family": "hardrod1"})

        assert descriptor.variant is Variant.PAPER
        assert descriptor.k1 is K1Reading.H

    def test_curves_and_functions(self):
        """Test that u0N are sigma-curves and f1 a function of u2."""
        # Setup
        descriptor = validate(
            FamilyDescriptor,
            {
                "family": "canonical2",
                "params": {"c": 2.0},
                "initial_data": {"u01": 0, "u02": "c*s", "f1": "u2^2"},
            },
        )

        # Test
        data = build_initial_data(descriptor)

        # Verify
        assert sorted(data.curves) == ["u01", "u02"]
        assert data.get("u02")(1.5) == pytest.approx(3.0)
        assert data.get("f1")(3.0) == pytest.approx(9.0)

    def test_spline_curve(self):
        """Test that tabulated curves become splines with a support."""
        descriptor = validate(
            FamilyDescriptor,
            {
                "family": "canonical2",
                "initial_data": {
                    "u01": {"knots": [0, 1, 2, 3], "values": [0, 1, 4, 9]},
                    "u02": "s",
                    "f1": 1,
                },
            },
        )

        data = build_initial_data(descriptor)

        assert data.support == (0.0, 3.0)
        assert data.get("u01")(1.5) == pytest.approx(2.25)

    def test_unknown_initial_data(self):
        """Test that names the family does not know are rejected."""
        descriptor = validate(
            FamilyDescriptor, {"family": "canonical2", "initial_data": {"c1": 1}}
        )

        with pytest.raises(DescriptorError):
            build_initial_data(descriptor)

    def test_closure_must_produce_family_functions(self):
        """Test that the closure list must match what the family integrates."""
        descriptor = validate(
            FamilyDescriptor,
            {
                "family": "canonical2",
                "initial_data": {
                    "u01": "s",
                    "f1": 1,
                    "closure": {"produce": ["u01"], "sigma_range": [0, 1]},
                },
            },
        )

        with pytest.raises(DescriptorError):
            build_family_config(descriptor)

    def test_closed_config_keeps_free_data(self, fixtures_dir):
        """Test that closed configurations remember the free data."""
        config = load_family(fixtures_dir / "families" / "canonical2_closure.json")

        assert config.family is Family.CANONICAL2
        assert config.variant is Variant.REDERIVED
        assert config.free is not None
        assert not config.free.has("u02")
        assert config.data.has("u02")

    @pytest.mark.parametrize(
        "anchors, expected",
        [
            ({"u02(a)": 1.0}, ({"u02": 1.0}, -1.0)),
            ({"u02(b)": 1.0, "u04(b)": 2.0}, ({"u02": 1.0, "u04": 2.0}, 2.0)),
            ({"u02( 0.5 )": 3.0}, ({"u02": 3.0}, 0.5)),
            ({}, ({}, None)),
        ],
    )
    def test_parse_anchors(self, anchors, expected):
        """Test anchor locations a, b and numbers."""
        assert parse_anchors(anchors, (-1.0, 2.0)) == expected

    @pytest.mark.parametrize(
        "anchors", [{"u02(a)": 1.0, "u04(b)": 2.0}, {"u02": 1.0}, {"u02(mid)": 1.0}]
    )
    def test_invalid_anchors(self, anchors):
        """Test that anchors need one shared, readable location."""
        with pytest.raises(DescriptorError):
            parse_anchors(anchors, (-1.0, 2.0))


class TestFieldDescriptor:
    """Test cases for serializable field descriptions."""

    def test_expression_field(self):
        """Test the description of a parsed expression."""
        system = create_system("canonical")

        document = field_descriptor(parse_expression("exp(u1)", 2), system)

        assert document == {"kind": "expression", "system": "canonical", "source": "exp(u1)"}

    def test_exponential_integral_field(self):
        """Test that quadrature fields list their ingredients and serialize."""
        # Setup
        system = create_system("canonical")
        phi = phi_closed_form_2x2(system, parse_expression("1", 2), u1_ref=0.5)

        # Test
        document = field_descriptor(phi, system)

        # Verify
        assert document["kind"] == "exponential-integral"
        assert document["lambda"] == "u2"
        assert document["mu"] == "1"
        assert document["u1_ref"] == 0.5
        assert document["divide_by_mu"] is False
        json.dumps(document)
