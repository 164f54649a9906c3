"""
JSON descriptors.

Pydantic models for the system, constraint and family files read by the
command-line front end, and the builders that turn them into library
objects. Every parse or validation failure surfaces as DescriptorError.
"""

import json
import logging
import re
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Type, TypeVar, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from core.catalog import build_system, create_system
from core.constraints import ConstraintSpec, ExponentialIntegralField, hardrod_phi
from core.errors import DescriptorError, map_numeric_exception
from core.fieldfn import ScalarField, parse_expression
from core.initial_data import Curve, ExpressionCurve, InitialData, SplineCurve
from core.settings import NumericsSettings
from core.solutions import (
    FAMILIES,
    ClosureSpec,
    Family,
    FamilyConfig,
    K1Reading,
    Variant,
    closed_config,
)
from core.systems import JordanSystem

logger = logging.getLogger(__name__)

ModelT = TypeVar("ModelT", bound=BaseModel)

SIGMA_CURVE = re.compile(r"u0\d+")
ANCHOR_KEY = re.compile(r"^\s*(\w+)\s*\(\s*([^)]+?)\s*\)\s*$")

# Field variable each family's arbitrary function depends on
FUNCTION_VARIABLES: Dict[Family, Dict[str, str]] = {
    Family.CANONICAL2: {"f1": "u2"},
    Family.WDVV_T: {"f1": "u3"},
    Family.WDVV_S: {"f1": "u3"},
    Family.HARDROD1: {"c1": "u2"},
    Family.HARDROD2: {"c1": "u2"},
}


# Systems


class BlockDescriptor(BaseModel):
    """One Toeplitz block: eigenvalue expression first, then superdiagonals."""

    model_config = ConfigDict(extra="forbid")

    size: int = Field(..., ge=1, description="Block dimension")
    entries: List[str] = Field(..., description="Entry expressions in u1..un")

    @model_validator(mode="after")
    def _check_entries(self) -> "BlockDescriptor":
        if len(self.entries) != self.size:
            raise ValueError(f"block of size {self.size} needs {self.size} entries")
        return self


class SystemDescriptor(BaseModel):
    """Either a catalog name or explicit blocks, with named parameters."""

    model_config = ConfigDict(extra="forbid")

    name: str = Field("system", description="Name used in logs and reports")
    n: Optional[int] = Field(None, ge=1, description="Total number of fields")
    blocks: Optional[List[BlockDescriptor]] = Field(None, description="Toeplitz blocks")
    catalog: Optional[str] = Field(None, description="Catalog system name")
    params: Dict[str, float] = Field(default_factory=dict, description="Named constants")

    @model_validator(mode="after")
    def _check_source(self) -> "SystemDescriptor":
        if (self.blocks is None) == (self.catalog is None):
            raise ValueError("give exactly one of 'blocks' or 'catalog'")
        if self.blocks is not None and self.n is not None:
            total = sum(block.size for block in self.blocks)
            if total != self.n:
                raise ValueError(f"n={self.n} but block sizes sum to {total}")
        return self

    def build(self) -> JordanSystem:
        if self.catalog is not None:
            return create_system(self.catalog, self.params)
        assert self.blocks is not None
        name = self.name if self.name != "system" else "custom"
        return build_system([block.entries for block in self.blocks], name, self.params)


# Constraints


class ConstraintDescriptor(BaseModel):
    """Per-block constraint fields, or the three hard-rod numerators."""

    model_config = ConfigDict(extra="forbid")

    phi: Optional[List[str]] = Field(None, description="One constraint expression per block")
    hardrod_f: Optional[List[str]] = Field(
        None, min_length=3, max_length=3, description="Hard-rod numerators f1, f2, f3"
    )
    params: Dict[str, float] = Field(default_factory=dict, description="Extra named constants")

    @model_validator(mode="after")
    def _check_source(self) -> "ConstraintDescriptor":
        if (self.phi is None) == (self.hardrod_f is None):
            raise ValueError("give exactly one of 'phi' or 'hardrod_f'")
        return self

    def fields(self, system: JordanSystem, params: Mapping[str, float]) -> List[ScalarField]:
        """Parse the expressions at the system's arity."""
        constants = {**params, **self.params}
        sources = self.phi if self.phi is not None else self.hardrod_f
        return [parse_expression(src, system.n, constants) for src in sources or []]

    def build(
        self,
        system: JordanSystem,
        params: Mapping[str, float],
        settings: Optional[NumericsSettings] = None,
    ) -> ConstraintSpec:
        """
        Constraint specification for a system.

        Args:
            system: System the constraints are appended to
            params: Constants of the system descriptor
            settings: Guard source for the hard-rod quotient

        Returns:
            ConstraintSpec
        """
        fields = self.fields(system, params)
        if self.hardrod_f is not None:
            return hardrod_phi(fields, system, settings)
        return ConstraintSpec.for_blocks(system, fields)


# Families


class SplineDescriptor(BaseModel):
    """Tabulated curve."""

    model_config = ConfigDict(extra="forbid")

    knots: List[float]
    values: List[float]


CurveSource = Union[float, str, SplineDescriptor]


class ClosureDescriptor(BaseModel):
    model_config = ConfigDict(extra="forbid")

    produce: List[str] = Field(..., description="Functions the closure computes")
    sigma_range: Tuple[float, float] = Field(..., description="Closure interval")
    step: float = Field(1e-3, gt=0, description="RK4 step or tabulation spacing")
    anchors: Dict[str, float] = Field(
        default_factory=dict, description="Values such as 'u02(a)' at one anchor sigma"
    )


class InitialDataDescriptor(BaseModel):
    """Curves keyed by name plus an optional closure block."""

    curves: Dict[str, CurveSource] = Field(default_factory=dict)
    closure: Optional[ClosureDescriptor] = None

    @model_validator(mode="before")
    @classmethod
    def _split(cls, data: Any) -> Any:
        if isinstance(data, dict) and "curves" not in data:
            rest = {key: value for key, value in data.items() if key != "closure"}
            return {"curves": rest, "closure": data.get("closure")}
        return data


class FamilyDescriptor(BaseModel):
    model_config = ConfigDict(extra="forbid")

    family: Family
    variant: Variant = Variant.PAPER
    k1: K1Reading = K1Reading.H
    params: Dict[str, float] = Field(default_factory=dict)
    initial_data: InitialDataDescriptor = Field(default_factory=InitialDataDescriptor)


def _curve(name: str, source: CurveSource, variable: str, params: Mapping[str, float]) -> Curve:
    if isinstance(source, SplineDescriptor):
        return SplineCurve(source.knots, source.values, name)
    text = repr(float(source)) if isinstance(source, (int, float)) else source
    return ExpressionCurve.parse(text, variable, name, params)


def build_initial_data(descriptor: FamilyDescriptor) -> InitialData:
    """
    Curves of a family descriptor before any closure.

    Names u01, u02, ... are curves in s; the family's arbitrary function is
    a curve in its field variable.
    """
    variables = FUNCTION_VARIABLES[descriptor.family]
    curves: Dict[str, Curve] = {}
    functions: Dict[str, Curve] = {}
    for name, source in descriptor.initial_data.curves.items():
        if SIGMA_CURVE.fullmatch(name):
            curves[name] = _curve(name, source, "s", descriptor.params)
        elif name in variables:
            functions[name] = _curve(name, source, variables[name], descriptor.params)
        else:
            raise DescriptorError(
                f"Unknown initial data '{name}' for family '{descriptor.family.value}'",
                details={"known_functions": sorted(variables)},
            )
    return InitialData(curves=curves, functions=functions)


def parse_anchors(
    anchors: Mapping[str, float], sigma_range: Tuple[float, float]
) -> Tuple[Dict[str, float], Optional[float]]:
    """
    Split 'name(location)' anchor keys.

    Args:
        anchors: Keys like 'u02(a)', 'u02(b)' or 'u02(0.5)'
        sigma_range: Interval giving a and b

    Returns:
        (values by name, common anchor sigma or None when there are no anchors)
    """
    values: Dict[str, float] = {}
    locations = set()
    for key, value in anchors.items():
        match = ANCHOR_KEY.match(key)
        if not match:
            raise DescriptorError(f"Anchor key '{key}' is not of the form name(location)")
        name, where = match.groups()
        if where == "a":
            location = float(sigma_range[0])
        elif where == "b":
            location = float(sigma_range[1])
        else:
            try:
                location = float(where)
            except ValueError as e:
                raise DescriptorError(f"Anchor location '{where}' in '{key}'") from e
        values[name] = float(value)
        locations.add(location)
    if len(locations) > 1:
        raise DescriptorError(f"Anchors must share one sigma, got {sorted(locations)}")
    return values, (locations.pop() if locations else None)


def build_family_config(
    descriptor: FamilyDescriptor, settings: Optional[NumericsSettings] = None
) -> FamilyConfig:
    """
    Family configuration with closure applied.

    Args:
        descriptor: Validated family descriptor
        settings: Numeric settings for the closure integration

    Returns:
        FamilyConfig with complete initial data
    """
    data = build_initial_data(descriptor)
    closure = descriptor.initial_data.closure
    spec: Optional[ClosureSpec] = None
    if closure is not None:
        produces = set(FAMILIES[descriptor.family].produces)
        if set(closure.produce) != produces:
            raise DescriptorError(
                f"Closure for '{descriptor.family.value}' produces {sorted(produces)}, "
                f"descriptor asks for {sorted(closure.produce)}"
            )
        anchors, anchor_sigma = parse_anchors(closure.anchors, closure.sigma_range)
        spec = ClosureSpec(closure.sigma_range, closure.step, anchors, anchor_sigma)
    config = FamilyConfig(
        family=descriptor.family,
        data=data,
        params=dict(descriptor.params),
        variant=descriptor.variant,
        k1=descriptor.k1,
        free=data if spec else None,
        closure=spec,
    )
    return closed_config(config, settings)


# Files


def read_json(path: Union[str, Path]) -> Any:
    """Read a JSON file, mapping I/O and syntax failures to DescriptorError."""
    try:
        with open(path, encoding="utf-8") as handle:
            return json.load(handle)
    except (OSError, json.JSONDecodeError) as e:
        raise map_numeric_exception(e) from e


def validate(model: Type[ModelT], data: Any, source: str = "<input>") -> ModelT:
    try:
        return model.model_validate(data)
    except ValidationError as e:
        error = map_numeric_exception(e)
        error.error_detail.details["source"] = source
        raise error from e


def load_system(path: Union[str, Path]) -> Tuple[JordanSystem, SystemDescriptor]:
    """
    Load a system descriptor file.

    Returns:
        (system, descriptor) so callers can reuse the descriptor's constants
    """
    descriptor = validate(SystemDescriptor, read_json(path), str(path))
    system = descriptor.build()
    logger.info(f"Loaded system '{system.name}' (n={system.n}) from {path}")
    return system, descriptor


def load_constraint(path: Union[str, Path]) -> ConstraintDescriptor:
    return validate(ConstraintDescriptor, read_json(path), str(path))


def load_family(
    path: Union[str, Path], settings: Optional[NumericsSettings] = None
) -> FamilyConfig:
    """Load a family descriptor file and run its closure."""
    descriptor = validate(FamilyDescriptor, read_json(path), str(path))
    config = build_family_config(descriptor, settings)
    logger.info(
        f"Loaded family '{config.family.value}' ({config.variant.value}) from {path} "
        f"with data {sorted(config.data.curves) + sorted(config.data.functions)}"
    )
    return config


def field_descriptor(field: ScalarField, system: JordanSystem) -> Dict[str, Any]:
    """Serializable description of a field, with the quadrature ingredients when it has them."""
    if not isinstance(field, ExponentialIntegralField):
        return {"kind": "expression", "system": system.name, "source": field.source}
    return {
        "kind": "exponential-integral",
        "system": system.name,
        "lambda": field.lam.source,
        "mu": field.mu.source,
        "prefactor": field.prefactor.source,
        "u1_ref": field.u1_ref,
        "divide_by_mu": field.divide_by_mu,
        "source": field.source,
    }
