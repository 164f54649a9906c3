"""Core modules for Jordan-block quasilinear systems and their differential constraints."""

from core.errors import (
    ErrorCategory,
    ExitCode,
    ErrorDetail,
    ToeplitzError,
    ExpressionSyntaxError,
    UnknownIdentifierError,
    ArityMismatchError,
    DescriptorError,
    GridError,
    FieldDomainError,
    NonDifferentiableError,
    QuadratureError,
    SingularLocusError,
    BracketNotFoundError,
    OutOfSupportError,
    WaveBreakingError,
    ClosureError,
    StencilError,
    VerificationError,
    PreconditionError,
    DegenerateMetricError,
    InternalError,
    map_numeric_exception,
)
from core.settings import NumericsSettings, get_settings
from core.dual import Dual
from core.fieldfn import (
    Point,
    ScalarField,
    ExpressionField,
    ComputedField,
    parse_expression,
    constant_field,
)
from core.systems import BlockSpec, JordanSystem, faddeev_leverrier, cofactor_char_poly
from core.sampling import sample_points
from core.constraints import (
    ConstraintSpec,
    compat_residual_2x2,
    phi_closed_form_2x2,
    compat_residual_two_block,
    hardrod_phi,
    hardrod_f_residual,
    involution_residual,
)
from core.initial_data import ExpressionCurve, SplineCurve, InitialData
from core.catalog import CATALOG, create_system
from core.solutions import (
    Family,
    Variant,
    FamilyConfig,
    GridSpec,
    create_family,
    solve_sigma,
    eval_solution,
    jacobian_x_sigma,
    close_initial_data,
    eval_grid,
)
from core.hamiltonian import (
    HankelMetric2,
    build_metric,
    tsarev_residual,
    flatness_residual,
    theta,
    hamiltonian_report,
)
from core.verify import pde_residual, constraint_residual, convergence_order, adjudicate
from core.descriptors import load_system, load_constraint, load_family

__all__ = [
    # Errors
    "ErrorCategory",
    "ExitCode",
    "ErrorDetail",
    "ToeplitzError",
    "ExpressionSyntaxError",
    "UnknownIdentifierError",
    "ArityMismatchError",
    "DescriptorError",
    "GridError",
    "FieldDomainError",
    "NonDifferentiableError",
    "QuadratureError",
    "SingularLocusError",
    "BracketNotFoundError",
    "OutOfSupportError",
    "WaveBreakingError",
    "ClosureError",
    "StencilError",
    "VerificationError",
    "PreconditionError",
    "DegenerateMetricError",
    "InternalError",
    "map_numeric_exception",
    # Settings
    "NumericsSettings",
    "get_settings",
    # Fields
    "Dual",
    "Point",
    "ScalarField",
    "ExpressionField",
    "ComputedField",
    "parse_expression",
    "constant_field",
    # Systems
    "BlockSpec",
    "JordanSystem",
    "faddeev_leverrier",
    "cofactor_char_poly",
    "sample_points",
    "CATALOG",
    "create_system",
    # Constraints
    "ConstraintSpec",
    "compat_residual_2x2",
    "phi_closed_form_2x2",
    "compat_residual_two_block",
    "hardrod_phi",
    "hardrod_f_residual",
    "involution_residual",
    # Solutions
    "ExpressionCurve",
    "SplineCurve",
    "InitialData",
    "Family",
    "Variant",
    "FamilyConfig",
    "GridSpec",
    "create_family",
    "solve_sigma",
    "eval_solution",
    "jacobian_x_sigma",
    "close_initial_data",
    "eval_grid",
    # Hamiltonian
    "HankelMetric2",
    "build_metric",
    "tsarev_residual",
    "flatness_residual",
    "theta",
    "hamiltonian_report",
    # Verification
    "pde_residual",
    "constraint_residual",
    "convergence_order",
    "adjudicate",
    # Descriptors
    "load_system",
    "load_constraint",
    "load_family",
]
