"""
Exact solution families by the method of characteristics.

Each family maps a characteristic label sigma and time t to field values in
closed form. Evaluation at (x, t) first inverts the implicit characteristic
relation x = X(sigma, t) with a bracketed Newton search; closure ODEs turn
partially specified initial data into data compatible with the family's
differential constraints.
"""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, TextIO, Tuple

import numpy as np
from tenacity import (
    Retrying,
    retry_if_exception_type,
    retry_if_not_exception_type,
    stop_after_attempt,
)

from core import dual
from core.catalog import canonical_system, hardrod_system, wdvv_s_system, wdvv_t_system
from core.constraints import (
    ConstraintSpec,
    hardrod_case1_numerators,
    hardrod_case2_numerators,
    hardrod_phi,
    phi_closed_form_2x2,
)
from core.dual import Dual, value_of
from core.errors import (
    BracketNotFoundError,
    ClosureError,
    DescriptorError,
    FieldDomainError,
    GridError,
    NonDifferentiableError,
    OutOfSupportError,
    PreconditionError,
    SingularLocusError,
    ToeplitzError,
    WaveBreakingError,
)
from core.fieldfn import ComputedField, Env
from core.initial_data import ClosureReport, Curve, InitialData, SplineCurve
from core.integrators import integrate_rk4
from core.rootfind import newton_bisection, scan_brackets
from core.settings import NumericsSettings, get_settings
from core.systems import JordanSystem

logger = logging.getLogger(__name__)

SPEED_SAMPLES = 17


class Family(str, Enum):
    """Exact solution families."""

    CANONICAL2 = "canonical2"
    WDVV_T = "wdvv-t"
    WDVV_S = "wdvv-s"
    HARDROD1 = "hardrod1"
    HARDROD2 = "hardrod2"


class Variant(str, Enum):
    """Formula variant: as typeset, or re-derived along the characteristics."""

    PAPER = "paper"
    REDERIVED = "rederived"


class K1Reading(str, Enum):
    """Reading of the undefined k1 in the typeset HardRod1 closure."""

    U01 = "u01"
    H = "h"
    K = "k"


class PointStatus(str, Enum):
    OK = "ok"
    BROKEN = "broken"
    OUT_OF_SUPPORT = "out-of-support"
    SINGULAR = "singular"


@dataclass(frozen=True)
class ClosureSpec:
    """Where and how to close partially specified initial data."""

    sigma_range: Tuple[float, float]
    step: float
    anchors: Mapping[str, float] = field(default_factory=dict)
    anchor_sigma: Optional[float] = None


@dataclass(frozen=True)
class FamilyConfig:
    """
    Family, formula variant, named parameters and initial data.

    When closure is set, free holds the data before closing so that a
    different variant or k1 reading can be closed again from scratch.
    """

    family: Family
    data: InitialData
    params: Mapping[str, float] = field(default_factory=dict)
    variant: Variant = Variant.PAPER
    k1: K1Reading = K1Reading.H
    free: Optional[InitialData] = None
    closure: Optional[ClosureSpec] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "variant", Variant(self.variant))
        object.__setattr__(self, "k1", K1Reading(self.k1))

    def with_variant(self, variant: Variant) -> "FamilyConfig":
        return replace(self, variant=variant)

    def with_data(self, data: InitialData) -> "FamilyConfig":
        return replace(self, data=data)


@dataclass(frozen=True)
class SigmaSolution:
    """Root of the characteristic relation at (x, t)."""

    sigma: float
    residual: float
    jacobian: float


@dataclass(frozen=True)
class SolutionPoint:
    sigma: float
    jacobian: float
    u: np.ndarray


@dataclass(frozen=True)
class GridSpec:
    """Rectangular (x, t) grid; a count of 1 uses the lower end only."""

    x0: float
    x1: float
    nx: int
    t0: float
    t1: float
    nt: int

    def __post_init__(self) -> None:
        if self.nx < 1 or self.nt < 1:
            raise GridError(f"Grid counts must be positive, got nx={self.nx}, nt={self.nt}")

    @classmethod
    def parse(cls, text: str) -> "GridSpec":
        """Parse 'x0,x1,nx,t0,t1,nt'."""
        parts = [part.strip() for part in text.split(",")]
        if len(parts) != 6:
            raise GridError(f"Grid needs x0,x1,nx,t0,t1,nt, got '{text}'")
        try:
            return cls(
                float(parts[0]), float(parts[1]), int(parts[2]),
                float(parts[3]), float(parts[4]), int(parts[5]),
            )
        except ValueError as e:
            raise GridError(f"Malformed grid '{text}': {e}") from e

    @property
    def xs(self) -> np.ndarray:
        return np.linspace(self.x0, self.x1, self.nx) if self.nx > 1 else np.array([self.x0])

    @property
    def ts(self) -> np.ndarray:
        return np.linspace(self.t0, self.t1, self.nt) if self.nt > 1 else np.array([self.t0])

    def to_dict(self) -> Dict[str, Any]:
        return {
            "x0": self.x0, "x1": self.x1, "nx": self.nx,
            "t0": self.t0, "t1": self.t1, "nt": self.nt,
        }


@dataclass(frozen=True)
class GridRow:
    x: float
    t: float
    status: PointStatus
    u: Tuple[float, ...]


def _check_nonzero(value: Any, quantity: str, guard: float) -> None:
    magnitude = np.abs(value.value if isinstance(value, Dual) else np.asarray(value, dtype=float))
    if np.any(magnitude < guard):
        raise SingularLocusError(
            f"{quantity} vanishes", quantity=quantity, value=float(np.min(magnitude))
        )


def _check_positive(value: Any, quantity: str, guard: float) -> None:
    raw = value.value if isinstance(value, Dual) else np.asarray(value, dtype=float)
    if np.any(raw < guard):
        raise SingularLocusError(
            f"{quantity} must stay positive", quantity=quantity, value=float(np.min(raw))
        )


class SolutionFamily(ABC):
    """
    Closed-form family over a characteristic label sigma.

    Subclasses provide the characteristic map X(sigma, t) for float, array or
    Dual sigma, the field values at float sigma, the system and the
    differential constraints; root finding, Jacobians, grids and closure
    integration are shared.
    """

    family: Family
    n: int
    sigma_curves: Tuple[str, ...] = ()
    functions: Tuple[str, ...] = ()
    parameters: Tuple[str, ...] = ()
    produces: Tuple[str, ...] = ()

    def __init__(self, config: FamilyConfig, settings: Optional[NumericsSettings] = None):
        missing = [name for name in self.parameters if name not in config.params]
        if missing:
            raise DescriptorError(
                f"Family '{self.family.value}' needs parameters {missing}",
                details={"missing": missing},
            )
        self.config = config
        self.settings = settings or get_settings()
        self.guard = self.settings.singular_guard

    @property
    def data(self) -> InitialData:
        return self.config.data

    @property
    def variant(self) -> Variant:
        return self.config.variant

    def param(self, name: str) -> float:
        return float(self.config.params[name])

    def curve(self, name: str) -> Curve:
        return self.data.get(name)

    def require(self, data: InitialData, names: Sequence[str]) -> None:
        missing = [name for name in names if not data.has(name)]
        if missing:
            raise DescriptorError(
                f"Family '{self.family.value}' initial data lacks {missing}",
                details={"missing": missing},
            )

    def require_complete(self) -> None:
        self.require(self.data, self.sigma_curves + self.functions + self.produces)

    # Family-specific formulas

    @abstractmethod
    def characteristic(self, sigma: Any, t: float) -> Any:
        """X(sigma, t) for float, array or Dual sigma."""

    @abstractmethod
    def fields(self, sigma: float, t: float, jacobian: float) -> Tuple[float, ...]:
        """Field values at a characteristic label."""

    @abstractmethod
    def build_system(self) -> JordanSystem:
        """The quasilinear system the family solves."""

    @abstractmethod
    def build_constraint(self) -> ConstraintSpec:
        """Differential constraints the family satisfies."""

    @cached_property
    def system(self) -> JordanSystem:
        return self.build_system()

    @cached_property
    def constraint(self) -> ConstraintSpec:
        self.require_complete()
        return self.build_constraint()

    # Characteristics

    def jacobian(self, sigma: float, t: float) -> float:
        """dX/dsigma at fixed t."""
        result = self.characteristic(Dual.variable(sigma, 0, 1), t)
        return float(result.tangent[0]) if isinstance(result, Dual) else 0.0

    def _value_and_slope(self, x: float, t: float) -> Callable[[float], Tuple[float, float]]:
        def func(sigma: float) -> Tuple[float, float]:
            result = self.characteristic(Dual.variable(sigma, 0, 1), t)
            if isinstance(result, Dual):
                return result.value - x, float(result.tangent[0])
            return float(result) - x, 0.0

        return func

    def _scan(self, sigmas: np.ndarray, t: float) -> np.ndarray:
        try:
            values = np.asarray(self.characteristic(sigmas, t), dtype=float)
            return np.broadcast_to(values, sigmas.shape).copy()
        except ToeplitzError:
            scanned = np.empty_like(sigmas)
            for i, sigma in enumerate(sigmas):
                try:
                    scanned[i] = value_of(self.characteristic(float(sigma), t))
                except ToeplitzError:
                    scanned[i] = np.nan
            return scanned

    def _speed_bound(self, x: float, t: float) -> float:
        reach = 1.0 + 2.0 * abs(t)
        lo, hi = x - reach, x + reach
        support = self.data.support
        if support is not None:
            lo, hi = max(lo, support[0]), min(hi, support[1])
            if lo > hi:
                lo, hi = support
        sigmas = np.linspace(lo, hi, SPEED_SAMPLES)
        shift = np.abs(self._scan(sigmas, t) - sigmas) / abs(t)
        finite = shift[np.isfinite(shift)]
        return float(np.max(finite)) if finite.size else 1.0

    def _solve_in_window(
        self, x: float, t: float, half_width: float, guess: Optional[float]
    ) -> SigmaSolution:
        lo, hi = x - half_width, x + half_width
        support = self.data.support
        clipped = False
        if support is not None:
            clipped = lo < support[0] or hi > support[1]
            lo, hi = max(lo, support[0]), min(hi, support[1])
            if lo >= hi:
                raise OutOfSupportError(
                    f"Search window around x={x} misses the data support {support}", x=x, t=t
                )

        sigmas = np.linspace(lo, hi, self.settings.bracket_subdivisions + 1)
        residuals = self._scan(sigmas, t) - x
        brackets = scan_brackets(residuals)
        tolerance = self.settings.root_tolerance * (1.0 + abs(x))
        func = self._value_and_slope(x, t)

        if not brackets:
            steps = np.diff(residuals)
            steps = steps[np.isfinite(steps)]
            if steps.size and np.min(steps) <= 0.0:
                raise WaveBreakingError(x=x, t=t, jacobian=float(np.min(steps)))
            if clipped:
                raise OutOfSupportError(
                    f"No characteristic through (x={x}, t={t}) inside the data support", x=x, t=t
                )
            raise BracketNotFoundError(
                f"No sign change of X(sigma, {t}) - {x} on [{lo}, {hi}]", x=x, t=t
            )

        roots = [
            newton_bisection(
                func, sigmas[i], sigmas[i + 1], tolerance, self.settings.root_max_iterations
            )
            for i in brackets
        ]
        for root in roots:
            if root.slope <= 0.0:
                raise WaveBreakingError(x=x, t=t, jacobian=root.slope)
        anchor = x if guess is None else guess
        best = min(roots, key=lambda root: abs(root.x - anchor))
        logger.debug(
            f"sigma({x}, {t}) = {best.x} after {best.iterations} iterations, "
            f"|g| = {best.residual:.3e}"
        )
        return SigmaSolution(best.x, best.residual, best.slope)

    def solve_sigma(self, x: float, t: float, guess: Optional[float] = None) -> SigmaSolution:
        """
        Invert x = X(sigma, t).

        Args:
            x: Space coordinate
            t: Time
            guess: Previous root used to choose among brackets

        Returns:
            SigmaSolution
        """
        if t == 0.0:
            support = self.data.support
            if support is not None and not support[0] <= x <= support[1]:
                raise OutOfSupportError(f"x={x} outside the data support {support}", x=x, t=t)
            return SigmaSolution(float(x), 0.0, 1.0)

        half_width = 2.0 * abs(t) * (1.0 + self._speed_bound(x, t))
        retrying = Retrying(
            stop=stop_after_attempt(self.settings.bracket_attempts),
            retry=(
                retry_if_exception_type(BracketNotFoundError)
                & retry_if_not_exception_type(OutOfSupportError)
            ),
            reraise=True,
        )
        for attempt in retrying:
            with attempt:
                widening = 2.0 ** (attempt.retry_state.attempt_number - 1)
                return self._solve_in_window(x, t, half_width * widening, guess)
        raise BracketNotFoundError(x=x, t=t)

    def evaluate(self, x: float, t: float, guess: Optional[float] = None) -> SolutionPoint:
        """Field values at (x, t)."""
        root = self.solve_sigma(x, t, guess)
        values = self.fields(root.sigma, t, root.jacobian)
        return SolutionPoint(root.sigma, root.jacobian, np.array(values, dtype=float))

    # Closure

    def closure_rhs(self, data: InitialData) -> Callable[[float, np.ndarray], np.ndarray]:
        raise ClosureError(f"Family '{self.family.value}' has no closure ODE")

    def close(
        self,
        free: InitialData,
        sigma_range: Tuple[float, float],
        step: float,
        anchors: Mapping[str, float],
        anchor_sigma: Optional[float] = None,
    ) -> InitialData:
        """
        Tabulate the produced functions by RK4 from anchor values.

        Args:
            free: Data holding the functions the family leaves free
            sigma_range: (sigma0, sigma1)
            step: Nominal RK4 step
            anchors: Value of each produced function at anchor_sigma
            anchor_sigma: Anchor location (defaults to sigma0)

        Returns:
            InitialData with spline curves for the produced functions
        """
        self.require(free, self.sigma_curves + self.functions)
        lo, hi = float(sigma_range[0]), float(sigma_range[1])
        if not lo < hi:
            raise DescriptorError(f"Empty closure range [{lo}, {hi}]")
        s0 = lo if anchor_sigma is None else float(anchor_sigma)
        if not lo <= s0 <= hi:
            raise DescriptorError(f"Anchor sigma={s0} outside [{lo}, {hi}]")
        missing = [name for name in self.produces if name not in anchors]
        if missing:
            raise DescriptorError(f"Closure needs anchor values for {missing}")

        # at least three intervals so that the spline has four knots
        step = min(step, (hi - lo) / 3.0)
        rhs = self.closure_rhs(free)
        y0 = np.array([float(anchors[name]) for name in self.produces])
        tolerance = self.settings.ode_local_error
        pieces = []
        worst = 0.0
        if s0 > lo:
            left = integrate_rk4(rhs, s0, y0, lo, step, tolerance)
            pieces.append((left.grid[::-1], left.values[::-1]))
            worst = max(worst, left.max_local_error)
        if s0 < hi:
            right = integrate_rk4(rhs, s0, y0, hi, step, tolerance)
            start = 1 if pieces else 0
            pieces.append((right.grid[start:], right.values[start:]))
            worst = max(worst, right.max_local_error)
        grid = np.concatenate([piece[0] for piece in pieces])
        values = np.concatenate([piece[1] for piece in pieces])

        curves = {
            name: SplineCurve(grid, values[:, i], name) for i, name in enumerate(self.produces)
        }
        closed = free.merged(curves=curves)
        residuals = self._ode_residuals(closed, rhs, grid)
        report = ClosureReport((lo, hi), step, self.produces, residuals, worst)
        logger.info(
            f"Closed '{self.family.value}' data on [{lo}, {hi}] with step {step}: "
            f"residuals {residuals}"
        )
        return closed.merged(closure=report)

    def _ode_residuals(
        self, data: InitialData, rhs: Callable[[float, np.ndarray], np.ndarray], grid: np.ndarray
    ) -> Dict[str, float]:
        worst = {name: 0.0 for name in self.produces}
        for sigma in grid:
            state = np.array(data.values_at(self.produces, float(sigma)))
            slopes = rhs(float(sigma), state)
            for i, name in enumerate(self.produces):
                derivative = data.get(name).derivative(float(sigma))
                worst[name] = max(worst[name], abs(derivative - float(slopes[i])))
        return worst


class Canonical2Family(SolutionFamily):
    """
    General integral of the canonical 2x2 block u1_t = u2 u1_x + u2_x, u2_t = u2 u2_x.

    u2 is constant along x = sigma - u02 t and exp(-u1) decreases linearly
    with slope f1(u02).
    """

    family = Family.CANONICAL2
    n = 2
    sigma_curves = ("u01",)
    functions = ("f1",)
    produces = ("u02",)

    def characteristic(self, sigma: Any, t: float) -> Any:
        return sigma - self.curve("u02")(sigma) * t

    def fields(self, sigma: float, t: float, jacobian: float) -> Tuple[float, ...]:
        p = value_of(self.curve("u02")(sigma))
        rate = value_of(self.curve("f1")(p))
        argument = math.exp(-value_of(self.curve("u01")(sigma))) - rate * t
        _check_positive(argument, "exp(-u01) - f1*t", self.guard)
        return -math.log(argument), p

    def build_system(self) -> JordanSystem:
        return canonical_system()

    def build_constraint(self) -> ConstraintSpec:
        f1 = self.curve("f1")
        prefactor = ComputedField(2, lambda env: f1(env["u2"]), f"{f1.name}(u2)")
        phi = phi_closed_form_2x2(self.system, prefactor, 0.0, settings=self.settings)
        return ConstraintSpec.for_blocks(self.system, [phi])

    def closure_rhs(self, data: InitialData) -> Callable[[float, np.ndarray], np.ndarray]:
        u01, f1 = data.get("u01"), data.get("f1")

        def rhs(sigma: float, y: np.ndarray) -> np.ndarray:
            return np.array([value_of(f1(y[0])) * math.exp(value_of(u01(sigma)))])

        return rhs


class _PointwiseClosure(SolutionFamily):
    """Families whose closure tabulates f1 against u03 instead of solving an ODE."""

    sigma_curves = ("u01", "u02", "u03")
    produces = ("f1",)

    @abstractmethod
    def closure_value(self, data: InitialData, sigma: float) -> float:
        """f1(u03(sigma)) demanded by the constraint at t = 0."""

    def rate(self, sigma: Any) -> Any:
        return self.curve("f1")(self.curve("u03")(sigma))

    def close(
        self,
        free: InitialData,
        sigma_range: Tuple[float, float],
        step: float,
        anchors: Mapping[str, float],
        anchor_sigma: Optional[float] = None,
    ) -> InitialData:
        self.require(free, self.sigma_curves)
        lo, hi = float(sigma_range[0]), float(sigma_range[1])
        if not lo < hi:
            raise DescriptorError(f"Empty closure range [{lo}, {hi}]")
        count = max(3, int(math.ceil((hi - lo) / step - 1e-9)))
        grid = np.linspace(lo, hi, count + 1)
        u03 = free.get("u03")
        try:
            knots = [value_of(u03(float(sigma))) for sigma in grid]
            values = [self.closure_value(free, float(sigma)) for sigma in grid]
            f1 = SplineCurve(knots, values, "f1")
        except (DescriptorError, FieldDomainError, SingularLocusError) as e:
            raise ClosureError(
                f"Cannot tabulate f1 against u03: {e.error_detail.message}",
                details={"cause": e.error_detail.to_dict()},
            ) from e

        midpoints = 0.5 * (grid[:-1] + grid[1:])
        residual = max(
            abs(value_of(f1(value_of(u03(float(s))))) - self.closure_value(free, float(s)))
            for s in midpoints
        )
        report = ClosureReport((lo, hi), (hi - lo) / count, self.produces, {"f1": residual}, 0.0)
        logger.info(
            f"Tabulated f1 for '{self.family.value}' on [{lo}, {hi}]: residual {residual:.3e}"
        )
        return free.merged(functions={"f1": f1}, closure=report)


class WdvvTFamily(_PointwiseClosure):
    """
    Single 3x3 block with eigenvalue u2 and superdiagonals -u1, 0.

    u3 is constant along characteristics, u2 decreases with slope
    F = f1(u03); the typeset u1 is log-additive in the Jacobian, the
    re-derived one multiplicative.
    """

    family = Family.WDVV_T
    n = 3

    def characteristic(self, sigma: Any, t: float) -> Any:
        return sigma - self.curve("u02")(sigma) * t + 0.5 * self.rate(sigma) * t * t

    def fields(self, sigma: float, t: float, jacobian: float) -> Tuple[float, ...]:
        u01 = value_of(self.curve("u01")(sigma))
        u02 = value_of(self.curve("u02")(sigma))
        u03 = value_of(self.curve("u03")(sigma))
        rate = value_of(self.rate(sigma))
        if self.variant is Variant.PAPER:
            _check_positive(jacobian, "x_sigma", self.guard)
            u1 = math.log(jacobian) + u01
        else:
            u1 = u01 * jacobian
        return u1, u02 - rate * t, u03

    def closure_value(self, data: InitialData, sigma: float) -> float:
        u01 = value_of(data.get("u01")(sigma))
        slope = data.get("u03").derivative(sigma)
        if self.variant is Variant.PAPER:
            _check_nonzero(u01, "u01", self.guard)
            return slope / u01
        return u01 * slope

    def build_system(self) -> JordanSystem:
        return wdvv_t_system()

    def build_constraint(self) -> ConstraintSpec:
        f1 = self.curve("f1")
        guard = self.guard

        def phi(env: Env) -> Any:
            _check_nonzero(env["u1"], "u1", guard)
            return f1(env["u3"]) / env["u1"]

        return ConstraintSpec.for_blocks(
            self.system, [ComputedField(3, phi, f"{f1.name}(u3)/u1")]
        )


class WdvvSFamily(_PointwiseClosure):
    """
    Single 3x3 block with eigenvalue -u2^2/2 and superdiagonals u1 u2, u1^2.

    With P = u02 and q = 1 - f1(u03) P t, u2 = P/q and the characteristic is
    x = sigma + P^2 t/(2q).
    """

    family = Family.WDVV_S
    n = 3

    def _q(self, sigma: Any, t: float) -> Any:
        q = 1.0 - self.rate(sigma) * self.curve("u02")(sigma) * t
        _check_positive(q, "1 - f1*u02*t", self.guard)
        return q

    def characteristic(self, sigma: Any, t: float) -> Any:
        p = self.curve("u02")(sigma)
        return sigma + p * p * t / (2.0 * self._q(sigma, t))

    def fields(self, sigma: float, t: float, jacobian: float) -> Tuple[float, ...]:
        u01 = value_of(self.curve("u01")(sigma))
        p = value_of(self.curve("u02")(sigma))
        u03 = value_of(self.curve("u03")(sigma))
        q = value_of(self._q(sigma, t))
        rate = value_of(self.rate(sigma))
        u03_slope = self.curve("u03").derivative(sigma)
        _check_nonzero(u03_slope, "u03'", self.guard)
        if self.variant is Variant.PAPER:
            p_slope = self.curve("u02").derivative(sigma)
            rate_slope = self.curve("f1").derivative(u03) * u03_slope
            correction = (
                p * p * rate * t * (2.0 * p_slope + t * p * (rate_slope * p - rate * p_slope))
            ) / (2.0 * u03_slope * q * q)
            u1 = (u01 + correction) / q
        else:
            u1 = (p / q) * rate * jacobian / u03_slope
        return u1, p / q, u03

    def closure_value(self, data: InitialData, sigma: float) -> float:
        u01 = value_of(data.get("u01")(sigma))
        u02 = value_of(data.get("u02")(sigma))
        _check_nonzero(u02, "u02", self.guard)
        return u01 * data.get("u03").derivative(sigma) / u02

    def build_system(self) -> JordanSystem:
        return wdvv_s_system()

    def build_constraint(self) -> ConstraintSpec:
        f1 = self.curve("f1")
        guard = self.guard

        def phi(env: Env) -> Any:
            _check_nonzero(env["u1"], "u1", guard)
            return env["u2"] / env["u1"] * f1(env["u3"])

        return ConstraintSpec.for_blocks(
            self.system, [ComputedField(3, phi, f"u2/u1*{f1.name}(u3)")]
        )


class HardRod1Family(SolutionFamily):
    """
    Hard-rod solution with f3 = 0: u2 frozen, u3 = h - k t, u1 linear in t.

    Singular where h + a = k t or, for the closure, h u01 = a^2.
    """

    family = Family.HARDROD1
    n = 4
    sigma_curves = ("u01",)
    functions = ("c1",)
    parameters = ("a", "k", "h")
    produces = ("u02", "u04")

    def _denominator(self, t: float) -> float:
        a, k, h = self.param("a"), self.param("k"), self.param("h")
        value = h + a - k * t
        _check_nonzero(value, "h + a - k*t", self.guard)
        return value

    def characteristic(self, sigma: Any, t: float) -> Any:
        a, k, h = self.param("a"), self.param("k"), self.param("h")
        p = self.curve("u02")(sigma)
        u04 = self.curve("u04")(sigma)
        denominator = self._denominator(t)
        if self.variant is Variant.PAPER:
            return sigma + t * (k * p * t + h * p + a * u04) / denominator
        return sigma + t * (p * (h - k * t) + a * u04) / denominator

    def fields(self, sigma: float, t: float, jacobian: float) -> Tuple[float, ...]:
        a, k, h = self.param("a"), self.param("k"), self.param("h")
        u01 = value_of(self.curve("u01")(sigma))
        p = value_of(self.curve("u02")(sigma))
        u04 = value_of(self.curve("u04")(sigma))
        c = value_of(self.curve("c1")(p))
        u1 = u01 + (c * p * t if self.variant is Variant.PAPER else c * t)
        u4 = ((h + a) * u04 - p * k * t) / self._denominator(t)
        return u1, p, h - k * t, u4

    def build_system(self) -> JordanSystem:
        return hardrod_system(self.param("a"))

    def build_constraint(self) -> ConstraintSpec:
        numerators = hardrod_case1_numerators(self.curve("c1"), self.param("k"), self.param("a"))
        return hardrod_phi(numerators, self.system, self.settings)

    def closure_rhs(self, data: InitialData) -> Callable[[float, np.ndarray], np.ndarray]:
        a, k, h = self.param("a"), self.param("k"), self.param("h")
        u01_curve, c1 = data.get("u01"), data.get("c1")
        reading = self.config.k1
        guard = self.guard

        def rhs(sigma: float, y: np.ndarray) -> np.ndarray:
            u01 = value_of(u01_curve(sigma))
            denominator = h * u01 - a * a
            _check_nonzero(denominator, "h*u01 - a^2", guard)
            if self.variant is Variant.PAPER:
                k1 = {K1Reading.U01: u01, K1Reading.H: h, K1Reading.K: k}[reading]
                numerator = a + k1
            else:
                numerator = h + a
            c = value_of(c1(float(y[0])))
            return np.array([c * numerator / denominator, -k * (u01 + a) / denominator])

        return rhs


class HardRod2Family(SolutionFamily):
    """
    Hard-rod solution with f2_u3 = 0, f3 = k(u2 - u4).

    With D0 = u02 - u04, c = c1(u02) and w0 = u03 + a the fields are
    rational in t and the characteristic carries a logarithm; the typeset
    form divides by k, the re-derived form uses log1p with a k = 0 limit.
    """

    family = Family.HARDROD2
    n = 4
    sigma_curves = ("u01",)
    functions = ("c1",)
    parameters = ("a", "k")
    produces = ("u02", "u03", "u04")

    def __init__(self, config: FamilyConfig, settings: Optional[NumericsSettings] = None):
        super().__init__(config, settings)
        if self.variant is Variant.PAPER and self.param("k") == 0.0:
            raise PreconditionError(
                "The typeset HardRod2 characteristic divides by k; "
                "use the re-derived variant for k=0"
            )

    def characteristic(self, sigma: Any, t: float) -> Any:
        a, k = self.param("a"), self.param("k")
        p = self.curve("u02")(sigma)
        gap = p - self.curve("u04")(sigma)
        c = self.curve("c1")(p)
        w0 = self.curve("u03")(sigma) + a
        spread = w0 * (1.0 + c * gap * t)
        _check_nonzero(spread, "(u03+a)(1+c1*D0*t)", self.guard)
        if self.variant is Variant.PAPER:
            ratio = spread / (w0 + (k + c * w0) * gap * t)
            _check_positive(ratio, "characteristic log argument", self.guard)
            return sigma + p * t + (a / k) * dual.log(ratio)
        if k == 0.0:
            return sigma + p * t - a * gap * t / spread
        argument = k * gap * t / spread
        _check_positive(1.0 + argument, "1 + log1p argument", self.guard)
        return sigma + p * t - (a / k) * dual.log1p(argument)

    def fields(self, sigma: float, t: float, jacobian: float) -> Tuple[float, ...]:
        a, k = self.param("a"), self.param("k")
        u01 = value_of(self.curve("u01")(sigma))
        p = value_of(self.curve("u02")(sigma))
        u03 = value_of(self.curve("u03")(sigma))
        u04 = value_of(self.curve("u04")(sigma))
        c1 = self.curve("c1")
        c, c_slope = value_of(c1(p)), c1.derivative(p)
        gap = p - u04
        shape = c + gap * c_slope
        _check_nonzero(shape, "c1 + D0*c1'", self.guard)
        spread = 1.0 + c * gap * t
        _check_nonzero(spread, "1 + c1*D0*t", self.guard)
        u1 = u01 + c * c * (u01 + a) * gap * t / shape
        u3 = u03 + (k + c * (u03 + a)) * gap * t
        u4 = (u04 + p * c * gap * t) / spread
        return u1, p, u3, u4

    def build_system(self) -> JordanSystem:
        return hardrod_system(self.param("a"))

    def build_constraint(self) -> ConstraintSpec:
        numerators = hardrod_case2_numerators(self.curve("c1"), self.param("k"))
        return hardrod_phi(numerators, self.system, self.settings)

    def closure_rhs(self, data: InitialData) -> Callable[[float, np.ndarray], np.ndarray]:
        a, k = self.param("a"), self.param("k")
        u01_curve, c1 = data.get("u01"), data.get("c1")
        guard = self.guard

        def rhs(sigma: float, y: np.ndarray) -> np.ndarray:
            u01 = value_of(u01_curve(sigma))
            u02, u03, u04 = (float(v) for v in y)
            denominator = u01 * u03 - a * a
            _check_nonzero(denominator, "u01*u03 - a^2", guard)
            gap = u02 - u04
            c, c_slope = value_of(c1(u02)), c1.derivative(u02)
            shape = c + c_slope * gap
            _check_nonzero(shape, "c1 + c1'*(u02-u04)", guard)
            weight = (u01 + a) * (u03 + a) / denominator
            return np.array([c * c * weight * gap / shape, k * weight, c * weight * gap])

        return rhs


FAMILIES: Dict[Family, type] = {
    Family.CANONICAL2: Canonical2Family,
    Family.WDVV_T: WdvvTFamily,
    Family.WDVV_S: WdvvSFamily,
    Family.HARDROD1: HardRod1Family,
    Family.HARDROD2: HardRod2Family,
}


def create_family(
    config: FamilyConfig, settings: Optional[NumericsSettings] = None
) -> SolutionFamily:
    """
    Factory for the family implementation of a configuration.

    Args:
        config: Family configuration
        settings: Numeric settings

    Returns:
        SolutionFamily instance
    """
    return FAMILIES[Family(config.family)](config, settings)


def solve_sigma(
    fc: FamilyConfig,
    x: float,
    t: float,
    guess: Optional[float] = None,
    settings: Optional[NumericsSettings] = None,
) -> SigmaSolution:
    return create_family(fc, settings).solve_sigma(x, t, guess)


def eval_solution(
    fc: FamilyConfig, x: float, t: float, settings: Optional[NumericsSettings] = None
) -> np.ndarray:
    """Field vector u(x, t)."""
    return create_family(fc, settings).evaluate(x, t).u


def jacobian_x_sigma(
    fc: FamilyConfig, sigma: float, t: float, settings: Optional[NumericsSettings] = None
) -> float:
    return create_family(fc, settings).jacobian(sigma, t)


def close_initial_data(
    fc: FamilyConfig,
    free: InitialData,
    sigma_range: Tuple[float, float],
    step: float,
    anchors: Optional[Mapping[str, float]] = None,
    anchor_sigma: Optional[float] = None,
    settings: Optional[NumericsSettings] = None,
) -> InitialData:
    """
    Complete partially specified initial data for a family.

    Args:
        fc: Family configuration (its own data is ignored)
        free: Functions the family leaves free
        sigma_range: (sigma0, sigma1)
        step: RK4 step or tabulation spacing
        anchors: Values of the produced functions at anchor_sigma
        anchor_sigma: Anchor location (defaults to sigma0)
        settings: Numeric settings

    Returns:
        Completed InitialData carrying a ClosureReport
    """
    family = create_family(fc.with_data(free), settings)
    return family.close(free, sigma_range, step, anchors or {}, anchor_sigma)


def closed_config(
    fc: FamilyConfig, settings: Optional[NumericsSettings] = None
) -> FamilyConfig:
    """Apply the configured closure to the free data; no-op without a closure."""
    if fc.closure is None:
        return fc
    free = fc.free if fc.free is not None else fc.data
    closure = fc.closure
    data = close_initial_data(
        fc,
        free,
        closure.sigma_range,
        closure.step,
        closure.anchors,
        closure.anchor_sigma,
        settings,
    )
    return replace(fc, data=data, free=free)


def for_variant(
    fc: FamilyConfig, variant: Variant, settings: Optional[NumericsSettings] = None
) -> FamilyConfig:
    """Switch the formula variant, closing the data again under the new variant."""
    return closed_config(fc.with_variant(Variant(variant)), settings)


STATUS_BY_ERROR: Tuple[Tuple[type, PointStatus], ...] = (
    (OutOfSupportError, PointStatus.OUT_OF_SUPPORT),
    (WaveBreakingError, PointStatus.BROKEN),
    (BracketNotFoundError, PointStatus.BROKEN),
    (SingularLocusError, PointStatus.SINGULAR),
    (FieldDomainError, PointStatus.SINGULAR),
    (NonDifferentiableError, PointStatus.SINGULAR),
)


def classify_error(error: ToeplitzError) -> Optional[PointStatus]:
    """Grid status for a per-point failure, None for errors that must propagate."""
    for error_type, status in STATUS_BY_ERROR:
        if isinstance(error, error_type):
            return status
    return None


def eval_grid(
    fc: FamilyConfig, grid: GridSpec, settings: Optional[NumericsSettings] = None
) -> List[GridRow]:
    """
    Evaluate a family on a grid, t-major.

    Each row warm-starts sigma from its left neighbour; failures become
    per-point statuses.

    Args:
        fc: Family configuration with complete initial data
        grid: Grid specification
        settings: Numeric settings

    Returns:
        Rows ordered by t, then x
    """
    family = create_family(fc, settings)
    family.require_complete()
    rows: List[GridRow] = []
    nan_row = tuple([math.nan] * family.n)
    for t in grid.ts:
        guess: Optional[float] = None
        for x in grid.xs:
            try:
                point = family.evaluate(float(x), float(t), guess)
            except ToeplitzError as e:
                status = classify_error(e)
                if status is None:
                    raise
                logger.debug(f"({x}, {t}) flagged {status.value}: {e}")
                rows.append(GridRow(float(x), float(t), status, nan_row))
                guess = None
                continue
            guess = point.sigma
            rows.append(GridRow(float(x), float(t), PointStatus.OK, tuple(point.u.tolist())))
    counts = {status.value: sum(row.status is status for row in rows) for status in PointStatus}
    logger.info(f"Evaluated '{fc.family.value}' on {len(rows)} grid points: {counts}")
    return rows


def _format(value: float) -> str:
    # + 0.0 folds -0.0 into 0.0
    return "nan" if math.isnan(value) else f"{value + 0.0:.17g}"


def write_grid_csv(rows: Sequence[GridRow], n: int, stream: TextIO) -> None:
    """Write 'x,t,status,u1..un' with 17 significant digits."""
    header = ["x", "t", "status"] + [f"u{i + 1}" for i in range(n)]
    stream.write(",".join(header) + "\n")
    for row in rows:
        cells = [_format(row.x), _format(row.t), row.status.value]
        cells += [_format(value) for value in row.u]
        stream.write(",".join(cells) + "\n")
