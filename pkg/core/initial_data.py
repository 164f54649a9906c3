"""
Initial data curves.

A curve is a real function of one variable (sigma for initial profiles, a
field value such as u2 for the arbitrary functions f1 and c1). Curves accept
floats, numpy arrays or dual numbers so characteristic maps written once can
be differentiated and scanned in bulk.
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicSpline

from core.dual import Dual, Scalar, value_of
from core.errors import DescriptorError, OutOfSupportError
from core.fieldfn import ExpressionField, parse_expression

logger = logging.getLogger(__name__)

Support = Optional[Tuple[float, float]]


class Curve(ABC):
    """Real function of one variable with an exact first derivative."""

    name: str = "curve"

    @abstractmethod
    def __call__(self, y: Any) -> Any:
        """Value at a float, array or Dual."""

    def derivative(self, y: float) -> float:
        """First derivative at a float."""
        result = self(Dual.variable(y, 0, 1))
        return float(result.tangent[0]) if isinstance(result, Dual) else 0.0

    def slope(self, y: Scalar, step: float = 1e-5) -> Scalar:
        """
        First derivative at a float or Dual.

        The Dual tangent carries the second derivative, taken as a centered
        difference of exact first derivatives.
        """
        if not isinstance(y, Dual):
            return self.derivative(float(y))
        h = step * max(1.0, abs(y.value))
        second = (self.derivative(y.value + h) - self.derivative(y.value - h)) / (2.0 * h)
        return Dual(self.derivative(y.value), y.tangent * second)

    @property
    def support(self) -> Support:
        return None


class ExpressionCurve(Curve):
    """Curve given by an expression in one identifier."""

    def __init__(self, expression: ExpressionField, variable: str, name: str = "curve"):
        unknown = expression.free_variables - {variable}
        if unknown:
            raise DescriptorError(
                f"Curve '{name}' = '{expression.source}' may only use '{variable}', "
                f"found {sorted(unknown)}"
            )
        self.expression = expression
        self.variable = variable
        self.name = name

    @classmethod
    def parse(
        cls,
        src: str,
        variable: str,
        name: str,
        constants: Optional[Mapping[str, float]] = None,
    ) -> "ExpressionCurve":
        arity = int(variable[1:]) if variable.startswith("u") else 0
        return cls(parse_expression(src, arity, constants), variable, name)

    def __call__(self, y: Any) -> Any:
        return self.expression.evaluate({self.variable: y})

    def __repr__(self) -> str:
        return f"ExpressionCurve({self.name}={self.expression.source!r} of {self.variable})"


class SplineCurve(Curve):
    """Not-a-knot cubic spline with analytic derivative; undefined outside its knots."""

    def __init__(self, knots: Sequence[float], values: Sequence[float], name: str = "spline"):
        knots_array = np.asarray(knots, dtype=float)
        values_array = np.asarray(values, dtype=float)
        if knots_array.ndim != 1 or len(knots_array) < 4 or len(knots_array) != len(values_array):
            raise DescriptorError(f"Spline '{name}' needs at least 4 matching knots and values")
        order = np.argsort(knots_array)
        knots_array, values_array = knots_array[order], values_array[order]
        if np.any(np.diff(knots_array) <= 0.0):
            raise DescriptorError(f"Spline '{name}' knots must be strictly monotone")
        self.knots = knots_array
        self.values = values_array
        self.name = name
        self._spline = CubicSpline(knots_array, values_array, bc_type="not-a-knot")
        self._slope = self._spline.derivative(1)
        self._curvature = self._spline.derivative(2)
        span = knots_array[-1] - knots_array[0]
        self._slack = 1e-12 * max(1.0, span, float(np.max(np.abs(knots_array))))

    @property
    def support(self) -> Support:
        return float(self.knots[0]), float(self.knots[-1])

    def _check(self, y: Any) -> np.ndarray:
        array = np.asarray(y, dtype=float)
        lo, hi = self.knots[0] - self._slack, self.knots[-1] + self._slack
        if np.any(array < lo) or np.any(array > hi):
            raise OutOfSupportError(
                f"Spline '{self.name}' evaluated at {array} outside "
                f"[{self.knots[0]}, {self.knots[-1]}]"
            )
        return np.clip(array, self.knots[0], self.knots[-1])

    def __call__(self, y: Any) -> Any:
        if isinstance(y, Dual):
            clipped = float(self._check(y.value))
            return Dual(float(self._spline(clipped)), y.tangent * float(self._slope(clipped)))
        clipped = self._check(y)
        result = self._spline(clipped)
        return float(result) if np.ndim(result) == 0 else result

    def derivative(self, y: float) -> float:
        return float(self._slope(float(self._check(y))))

    def slope(self, y: Scalar, step: float = 1e-5) -> Scalar:
        if not isinstance(y, Dual):
            return self.derivative(float(y))
        clipped = float(self._check(y.value))
        return Dual(float(self._slope(clipped)), y.tangent * float(self._curvature(clipped)))


class ComposedCurve(Curve):
    """outer(inner(y))."""

    def __init__(self, outer: Curve, inner: Curve, name: str = "composed"):
        self.outer = outer
        self.inner = inner
        self.name = name

    def __call__(self, y: Any) -> Any:
        return self.outer(self.inner(y))

    @property
    def support(self) -> Support:
        return self.inner.support


def intersect_supports(supports: Sequence[Support]) -> Support:
    """Intersection of optional intervals (None is unbounded)."""
    bounded = [s for s in supports if s is not None]
    if not bounded:
        return None
    lo = max(s[0] for s in bounded)
    hi = min(s[1] for s in bounded)
    if lo > hi:
        raise DescriptorError(f"Initial data supports do not overlap: {bounded}")
    return lo, hi


@dataclass(frozen=True)
class ClosureReport:
    """Diagnostics of a closure integration."""

    sigma_range: Tuple[float, float]
    step: float
    produced: Tuple[str, ...]
    residuals: Dict[str, float]
    max_local_error: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "sigma_range": list(self.sigma_range),
            "step": self.step,
            "produced": list(self.produced),
            "residuals": dict(self.residuals),
            "max_local_error": self.max_local_error,
        }


@dataclass(frozen=True)
class InitialData:
    """
    Named sigma-curves u01..u0n plus field-variable functions (f1, c1).

    Only sigma-curves contribute to the support.
    """

    curves: Mapping[str, Curve] = field(default_factory=dict)
    functions: Mapping[str, Curve] = field(default_factory=dict)
    closure: Optional[ClosureReport] = None

    def get(self, name: str) -> Curve:
        if name in self.curves:
            return self.curves[name]
        if name in self.functions:
            return self.functions[name]
        raise DescriptorError(f"Initial data has no function '{name}'")

    def has(self, name: str) -> bool:
        return name in self.curves or name in self.functions

    def merged(
        self,
        curves: Optional[Mapping[str, Curve]] = None,
        functions: Optional[Mapping[str, Curve]] = None,
        closure: Optional[ClosureReport] = None,
    ) -> "InitialData":
        return InitialData(
            curves={**self.curves, **(curves or {})},
            functions={**self.functions, **(functions or {})},
            closure=closure or self.closure,
        )

    @property
    def support(self) -> Support:
        """Sigma interval where every sigma-curve is defined."""
        return intersect_supports([curve.support for curve in self.curves.values()])

    def sample(self, names: Sequence[str], sigma: Scalar) -> Tuple[Scalar, ...]:
        return tuple(self.get(name)(sigma) for name in names)

    def values_at(self, names: Sequence[str], sigma: float) -> Tuple[float, ...]:
        return tuple(value_of(self.get(name)(sigma)) for name in names)
