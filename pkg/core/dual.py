"""
Forward-mode dual numbers.

A Dual carries a real value and a tangent vector of partial derivatives with
respect to the seeded variables. Elementary functions accept plain floats,
numpy arrays (value path only) or Duals.
"""

import math
from typing import Union

import numpy as np

from core.errors import NonDifferentiableError

Scalar = Union[float, "Dual"]


class Dual:
    """Value plus tangent vector."""

    __slots__ = ("value", "tangent")

    # numpy scalars defer to the reflected operators below
    __array_ufunc__ = None

    def __init__(self, value: float, tangent: np.ndarray):
        self.value = float(value)
        self.tangent = tangent

    @classmethod
    def variable(cls, value: float, index: int, size: int) -> "Dual":
        """Seed variable number ``index`` of ``size``."""
        tangent = np.zeros(size)
        tangent[index] = 1.0
        return cls(value, tangent)

    @classmethod
    def constant(cls, value: float, size: int) -> "Dual":
        return cls(value, np.zeros(size))

    def __repr__(self) -> str:
        return f"Dual({self.value!r}, {self.tangent!r})"

    # Arithmetic

    def __neg__(self) -> "Dual":
        return Dual(-self.value, -self.tangent)

    def __pos__(self) -> "Dual":
        return self

    def __add__(self, other: object) -> "Dual":
        if isinstance(other, Dual):
            return Dual(self.value + other.value, self.tangent + other.tangent)
        if isinstance(other, (int, float)):
            return Dual(self.value + other, self.tangent)
        return NotImplemented

    __radd__ = __add__

    def __sub__(self, other: object) -> "Dual":
        if isinstance(other, Dual):
            return Dual(self.value - other.value, self.tangent - other.tangent)
        if isinstance(other, (int, float)):
            return Dual(self.value - other, self.tangent)
        return NotImplemented

    def __rsub__(self, other: object) -> "Dual":
        if isinstance(other, (int, float)):
            return Dual(other - self.value, -self.tangent)
        return NotImplemented

    def __mul__(self, other: object) -> "Dual":
        if isinstance(other, Dual):
            return Dual(
                self.value * other.value,
                self.tangent * other.value + other.tangent * self.value,
            )
        if isinstance(other, (int, float)):
            return Dual(self.value * other, self.tangent * other)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other: object) -> "Dual":
        if isinstance(other, Dual):
            if other.value == 0.0:
                raise ZeroDivisionError("division by zero")
            quotient = self.value / other.value
            return Dual(quotient, (self.tangent - other.tangent * quotient) / other.value)
        if isinstance(other, (int, float)):
            if other == 0:
                raise ZeroDivisionError("division by zero")
            return Dual(self.value / other, self.tangent / other)
        return NotImplemented

    def __rtruediv__(self, other: object) -> "Dual":
        if isinstance(other, (int, float)):
            if self.value == 0.0:
                raise ZeroDivisionError("division by zero")
            quotient = other / self.value
            return Dual(quotient, -self.tangent * (quotient / self.value))
        return NotImplemented

    def __pow__(self, other: object) -> "Dual":
        if isinstance(other, (int, float, Dual)):
            return power(self, other)
        return NotImplemented

    def __rpow__(self, other: object) -> "Dual":
        if isinstance(other, (int, float)):
            return power(other, self)
        return NotImplemented


def value_of(x: Scalar) -> float:
    """Plain value of a float or Dual."""
    return x.value if isinstance(x, Dual) else float(x)


def derivative_of(x: Scalar, size: int) -> np.ndarray:
    """Tangent vector of a Dual, zeros for a constant."""
    return x.tangent if isinstance(x, Dual) else np.zeros(size)


def _lift(x: Dual, value: float, slope: float) -> Dual:
    return Dual(value, x.tangent * slope)


def _check_finite(value: object) -> None:
    if not np.all(np.isfinite(value)):
        raise OverflowError("result is not finite")


def exp(x: Scalar) -> Scalar:
    if isinstance(x, Dual):
        value = math.exp(x.value)
        return _lift(x, value, value)
    with np.errstate(over="ignore"):
        result = np.exp(x)
    _check_finite(result)
    return result


def log(x: Scalar) -> Scalar:
    if isinstance(x, Dual):
        if x.value <= 0.0:
            raise ValueError("math domain error")
        return _lift(x, math.log(x.value), 1.0 / x.value)
    if np.any(np.asarray(x) <= 0.0):
        raise ValueError("math domain error")
    return np.log(x)


def log1p(x: Scalar) -> Scalar:
    if isinstance(x, Dual):
        if x.value <= -1.0:
            raise ValueError("math domain error")
        return _lift(x, math.log1p(x.value), 1.0 / (1.0 + x.value))
    if np.any(np.asarray(x) <= -1.0):
        raise ValueError("math domain error")
    return np.log1p(x)


def sqrt(x: Scalar) -> Scalar:
    if isinstance(x, Dual):
        if x.value < 0.0:
            raise ValueError("math domain error")
        if x.value == 0.0:
            raise NonDifferentiableError("sqrt at 0")
        root = math.sqrt(x.value)
        return _lift(x, root, 0.5 / root)
    if np.any(np.asarray(x) < 0.0):
        raise ValueError("math domain error")
    return np.sqrt(x)


def sin(x: Scalar) -> Scalar:
    if isinstance(x, Dual):
        return _lift(x, math.sin(x.value), math.cos(x.value))
    return np.sin(x)


def cos(x: Scalar) -> Scalar:
    if isinstance(x, Dual):
        return _lift(x, math.cos(x.value), -math.sin(x.value))
    return np.cos(x)


def tanh(x: Scalar) -> Scalar:
    if isinstance(x, Dual):
        value = math.tanh(x.value)
        return _lift(x, value, 1.0 - value * value)
    return np.tanh(x)


def _is_integer(value: object) -> bool:
    return isinstance(value, (int, float)) and float(value).is_integer()


def power(base: Scalar, exponent: Scalar) -> Scalar:
    """
    base ** exponent.

    Integer exponents allow negative bases; real exponents need a positive base.
    """
    if isinstance(exponent, Dual):
        if value_of(base) <= 0.0:
            raise ValueError("math domain error")
        return exp(exponent * log(base))

    if isinstance(base, Dual):
        n = float(exponent)
        if n == 0.0:
            return Dual(1.0, np.zeros_like(base.tangent))
        if _is_integer(n):
            if base.value == 0.0 and n < 0:
                raise ZeroDivisionError("division by zero")
            value = base.value ** int(n)
            slope = n * base.value ** (int(n) - 1)
            return _lift(base, value, slope)
        if base.value < 0.0:
            raise ValueError("math domain error")
        if base.value == 0.0:
            if n < 1.0:
                raise NonDifferentiableError(f"power {n} at 0")
            return _lift(base, 0.0, 0.0)
        value = base.value**n
        return _lift(base, value, n * value / base.value)

    base_array = np.asarray(base, dtype=float)
    if not _is_integer(exponent):
        if np.any(base_array < 0.0):
            raise ValueError("math domain error")
    elif float(exponent) < 0 and np.any(base_array == 0.0):
        raise ZeroDivisionError("division by zero")
    with np.errstate(over="ignore"):
        result = np.power(base_array, float(exponent))
    _check_finite(result)
    return result if result.ndim else float(result)
