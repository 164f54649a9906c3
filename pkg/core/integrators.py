"""
Fixed-step classical Runge-Kutta integration with a step-halving error check.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from core.errors import ClosureError, ToeplitzError

logger = logging.getLogger(__name__)

RightHandSide = Callable[[float, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Trajectory:
    """Tabulated solution of an ODE system."""

    grid: np.ndarray
    values: np.ndarray
    max_local_error: float


def rk4_step(rhs: RightHandSide, s: float, y: np.ndarray, h: float) -> np.ndarray:
    """One classical RK4 step."""
    k1 = rhs(s, y)
    k2 = rhs(s + 0.5 * h, y + 0.5 * h * k1)
    k3 = rhs(s + 0.5 * h, y + 0.5 * h * k2)
    k4 = rhs(s + h, y + h * k3)
    return y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _guarded(rhs: RightHandSide) -> RightHandSide:
    def wrapped(s: float, y: np.ndarray) -> np.ndarray:
        try:
            result = np.asarray(rhs(s, y), dtype=float)
        except ToeplitzError as e:
            raise ClosureError(
                f"Right-hand side failed at sigma={s}: {e}",
                details={"sigma": s, "cause": e.error_detail.to_dict()},
            ) from e
        if not np.all(np.isfinite(result)):
            raise ClosureError(f"Right-hand side not finite at sigma={s}", details={"sigma": s})
        return result

    return wrapped


def integrate_rk4(
    rhs: RightHandSide,
    s0: float,
    y0: np.ndarray,
    s1: float,
    step: float,
    local_error: float = 1e-8,
) -> Trajectory:
    """
    Integrate y' = rhs(s, y) from s0 to s1 (either direction).

    Every step is repeated as two half steps; the half-step result is kept
    and the difference serves as the local error estimate.

    Args:
        rhs: Right-hand side
        s0: Start point
        y0: Initial value
        s1: End point
        step: Nominal step size (positive)
        local_error: Rejection threshold for the estimate

    Returns:
        Trajectory ordered from s0 to s1
    """
    if step <= 0:
        raise ClosureError(f"Step must be positive, got {step}")
    y = np.atleast_1d(np.asarray(y0, dtype=float))
    count = max(1, int(math.ceil(abs(s1 - s0) / step - 1e-9)))
    grid = np.linspace(s0, s1, count + 1)
    if s0 == s1:
        return Trajectory(grid[:1], y[None, :].copy(), 0.0)

    f = _guarded(rhs)
    values = np.empty((count + 1, y.size))
    values[0] = y
    worst = 0.0
    for i in range(count):
        s, h = grid[i], grid[i + 1] - grid[i]
        full = rk4_step(f, s, y, h)
        half = rk4_step(f, s, y, 0.5 * h)
        half = rk4_step(f, s + 0.5 * h, half, 0.5 * h)
        # Richardson estimate for an order-4 method
        estimate = float(np.max(np.abs(half - full))) / 15.0
        worst = max(worst, estimate)
        if estimate > local_error:
            raise ClosureError(
                f"Local error {estimate:.3e} exceeds {local_error:.1e} at sigma={s}",
                details={"sigma": s, "estimate": estimate},
            )
        y = half
        values[i + 1] = y
    logger.debug(f"RK4 {s0} -> {s1}: {count} steps, max local error {worst:.3e}")
    return Trajectory(grid, values, worst)
