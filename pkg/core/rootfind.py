"""
Bracketed root finding for implicit characteristic relations.

A vectorised scan locates sign changes; each bracket is refined by Newton
steps that fall back to bisection whenever the step leaves the bracket or
stalls.
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, Tuple

import numpy as np

from core.errors import BracketNotFoundError

logger = logging.getLogger(__name__)

ValueAndSlope = Callable[[float], Tuple[float, float]]


@dataclass(frozen=True)
class Root:
    """Refined root with the achieved residual."""

    x: float
    residual: float
    slope: float
    iterations: int


def scan_brackets(values: np.ndarray) -> List[int]:
    """
    Indices i with a sign change between values[i] and values[i + 1].

    Non-finite samples never form a bracket.
    """
    finite = np.isfinite(values)
    left, right = values[:-1], values[1:]
    change = (np.sign(left) * np.sign(right) <= 0.0) & finite[:-1] & finite[1:]
    return [int(i) for i in np.flatnonzero(change)]


def newton_bisection(
    func: ValueAndSlope,
    lo: float,
    hi: float,
    tolerance: float = 1e-12,
    max_iterations: int = 100,
) -> Root:
    """
    Safeguarded Newton iteration on a bracket.

    Args:
        func: Returns (g(x), g'(x))
        lo: Bracket end
        hi: Other bracket end; g(lo) and g(hi) must differ in sign
        tolerance: Stop when |g| or the step falls below this
        max_iterations: Iteration cap

    Returns:
        Root
    """
    f_lo, _ = func(lo)
    f_hi, _ = func(hi)
    if f_lo == 0.0:
        return Root(lo, 0.0, func(lo)[1], 0)
    if f_hi == 0.0:
        return Root(hi, 0.0, func(hi)[1], 0)
    if np.sign(f_lo) == np.sign(f_hi):
        raise BracketNotFoundError(f"[{lo}, {hi}] does not bracket a root")
    # orient so that g(low) < 0
    if f_lo > 0.0:
        lo, hi = hi, lo

    x = 0.5 * (lo + hi)
    step_old = abs(hi - lo)
    step = step_old
    f, df = func(x)
    for iteration in range(1, max_iterations + 1):
        newton_leaves = ((x - hi) * df - f) * ((x - lo) * df - f) >= 0.0
        if newton_leaves or abs(2.0 * f) > abs(step_old * df):
            step_old = step
            step = 0.5 * (hi - lo)
            x = lo + step
        else:
            step_old = step
            step = f / df
            x = x - step
        f, df = func(x)
        if abs(f) < tolerance or abs(step) < tolerance * max(1.0, abs(x)):
            return Root(x, abs(f), df, iteration)
        if f < 0.0:
            lo = x
        else:
            hi = x
    logger.debug(f"Newton-bisection hit {max_iterations} iterations at x={x}, |g|={abs(f):.3e}")
    return Root(x, abs(f), df, max_iterations)
