"""
Seeded sample points.

Every random draw in the library comes from a Philox counter-based generator
keyed by a single seed; independent purposes use spawned child streams.
"""

import logging
from typing import List, Sequence, Tuple

import numpy as np

from core.fieldfn import Point

logger = logging.getLogger(__name__)

DEFAULT_BOX: Tuple[float, float] = (0.5, 2.0)

# Stream indices for independent sampling purposes
STREAM_POINTS = 0
STREAM_CHECKS = 1


def make_generator(seed: int, stream: int = STREAM_POINTS) -> np.random.Generator:
    """
    Generator for one purpose-specific stream.

    Args:
        seed: User seed
        stream: Child stream index

    Returns:
        numpy Generator over Philox
    """
    children = np.random.SeedSequence(seed).spawn(stream + 1)
    return np.random.Generator(np.random.Philox(children[stream]))


def sample_points(
    n: int,
    count: int,
    box: Sequence[float] = DEFAULT_BOX,
    seed: int = 0,
    stream: int = STREAM_POINTS,
    t: float = 0.0,
    x: float = 0.0,
) -> List[Point]:
    """
    Uniform points in the box [lo, hi]^n.

    Args:
        n: Number of field values
        count: Number of points
        box: (lo, hi)
        seed: User seed
        stream: Child stream index
        t: Time coordinate of every point
        x: Space coordinate of every point

    Returns:
        List of points
    """
    lo, hi = float(box[0]), float(box[1])
    values = make_generator(seed, stream).uniform(lo, hi, size=(count, n))
    logger.debug(f"Sampled {count} points in [{lo}, {hi}]^{n} (seed={seed}, stream={stream})")
    return [Point(t=t, x=x, u=tuple(row)) for row in values]


def check_points(n: int, count: int = 16) -> List[Point]:
    """Fixed point set used by precondition checks."""
    return sample_points(n, count, DEFAULT_BOX, seed=0, stream=STREAM_CHECKS)
