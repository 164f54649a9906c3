"""
Catalog of named Jordan-block systems.

Each system is stored as block entry expressions; parameters such as the
rod length a are substituted at build time.
"""

import logging
from typing import Callable, Dict, Mapping, Optional, Sequence

from core.errors import DescriptorError
from core.fieldfn import parse_expression
from core.systems import BlockSpec, JordanSystem

logger = logging.getLogger(__name__)

CANONICAL_BLOCKS = [["u2", "1"]]
WDVV_T_BLOCKS = [["u2", "-u1", "0"]]
WDVV_S_BLOCKS = [["-0.5*u2^2", "u1*u2", "u1^2"]]
HARDROD_BLOCKS = [
    ["-(u3*u2 + a*u4)/(u3 + a)", "(u1*u3 - a^2)/(u3 + a)"],
    ["-(u1*u4 + a*u2)/(u1 + a)", "(u1*u3 - a^2)/(u1 + a)"],
]
COUNTEREXAMPLE_BLOCKS = [["u1", "1"]]


def build_system(
    blocks: Sequence[Sequence[str]],
    name: str = "system",
    params: Optional[Mapping[str, float]] = None,
) -> JordanSystem:
    """
    Parse block entry expressions into a JordanSystem.

    Args:
        blocks: Per-block entry expressions, eigenvalue first
        name: System name for logs and reports
        params: Named constants substituted while parsing

    Returns:
        JordanSystem
    """
    n = sum(len(entries) for entries in blocks)
    if n == 0:
        raise DescriptorError(f"System '{name}' has no entries")
    specs = [
        BlockSpec(
            size=len(entries),
            entries=tuple(parse_expression(src, n, params) for src in entries),
        )
        for entries in blocks
    ]
    return JordanSystem(specs, name=name)


def canonical_system() -> JordanSystem:
    return build_system(CANONICAL_BLOCKS, "canonical")


def wdvv_t_system() -> JordanSystem:
    return build_system(WDVV_T_BLOCKS, "wdvv-t")


def wdvv_s_system() -> JordanSystem:
    return build_system(WDVV_S_BLOCKS, "wdvv-s")


def hardrod_system(a: float = 1.0) -> JordanSystem:
    """Two 2x2 blocks of the hard-rod gas with rod length a."""
    return build_system(HARDROD_BLOCKS, "hard-rod", {"a": a})


def counterexample_system() -> JordanSystem:
    """2x2 block whose eigenvalue depends on u1 (not linearly degenerate)."""
    return build_system(COUNTEREXAMPLE_BLOCKS, "counterexample")


CATALOG: Dict[str, Callable[[], JordanSystem]] = {
    "canonical": canonical_system,
    "wdvv-t": wdvv_t_system,
    "wdvv-s": wdvv_s_system,
    "hard-rod": hardrod_system,
    "counterexample": counterexample_system,
}


def create_system(name: str, params: Optional[Mapping[str, float]] = None) -> JordanSystem:
    """
    Factory for catalog systems by name.

    Args:
        name: Catalog key
        params: Only 'a' is used (hard-rod)

    Returns:
        JordanSystem
    """
    if name not in CATALOG:
        raise DescriptorError(
            f"Unknown catalog system '{name}'", details={"known": sorted(CATALOG)}
        )
    if name == "hard-rod":
        return hardrod_system(float((params or {}).get("a", 1.0)))
    return CATALOG[name]()
