"""
Numeric configuration.

All tolerances, search parameters and verdict thresholds live here and can be
overridden through TOEPLITZ_* environment variables or a .env file.
"""

import logging
from functools import lru_cache
from typing import Any

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

logger = logging.getLogger(__name__)


class NumericsSettings(BaseSettings):
    """Tolerances and thresholds shared by the numerical modules."""

    model_config = SettingsConfigDict(
        env_prefix="TOEPLITZ_", env_file=".env", env_file_encoding="utf-8", extra="ignore"
    )

    log_level: str = Field("INFO", description="Root log level for the CLI")

    # Quadrature
    quadrature_tolerance: float = Field(1e-12, gt=0, description="Absolute Simpson tolerance")
    quadrature_max_depth: int = Field(40, ge=1, description="Adaptive Simpson recursion cap")
    fd_step: float = Field(1e-5, gt=0, description="Relative step for mixed second derivatives")

    # Root finding
    root_tolerance: float = Field(1e-12, gt=0, description="Target |g(sigma)|")
    root_max_iterations: int = Field(100, ge=1)
    bracket_subdivisions: int = Field(64, ge=2, description="Sign-change scan resolution")
    bracket_attempts: int = Field(3, ge=1, description="Window doublings before giving up")

    # ODE closure
    ode_local_error: float = Field(1e-8, gt=0, description="RK4 step-halving rejection level")

    # Guards
    singular_guard: float = Field(1e-10, gt=0, description="Distance treated as a singular locus")
    eigenvalue_separation: float = Field(1e-8, gt=0, description="Advisory eigenvalue gap")
    degeneracy_tolerance: float = Field(1e-8, gt=0, description="Linear degeneracy threshold")

    # Verification
    pass_order: float = Field(1.9, description="Minimum convergence order for a pass")
    residual_bound: float = Field(1e-5, gt=0, description="Scale-aware sup residual bound")
    residual_floor: float = Field(1e-13, gt=0, description="Absolute at-floor threshold")
    roundoff_floor: float = Field(1e-10, gt=0, description="Relative cancellation floor")
    min_evaluable_fraction: float = Field(0.8, ge=0, le=1)

    # Hamiltonian
    flatness_step: float = Field(1e-4, gt=0, description="Curvature finite-difference step")

    def with_overrides(self, **overrides: Any) -> "NumericsSettings":
        """
        Return a copy with non-None overrides applied.

        Args:
            **overrides: Field values; None entries are ignored

        Returns:
            New settings instance
        """
        update = {key: value for key, value in overrides.items() if value is not None}
        if update:
            logger.debug(f"Settings overrides: {update}")
        return self.model_copy(update=update)


@lru_cache(maxsize=1)
def get_settings() -> NumericsSettings:
    """Process-wide settings instance."""
    return NumericsSettings()
