"""
Hankel metrics for 2x2 Jordan blocks.

Builds the metric g12 = (f1/mu) exp(int lambda_u2/mu du1), g11 = 0, and
evaluates the Tsarev conditions, the scalar curvature and the theta function
that ties the metric to the compatible constraint.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field

from core.constraints import (
    ExponentialIntegralField,
    phi_closed_form_2x2,
    require_linear_degeneracy,
    single_block_2x2,
)
from core.errors import DegenerateMetricError, PreconditionError
from core.fieldfn import Point, ScalarField, constant_field
from core.sampling import check_points
from core.settings import NumericsSettings, get_settings
from core.systems import JordanSystem

logger = logging.getLogger(__name__)


class HankelMetric2:
    """2x2 metric [[0, g12], [g12, g22]]."""

    def __init__(
        self,
        g12: ScalarField,
        g22: Optional[ScalarField] = None,
        settings: Optional[NumericsSettings] = None,
    ):
        self.g12 = g12
        self.g22 = g22 or constant_field(0.0, 2)
        self.settings = settings or get_settings()

    def __repr__(self) -> str:
        return f"HankelMetric2(g12={self.g12.source!r}, g22={self.g22.source!r})"

    def matrix(self, p: Point) -> np.ndarray:
        return self.matrix_with_gradient(p)[0]

    def matrix_with_gradient(self, p: Point) -> Tuple[np.ndarray, np.ndarray]:
        """
        Metric and its u-derivatives.

        Returns:
            (g, dg) with dg[k] = dg/du_{k+1}
        """
        g12, grad12 = self.g12.value_and_grad(p)
        g22, grad22 = self.g22.value_and_grad(p)
        if abs(g12) < self.settings.singular_guard:
            raise DegenerateMetricError(
                f"g12 = {g12:.3e} at u={p.u}; det g = -g12^2 vanishes",
                details={"u": list(p.u), "g12": g12},
            )
        g = np.array([[0.0, g12], [g12, g22]])
        dg = np.zeros((2, 2, 2))
        for k in range(2):
            dg[k] = [[0.0, grad12[2 + k]], [grad12[2 + k], grad22[2 + k]]]
        return g, dg

    def christoffel(self, p: Point) -> np.ndarray:
        """Levi-Civita symbols gamma[i, j, k] = Gamma^i_{jk}."""
        g, dg = self.matrix_with_gradient(p)
        inverse = np.linalg.inv(g)
        # lowered[l, j, k] = (d_j g_lk + d_k g_lj - d_l g_jk) / 2
        lowered = 0.5 * (
            np.einsum("jlk->ljk", dg) + np.einsum("klj->ljk", dg) - dg
        )
        return np.einsum("il,ljk->ijk", inverse, lowered)


def _require_mu(system: JordanSystem, samples: Sequence[Point], guard: float) -> None:
    _, mu = single_block_2x2(system)
    for point in samples:
        value = mu.eval(point)
        if abs(value) < guard:
            raise PreconditionError(
                f"mu = {value:.3e} vanishes at u={point.u}",
                details={"u": list(point.u), "mu": value},
            )


def build_metric(
    system: JordanSystem,
    f1: ScalarField,
    u1_ref: float = 0.0,
    samples: Optional[Sequence[Point]] = None,
    settings: Optional[NumericsSettings] = None,
) -> HankelMetric2:
    """
    Hankel metric of a linearly degenerate 2x2 block.

    Args:
        system: Single 2x2 block system
        f1: Arbitrary function of u2
        u1_ref: Quadrature base point
        samples: Check points for the preconditions
        settings: Tolerance source

    Returns:
        HankelMetric2 with g12 = (f1/mu) exp(int lambda_u2/mu) and g22 = 0
    """
    settings = settings or get_settings()
    samples = list(samples or check_points(system.n))
    require_linear_degeneracy(system, samples, settings)
    _require_mu(system, samples, settings.singular_guard)
    g12 = ExponentialIntegralField(system, f1, u1_ref, divide_by_mu=True, settings=settings)
    for point in samples:
        value = g12.eval(point)
        if abs(value) < settings.singular_guard:
            raise DegenerateMetricError(
                f"g12 vanishes at u={point.u} for f1='{f1.source}'",
                details={"u": list(point.u), "g12": value},
            )
    logger.info(f"Hankel metric for '{system.name}': g12 = {g12.source}")
    return HankelMetric2(g12, settings=settings)


@dataclass(frozen=True)
class TsarevResidual:
    """Symmetry and covariant residuals with all covariant components."""

    r_sym: float
    r_cov: float
    components: np.ndarray


def tsarev_residual(system: JordanSystem, metric: HankelMetric2, p: Point) -> TsarevResidual:
    """
    Hamiltonian conditions g A = (g A)^T and nabla_i A^j_k = nabla_k A^j_i.

    Args:
        system: 2x2 system
        metric: Hankel metric
        p: Evaluation point

    Returns:
        TsarevResidual; components[j, i, k] is the antisymmetrized covariant derivative
    """
    matrix, derivative = system.assemble_with_gradient(p)
    g = metric.matrix(p)
    lowered = g @ matrix
    r_sym = float(np.max(np.abs(lowered - lowered.T)))

    gamma = metric.christoffel(p)
    # covariant[i, j, k] = d_i A^j_k + Gamma^j_{is} A^s_k
    covariant = derivative + np.einsum("jis,sk->ijk", gamma, matrix)
    components = np.einsum("ijk->jik", covariant - np.einsum("ijk->kji", covariant))
    r_cov = float(np.max(np.abs(components)))
    return TsarevResidual(r_sym, r_cov, components)


def _curvature_from(gamma: np.ndarray, d_gamma: np.ndarray, inverse: np.ndarray) -> float:
    # riemann[r, s, m, v] = R^r_{smv}
    riemann = (
        np.einsum("mrvs->rsmv", d_gamma)
        - np.einsum("vrms->rsmv", d_gamma)
        + np.einsum("rml,lvs->rsmv", gamma, gamma)
        - np.einsum("rvl,lms->rsmv", gamma, gamma)
    )
    ricci = np.einsum("kikj->ij", riemann)
    return float(np.einsum("ij,ij->", inverse, ricci))


def flatness_residual(metric: HankelMetric2, p: Point, h: Optional[float] = None) -> float:
    """
    |Scalar curvature| at p.

    Derivatives of the exact Christoffel symbols are centered differences
    with one Richardson step.

    Args:
        metric: Hankel metric
        p: Evaluation point
        h: Difference step (defaults to settings.flatness_step)

    Returns:
        Absolute scalar curvature
    """
    h = h or metric.settings.flatness_step

    def centered(index: int, step: float) -> np.ndarray:
        forward = metric.christoffel(p.with_u(index, p.u[index] + step))
        backward = metric.christoffel(p.with_u(index, p.u[index] - step))
        return (forward - backward) / (2.0 * step)

    # d_gamma[m, r, v, s] = d_m Gamma^r_{vs}
    d_gamma = np.stack(
        [(4.0 * centered(m, 0.5 * h) - centered(m, h)) / 3.0 for m in range(2)]
    )
    inverse = np.linalg.inv(metric.matrix(p))
    return abs(_curvature_from(metric.christoffel(p), d_gamma, inverse))


@dataclass(frozen=True)
class ThetaResult:
    """theta, the matching constraint phi and the metric component d theta/du1."""

    theta: float
    phi: float
    difference: float
    g12: float
    degenerate: bool


def theta(
    system: JordanSystem,
    f: ScalarField,
    u1_ref: float,
    p: Point,
    samples: Optional[Sequence[Point]] = None,
    settings: Optional[NumericsSettings] = None,
) -> ThetaResult:
    """
    theta = f(u2) exp(int lambda_u2/mu du1) and its coincidence with phi.

    Args:
        system: Linearly degenerate 2x2 system
        f: Function of u2
        u1_ref: Quadrature base point
        p: Evaluation point
        samples: Check points for the preconditions
        settings: Tolerance source

    Returns:
        ThetaResult
    """
    settings = settings or get_settings()
    phi_field = phi_closed_form_2x2(system, f, u1_ref, samples, settings)
    theta_field = ExponentialIntegralField(system, f, u1_ref, divide_by_mu=False, settings=settings)
    theta_value = theta_field.eval(p)
    phi_value = phi_field.eval(p)
    g12 = theta_field.partial(p, "u1")
    degenerate = abs(g12) < settings.singular_guard
    if degenerate:
        logger.warning(f"d theta/du1 = {g12:.3e} at u={p.u}: theta defines a degenerate metric")
    return ThetaResult(theta_value, phi_value, abs(theta_value - phi_value), g12, degenerate)


class HamiltonianReport(BaseModel):
    """Residual summary over sample points."""

    system: str = Field(..., description="System name")
    f1: str = Field(..., description="Prefactor expression")
    u1_ref: float = Field(..., description="Quadrature base point")
    samples: int = Field(..., description="Number of sample points")
    seed: int = Field(..., description="Sampling seed")
    r_sym: float = Field(..., description="Largest symmetry residual")
    r_cov: float = Field(..., description="Largest covariant residual")
    flatness: float = Field(..., description="Largest absolute scalar curvature")
    theta_phi: float = Field(..., description="Largest |theta - phi|")
    notes: List[str] = Field(default_factory=list, description="Advisory messages")


def hamiltonian_report(
    system: JordanSystem,
    f1: ScalarField,
    points: Sequence[Point],
    u1_ref: float = 0.0,
    seed: int = 0,
    settings: Optional[NumericsSettings] = None,
) -> HamiltonianReport:
    """
    Build the metric and collect every residual over the given points.

    Args:
        system: Linearly degenerate 2x2 system
        f1: Function of u2
        points: Sample points
        u1_ref: Quadrature base point
        seed: Seed recorded in the report
        settings: Tolerance source

    Returns:
        HamiltonianReport
    """
    settings = settings or get_settings()
    metric = build_metric(system, f1, u1_ref, settings=settings)
    r_sym = r_cov = flatness = coincidence = 0.0
    degenerate = 0
    for point in points:
        residual = tsarev_residual(system, metric, point)
        r_sym = max(r_sym, residual.r_sym)
        r_cov = max(r_cov, residual.r_cov)
        flatness = max(flatness, flatness_residual(metric, point))
        result = theta(system, f1, u1_ref, point, settings=settings)
        coincidence = max(coincidence, result.difference)
        degenerate += result.degenerate
    notes = []
    if degenerate:
        notes.append(f"d theta/du1 vanished at {degenerate} of {len(points)} points")
    logger.info(
        f"Hamiltonian residuals for '{system.name}': r_sym={r_sym:.3e}, r_cov={r_cov:.3e}, "
        f"flatness={flatness:.3e}"
    )
    return HamiltonianReport(
        system=system.name,
        f1=f1.source,
        u1_ref=u1_ref,
        samples=len(points),
        seed=seed,
        r_sym=r_sym,
        r_cov=r_cov,
        flatness=flatness,
        theta_phi=coincidence,
        notes=notes,
    )
