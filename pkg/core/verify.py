"""
Finite-difference verification of candidate solutions.

Samplers are plugged into the quasilinear system and its differential
constraints on a 5-point cross stencil; residual ladders over halving steps
yield convergence orders, and paired formula variants are adjudicated by
their verdicts. The k1 readings of the typeset HardRod1 closure are settled
by the same constraint check at t = 0.
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, replace
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field

from core.constraints import ConstraintSpec
from core.errors import (
    ClosureError,
    GridError,
    PreconditionError,
    StencilError,
    ToeplitzError,
    VerificationError,
)
from core.fieldfn import Point
from core.settings import NumericsSettings, get_settings
from core.solutions import (
    Family,
    FamilyConfig,
    GridSpec,
    K1Reading,
    SolutionFamily,
    Variant,
    closed_config,
    create_family,
    for_variant,
)
from core.systems import JordanSystem

logger = logging.getLogger(__name__)

DEFAULT_H0 = 1e-2
DEFAULT_LEVELS = 4


class FieldSampler(ABC):
    """Deterministic map (x, t) -> u; flagged points raise ToeplitzError."""

    n: int
    tag: str

    @abstractmethod
    def sample(self, x: float, t: float) -> np.ndarray:
        """Field vector at (x, t)."""


class FamilySampler(FieldSampler):
    """Exact-solution sampler; every point is solved independently."""

    def __init__(self, family: SolutionFamily):
        self.family = family
        self.n = family.n
        self.tag = f"{family.family.value}/{family.variant.value}"

    def sample(self, x: float, t: float) -> np.ndarray:
        return self.family.evaluate(x, t).u


class CallableSampler(FieldSampler):
    """Sampler backed by a Python function."""

    def __init__(
        self, fn: Callable[[float, float], Sequence[float]], n: int, tag: str = "callable"
    ):
        self.fn = fn
        self.n = n
        self.tag = tag

    def sample(self, x: float, t: float) -> np.ndarray:
        values = np.asarray(self.fn(x, t), dtype=float)
        if values.shape != (self.n,):
            raise VerificationError(
                f"Sampler '{self.tag}' returned shape {values.shape}, expected ({self.n},)"
            )
        return values


def stencil_derivatives(
    s: FieldSampler, p: Tuple[float, float], h: float
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Centre value and centered t- and x-differences.

    Args:
        s: Sampler
        p: (x, t)
        h: Stencil half-width

    Returns:
        (u, u_t, u_x)
    """
    x, t = p
    try:
        centre = s.sample(x, t)
        u_t = (s.sample(x, t + h) - s.sample(x, t - h)) / (2.0 * h)
        u_x = (s.sample(x + h, t) - s.sample(x - h, t)) / (2.0 * h)
    except StencilError:
        raise
    except ToeplitzError as e:
        raise StencilError(
            f"Stencil of half-width {h} at (x={x}, t={t}) hits a flagged point: "
            f"{e.error_detail.message}",
            x=x,
            t=t,
        ) from e
    return centre, u_t, u_x


def _pde_from(system: JordanSystem, p: Tuple[float, float], u, u_t, u_x) -> np.ndarray:
    matrix = system.assemble(Point(t=p[1], x=p[0], u=tuple(u)))
    return u_t - matrix @ u_x


def _constraint_from(constraint: ConstraintSpec, p: Tuple[float, float], u, u_x) -> np.ndarray:
    point = Point(t=p[1], x=p[0], u=tuple(u))
    pairs = zip(constraint.variables, constraint.fields)
    return np.array([u_x[variable] - field.eval(point) for variable, field in pairs])


def pde_residual(
    system: JordanSystem, s: FieldSampler, p: Tuple[float, float], h: float
) -> np.ndarray:
    """u_t - A(u) u_x by centered differences at p = (x, t)."""
    u, u_t, u_x = stencil_derivatives(s, p, h)
    return _pde_from(system, p, u, u_t, u_x)


def constraint_residual(
    c: ConstraintSpec, s: FieldSampler, p: Tuple[float, float], h: float
) -> np.ndarray:
    """Centered x-difference of each constrained field minus its constraint."""
    u, _, u_x = stencil_derivatives(s, p, h)
    return _constraint_from(c, p, u, u_x)


def h_ladder(h0: float = DEFAULT_H0, levels: int = DEFAULT_LEVELS) -> List[float]:
    """Halving steps h0, h0/2, ..."""
    if levels < 3:
        raise GridError(f"Convergence orders need at least 3 levels, got {levels}")
    return [h0 / 2.0**k for k in range(levels)]


@dataclass(frozen=True)
class OrderEstimate:
    """Residual magnitudes per level and the fitted order per component."""

    hs: Tuple[float, ...]
    residuals: np.ndarray
    orders: Tuple[Optional[float], ...]
    at_floor: Tuple[bool, ...]


def fit_orders(
    hs: Sequence[float],
    residuals: np.ndarray,
    scale: float = 0.0,
    settings: Optional[NumericsSettings] = None,
) -> Tuple[Tuple[Optional[float], ...], Tuple[bool, ...]]:
    """
    Least-squares slope of log|r| against log h per component.

    A component is at floor when some level is below the absolute floor or
    every level is below the relative roundoff floor; its order is None.

    Args:
        hs: Step sizes
        residuals: Magnitudes, shape (levels, components)
        scale: sup|u| for the relative floor
        settings: Threshold source

    Returns:
        (orders, at_floor)
    """
    settings = settings or get_settings()
    magnitudes = np.abs(np.atleast_2d(residuals))
    log_h = np.log(np.asarray(hs, dtype=float))
    relative_floor = settings.roundoff_floor * (1.0 + scale)
    orders: List[Optional[float]] = []
    floors: List[bool] = []
    for column in magnitudes.T:
        floor = bool(np.any(column < settings.residual_floor) or np.all(column < relative_floor))
        floors.append(floor)
        orders.append(None if floor else float(np.polyfit(log_h, np.log(column), 1)[0]))
    return tuple(orders), tuple(floors)


def convergence_order(
    residual_op: Callable[[FieldSampler, Tuple[float, float], float], np.ndarray],
    s: FieldSampler,
    p: Tuple[float, float],
    h0: float = DEFAULT_H0,
    levels: int = DEFAULT_LEVELS,
    settings: Optional[NumericsSettings] = None,
) -> OrderEstimate:
    """
    Order of a residual operator at one point.

    Args:
        residual_op: (sampler, point, h) -> residual vector
        s: Sampler
        p: (x, t)
        h0: Largest step
        levels: Number of halvings (at least 3)
        settings: Threshold source

    Returns:
        OrderEstimate
    """
    hs = h_ladder(h0, levels)
    residuals = np.array([np.abs(residual_op(s, p, h)) for h in hs])
    scale = float(np.max(np.abs(s.sample(*p))))
    orders, floors = fit_orders(hs, residuals, scale, settings)
    return OrderEstimate(tuple(hs), residuals, orders, floors)


# Reports


class EquationReport(BaseModel):
    """Residual ladder of one equation."""

    eq: int = Field(..., description="Equation index (1-based)")
    label: str = Field(..., description="Equation name")
    residuals: List[float] = Field(..., description="Sup residual per step")
    mean_residuals: List[float] = Field(..., description="Mean residual per step")
    order: Optional[float] = Field(None, description="Fitted order, null at floor")
    at_floor: bool = Field(False, description="Residual limited by roundoff")


class VerificationReport(BaseModel):
    """Verdict of one formula variant."""

    family: str
    variant: str
    grid: Dict[str, Any]
    h_ladder: List[float]
    seed: int = 0
    per_equation: List[EquationReport]
    constraints: List[EquationReport]
    evaluated_points: int
    skipped_points: int
    sup_u: float
    verdict: str = Field(..., description="pass, fail or singular")
    notes: List[str] = Field(default_factory=list)


class ReadingReport(BaseModel):
    """t = 0 constraint check of one k1 reading of the HardRod1 closure."""

    reading: str
    constraints: List[EquationReport] = Field(default_factory=list)
    verdict: str = Field(..., description="pass, fail or singular")
    notes: List[str] = Field(default_factory=list)


class AdjudicationReport(BaseModel):
    """Both variants of a family side by side."""

    family: str
    grid: Dict[str, Any]
    h_ladder: List[float]
    seed: int = 0
    reports: List[VerificationReport]
    winner: str = Field(..., description="paper, rederived, both pass or both fail")
    k1_readings: List[ReadingReport] = Field(default_factory=list)
    k1_reading: Optional[str] = Field(None, description="k1 reading used for the typeset closure")
    notes: List[str] = Field(default_factory=list)


def _equation_reports(
    labels: Sequence[str],
    hs: Sequence[float],
    stacked: np.ndarray,
    scale: float,
    settings: NumericsSettings,
) -> List[EquationReport]:
    # stacked: (points, levels, components)
    sup = np.max(stacked, axis=0)
    mean = np.mean(stacked, axis=0)
    orders, floors = fit_orders(hs, sup, scale, settings)
    return [
        EquationReport(
            eq=i + 1,
            label=label,
            residuals=sup[:, i].tolist(),
            mean_residuals=mean[:, i].tolist(),
            order=orders[i],
            at_floor=floors[i],
        )
        for i, label in enumerate(labels)
    ]


def _passes(report: EquationReport, bound: float, settings: NumericsSettings) -> bool:
    converged = report.at_floor or (
        report.order is not None and report.order >= settings.pass_order
    )
    return converged and report.residuals[-1] < bound


def verify_variant(
    config: FamilyConfig,
    grid: GridSpec,
    hs: Optional[Sequence[float]] = None,
    seed: int = 0,
    settings: Optional[NumericsSettings] = None,
) -> VerificationReport:
    """
    Residual ladders of one family variant on a grid.

    Args:
        config: Family configuration with complete data
        grid: Verification points
        hs: Step ladder (defaults to 1e-2 halved three times)
        seed: Seed recorded in the report
        settings: Thresholds

    Returns:
        VerificationReport
    """
    settings = settings or get_settings()
    hs = list(hs or h_ladder())
    if len(hs) < 3:
        raise GridError(f"Convergence orders need at least 3 levels, got {len(hs)}")
    family = create_family(config, settings)
    family.require_complete()
    system, constraint = family.system, family.constraint
    sampler = FamilySampler(family)

    pde_rows: List[np.ndarray] = []
    constraint_rows: List[np.ndarray] = []
    sup_u = 0.0
    skipped = 0
    total = grid.nx * grid.nt
    for t in grid.ts:
        for x in grid.xs:
            p = (float(x), float(t))
            try:
                levels = [stencil_derivatives(sampler, p, h) for h in hs]
                pde = [np.abs(_pde_from(system, p, *level)) for level in levels]
                cons = [
                    np.abs(_constraint_from(constraint, p, level[0], level[2])) for level in levels
                ]
            except ToeplitzError as e:
                skipped += 1
                logger.debug(f"Skipping ({p[0]}, {p[1]}): {e}")
                continue
            sup_u = max(sup_u, float(np.max(np.abs(levels[0][0]))))
            pde_rows.append(np.array(pde))
            constraint_rows.append(np.array(cons))

    evaluated = len(pde_rows)
    notes: List[str] = []
    if skipped:
        logger.warning(f"{sampler.tag}: skipped {skipped} of {total} points near flagged regions")
        notes.append(f"skipped {skipped} of {total} points")
    base = dict(
        family=config.family.value,
        variant=config.variant.value,
        grid=grid.to_dict(),
        h_ladder=hs,
        seed=seed,
        evaluated_points=evaluated,
        skipped_points=skipped,
        sup_u=sup_u,
    )
    if evaluated < settings.min_evaluable_fraction * total:
        notes.append(f"only {evaluated} of {total} points evaluable")
        return VerificationReport(
            **base, per_equation=[], constraints=[], verdict="singular", notes=notes
        )

    per_equation = _equation_reports(
        [f"u{i + 1}_t - (A u_x)_{i + 1}" for i in range(family.n)],
        hs,
        np.array(pde_rows),
        sup_u,
        settings,
    )
    constraints = _equation_reports(
        [f"{label} - phi" for label in constraint.labels],
        hs,
        np.array(constraint_rows),
        sup_u,
        settings,
    )
    bound = settings.residual_bound * (1.0 + sup_u)
    failed = [r.label for r in per_equation + constraints if not _passes(r, bound, settings)]
    verdict = "fail" if failed else "pass"
    if failed:
        notes.append(f"failing equations: {failed}")
    logger.info(f"{sampler.tag}: verdict {verdict} on {evaluated} points")
    return VerificationReport(
        **base, per_equation=per_equation, constraints=constraints, verdict=verdict, notes=notes
    )


def _verify_reclosed(
    config: FamilyConfig,
    variant: Variant,
    grid: GridSpec,
    hs: Sequence[float],
    seed: int,
    settings: NumericsSettings,
) -> VerificationReport:
    # a variant whose closure or preconditions fail cannot be evaluated at all
    try:
        closed = for_variant(config, variant, settings)
        return verify_variant(closed, grid, hs, seed, settings)
    except (ClosureError, PreconditionError) as e:
        logger.warning(f"{config.family.value}/{variant.value}: {e.error_detail.message}")
        return VerificationReport(
            family=config.family.value,
            variant=variant.value,
            grid=grid.to_dict(),
            h_ladder=list(hs),
            seed=seed,
            per_equation=[],
            constraints=[],
            evaluated_points=0,
            skipped_points=grid.nx * grid.nt,
            sup_u=0.0,
            verdict="singular",
            notes=[e.error_detail.message],
        )


def _check_reading(
    config: FamilyConfig,
    reading: K1Reading,
    grid: GridSpec,
    hs: Sequence[float],
    seed: int,
    settings: NumericsSettings,
) -> ReadingReport:
    try:
        closed = closed_config(replace(config, variant=Variant.PAPER, k1=reading), settings)
        report = verify_variant(closed, grid, hs, seed, settings)
    except (ClosureError, PreconditionError) as e:
        logger.warning(f"k1={reading.value}: {e.error_detail.message}")
        return ReadingReport(
            reading=reading.value, verdict="singular", notes=[e.error_detail.message]
        )
    if report.verdict == "singular":
        return ReadingReport(reading=reading.value, verdict="singular", notes=report.notes)
    bound = settings.residual_bound * (1.0 + report.sup_u)
    failed = [r.label for r in report.constraints if not _passes(r, bound, settings)]
    verdict = "fail" if failed else "pass"
    logger.info(f"k1={reading.value}: t = 0 constraint verdict {verdict}")
    return ReadingReport(
        reading=reading.value,
        constraints=report.constraints,
        verdict=verdict,
        notes=[f"failing constraints: {failed}"] if failed else [],
    )


def adjudicate_k1(
    config: FamilyConfig,
    grid: GridSpec,
    hs: Optional[Sequence[float]] = None,
    seed: int = 0,
    settings: Optional[NumericsSettings] = None,
) -> List[ReadingReport]:
    """
    Constraint check at t = 0 of every k1 reading of the typeset HardRod1 closure.

    Each reading closes the free data again; it passes when every constraint
    residual converges at the grid's x nodes. Only the constraint residuals
    count, the PDE residual of the typeset fields is judged by adjudicate.

    Args:
        config: HardRod1 configuration with a closure
        grid: Its x nodes are used, its t nodes are replaced by t = 0
        hs: Step ladder
        seed: Seed recorded in the reports
        settings: Thresholds

    Returns:
        One ReadingReport per reading, in K1Reading order
    """
    settings = settings or get_settings()
    if config.family is not Family.HARDROD1:
        raise PreconditionError(
            f"k1 readings belong to the hardrod1 closure, got '{config.family.value}'"
        )
    if config.closure is None:
        raise PreconditionError("k1 readings need a closure of the initial data")
    hs = list(hs or h_ladder())
    initial = replace(grid, t0=0.0, t1=0.0, nt=1)
    return [_check_reading(config, reading, initial, hs, seed, settings) for reading in K1Reading]


def adjudicate(
    config: FamilyConfig,
    grid: GridSpec,
    hs: Optional[Sequence[float]] = None,
    seed: int = 0,
    settings: Optional[NumericsSettings] = None,
) -> AdjudicationReport:
    """
    Verify the typeset and re-derived variants and name the winner.

    HardRod1 data with a closure first settles the k1 reading of the typeset
    closure; the first passing reading is used for the typeset variant.

    Args:
        config: Family configuration (its variant is ignored)
        grid: Verification points
        hs: Step ladder
        seed: Seed recorded in the report
        settings: Thresholds

    Returns:
        AdjudicationReport
    """
    settings = settings or get_settings()
    hs = list(hs or h_ladder())
    notes: List[str] = []
    k1_readings: List[ReadingReport] = []
    k1_reading: Optional[str] = None
    if config.family is Family.HARDROD1 and config.closure is not None:
        k1_readings = adjudicate_k1(config, grid, hs, seed, settings)
        passing_readings = [r.reading for r in k1_readings if r.verdict == "pass"]
        if passing_readings:
            k1_reading = passing_readings[0]
            config = replace(config, k1=K1Reading(k1_reading))
        notes.append(f"k1 readings passing at t = 0: {passing_readings or 'none'}")

    reports = [
        _verify_reclosed(config, variant, grid, hs, seed, settings)
        for variant in (Variant.PAPER, Variant.REDERIVED)
    ]
    verdicts = {report.variant: report.verdict for report in reports}
    if all(verdict == "singular" for verdict in verdicts.values()):
        raise VerificationError(
            f"Neither variant of '{config.family.value}' is evaluable on the grid",
            details={"verdicts": verdicts},
        )

    passing = [variant for variant, verdict in verdicts.items() if verdict == "pass"]
    if len(passing) == 2:
        winner = "both pass"
    elif passing:
        winner = passing[0]
    else:
        winner = "both fail"
    if verdicts[Variant.PAPER.value] != "pass":
        notes.append(
            f"typeset formulas of {config.family.value} give verdict "
            f"'{verdicts[Variant.PAPER.value]}'"
        )
        logger.warning(notes[-1])
    logger.info(f"Adjudicated '{config.family.value}': {winner}")
    return AdjudicationReport(
        family=config.family.value,
        grid=grid.to_dict(),
        h_ladder=hs,
        seed=seed,
        reports=reports,
        winner=winner,
        k1_readings=k1_readings,
        k1_reading=k1_reading,
        notes=notes,
    )
