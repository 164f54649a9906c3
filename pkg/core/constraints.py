"""
Differential-constraint compatibility residuals.

Evaluates the conditions a quasilinear constraint u^k_x = phi must satisfy
for the 2x2 block, for two Toeplitz blocks and for the hard-rod reduction,
builds the closed-form 2x2 constraint, and provides a general involution
residual used as a cross-check of the specialized conditions.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from core import dual
from core.dual import Dual, Scalar, value_of
from core.errors import ArityMismatchError, PreconditionError, SingularLocusError
from core.fieldfn import (
    ComputedField,
    Env,
    ExpressionField,
    Point,
    ScalarField,
    adaptive_simpson,
)
from core.initial_data import Curve
from core.sampling import check_points
from core.settings import NumericsSettings, get_settings
from core.systems import JordanSystem

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ConstraintSpec:
    """
    Constraints u^{variables[i]}_x = fields[i].

    variables holds 0-based field indices; block constraints use the last
    variable of each block.
    """

    fields: Tuple[ScalarField, ...]
    variables: Tuple[int, ...]
    labels: Tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if len(self.fields) != len(self.variables):
            raise ArityMismatchError(
                "Each constraint field needs exactly one constrained variable",
                expected=len(self.fields),
                got=len(self.variables),
            )
        if not self.labels:
            object.__setattr__(
                self, "labels", tuple(f"u{v + 1}_x" for v in self.variables)
            )

    @classmethod
    def for_blocks(cls, system: JordanSystem, fields: Sequence[ScalarField]) -> "ConstraintSpec":
        """One constraint per block on the block's last variable."""
        if len(fields) != len(system.blocks):
            raise ArityMismatchError(
                f"System has {len(system.blocks)} blocks, got {len(fields)} constraint fields",
                expected=len(system.blocks),
                got=len(fields),
            )
        for phi in fields:
            if phi.arity != system.n:
                raise ArityMismatchError(
                    f"Constraint '{phi.source}' has arity {phi.arity}, system has n={system.n}",
                    expected=system.n,
                    got=phi.arity,
                )
        variables = tuple(system.last_variable(i) for i in range(len(system.blocks)))
        return cls(tuple(fields), variables)


def single_block_2x2(system: JordanSystem) -> Tuple[ScalarField, ScalarField]:
    if len(system.blocks) != 1 or system.blocks[0].size != 2:
        raise PreconditionError(
            f"Operation needs a single 2x2 Jordan block, got sizes "
            f"{[b.size for b in system.blocks]}"
        )
    entries = system.blocks[0].entries
    return entries[0], entries[1]


class ExponentialIntegralField(ScalarField):
    """
    prefactor(u2) * exp(integral from u1_ref to u1 of lambda_u2 / mu), optionally / mu.

    The derivative in u1 is the integrand at the endpoint. Derivatives in t, x
    and u2 differentiate under the integral; the mixed derivative of lambda
    inside is a centered difference of exact first derivatives.
    """

    def __init__(
        self,
        system: JordanSystem,
        prefactor: ScalarField,
        u1_ref: float = 0.0,
        divide_by_mu: bool = False,
        settings: Optional[NumericsSettings] = None,
    ):
        self.lam, self.mu = single_block_2x2(system)
        self.arity = 2
        self.prefactor = prefactor
        self.u1_ref = float(u1_ref)
        self.divide_by_mu = divide_by_mu
        self.settings = settings or get_settings()

    @property
    def source(self) -> str:
        body = (
            f"({self.prefactor.source})*exp(int[{self.u1_ref!r}..u1] "
            f"d({self.lam.source})/du2 / ({self.mu.source}))"
        )
        return f"{body}/({self.mu.source})" if self.divide_by_mu else body

    def _mu(self, point: Point) -> float:
        value = self.mu.eval(point)
        if abs(value) < self.settings.singular_guard:
            raise SingularLocusError(
                f"mu vanishes at u={point.u} on the quadrature path", quantity="mu", value=value
            )
        return value

    def _integrand(self, point: Point) -> float:
        return self.lam.partial(point, "u2") / self._mu(point)

    def _integrand_partial(self, point: Point, name: str) -> float:
        mu = self._mu(point)
        mu_y = self.mu.partial(point, name)
        lam_u2 = self.lam.partial(point, "u2")
        coordinate = {"t": point.t, "x": point.x, "u2": point.u[1]}[name]
        step = self.settings.fd_step * max(1.0, abs(coordinate))
        lam_u2_y = (
            self.lam.partial(point.shifted(name, step), "u2")
            - self.lam.partial(point.shifted(name, -step), "u2")
        ) / (2.0 * step)
        return (lam_u2_y * mu - lam_u2 * mu_y) / (mu * mu)

    def _quadrature(self, func, upper: float) -> float:
        return adaptive_simpson(
            func,
            self.u1_ref,
            upper,
            self.settings.quadrature_tolerance,
            self.settings.quadrature_max_depth,
        )

    def exponent(self, point: Point) -> float:
        """The integral in the exponent at a point."""
        return self._quadrature(lambda xi: self._integrand(point.with_u(0, xi)), point.u[0])

    def evaluate(self, env: Env) -> Scalar:
        point = Point(
            t=value_of(env["t"]),
            x=value_of(env["x"]),
            u=(value_of(env["u1"]), value_of(env["u2"])),
        )
        integral: Scalar = self.exponent(point)

        seeded = [name for name in ("t", "x", "u1", "u2") if isinstance(env[name], Dual)]
        if seeded:
            size = len(env[seeded[0]].tangent)
            tangent = np.zeros(size)
            for name in seeded:
                if name == "u1":
                    slope = self._integrand(point)
                else:
                    slope = self._quadrature(
                        lambda xi, name=name: self._integrand_partial(point.with_u(0, xi), name),
                        point.u[0],
                    )
                tangent = tangent + slope * env[name].tangent
            integral = Dual(float(integral), tangent)

        result = self.prefactor.evaluate(env) * dual.exp(integral)
        if self.divide_by_mu:
            mu = self.mu.evaluate(env)
            if abs(value_of(mu)) < self.settings.singular_guard:
                raise SingularLocusError(f"mu vanishes at u={point.u}", quantity="mu", value=0.0)
            result = result / mu
        return result


def compat_residual_2x2(
    system: JordanSystem, constraint: ConstraintSpec, p: Point
) -> Tuple[float, float]:
    """
    2x2 compatibility residuals.

    Args:
        system: Single 2x2 block with entries lambda, mu
        constraint: Constraint u2_x = phi
        p: Evaluation point

    Returns:
        (r_a, r_b) with r_a = d lambda/du1 and
        r_b = lambda_u2 phi^2 + lambda phi_x - phi_t - mu phi phi_u1
    """
    lam, mu = single_block_2x2(system)
    phi = constraint.fields[0]
    lam_value, lam_grad = lam.value_and_grad(p)
    mu_value = mu.eval(p)
    phi_value, phi_grad = phi.value_and_grad(p)
    r_a = lam_grad[2]
    r_b = (
        lam_grad[3] * phi_value**2
        + lam_value * phi_grad[1]
        - phi_grad[0]
        - mu_value * phi_value * phi_grad[2]
    )
    return float(r_a), float(r_b)


def _check_f1(f1: ScalarField) -> None:
    if isinstance(f1, ExpressionField) and not f1.free_variables <= {"u2"}:
        raise PreconditionError(
            f"f1 must depend on u2 only, '{f1.source}' uses {sorted(f1.free_variables)}"
        )


def require_linear_degeneracy(
    system: JordanSystem,
    samples: Optional[Sequence[Point]] = None,
    settings: Optional[NumericsSettings] = None,
) -> None:
    """
    Raise PreconditionError unless d lambda/du1 vanishes at the check points.

    Args:
        system: Single 2x2 block system
        samples: Check points (defaults to a fixed seeded set)
        settings: Tolerance source
    """
    settings = settings or get_settings()
    single_block_2x2(system)
    for point in samples or check_points(system.n):
        value = system.block_degeneracy(point)[0]
        if abs(value) >= settings.degeneracy_tolerance:
            raise PreconditionError(
                f"System '{system.name}' is not linearly degenerate: "
                f"d lambda/du1 = {value:.6g} at u={point.u}",
                details={"u": list(point.u), "block_degeneracy": value},
            )


def phi_closed_form_2x2(
    system: JordanSystem,
    f1: ScalarField,
    u1_ref: float = 0.0,
    samples: Optional[Sequence[Point]] = None,
    settings: Optional[NumericsSettings] = None,
) -> ScalarField:
    """
    Closed-form compatible constraint for a linearly degenerate 2x2 block.

    Args:
        system: Single 2x2 block system
        f1: Arbitrary function of u2
        u1_ref: Quadrature base point
        samples: Check points for the degeneracy precondition
        settings: Tolerance source

    Returns:
        phi(u1, u2) = f1(u2) exp(integral of lambda_u2 / mu from u1_ref to u1)
    """
    require_linear_degeneracy(system, samples, settings)
    _check_f1(f1)
    logger.info(f"Closed-form constraint for '{system.name}' with f1='{f1.source}'")
    return ExponentialIntegralField(system, f1, u1_ref, divide_by_mu=False, settings=settings)


def two_block_residual_labels(k: int, m: int) -> List[str]:
    """Names of the components returned by compat_residual_two_block."""
    labels = ["eigenvalue block 1", "eigenvalue block 2"]
    labels += [f"block 1 coefficient u_1^{j}" for j in range(2, k)]
    labels += [f"block 1 coefficient u_2^{s}" for s in range(1, m)]
    labels += ["block 1 free term"]
    labels += [f"block 2 coefficient u_1^{j}" for j in range(2, k)]
    labels += [f"block 2 coefficient u_2^{s}" for s in range(1, m)]
    labels += ["block 2 free term"]
    if k >= 2:
        labels += ["block 2 coefficient u_1^1"]
    return labels


def compat_residual_two_block(
    system: JordanSystem, phi1: ScalarField, phi2: ScalarField, p: Point
) -> np.ndarray:
    """
    Compatibility residuals for constraints on the last variable of each of two blocks.

    Layout: the two eigenvalue conditions, block-1 coefficients of u_1^j
    (j=2..k-1) and u_2^s (s=1..m-1), the block-1 free term, the same three
    groups for block 2, then the block-2 coefficient of u_1^1 when k >= 2.

    Args:
        system: Two-block system with sizes k and m
        phi1: Constraint on the last variable of block 1
        phi2: Constraint on the last variable of block 2
        p: Evaluation point

    Returns:
        Residual vector labelled by two_block_residual_labels(k, m)
    """
    if len(system.blocks) != 2:
        raise PreconditionError(f"Expected two blocks, got {len(system.blocks)}")
    k, m = system.blocks[0].size, system.blocks[1].size
    o1, o2 = system.offsets

    def values(block: int) -> Tuple[np.ndarray, np.ndarray]:
        pairs = [entry.value_and_grad(p) for entry in system.blocks[block].entries]
        return np.array([v for v, _ in pairs]), np.array([g for _, g in pairs])

    lam1, dlam1 = values(0)
    lam2, dlam2 = values(1)
    phis = [phi.value_and_grad(p) for phi in (phi1, phi2)]

    def u1(j: int) -> int:
        # gradient column of u_1^j (1-based)
        return 2 + o1 + j - 1

    def u2(s: int) -> int:
        return 2 + o2 + s - 1

    def product_partial(lam_value: float, lam_grad: np.ndarray, phi: Tuple, column: int) -> float:
        return lam_grad[column] * phi[0] + lam_value * phi[1][column]

    def coefficient(phi: Tuple, own: float, own_grad: np.ndarray, j: int, block1: bool) -> float:
        lam, column = (lam1, u1) if block1 else (lam2, u2)
        total = sum(phi[1][column(j - l + 1)] * lam[l - 1] for l in range(1, j + 1))
        return total - product_partial(own, own_grad, phi, column(j))

    def free_term(phi: Tuple, own: float, own_grad: np.ndarray) -> float:
        lhs = phi[1][0]
        lhs += sum(phi[1][u1(k - l + 1)] * lam1[l - 1] for l in range(1, k + 1)) * phis[0][0]
        lhs += sum(phi[1][u2(m - l + 1)] * lam2[l - 1] for l in range(1, m + 1)) * phis[1][0]
        rhs = phis[0][0] * product_partial(own, own_grad, phi, u1(k))
        rhs += phis[1][0] * product_partial(own, own_grad, phi, u2(m))
        rhs += own_grad[1] * phi[0] + own * phi[1][1]
        return lhs - rhs

    residual = [dlam1[0][u1(1)], dlam2[0][u2(1)]]
    for phi, own, own_grad in ((phis[0], lam1[0], dlam1[0]), (phis[1], lam2[0], dlam2[0])):
        residual += [coefficient(phi, own, own_grad, j, True) for j in range(2, k)]
        residual += [coefficient(phi, own, own_grad, s, False) for s in range(1, m)]
        residual.append(free_term(phi, own, own_grad))
    if k >= 2:
        residual.append(coefficient(phis[1], lam2[0], dlam2[0], 1, True))
    return np.array(residual, dtype=float)


def _hardrod_gap(system: JordanSystem) -> ScalarField:
    if [b.size for b in system.blocks] != [2, 2]:
        raise PreconditionError(
            f"Hard-rod operations need two 2x2 blocks, got {[b.size for b in system.blocks]}"
        )
    first = system.blocks[0].entries[0]
    second = system.blocks[1].entries[0]
    return ComputedField(
        system.n,
        lambda env: second.evaluate(env) - first.evaluate(env),
        f"({second.source})-({first.source})",
    )


def hardrod_phi(
    f: Sequence[ScalarField],
    system: JordanSystem,
    settings: Optional[NumericsSettings] = None,
) -> ConstraintSpec:
    """
    Hard-rod constraints phi^i = f^i / (lambda^2 - lambda^1).

    Args:
        f: The triple f1, f2, f3
        system: Hard-rod system (two 2x2 blocks)
        settings: Guard source

    Returns:
        ConstraintSpec for u2_x = phi1, u4_x = phi2, u3_x = phi3
    """
    settings = settings or get_settings()
    if len(f) != 3:
        raise ArityMismatchError("hardrod_phi needs three fields", expected=3, got=len(f))
    gap = _hardrod_gap(system)
    guard = settings.singular_guard

    def quotient(numerator: ScalarField) -> ScalarField:
        def fn(env: Env) -> Scalar:
            denominator = gap.evaluate(env)
            if abs(value_of(denominator)) < guard:
                raise SingularLocusError(
                    "Characteristic speeds coalesce (lambda2 = lambda1)",
                    quantity="lambda2-lambda1",
                    value=value_of(denominator),
                )
            return numerator.evaluate(env) / denominator

        return ComputedField(system.n, fn, f"({numerator.source})/({gap.source})")

    fields = tuple(quotient(fi) for fi in f)
    return ConstraintSpec(fields, variables=(1, 3, 2), labels=("u2_x", "u4_x", "u3_x"))


def hardrod_f_residual(
    f1: ScalarField,
    f2: ScalarField,
    f3: ScalarField,
    p: Point,
    a: float,
    printed: bool = False,
    settings: Optional[NumericsSettings] = None,
) -> Tuple[float, float, float]:
    """
    Compatibility conditions on the hard-rod numerators.

    The middle condition carries +f2 f1; printed=True evaluates it with the
    opposite sign (-f2 f1), which fails on both integrated cases.

    Args:
        f1: Numerator of the u2 constraint
        f2: Numerator of the u4 constraint
        f3: Numerator of the u3 constraint
        p: Evaluation point (n=4)
        a: Rod length parameter
        printed: Use the typeset sign in the middle condition
        settings: Guard source

    Returns:
        (r1, r2, r3)
    """
    settings = settings or get_settings()
    u1, u2, u3, u4 = p.u
    d = u2 - u4
    if abs(d) < settings.singular_guard:
        raise SingularLocusError("u2 = u4 singular locus", quantity="u2-u4", value=d)
    g1, df1 = f1.value_and_grad(p)
    g2, df2 = f2.value_and_grad(p)
    g3, df3 = f3.value_and_grad(p)

    # gradient columns: 0=t, 1=x, 2..5=u1..u4
    r1 = (u1 + a) * df1[2] * g1 + g1**2 + d * df1[5] * g2 + g1 * g2
    sign = -1.0 if printed else 1.0
    r2 = (u3 + a) * df2[4] * g2 + g2**2 - d * df2[3] * g1 + sign * g2 * g1
    bracket = d * df2[3] * g1 - g2 * g1 + d * df2[5] * g2 + g2**2
    r3 = (
        (u3 + a) * (g2 * df3[4] - g3 * df2[4])
        - d * df3[3] * g1
        + g3 * g1
        - (u3 + a) / d * bracket
    )
    return float(r1), float(r2), float(r3)


def _row_columns(system: JordanSystem, variable: int) -> List[int]:
    block = system.block_of(variable)
    end = system.offsets[block] + system.blocks[block].size
    return list(range(variable, end))


def involution_residual(system: JordanSystem, constraint: ConstraintSpec, p: Point) -> np.ndarray:
    """
    Compatibility of constraints with the system by direct cross-differentiation.

    For every constraint u^j_x = phi_j the residual D_t phi_j - D_x (A u_x)_j is
    affine in the unconstrained derivatives; its free term and coefficients
    must all vanish.

    Args:
        system: Any Jordan system
        constraint: Constraints whose matrix rows only involve constrained derivatives
        p: Evaluation point

    Returns:
        Concatenated [free term, coefficients of free derivatives] per constraint
    """
    n = system.n
    constrained = list(constraint.variables)
    free = [i for i in range(n) if i not in constrained]
    for variable in constrained:
        missing = [c for c in _row_columns(system, variable) if c not in constrained]
        if missing:
            raise PreconditionError(
                f"Row of u{variable + 1} involves unconstrained derivatives "
                f"{[f'u{c + 1}' for c in missing]}"
            )

    matrix, derivative = system.assemble_with_gradient(p)
    phi: Dict[int, Tuple[float, np.ndarray]] = {
        variable: field.value_and_grad(p)
        for variable, field in zip(constraint.variables, constraint.fields)
    }
    v0 = np.zeros(n)
    for variable in constrained:
        v0[variable] = phi[variable][0]
    flow0 = matrix @ v0

    residual: List[float] = []
    for j in constrained:
        phi_value, phi_grad = phi[j]
        phi_u = phi_grad[2:]
        # psi_j = sum_l A_jl phi_l over constrained l
        psi_u = np.zeros(n)
        psi_x = 0.0
        for l in constrained:
            psi_u += derivative[:, j, l] * phi[l][0] + matrix[j, l] * phi[l][1][2:]
            psi_x += matrix[j, l] * phi[l][1][1]
        residual.append(phi_grad[0] + phi_u @ flow0 - psi_x - psi_u @ v0)
        for f in free:
            residual.append(phi_u @ matrix[:, f] - psi_u[f])
    return np.array(residual, dtype=float)


def _constant_zero(arity: int) -> ScalarField:
    return ComputedField(arity, lambda env: 0.0, "0")


def hardrod_case1_numerators(
    c1: Curve, k: float, a: float
) -> Tuple[ScalarField, ScalarField, ScalarField]:
    """
    Numerators with f2_u3 != 0 and f3 = 0.

    f1 = c1(u2)(u2 - u4)/(u1 + a), f2 = -k(u2 - u4)/(u3 + a).
    """

    def f1(env: Env) -> Scalar:
        return c1(env["u2"]) * (env["u2"] - env["u4"]) / (env["u1"] + a)

    def f2(env: Env) -> Scalar:
        return -k * (env["u2"] - env["u4"]) / (env["u3"] + a)

    return (
        ComputedField(4, f1, f"{c1.name}(u2)*(u2-u4)/(u1+{a!r})"),
        ComputedField(4, f2, f"-{k!r}*(u2-u4)/(u3+{a!r})"),
        _constant_zero(4),
    )


def hardrod_case2_numerators(
    c1: Curve, k: float
) -> Tuple[ScalarField, ScalarField, ScalarField]:
    """
    Numerators with f2_u3 = 0 and f3_u3 = 0.

    f1 = c^2 D^2/(c + D c'), f2 = D^2 c, f3 = k D with D = u2 - u4, c = c1(u2).
    """

    def f1(env: Env) -> Scalar:
        d = env["u2"] - env["u4"]
        c = c1(env["u2"])
        return c * c * d * d / (c + d * c1.slope(env["u2"]))

    def f2(env: Env) -> Scalar:
        d = env["u2"] - env["u4"]
        return d * d * c1(env["u2"])

    def f3(env: Env) -> Scalar:
        return k * (env["u2"] - env["u4"])

    name = c1.name
    return (
        ComputedField(4, f1, f"{name}^2*(u2-u4)^2/({name}+(u2-u4)*{name}')"),
        ComputedField(4, f2, f"(u2-u4)^2*{name}(u2)"),
        ComputedField(4, f3, f"{k!r}*(u2-u4)"),
    )
