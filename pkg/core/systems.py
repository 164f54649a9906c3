"""
Block-diagonal Jordan (Toeplitz) systems.

Assembles A(u) from per-block entry fields, computes characteristic
polynomial coefficients with the Faddeev-LeVerrier recursion (values and
u-gradients together) and evaluates both linear-degeneracy criteria.
"""

import logging
from dataclasses import dataclass
from itertools import combinations
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import Polynomial

from core.errors import ArityMismatchError, DescriptorError
from core.fieldfn import Point, ScalarField
from core.settings import NumericsSettings, get_settings

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BlockSpec:
    """
    One upper-triangular Toeplitz block.

    entries[0] is the block eigenvalue, entries[m] sits on the m-th superdiagonal.
    """

    size: int
    entries: Tuple[ScalarField, ...]

    def __post_init__(self) -> None:
        if self.size < 1:
            raise DescriptorError(f"Block size must be positive, got {self.size}")
        if len(self.entries) != self.size:
            raise DescriptorError(
                f"Block of size {self.size} needs {self.size} entries, got {len(self.entries)}"
            )


class JordanSystem:
    """Ordered list of Toeplitz blocks acting on u1..un."""

    def __init__(self, blocks: Sequence[BlockSpec], name: str = "system"):
        if not blocks:
            raise DescriptorError("A system needs at least one block")
        self.blocks: Tuple[BlockSpec, ...] = tuple(blocks)
        self.name = name
        self.n = sum(block.size for block in self.blocks)
        offsets = []
        start = 0
        for block in self.blocks:
            offsets.append(start)
            start += block.size
        self.offsets: Tuple[int, ...] = tuple(offsets)
        for block in self.blocks:
            for entry in block.entries:
                if entry.arity != self.n:
                    raise ArityMismatchError(
                        f"Entry '{entry.source}' has arity {entry.arity}, system has n={self.n}",
                        expected=self.n,
                        got=entry.arity,
                    )
        logger.info(
            f"JordanSystem '{name}' initialized (n={self.n}, "
            f"blocks={[block.size for block in self.blocks]})"
        )

    def __repr__(self) -> str:
        return f"JordanSystem({self.name!r}, sizes={[b.size for b in self.blocks]})"

    def first_variable(self, block: int) -> int:
        """0-based index of the block's first variable."""
        return self.offsets[block]

    def last_variable(self, block: int) -> int:
        """0-based index of the block's last variable."""
        return self.offsets[block] + self.blocks[block].size - 1

    def block_of(self, variable: int) -> int:
        for index, offset in enumerate(self.offsets):
            if offset <= variable < offset + self.blocks[index].size:
                return index
        raise ArityMismatchError(f"Variable index {variable} outside n={self.n}")

    def _check(self, p: Point) -> None:
        if p.n != self.n:
            raise ArityMismatchError(
                f"Point has {p.n} field values, system has n={self.n}", expected=self.n, got=p.n
            )

    def assemble(self, p: Point) -> np.ndarray:
        """A(u) at p."""
        return self.assemble_with_gradient(p)[0]

    def assemble_with_gradient(self, p: Point) -> Tuple[np.ndarray, np.ndarray]:
        """
        A(u) and its derivatives.

        Args:
            p: Evaluation point

        Returns:
            (A, dA) where dA[k] = dA/du_{k+1}, shape (n, n, n)
        """
        self._check(p)
        n = self.n
        matrix = np.zeros((n, n))
        derivative = np.zeros((n, n, n))
        for block, offset in zip(self.blocks, self.offsets):
            for m, entry in enumerate(block.entries):
                value, gradient = entry.value_and_grad(p)
                for i in range(block.size - m):
                    matrix[offset + i, offset + i + m] = value
                    derivative[:, offset + i, offset + i + m] = gradient[2:]
        return matrix, derivative

    def block_eigenvalues(self, p: Point) -> np.ndarray:
        """lambda_alpha^1 per block."""
        self._check(p)
        return np.array([block.entries[0].eval(p) for block in self.blocks])

    def eigenvalue_separation(
        self, p: Point, settings: Optional[NumericsSettings] = None
    ) -> float:
        """
        Smallest gap between block eigenvalues; warns when below the advisory level.

        Args:
            p: Evaluation point
            settings: Threshold source

        Returns:
            Minimum pairwise gap (inf for a single block)
        """
        settings = settings or get_settings()
        eigenvalues = self.block_eigenvalues(p)
        gaps = [abs(a - b) for a, b in combinations(eigenvalues, 2)]
        gap = min(gaps) if gaps else float("inf")
        if gap < settings.eigenvalue_separation:
            logger.warning(f"Block eigenvalues nearly coincide at u={p.u}: gap={gap:.3e}")
        return gap

    def char_poly(self, p: Point) -> np.ndarray:
        """Coefficients (f1..fn) of det(lambda I - A)."""
        matrix, derivative = self.assemble_with_gradient(p)
        return faddeev_leverrier(matrix, derivative)[0]

    def char_poly_with_gradient(self, p: Point) -> Tuple[np.ndarray, np.ndarray]:
        """Coefficients and their u-gradients, shape (n,) and (n, n)."""
        matrix, derivative = self.assemble_with_gradient(p)
        return faddeev_leverrier(matrix, derivative)

    def lindeg_residual(self, p: Point) -> np.ndarray:
        """Row vector sum_i grad(f_i) A^(n-i)."""
        matrix, derivative = self.assemble_with_gradient(p)
        _, gradients = faddeev_leverrier(matrix, derivative)
        n = self.n
        row = np.zeros(n)
        power = np.eye(n)
        # accumulate from f_n (A^0) up to f_1 (A^(n-1))
        for i in range(n, 0, -1):
            row += gradients[i - 1] @ power
            power = power @ matrix
        return row

    def block_degeneracy(self, p: Point) -> np.ndarray:
        """d lambda_alpha^1 / d u_alpha^1 for every block."""
        self._check(p)
        values = []
        for index, block in enumerate(self.blocks):
            name = f"u{self.first_variable(index) + 1}"
            values.append(block.entries[0].partial(p, name))
        return np.array(values)

    def block_nilpotency(self, p: Point) -> np.ndarray:
        """Max entry of (A_alpha - lambda_alpha^1 I)^k_alpha per block."""
        matrix = self.assemble(p)
        result = []
        for block, offset in zip(self.blocks, self.offsets):
            sub = matrix[offset : offset + block.size, offset : offset + block.size]
            shifted = sub - sub[0, 0] * np.eye(block.size)
            result.append(float(np.max(np.abs(np.linalg.matrix_power(shifted, block.size)))))
        return np.array(result)


def faddeev_leverrier(
    matrix: np.ndarray, derivative: Optional[np.ndarray] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Characteristic polynomial coefficients by the Faddeev-LeVerrier recursion.

    The recursion M_k = A M_(k-1) + c_(k-1) I, c_k = -tr(A M_k)/k is
    differentiated alongside its values, one tangent direction per slice of
    ``derivative``.

    Args:
        matrix: Square matrix A
        derivative: Tangents dA, shape (m, n, n); defaults to none

    Returns:
        (coefficients c_1..c_n, gradients of shape (n, m))
    """
    n = matrix.shape[0]
    if derivative is None:
        derivative = np.zeros((0, n, n))
    m = derivative.shape[0]
    identity = np.eye(n)

    coefficients = np.zeros(n)
    gradients = np.zeros((n, m))
    current = np.zeros((n, n))
    current_dot = np.zeros((m, n, n))
    previous_c, previous_dc = 1.0, np.zeros(m)
    for k in range(1, n + 1):
        current_dot = (
            derivative @ current + matrix @ current_dot + previous_dc[:, None, None] * identity
        )
        current = matrix @ current + previous_c * identity
        product = matrix @ current
        product_dot = derivative @ current + matrix @ current_dot
        c_k = -np.trace(product) / k
        dc_k = -np.trace(product_dot, axis1=1, axis2=2) / k
        coefficients[k - 1] = c_k
        gradients[k - 1] = dc_k
        previous_c, previous_dc = c_k, dc_k
    return coefficients, gradients


def cofactor_char_poly(matrix: np.ndarray) -> np.ndarray:
    """
    Coefficients (f1..fn) of det(lambda I - A) by Laplace expansion.

    Args:
        matrix: Square matrix A

    Returns:
        Coefficients f1..fn
    """
    n = matrix.shape[0]
    entries: List[List[Polynomial]] = [
        [Polynomial([-matrix[i, j], 1.0 if i == j else 0.0]) for j in range(n)] for i in range(n)
    ]
    determinant = _laplace(entries)
    coefficients = np.zeros(n + 1)
    raw = determinant.coef
    coefficients[: len(raw)] = raw
    # numpy stores ascending powers; f_i multiplies lambda^(n-i)
    return coefficients[::-1][1:]


def _laplace(entries: List[List[Polynomial]]) -> Polynomial:
    size = len(entries)
    if size == 1:
        return entries[0][0]
    total = Polynomial([0.0])
    for j in range(size):
        minor = [row[:j] + row[j + 1 :] for row in entries[1:]]
        term = entries[0][j] * _laplace(minor)
        total = total + term if j % 2 == 0 else total - term
    return total
