"""
Expression-defined scalar fields over (t, x, u).

Parses the expression grammar into an immutable AST, evaluates it on floats,
numpy arrays or dual numbers, and integrates fields along the u1 direction
with adaptive Simpson quadrature.
"""

import logging
import math
import re
from abc import ABC, abstractmethod
from dataclasses import dataclass, replace
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from core import dual
from core.dual import Dual, Scalar, value_of
from core.errors import (
    ArityMismatchError,
    ExpressionSyntaxError,
    FieldDomainError,
    NonDifferentiableError,
    QuadratureError,
    UnknownIdentifierError,
)
from core.settings import NumericsSettings, get_settings

logger = logging.getLogger(__name__)

Env = Mapping[str, Any]

FUNCTIONS: Dict[str, Tuple[int, Callable[..., Scalar]]] = {
    "exp": (1, dual.exp),
    "log": (1, dual.log),
    "log1p": (1, dual.log1p),
    "sin": (1, dual.sin),
    "cos": (1, dual.cos),
    "sqrt": (1, dual.sqrt),
    "tanh": (1, dual.tanh),
    "pow": (2, dual.power),
}

_NUMBER = re.compile(r"(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")
_FIELD_VARIABLE = re.compile(r"u(\d+)")
_OPERATORS = "+-*/^(),"


@dataclass(frozen=True)
class Point:
    """Independent variables and field values at which a field is evaluated."""

    t: float = 0.0
    x: float = 0.0
    u: Tuple[float, ...] = ()
    sigma: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "u", tuple(float(v) for v in self.u))
        values = (self.t, self.x, self.sigma, *self.u)
        if not all(math.isfinite(v) for v in values):
            raise FieldDomainError(f"Non-finite point component in {values}")

    @property
    def n(self) -> int:
        return len(self.u)

    def with_u(self, index: int, value: float) -> "Point":
        """Copy with u[index] (0-based) replaced."""
        u = list(self.u)
        u[index] = value
        return replace(self, u=tuple(u))

    def shifted(self, name: str, delta: float) -> "Point":
        """Copy with one named coordinate ('t', 'x' or 'uN') moved by delta."""
        if name == "t":
            return replace(self, t=self.t + delta)
        if name == "x":
            return replace(self, x=self.x + delta)
        index = int(name[1:]) - 1
        return self.with_u(index, self.u[index] + delta)


def variable_names(n: int) -> List[str]:
    """Gradient ordering: t, x, u1..un."""
    return ["t", "x"] + [f"u{i}" for i in range(1, n + 1)]


def point_env(point: Point, seed: Sequence[str] = ()) -> Dict[str, Any]:
    """
    Build an evaluation environment.

    Args:
        point: Evaluation point
        seed: Names to seed as dual variables, in tangent order

    Returns:
        Mapping from identifier to float or Dual
    """
    env: Dict[str, Any] = {"t": point.t, "x": point.x, "s": point.sigma}
    for i, value in enumerate(point.u, start=1):
        env[f"u{i}"] = value
    size = len(seed)
    for index, name in enumerate(seed):
        env[name] = Dual.variable(env[name], index, size)
    return env


# AST


class Node(ABC):
    """Expression tree node."""

    @abstractmethod
    def evaluate(self, env: Env) -> Scalar:
        ...

    @abstractmethod
    def render(self) -> str:
        ...

    @abstractmethod
    def names(self) -> frozenset:
        ...


@dataclass(frozen=True)
class Number(Node):
    value: float

    def evaluate(self, env: Env) -> Scalar:
        return self.value

    def render(self) -> str:
        text = repr(self.value)
        return f"({text})" if self.value < 0 or text.startswith("-") else text

    def names(self) -> frozenset:
        return frozenset()


@dataclass(frozen=True)
class Pi(Node):
    def evaluate(self, env: Env) -> Scalar:
        return math.pi

    def render(self) -> str:
        return "pi"

    def names(self) -> frozenset:
        return frozenset()


@dataclass(frozen=True)
class Variable(Node):
    name: str

    def evaluate(self, env: Env) -> Scalar:
        return env[self.name]

    def render(self) -> str:
        return self.name

    def names(self) -> frozenset:
        return frozenset({self.name})


@dataclass(frozen=True)
class Negate(Node):
    operand: Node

    def evaluate(self, env: Env) -> Scalar:
        return -self.operand.evaluate(env)

    def render(self) -> str:
        return f"(-{self.operand.render()})"

    def names(self) -> frozenset:
        return self.operand.names()


def _is_zero(value: Scalar) -> bool:
    if isinstance(value, Dual):
        return value.value == 0.0
    return bool(np.any(np.asarray(value) == 0.0))


@dataclass(frozen=True)
class BinaryOp(Node):
    op: str
    left: Node
    right: Node

    def evaluate(self, env: Env) -> Scalar:
        left = self.left.evaluate(env)
        right = self.right.evaluate(env)
        if self.op == "+":
            return left + right
        if self.op == "-":
            return left - right
        if self.op == "*":
            return left * right
        if self.op == "/":
            if _is_zero(right):
                raise FieldDomainError("Division by zero", self.render())
            return left / right
        return _apply(dual.power, (left, right), self)

    def render(self) -> str:
        return f"({self.left.render()}{self.op}{self.right.render()})"

    def names(self) -> frozenset:
        return self.left.names() | self.right.names()


@dataclass(frozen=True)
class Call(Node):
    func: str
    args: Tuple[Node, ...]

    def evaluate(self, env: Env) -> Scalar:
        values = tuple(arg.evaluate(env) for arg in self.args)
        return _apply(FUNCTIONS[self.func][1], values, self)

    def render(self) -> str:
        return f"{self.func}({','.join(arg.render() for arg in self.args)})"

    def names(self) -> frozenset:
        result: frozenset = frozenset()
        for arg in self.args:
            result = result | arg.names()
        return result


def _apply(func: Callable[..., Scalar], args: Tuple[Scalar, ...], node: Node) -> Scalar:
    try:
        return func(*args)
    except NonDifferentiableError as e:
        raise NonDifferentiableError(e.error_detail.message, node.render()) from e
    except (ValueError, ZeroDivisionError, OverflowError) as e:
        raise FieldDomainError(f"Domain error ({e})", node.render()) from e


# Parser


@dataclass
class _Token:
    kind: str
    text: str
    offset: int


class _Parser:
    """Recursive-descent parser over a token list."""

    def __init__(self, src: str, arity: int, constants: Mapping[str, float]):
        self.src = src
        self.arity = arity
        self.constants = constants
        self.tokens = self._tokenize()
        self.pos = 0

    def _byte_offset(self, index: int) -> int:
        return len(self.src[:index].encode("utf-8"))

    def _tokenize(self) -> List[_Token]:
        tokens: List[_Token] = []
        i = 0
        while i < len(self.src):
            ch = self.src[i]
            if ch.isspace():
                i += 1
                continue
            offset = self._byte_offset(i)
            if ch in _OPERATORS:
                tokens.append(_Token("op", ch, offset))
                i += 1
                continue
            match = _NUMBER.match(self.src, i)
            if match:
                tokens.append(_Token("number", match.group(0), offset))
                i = match.end()
                continue
            match = _IDENT.match(self.src, i)
            if match:
                tokens.append(_Token("ident", match.group(0), offset))
                i = match.end()
                continue
            raise ExpressionSyntaxError(f"Unexpected character '{ch}'", offset, self.src)
        tokens.append(_Token("end", "", self._byte_offset(len(self.src))))
        return tokens

    @property
    def current(self) -> _Token:
        return self.tokens[self.pos]

    def _advance(self) -> _Token:
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def _expect(self, text: str) -> None:
        if self.current.text != text or self.current.kind != "op":
            found = self.current.text or "end of input"
            raise ExpressionSyntaxError(
                f"Expected '{text}', found '{found}'", self.current.offset, self.src
            )
        self._advance()

    def parse(self) -> Node:
        node = self.expr()
        if self.current.kind != "end":
            raise ExpressionSyntaxError(
                f"Unexpected '{self.current.text}'", self.current.offset, self.src
            )
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.current.kind == "op" and self.current.text in "+-":
            op = self._advance().text
            node = BinaryOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.factor()
        while self.current.kind == "op" and self.current.text in "*/":
            op = self._advance().text
            node = BinaryOp(op, node, self.factor())
        return node

    def factor(self) -> Node:
        base = self.unary()
        if self.current.kind == "op" and self.current.text == "^":
            self._advance()
            return BinaryOp("^", base, self.factor())
        return base

    def unary(self) -> Node:
        if self.current.kind == "op" and self.current.text == "-":
            self._advance()
            return Negate(self.unary())
        return self.primary()

    def primary(self) -> Node:
        token = self.current
        if token.kind == "number":
            self._advance()
            return Number(float(token.text))
        if token.kind == "op" and token.text == "(":
            self._advance()
            node = self.expr()
            self._expect(")")
            return node
        if token.kind == "ident":
            self._advance()
            if token.text in FUNCTIONS:
                return self._call(token)
            return self._identifier(token)
        found = token.text or "end of input"
        raise ExpressionSyntaxError(f"Unexpected '{found}'", token.offset, self.src)

    def _call(self, token: _Token) -> Node:
        self._expect("(")
        args = [self.expr()]
        while self.current.kind == "op" and self.current.text == ",":
            self._advance()
            args.append(self.expr())
        self._expect(")")
        expected = FUNCTIONS[token.text][0]
        if len(args) != expected:
            raise ExpressionSyntaxError(
                f"Function '{token.text}' takes {expected} argument(s), got {len(args)}",
                token.offset,
                self.src,
            )
        return Call(token.text, tuple(args))

    def _identifier(self, token: _Token) -> Node:
        name = token.text
        if name in ("t", "x", "s"):
            return Variable(name)
        if name == "pi":
            return Pi()
        match = _FIELD_VARIABLE.fullmatch(name)
        if match:
            index = int(match.group(1))
            if index < 1 or index > self.arity:
                raise ArityMismatchError(
                    f"Variable '{name}' at byte {token.offset} exceeds arity {self.arity}",
                    expected=self.arity,
                    got=index,
                )
            return Variable(name)
        if name in self.constants:
            return Number(float(self.constants[name]))
        raise UnknownIdentifierError(name, token.offset)


# Fields


class ScalarField(ABC):
    """Real-valued function of (t, x, u1..un) with exact first derivatives."""

    arity: int

    @property
    @abstractmethod
    def source(self) -> str:
        """Human-readable definition."""

    @abstractmethod
    def evaluate(self, env: Env) -> Scalar:
        """Evaluate on an environment of floats, arrays or Duals."""

    def _check(self, point: Point) -> None:
        if point.n != self.arity:
            raise ArityMismatchError(
                f"Point has {point.n} field values, field '{self.source}' expects {self.arity}",
                expected=self.arity,
                got=point.n,
            )

    def _guarded(self, env: Env) -> Scalar:
        try:
            return self.evaluate(env)
        except (ZeroDivisionError, OverflowError, ValueError) as e:
            raise FieldDomainError(f"Domain error ({e})", self.source) from e

    def eval(self, point: Point) -> float:
        """Value at a point."""
        self._check(point)
        return value_of(self._guarded(point_env(point)))

    def grad(self, point: Point) -> np.ndarray:
        """Exact derivatives (d/dt, d/dx, d/du1..d/dun)."""
        return self.value_and_grad(point)[1]

    def value_and_grad(self, point: Point) -> Tuple[float, np.ndarray]:
        self._check(point)
        names = variable_names(self.arity)
        result = self._guarded(point_env(point, names))
        return value_of(result), dual.derivative_of(result, len(names)).copy()

    def partial(self, point: Point, name: str) -> float:
        """Single exact partial derivative with respect to 't', 'x' or 'uN'."""
        self._check(point)
        result = self._guarded(point_env(point, (name,)))
        return float(dual.derivative_of(result, 1)[0])

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.source!r}, arity={self.arity})"


class ExpressionField(ScalarField):
    """Field backed by a parsed expression."""

    def __init__(self, node: Node, arity: int, source: str):
        self.node = node
        self.arity = arity
        self._source = source

    @property
    def source(self) -> str:
        return self._source

    @property
    def free_variables(self) -> frozenset:
        return self.node.names()

    def evaluate(self, env: Env) -> Scalar:
        return self.node.evaluate(env)

    def render(self) -> str:
        """Fully parenthesized text that re-parses to the same tree."""
        return self.node.render()


class ComputedField(ScalarField):
    """Field defined by a callable over a dual-capable environment."""

    def __init__(self, arity: int, fn: Callable[[Env], Scalar], label: str):
        self.arity = arity
        self.fn = fn
        self.label = label

    @property
    def source(self) -> str:
        return self.label

    def evaluate(self, env: Env) -> Scalar:
        return self.fn(env)


def constant_field(value: float, arity: int) -> ScalarField:
    return ExpressionField(Number(float(value)), arity, repr(float(value)))


def parse_expression(
    src: str, arity: int, constants: Optional[Mapping[str, float]] = None
) -> ExpressionField:
    """
    Parse an expression into a field.

    Args:
        src: Expression text
        arity: Number of u-variables the field accepts
        constants: Named parameters substituted as numbers

    Returns:
        Parsed ExpressionField
    """
    if not src or not src.strip():
        raise ExpressionSyntaxError("Empty expression", 0, src)
    if arity < 0:
        raise ArityMismatchError(f"Negative arity {arity}", expected=0, got=arity)
    node = _Parser(src, arity, constants or {}).parse()
    logger.debug(f"Parsed '{src}' (arity {arity}) as {node.render()}")
    return ExpressionField(node, arity, src)


def eval(f: ScalarField, p: Point) -> float:
    return f.eval(p)


def grad(f: ScalarField, p: Point) -> np.ndarray:
    return f.grad(p)


# Quadrature


def adaptive_simpson(
    func: Callable[[float], float],
    a: float,
    b: float,
    tolerance: float = 1e-12,
    max_depth: int = 40,
) -> float:
    """
    Adaptive Simpson quadrature with Richardson correction.

    Args:
        func: Integrand
        a: Lower limit
        b: Upper limit (may be below a)
        tolerance: Absolute error target
        max_depth: Recursion cap

    Returns:
        Integral estimate
    """
    if a == b:
        return 0.0
    mid = 0.5 * (a + b)
    fa, fm, fb = func(a), func(mid), func(b)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    return _simpson_refine(func, a, b, fa, fm, fb, whole, tolerance, max_depth)


def _simpson_refine(
    func: Callable[[float], float],
    a: float,
    b: float,
    fa: float,
    fm: float,
    fb: float,
    whole: float,
    tolerance: float,
    depth: int,
) -> float:
    mid = 0.5 * (a + b)
    left_mid = 0.5 * (a + mid)
    right_mid = 0.5 * (mid + b)
    flm, frm = func(left_mid), func(right_mid)
    left = (mid - a) / 6.0 * (fa + 4.0 * flm + fm)
    right = (b - mid) / 6.0 * (fm + 4.0 * frm + fb)
    delta = left + right - whole
    if not math.isfinite(delta):
        raise QuadratureError("Non-finite integrand", (a, b))
    # roundoff-limited intervals are accepted as converged
    if abs(delta) <= 15.0 * tolerance or abs(delta) <= 64 * np.finfo(float).eps * abs(left + right):
        return left + right + delta / 15.0
    if depth <= 0:
        raise QuadratureError(f"Refinement did not converge on [{a}, {b}]", (a, b))
    return _simpson_refine(
        func, a, mid, fa, flm, fm, left, 0.5 * tolerance, depth - 1
    ) + _simpson_refine(func, mid, b, fm, frm, fb, right, 0.5 * tolerance, depth - 1)


def integrate_u1(
    f: ScalarField,
    p: Point,
    a: float,
    b: float,
    settings: Optional[NumericsSettings] = None,
) -> float:
    """
    Integrate f along u1 from a to b with the other coordinates frozen at p.

    Args:
        f: Integrand field
        p: Point supplying t, x and u2..un
        a: Lower u1 limit
        b: Upper u1 limit
        settings: Tolerance source

    Returns:
        Integral value
    """
    settings = settings or get_settings()
    if f.arity < 1:
        raise ArityMismatchError("integrate_u1 needs a field with u1", expected=1, got=f.arity)
    f._check(p)

    def integrand(xi: float) -> float:
        return f.eval(p.with_u(0, xi))

    return adaptive_simpson(
        integrand, a, b, settings.quadrature_tolerance, settings.quadrature_max_depth
    )

