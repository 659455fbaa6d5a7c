"""Parser and evaluator for vector-field component expressions.

Grammar (highest precedence first):

    power   binds tightest and associates to the right,
    unary minus sits below power, so ``-x1^2`` means ``-(x1^2)``,
    ``*`` and ``/`` associate to the left,
    ``+`` and ``-`` associate to the left.

Variables are ``x1`` .. ``xn`` for a field of dimension n.  Known functions
are sin, cos, exp, log, sqrt, abs.  There is no implicit multiplication:
``2x1`` is a syntax error.  ``^`` with an integer exponent is evaluated by
repeated (binary) multiplication; a non-integer exponent requires a strictly
positive base.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from .errors import (
    DimensionError,
    DomainError,
    ExpressionSyntaxError,
    UnknownSymbolError,
    VariableIndexError,
)

__all__ = [
    "Literal",
    "Variable",
    "Unary",
    "Binary",
    "Call",
    "FieldExpression",
    "parse_expression",
    "parse_field",
    "pretty_print",
    "evaluate",
]

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt", "abs")

_FN_IMPL: dict[str, Callable[[float], float]] = {
    "sin": math.sin,
    "cos": math.cos,
    "exp": math.exp,
    "log": math.log,
    "sqrt": math.sqrt,
    "abs": abs,
}


# ----------------------------------------------------------------------- AST


@dataclass(frozen=True)
class Literal:
    value: float  # nonnegative; negative numbers are Unary(Literal)


@dataclass(frozen=True)
class Variable:
    index: int  # 1-based


@dataclass(frozen=True)
class Unary:
    operand: "Node"


@dataclass(frozen=True)
class Binary:
    op: str  # one of + - * / ^
    lhs: "Node"
    rhs: "Node"


@dataclass(frozen=True)
class Call:
    fn: str
    operand: "Node"


Node = Union[Literal, Variable, Unary, Binary, Call]


# --------------------------------------------------------------------- lexer

_TOKEN_RE = re.compile(
    r"""
    (?P<num>\d+(\.\d*)?([eE][+-]?\d+)?|\.\d+([eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
  | (?P<ws>\s+)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str  # num | ident | op | end
    text: str
    offset: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ExpressionSyntaxError(f"unexpected character {text[pos]!r}", pos)
        if m.lastgroup != "ws":
            tokens.append(_Token(m.lastgroup, m.group(), pos))
        pos = m.end()
    tokens.append(_Token("end", "", len(text)))
    return tokens


# -------------------------------------------------------------------- parser

_VAR_RE = re.compile(r"x(\d+)\Z")


class _Parser:
    def __init__(self, text: str, dimension: int):
        self.text = text
        self.dimension = dimension
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, op: str) -> None:
        tok = self.peek()
        if tok.kind != "op" or tok.text != op:
            raise ExpressionSyntaxError(f"expected '{op}'", tok.offset)
        self.advance()

    def parse(self) -> Node:
        node = self.parse_sum()
        tok = self.peek()
        if tok.kind != "end":
            raise ExpressionSyntaxError(f"unexpected token {tok.text!r}", tok.offset)
        return node

    def parse_sum(self) -> Node:
        node = self.parse_term()
        while True:
            tok = self.peek()
            if tok.kind == "op" and tok.text in "+-":
                self.advance()
                node = Binary(tok.text, node, self.parse_term())
            else:
                return node

    def parse_term(self) -> Node:
        node = self.parse_factor()
        while True:
            tok = self.peek()
            if tok.kind == "op" and tok.text in "*/":
                self.advance()
                node = Binary(tok.text, node, self.parse_factor())
            else:
                return node

    def parse_factor(self) -> Node:
        tok = self.peek()
        if tok.kind == "op" and tok.text == "-":
            self.advance()
            return Unary(self.parse_factor())
        return self.parse_power()

    def parse_power(self) -> Node:
        base = self.parse_atom()
        tok = self.peek()
        if tok.kind == "op" and tok.text == "^":
            self.advance()
            # right-associative; exponent may carry its own unary minus
            return Binary("^", base, self.parse_factor())
        return base

    def parse_atom(self) -> Node:
        tok = self.advance()
        if tok.kind == "num":
            value = float(tok.text)
            if not math.isfinite(value):
                raise ExpressionSyntaxError("numeric literal overflows", tok.offset)
            return Literal(value)
        if tok.kind == "ident":
            return self.parse_ident(tok)
        if tok.kind == "op" and tok.text == "(":
            node = self.parse_sum()
            self.expect_op(")")
            return node
        raise ExpressionSyntaxError(f"unexpected token {tok.text!r}", tok.offset)

    def parse_ident(self, tok: _Token) -> Node:
        m = _VAR_RE.match(tok.text)
        if m is not None:
            index = int(m.group(1))
            if not 1 <= index <= self.dimension:
                raise VariableIndexError(tok.text, self.dimension, tok.offset)
            return Variable(index)
        if tok.text in FUNCTIONS:
            self.expect_op("(")
            arg = self.parse_sum()
            self.expect_op(")")
            return Call(tok.text, arg)
        raise UnknownSymbolError(tok.text, tok.offset)


def parse_expression(text: str, dimension: int) -> Node:
    """Parse a single component expression over x1..x<dimension>."""
    return _Parser(text, dimension).parse()


# ---------------------------------------------------------------- evaluation


def _int_power(base: float, k: int) -> float:
    # binary repeated multiplication; k >= 0
    result = 1.0
    acc = base
    while k:
        if k & 1:
            result *= acc
        k >>= 1
        if k:
            acc *= acc
    return result


def power_value(base: float, exponent: float) -> float:
    """Power with the package's semantics.

    Integer exponents use repeated multiplication (negative ones through a
    final reciprocal); non-integer exponents require base > 0.  Raises
    ValueError or ZeroDivisionError on domain violations; callers that know
    the source expression wrap these in DomainError.
    """
    if exponent == math.floor(exponent) and abs(exponent) <= 2**53:
        k = int(exponent)
        if k >= 0:
            return _int_power(base, k)
        p = _int_power(base, -k)
        return 1.0 / p  # ZeroDivisionError when base == 0
    if base <= 0.0:
        raise ValueError("non-integer exponent requires positive base")
    return math.pow(base, exponent)


def _eval_node(node: Node, x: Sequence[float]) -> float:
    if isinstance(node, Literal):
        return node.value
    if isinstance(node, Variable):
        return float(x[node.index - 1])
    if isinstance(node, Unary):
        return -_eval_node(node.operand, x)
    if isinstance(node, Call):
        arg = _eval_node(node.operand, x)
        try:
            return _FN_IMPL[node.fn](arg)
        except (ValueError, OverflowError):
            raise DomainError(
                f"{node.fn} of out-of-domain value {arg!r}", pretty_node(node)
            ) from None
    lhs = _eval_node(node.lhs, x)
    rhs = _eval_node(node.rhs, x)
    op = node.op
    if op == "+":
        return lhs + rhs
    if op == "-":
        return lhs - rhs
    if op == "*":
        return lhs * rhs
    if op == "/":
        try:
            return lhs / rhs
        except ZeroDivisionError:
            raise DomainError("division by zero", pretty_node(node)) from None
    try:
        return power_value(lhs, rhs)
    except (ValueError, ZeroDivisionError, OverflowError) as exc:
        raise DomainError(str(exc), pretty_node(node)) from None


# ------------------------------------------------------------ pretty printer

_ATOM = 100
_POWER = 40
_UNARY = 30
_MULDIV = 20
_ADDSUB = 10

_BINARY_PREC = {"+": _ADDSUB, "-": _ADDSUB, "*": _MULDIV, "/": _MULDIV, "^": _POWER}


def _prec(node: Node) -> int:
    if isinstance(node, Binary):
        return _BINARY_PREC[node.op]
    if isinstance(node, Unary):
        return _UNARY
    return _ATOM


def _wrap(text: str, need: bool) -> str:
    return f"({text})" if need else text


def pretty_node(node: Node) -> str:
    """Canonical text for one AST; parsing it back restores the same tree."""
    if isinstance(node, Literal):
        return repr(node.value)
    if isinstance(node, Variable):
        return f"x{node.index}"
    if isinstance(node, Call):
        return f"{node.fn}({pretty_node(node.operand)})"
    if isinstance(node, Unary):
        inner = pretty_node(node.operand)
        # power binds tighter than unary minus, atoms need no parens
        return "-" + _wrap(inner, _prec(node.operand) in (_ADDSUB, _MULDIV, _UNARY))
    prec = _BINARY_PREC[node.op]
    ltext = _wrap(pretty_node(node.lhs), _prec(node.lhs) < prec or (node.op == "^" and _prec(node.lhs) <= prec))
    if node.op == "^":
        rtext = _wrap(pretty_node(node.rhs), _prec(node.rhs) < prec)
        return f"{ltext}^{rtext}"
    # left-associative: a right child at equal precedence must keep its parens
    rtext = _wrap(pretty_node(node.rhs), _prec(node.rhs) <= prec)
    if prec == _ADDSUB:
        return f"{ltext} {node.op} {rtext}"
    return f"{ltext}{node.op}{rtext}"


# ------------------------------------------------------------- field wrapper


def _codegen(node: Node) -> str:
    # emits Python source over names x1.. with helpers from _COMPILE_ENV;
    # only whitelisted node types are rendered, so the compile() input is
    # fully under our control
    if isinstance(node, Literal):
        return repr(node.value)
    if isinstance(node, Variable):
        return f"x{node.index}"
    if isinstance(node, Unary):
        return f"(-{_codegen(node.operand)})"
    if isinstance(node, Call):
        return f"_fn_{node.fn}({_codegen(node.operand)})"
    if node.op == "^":
        return f"_pow({_codegen(node.lhs)}, {_codegen(node.rhs)})"
    return f"({_codegen(node.lhs)} {node.op} {_codegen(node.rhs)})"


_COMPILE_ENV = {f"_fn_{name}": impl for name, impl in _FN_IMPL.items()}
_COMPILE_ENV["_pow"] = power_value


@dataclass(frozen=True)
class FieldExpression:
    """A vector field given componentwise by expressions over x1..xn."""

    dimension: int
    components: tuple[Node, ...]

    def evaluate(self, x: Sequence[float]) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dimension,):
            raise DimensionError(
                f"state of shape {x.shape} for dimension {self.dimension}"
            )
        return np.array([_eval_node(c, x) for c in self.components])

    def compiled(self) -> Callable[..., tuple[float, ...]]:
        """Fast callable taking unpacked floats; raises raw ValueError /
        ZeroDivisionError on domain violations (evaluate() gives the precise
        DomainError)."""
        args = ", ".join(f"x{i + 1}" for i in range(self.dimension))
        body = ", ".join(_codegen(c) for c in self.components)
        src = f"lambda {args}: ({body},)"
        return eval(src, dict(_COMPILE_ENV))  # noqa: S307 - source is our own codegen


def parse_field(texts: Sequence[str], dimension: int) -> FieldExpression:
    """Parse one expression per component into a field of the given dimension."""
    if len(texts) != dimension:
        raise DimensionError(
            f"{len(texts)} component expressions for dimension {dimension}"
        )
    return FieldExpression(
        dimension, tuple(parse_expression(t, dimension) for t in texts)
    )


def pretty_print(field: FieldExpression) -> list[str]:
    return [pretty_node(c) for c in field.components]


def evaluate(field: FieldExpression, x: Sequence[float]) -> np.ndarray:
    return field.evaluate(x)
