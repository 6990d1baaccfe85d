"""Expression language for system definitions.

Grammar::

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := atom ('^' int)?
    atom   := number | var | func '(' expr ')' | '(' expr ')' | '-' atom

Variables are ``x1 .. xN`` (1-based in text, stored 0-based).  Note that
``-x1^2`` parses as ``(-x1)^2`` because unary minus binds inside an atom.

Evaluation is forward-mode: every node yields a :class:`Dual` carrying the
value and the full gradient with respect to ``x``.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

FUNCTIONS = ("sin", "cos", "exp", "sqrt")


class ExpressionSyntaxError(ValueError):
    def __init__(self, message: str, offset: int, text: str = ""):
        self.offset = offset
        self.text = text
        super().__init__(f"{message} at offset {offset}")


class ExpressionDomainError(ArithmeticError):
    """Raised when evaluation leaves the domain of an operation."""

    def __init__(self, message: str, offset: int | None):
        self.offset = offset
        where = f" (expression offset {offset})" if offset is not None else ""
        super().__init__(message + where)


# --- AST -------------------------------------------------------------------
# `pos` is the source offset; it is excluded from equality so that parsed and
# re-parsed trees compare equal.

@dataclass(frozen=True)
class Num:
    value: float
    pos: int | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Var:
    index: int  # 0-based
    pos: int | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Neg:
    arg: "Expression"
    pos: int | None = field(default=None, compare=False)


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "Expression"
    right: "Expression"
    pos: int | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Pow:
    base: "Expression"
    exponent: int
    pos: int | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expression"
    pos: int | None = field(default=None, compare=False)


Expression = Union[Num, Var, Neg, BinOp, Pow, Call]


# --- tokenizer / parser ----------------------------------------------------

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ExpressionSyntaxError(f"unexpected character {text[pos]!r}", pos, text)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, dimension: int | None):
        self.text = text
        self.dimension = dimension
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message, tok=None):
        tok = tok or self.peek()
        raise ExpressionSyntaxError(message, tok[2], self.text)

    def expect(self, value):
        tok = self.peek()
        if tok[1] != value or tok[0] != "op":
            self.error(f"expected {value!r}")
        return self.take()

    def parse(self):
        node = self.expr()
        if self.peek()[0] != "end":
            self.error(f"unexpected token {self.peek()[1]!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            _, op, pos = self.take()
            node = BinOp(op, node, self.term(), pos)
        return node

    def term(self):
        node = self.factor()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            _, op, pos = self.take()
            node = BinOp(op, node, self.factor(), pos)
        return node

    def factor(self):
        node = self.atom()
        if self.peek()[1] == "^" and self.peek()[0] == "op":
            _, _, pos = self.take()
            sign = 1
            if self.peek()[1] == "-" and self.peek()[0] == "op":
                self.take()
                sign = -1
            tok = self.peek()
            if tok[0] != "number":
                self.error("exponent must be an integer literal")
            if not re.fullmatch(r"\d+", tok[1]):
                self.error("non-integer exponent")
            self.take()
            node = Pow(node, sign * int(tok[1]), pos)
        return node

    def atom(self):
        kind, value, pos = self.peek()
        if kind == "number":
            self.take()
            return Num(float(value), pos)
        if kind == "name":
            self.take()
            if value in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(value, arg, pos)
            m = re.fullmatch(r"x([1-9]\d*)", value)
            if m is None:
                raise ExpressionSyntaxError(f"unknown identifier {value!r}", pos, self.text)
            index = int(m.group(1))
            if self.dimension is not None and index > self.dimension:
                raise ExpressionSyntaxError(
                    f"variable {value} exceeds dimension {self.dimension}", pos, self.text
                )
            return Var(index - 1, pos)
        if kind == "op" and value == "(":
            self.take()
            node = self.expr()
            self.expect(")")
            return node
        if kind == "op" and value == "-":
            self.take()
            return Neg(self.atom(), pos)
        if kind == "end":
            self.error("unexpected end of input")
        self.error(f"unexpected token {value!r}")


def parse_expression(text: str, dimension: int | None = None) -> Expression:
    """Parse ``text``; raises :class:`ExpressionSyntaxError` with an offset."""
    return _Parser(text, dimension).parse()


def to_text(node: Expression) -> str:
    """Fully parenthesised rendering that re-parses to an equal tree."""
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Var):
        return f"x{node.index + 1}"
    if isinstance(node, Neg):
        return f"-({to_text(node.arg)})"
    if isinstance(node, BinOp):
        return f"({to_text(node.left)} {node.op} {to_text(node.right)})"
    if isinstance(node, Pow):
        return f"({to_text(node.base)})^{node.exponent}"
    if isinstance(node, Call):
        return f"{node.func}({to_text(node.arg)})"
    raise TypeError(node)


def max_variable(node: Expression) -> int:
    """Largest 0-based variable index used, -1 if none."""
    if isinstance(node, Var):
        return node.index
    if isinstance(node, Num):
        return -1
    if isinstance(node, (Neg, Pow, Call)):
        return max_variable(node.base if isinstance(node, Pow) else node.arg)
    return max(max_variable(node.left), max_variable(node.right))


# --- forward mode ----------------------------------------------------------

@dataclass
class Dual:
    value: float
    grad: np.ndarray


def _compile(node: Expression, n: int) -> Callable[[np.ndarray], Dual]:
    if isinstance(node, Num):
        v = float(node.value)
        zero = np.zeros(n)
        return lambda x: Dual(v, zero)
    if isinstance(node, Var):
        i = node.index
        e = np.zeros(n)
        e[i] = 1.0
        return lambda x: Dual(float(x[i]), e)
    if isinstance(node, Neg):
        a = _compile(node.arg, n)

        def neg(x):
            d = a(x)
            return Dual(-d.value, -d.grad)
        return neg
    if isinstance(node, BinOp):
        left = _compile(node.left, n)
        right = _compile(node.right, n)
        op, pos = node.op, node.pos
        if op == "+":
            def add(x):
                u, w = left(x), right(x)
                return Dual(u.value + w.value, u.grad + w.grad)
            return add
        if op == "-":
            def sub(x):
                u, w = left(x), right(x)
                return Dual(u.value - w.value, u.grad - w.grad)
            return sub
        if op == "*":
            def mul(x):
                u, w = left(x), right(x)
                return Dual(u.value * w.value, u.grad * w.value + w.grad * u.value)
            return mul

        def div(x):
            u, w = left(x), right(x)
            if w.value == 0.0:
                raise ExpressionDomainError("division by zero", pos)
            q = u.value / w.value
            return Dual(q, (u.grad - q * w.grad) / w.value)
        return div
    if isinstance(node, Pow):
        base = _compile(node.base, n)
        k, pos = node.exponent, node.pos

        def power(x):
            d = base(x)
            if k == 0:
                return Dual(1.0, np.zeros(n))
            if k < 0 and d.value == 0.0:
                raise ExpressionDomainError("negative power of zero", pos)
            return Dual(d.value**k, k * d.value ** (k - 1) * d.grad)
        return power
    if isinstance(node, Call):
        a = _compile(node.arg, n)
        f, pos = node.func, node.pos
        if f == "sin":
            return lambda x: (lambda d: Dual(math.sin(d.value), math.cos(d.value) * d.grad))(a(x))
        if f == "cos":
            return lambda x: (lambda d: Dual(math.cos(d.value), -math.sin(d.value) * d.grad))(a(x))
        if f == "exp":
            def exp(x):
                d = a(x)
                try:
                    e = math.exp(d.value)
                except OverflowError:
                    raise ExpressionDomainError("exp overflow", pos) from None
                return Dual(e, e * d.grad)
            return exp

        def sqrt(x):
            d = a(x)
            if d.value <= 0.0:
                raise ExpressionDomainError(f"sqrt of non-positive value {d.value!r}", pos)
            s = math.sqrt(d.value)
            return Dual(s, d.grad / (2.0 * s))
        return sqrt
    raise TypeError(node)


class Function:
    """A parsed expression bound to a dimension, ready for evaluation."""

    def __init__(self, source: Union[str, Expression], dimension: int):
        if isinstance(source, str):
            self.text = source
            self.tree = parse_expression(source, dimension)
        else:
            self.tree = source
            self.text = to_text(source)
        if max_variable(self.tree) >= dimension:
            raise ValueError(f"expression {self.text!r} uses variables beyond x{dimension}")
        self.dimension = dimension
        self._eval = _compile(self.tree, dimension)

    def __repr__(self):
        return f"Function({self.text!r}, {self.dimension})"

    def __call__(self, x) -> float:
        return self._eval(np.asarray(x, dtype=float)).value

    def value_and_grad(self, x) -> tuple[float, np.ndarray]:
        d = self._eval(np.asarray(x, dtype=float))
        return d.value, np.array(d.grad, dtype=float)

    def grad(self, x) -> np.ndarray:
        return self.value_and_grad(x)[1]


def eval_with_derivatives(e: Expression | str, x) -> tuple[float, np.ndarray]:
    x = np.asarray(x, dtype=float)
    tree = parse_expression(e) if isinstance(e, str) else e
    if max_variable(tree) >= len(x):
        raise ValueError("point dimension smaller than the expression's variables")
    d = _compile(tree, len(x))(x)
    return d.value, np.array(d.grad, dtype=float)
