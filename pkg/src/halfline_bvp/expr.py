"""Small arithmetic expression language used in config files.

Grammar (lowest to highest precedence)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := primary ('^' unary)?          # right-associative
    primary := NUMBER | NAME | NAME '(' expr (',' expr)* ')' | '(' expr ')'

Names resolve to declared variables first, then to the constants ``pi`` and
``e``.  Functions come from a fixed table.  Evaluation accepts floats or numpy
arrays and raises :class:`NonFiniteError` instead of returning inf/nan.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

Number = Union[float, np.ndarray]

FUNCTIONS = {
    "sin": (1, np.sin),
    "cos": (1, np.cos),
    "tan": (1, np.tan),
    "exp": (1, np.exp),
    "log": (1, np.log),
    "sqrt": (1, np.sqrt),
    "abs": (1, np.abs),
    "atan": (1, np.arctan),
    "min": (2, np.minimum),
    "max": (2, np.maximum),
}
CONSTANTS = {"pi": math.pi, "e": math.e}

F_VARS = frozenset({"t", "x", "y"})
BOUND_VARS = frozenset({"t", "r"})
SCALAR_VARS = frozenset({"t"})


class ExpressionError(ValueError):
    """Base class for parse and evaluation failures."""


class ExprSyntaxError(ExpressionError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UnknownIdentifierError(ExpressionError):
    pass


class ArityError(ExpressionError):
    pass


class NonFiniteError(ExpressionError, ArithmeticError):
    """Raised when a subexpression evaluates to inf or nan."""

    def __init__(self, subexpression: str):
        super().__init__(f"non-finite value produced by {subexpression}")
        self.subexpression = subexpression


# ---------------------------------------------------------------- AST nodes

@dataclass(frozen=True)
class Num:
    value: float

    def source(self) -> str:
        return repr(float(self.value))


@dataclass(frozen=True)
class Var:
    name: str

    def source(self) -> str:
        return self.name


@dataclass(frozen=True)
class Const:
    name: str

    def source(self) -> str:
        return self.name


@dataclass(frozen=True)
class Neg:
    operand: "Node"

    def source(self) -> str:
        return f"(-{self.operand.source()})"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"

    def source(self) -> str:
        return f"({self.left.source()} {self.op} {self.right.source()})"


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple

    def source(self) -> str:
        return f"{self.func}({', '.join(a.source() for a in self.args)})"


Node = Union[Num, Var, Const, Neg, BinOp, Call]


# ---------------------------------------------------------------- tokenizer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z][A-Za-z0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


def _tokenize(source: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {source[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source: str, allowed_vars):
        self.tokens = _tokenize(source)
        self.i = 0
        self.allowed = allowed_vars

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text: str):
        kind, value, pos = self.advance()
        if value != text or kind == "end":
            found = "end of input" if kind == "end" else repr(value)
            raise ExprSyntaxError(f"expected {text!r}, found {found}", pos)

    def parse(self) -> Node:
        node = self.expr()
        kind, value, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {value!r}", pos)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.advance()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.advance()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Node:
        base = self.primary()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def primary(self) -> Node:
        kind, value, pos = self.advance()
        if kind == "num":
            return Num(float(value))
        if kind == "name":
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                return self.call(value, pos)
            if value in self.allowed:
                return Var(value)
            if value in CONSTANTS:
                return Const(value)
            if value in FUNCTIONS:
                raise ExprSyntaxError(f"function {value!r} used without arguments", pos)
            raise UnknownIdentifierError(
                f"unknown identifier {value!r} at position {pos}; "
                f"allowed variables: {sorted(self.allowed)}"
            )
        if kind == "op" and value == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(value)
        raise ExprSyntaxError(f"unexpected {found}", pos)

    def call(self, name: str, pos: int) -> Node:
        if name not in FUNCTIONS:
            raise UnknownIdentifierError(f"unknown function {name!r} at position {pos}")
        self.expect("(")
        args = [self.expr()]
        while self.peek()[0] == "op" and self.peek()[1] == ",":
            self.advance()
            args.append(self.expr())
        self.expect(")")
        arity = FUNCTIONS[name][0]
        if len(args) != arity:
            raise ArityError(
                f"{name} takes {arity} argument(s), got {len(args)} (position {pos})"
            )
        return Call(name, tuple(args))


# ---------------------------------------------------------------- evaluation

def _check(value, node):
    if not np.all(np.isfinite(value)):
        raise NonFiniteError(node.source())
    return value


def _power(base, exponent, node):
    base_a = np.asarray(base, dtype=float)
    exp_a = np.asarray(exponent, dtype=float)
    bad = (base_a < 0) & (exp_a != np.round(exp_a))
    if np.any(bad):
        raise NonFiniteError(node.source() + " (negative base with non-integer exponent)")
    return np.power(base_a, exp_a) if (base_a.ndim or exp_a.ndim) else float(base_a**exp_a)


def _eval(node: Node, env: Mapping[str, Number]) -> Number:
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Const):
        return CONSTANTS[node.name]
    if isinstance(node, Neg):
        return -_eval(node.operand, env)
    if isinstance(node, BinOp):
        a = _eval(node.left, env)
        b = _eval(node.right, env)
        if node.op == "+":
            out = a + b
        elif node.op == "-":
            out = a - b
        elif node.op == "*":
            out = a * b
        elif node.op == "/":
            out = np.divide(a, b) if (np.ndim(a) or np.ndim(b)) else (
                a / b if b != 0 else math.inf
            )
        else:
            out = _power(a, b, node)
        return _check(out, node)
    if isinstance(node, Call):
        fn = FUNCTIONS[node.func][1]
        args = [_eval(a, env) for a in node.args]
        out = fn(*args)
        if np.ndim(out) == 0:
            out = float(out)
        return _check(out, node)
    raise TypeError(f"not an expression node: {node!r}")


def _variables(node: Node) -> set[str]:
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Neg):
        return _variables(node.operand)
    if isinstance(node, BinOp):
        return _variables(node.left) | _variables(node.right)
    if isinstance(node, Call):
        out: set[str] = set()
        for a in node.args:
            out |= _variables(a)
        return out
    return set()


@dataclass(frozen=True)
class Expression:
    """A parsed expression together with its declared variable set."""

    text: str
    root: Node
    allowed_vars: frozenset

    @property
    def variables(self) -> frozenset:
        return frozenset(_variables(self.root))

    def source(self) -> str:
        """Fully parenthesised canonical form; re-parses to an equivalent tree."""
        return self.root.source()

    def __call__(self, **bindings: Number) -> Number:
        return evaluate(self, bindings)

    def __str__(self) -> str:
        return self.text


def parse(source: str, allowed_vars=frozenset()) -> Expression:
    """Parse ``source`` allowing only the names in ``allowed_vars`` as variables."""
    if not source or not source.strip():
        raise ExprSyntaxError("empty expression", 0)
    allowed = frozenset(allowed_vars)
    root = _Parser(source, allowed).parse()
    return Expression(source, root, allowed)


def evaluate(e: Expression, bindings: Mapping[str, Number]) -> Number:
    """Evaluate ``e``; arrays broadcast.  Raises NonFiniteError on inf/nan."""
    missing = e.variables - set(bindings)
    if missing:
        raise ExpressionError(f"unbound variable(s) {sorted(missing)} in {e.text!r}")
    env = {}
    for name in e.variables:
        v = bindings[name]
        if not np.all(np.isfinite(v)):
            raise NonFiniteError(f"binding {name}")
        env[name] = v if np.ndim(v) else float(v)
    with np.errstate(all="ignore"):
        out = _eval(e.root, env)
    if np.ndim(out) == 0:
        return float(out)
    shape = np.broadcast_shapes(*(np.shape(v) for v in env.values())) if env else ()
    return np.broadcast_to(np.asarray(out, dtype=float), shape).copy()
