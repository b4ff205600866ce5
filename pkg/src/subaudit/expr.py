"""Scalar arithmetic expressions with forward-mode derivatives.

The grammar is deliberately small::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?
    atom   := NUMBER | NAME | NAME '(' expr ')' | '(' expr ')'

so ``^`` binds tighter than unary minus (``-x^2 == -(x^2)``) and is
right-associative (``x^y^z == x^(y^z)``).  Identifiers must be declared
variables or one of the functions in :data:`FUNCTIONS`.

Parsed expressions are immutable.  :func:`evaluate` returns a float and
:func:`evaluate_dual` returns a :class:`DualScalar` whose partials are the
exact first derivatives with respect to every declared variable.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import ExprDomainError, ExprSyntaxError, UnknownIdentifierError

__all__ = [
    "Expression",
    "DualScalar",
    "FUNCTIONS",
    "parse",
    "evaluate",
    "evaluate_dual",
    "render",
]

FUNCTIONS = ("sin", "cos", "tan", "exp", "log", "sqrt", "sinh", "cosh", "tanh", "abs")


# --------------------------------------------------------------------------
# syntax tree

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str
    index: int


@dataclass(frozen=True)
class Neg:
    operand: object


@dataclass(frozen=True)
class Bin:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    func: str
    arg: object


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}


def _prec(node):
    if isinstance(node, Bin):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return 3
    return 5


def _render(node, need=0):
    if isinstance(node, Num):
        text = repr(node.value)
    elif isinstance(node, Var):
        text = node.name
    elif isinstance(node, Call):
        text = f"{node.func}({_render(node.arg)})"
    elif isinstance(node, Neg):
        text = "-" + _render(node.operand, 3)
    elif node.op in "+-":
        text = f"{_render(node.left, 1)} {node.op} {_render(node.right, 2)}"
    elif node.op in "*/":
        text = f"{_render(node.left, 2)}{node.op}{_render(node.right, 3)}"
    else:
        text = f"{_render(node.left, 5)}^{_render(node.right, 3)}"
    if _prec(node) < need:
        return f"({text})"
    return text


def _has_vars(node):
    if isinstance(node, Var):
        return True
    if isinstance(node, Num):
        return False
    if isinstance(node, (Neg, Call)):
        return _has_vars(node.operand if isinstance(node, Neg) else node.arg)
    return _has_vars(node.left) or _has_vars(node.right)


# --------------------------------------------------------------------------
# parser

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)


def _tokenize(source):
    tokens = []
    pos = 0
    while pos < len(source):
        if source[pos:].strip() == "":
            break
        m = _TOKEN.match(source, pos)
        if m is None or m.end() == pos:
            col = pos + 1 + (len(source[pos:]) - len(source[pos:].lstrip()))
            raise ExprSyntaxError(f"unexpected character {source[col - 1]!r}", col)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start + 1))
        pos = m.end()
    tokens.append(("end", "", len(source) + 1))
    return tokens


class _Parser:
    def __init__(self, source, variables):
        self.tokens = _tokenize(source)
        self.pos = 0
        self.variables = {name: i for i, name in enumerate(variables)}

    def peek(self):
        return self.tokens[self.pos]

    def take(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, text):
        kind, value, col = self.take()
        if value != text:
            found = "end of input" if kind == "end" else repr(value)
            raise ExprSyntaxError(f"expected {text!r}, found {found}", col)

    def parse(self):
        node = self.expr()
        kind, value, col = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {value!r}", col)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Bin(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Bin(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            return Bin("^", base, self.unary())
        return base

    def atom(self):
        kind, value, col = self.take()
        if kind == "num":
            return Num(float(value))
        if kind == "name":
            if value in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(value, arg)
            if value in self.variables:
                return Var(value, self.variables[value])
            raise UnknownIdentifierError(value, col)
        if value == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(value)
        raise ExprSyntaxError(f"unexpected {found}", col)


# --------------------------------------------------------------------------
# dual numbers

class DualScalar:
    """Value with exact first partials, one per declared variable."""

    __slots__ = ("value", "partials")

    def __init__(self, value, partials):
        self.value = float(value)
        self.partials = partials

    def __repr__(self):
        return f"DualScalar({self.value!r}, {self.partials.tolist()!r})"


def _dual_const(value, nvars):
    return DualScalar(value, np.zeros(nvars))


# --------------------------------------------------------------------------
# compilation to closures

def _fail(message, node):
    raise ExprDomainError(message, _render(node))


def _compile_float(node):
    if isinstance(node, Num):
        v = node.value
        return lambda x: v
    if isinstance(node, Var):
        i = node.index
        return lambda x: x[i]
    if isinstance(node, Neg):
        f = _compile_float(node.operand)
        return lambda x: -f(x)
    if isinstance(node, Call):
        f = _compile_float(node.arg)
        name = node.func
        if name == "log":
            def g(x):
                a = f(x)
                if a <= 0.0:
                    _fail(f"log of non-positive value {a!r}", node)
                return math.log(a)
            return g
        if name == "sqrt":
            def g(x):
                a = f(x)
                if a < 0.0:
                    _fail(f"sqrt of negative value {a!r}", node)
                return math.sqrt(a)
            return g
        if name == "abs":
            return lambda x: abs(f(x))
        fn = getattr(math, name)

        def g(x):
            try:
                return fn(f(x))
            except (OverflowError, ValueError) as exc:
                _fail(str(exc), node)
        return g
    lf = _compile_float(node.left)
    rf = _compile_float(node.right)
    op = node.op
    if op == "+":
        return lambda x: lf(x) + rf(x)
    if op == "-":
        return lambda x: lf(x) - rf(x)
    if op == "*":
        return lambda x: lf(x) * rf(x)
    if op == "/":
        def g(x):
            b = rf(x)
            if b == 0.0:
                _fail("division by zero", node)
            return lf(x) / b
        return g

    def g(x):
        a, b = lf(x), rf(x)
        if a == 0.0 and b < 0.0:
            _fail("zero raised to a negative power", node)
        if a < 0.0 and b != int(b):
            _fail("negative base with non-integer exponent", node)
        try:
            return a ** b
        except OverflowError as exc:
            _fail(str(exc), node)
    return g


def _compile_dual(node, nvars):
    if isinstance(node, Num):
        v = node.value
        return lambda x: _dual_const(v, nvars)
    if isinstance(node, Var):
        i = node.index

        def g(x):
            p = np.zeros(nvars)
            p[i] = 1.0
            return DualScalar(x[i], p)
        return g
    if isinstance(node, Neg):
        f = _compile_dual(node.operand, nvars)

        def g(x):
            a = f(x)
            return DualScalar(-a.value, -a.partials)
        return g
    if isinstance(node, Call):
        return _compile_dual_call(node, nvars)
    lf = _compile_dual(node.left, nvars)
    rf = _compile_dual(node.right, nvars)
    op = node.op
    if op == "+":
        def g(x):
            a, b = lf(x), rf(x)
            return DualScalar(a.value + b.value, a.partials + b.partials)
    elif op == "-":
        def g(x):
            a, b = lf(x), rf(x)
            return DualScalar(a.value - b.value, a.partials - b.partials)
    elif op == "*":
        def g(x):
            a, b = lf(x), rf(x)
            return DualScalar(a.value * b.value, a.partials * b.value + b.partials * a.value)
    elif op == "/":
        def g(x):
            a, b = lf(x), rf(x)
            if b.value == 0.0:
                _fail("division by zero", node)
            q = a.value / b.value
            return DualScalar(q, (a.partials - b.partials * q) / b.value)
    elif not _has_vars(node.right):
        def g(x):
            a, b = lf(x), rf(x)
            n = b.value
            if a.value == 0.0 and n < 0.0:
                _fail("zero raised to a negative power", node)
            if a.value < 0.0 and n != int(n):
                _fail("negative base with non-integer exponent", node)
            if n == 0.0:
                return _dual_const(1.0, nvars)
            if a.value == 0.0 and n < 1.0:
                _fail("derivative of power undefined at zero base", node)
            return DualScalar(a.value ** n, a.partials * (n * a.value ** (n - 1.0)))
    else:
        def g(x):
            a, b = lf(x), rf(x)
            if a.value <= 0.0:
                _fail("non-positive base with variable exponent", node)
            v = a.value ** b.value
            return DualScalar(
                v, v * (b.partials * math.log(a.value) + a.partials * (b.value / a.value))
            )
    return g


def _compile_dual_call(node, nvars):
    f = _compile_dual(node.arg, nvars)
    name = node.func

    def rule(value_fn, deriv_fn, check=None):
        def g(x):
            a = f(x)
            if check is not None:
                check(a.value)
            return DualScalar(value_fn(a.value), a.partials * deriv_fn(a.value))
        return g

    if name == "sin":
        return rule(math.sin, math.cos)
    if name == "cos":
        return rule(math.cos, lambda v: -math.sin(v))
    if name == "tan":
        return rule(math.tan, lambda v: 1.0 / math.cos(v) ** 2)
    if name == "exp":
        return rule(math.exp, math.exp)
    if name == "sinh":
        return rule(math.sinh, math.cosh)
    if name == "cosh":
        return rule(math.cosh, math.sinh)
    if name == "tanh":
        return rule(math.tanh, lambda v: 1.0 - math.tanh(v) ** 2)
    if name == "abs":
        # abs'(0) := 0
        return rule(abs, lambda v: float(np.sign(v)))
    if name == "log":
        def check(v):
            if v <= 0.0:
                _fail(f"log of non-positive value {v!r}", node)
        return rule(math.log, lambda v: 1.0 / v, check)

    def check(v):
        if v < 0.0:
            _fail(f"sqrt of negative value {v!r}", node)
        if v == 0.0:
            _fail("derivative of sqrt undefined at zero", node)
    return rule(math.sqrt, lambda v: 0.5 / math.sqrt(v), check)


# --------------------------------------------------------------------------
# public surface

class Expression:
    """An immutable parsed expression over an ordered list of variables."""

    __slots__ = ("source", "variables", "tree", "_f", "_d")

    def __init__(self, source, variables, tree):
        self.source = source
        self.variables = tuple(variables)
        self.tree = tree
        self._f = _compile_float(tree)
        self._d = _compile_dual(tree, len(self.variables))

    def __eq__(self, other):
        return (
            isinstance(other, Expression)
            and self.variables == other.variables
            and self.tree == other.tree
        )

    def __hash__(self):
        return hash((self.variables, self.tree))

    def __repr__(self):
        return f"Expression({self.render()!r})"

    def render(self):
        return _render(self.tree)

    def __call__(self, values):
        """Evaluate on a positional sequence ordered like ``variables``."""
        return float(self._f(values))

    def dual(self, values):
        return self._d(values)

    @property
    def is_constant(self):
        return not _has_vars(self.tree)


def parse(source: str, variables: Sequence[str]) -> Expression:
    """Parse ``source`` into an :class:`Expression` over ``variables``."""
    if not source or not source.strip():
        raise ExprSyntaxError("empty expression", 1)
    variables = list(variables)
    clash = [v for v in variables if v in FUNCTIONS]
    if clash:
        raise ExprSyntaxError(f"variable name {clash[0]!r} shadows a function", 1)
    tree = _Parser(source, variables).parse()
    return Expression(source, variables, tree)


def render(expr: Expression) -> str:
    return expr.render()


def _positional(expr, env):
    try:
        return [float(env[name]) for name in expr.variables]
    except KeyError as exc:
        used = _used_names(expr.tree)
        if exc.args[0] in used:
            raise ExprDomainError(f"unbound variable {exc.args[0]!r}", expr.render()) from None
        return [float(env.get(name, 0.0)) for name in expr.variables]


def _used_names(node, acc=None):
    acc = set() if acc is None else acc
    if isinstance(node, Var):
        acc.add(node.name)
    elif isinstance(node, Neg):
        _used_names(node.operand, acc)
    elif isinstance(node, Call):
        _used_names(node.arg, acc)
    elif isinstance(node, Bin):
        _used_names(node.left, acc)
        _used_names(node.right, acc)
    return acc


def evaluate(expr: Expression, env: Mapping[str, float]) -> float:
    """Evaluate ``expr`` with variables bound by ``env``."""
    return expr(_positional(expr, env))


def evaluate_dual(expr: Expression, env: Mapping[str, float]) -> DualScalar:
    """Value and exact partial derivatives of ``expr`` at ``env``."""
    return expr.dual(_positional(expr, env))
