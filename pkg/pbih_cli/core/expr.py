"""Symbolic expressions: parse, differentiate exactly, evaluate numerically.

Grammar (whitespace is ignored)::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := '-' factor | power
    power  := atom ('^' factor)?
    atom   := number | ident | ident '(' expr ')' | '(' expr ')'
    number := (digits ['.' digits] | '.' digits) [('e' | 'E') ['+' | '-'] digits]

``^`` is right-associative and binds tighter than unary minus, so ``-x^2`` is
``-(x^2)`` and ``2^-1`` is ``2^(-1)``. Function names: sin, cos, sinh, cosh,
exp, ln, sqrt. Any other identifier is a variable; whether it is bound is only
checked at evaluation time.

Trees are immutable and may share subtrees (differentiation produces DAGs), so
the walkers below memoize on node identity.
"""

from __future__ import annotations

import math
import re
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from typing import Callable, Union

from pbih_cli.utils.logger import get_logger

logger = get_logger(__name__)

FUNCTIONS = ("sin", "cos", "sinh", "cosh", "exp", "ln", "sqrt")

_BINARY_SYMBOLS = {"add": "+", "sub": "-", "mul": "*", "div": "/", "pow": "^"}


class ExpressionError(ValueError):
    """Base class for expression errors."""


class ExprSyntaxError(ExpressionError):
    """Text does not match the expression grammar."""

    def __init__(self, message: str, position: int, text: str) -> None:
        super().__init__(f"{message} at position {position} in {text!r}")
        self.position = position
        self.text = text


class UnboundVariableError(ExpressionError):
    """Evaluation met variables that have no binding."""

    def __init__(self, names: Iterable[str]) -> None:
        self.names = tuple(sorted(set(names)))
        super().__init__("Unbound variable(s): " + ", ".join(self.names))


class ExprDomainError(ArithmeticError):
    """ln/sqrt of a non-positive value, division by zero, overflow."""


# --- Nodes ---


class Expr:
    """Base node. Arithmetic operators build simplified trees."""

    def __add__(self, other: ExprLike) -> Expr:
        return add(self, other)

    def __radd__(self, other: ExprLike) -> Expr:
        return add(other, self)

    def __sub__(self, other: ExprLike) -> Expr:
        return sub(self, other)

    def __rsub__(self, other: ExprLike) -> Expr:
        return sub(other, self)

    def __mul__(self, other: ExprLike) -> Expr:
        return mul(self, other)

    def __rmul__(self, other: ExprLike) -> Expr:
        return mul(other, self)

    def __truediv__(self, other: ExprLike) -> Expr:
        return div(self, other)

    def __rtruediv__(self, other: ExprLike) -> Expr:
        return div(other, self)

    def __pow__(self, other: ExprLike) -> Expr:
        return power(self, other)

    def __neg__(self) -> Expr:
        return neg(self)


@dataclass(frozen=True, repr=False)
class Const(Expr):
    value: float

    def __repr__(self) -> str:
        return f"Const({self.value!r})"


@dataclass(frozen=True, repr=False)
class Var(Expr):
    name: str

    def __repr__(self) -> str:
        return f"Var({self.name!r})"


@dataclass(frozen=True, repr=False)
class Unary(Expr):
    """``op`` is ``neg`` or one of FUNCTIONS."""

    op: str
    arg: Expr

    def __repr__(self) -> str:
        return f"Unary({self.op!r}, {self.arg!r})"


@dataclass(frozen=True, repr=False)
class Binary(Expr):
    """``op`` is one of add, sub, mul, div, pow."""

    op: str
    left: Expr
    right: Expr

    def __repr__(self) -> str:
        return f"Binary({self.op!r}, {self.left!r}, {self.right!r})"


ExprLike = Union[Expr, float, int]

ZERO = Const(0.0)
ONE = Const(1.0)


def as_expr(value: ExprLike) -> Expr:
    if isinstance(value, Expr):
        return value
    return Const(float(value))


# --- Numeric kernels ---


def _check(value: float, what: str) -> float:
    if not math.isfinite(value):
        raise ExprDomainError(f"{what} is not finite")
    return value


def _ln(x: float) -> float:
    if x <= 0.0:
        raise ExprDomainError(f"ln of non-positive value {x!r}")
    return math.log(x)


def _sqrt(x: float) -> float:
    if x <= 0.0:
        raise ExprDomainError(f"sqrt of non-positive value {x!r}")
    return math.sqrt(x)


def _div(a: float, b: float) -> float:
    if b == 0.0:
        raise ExprDomainError("division by zero")
    return a / b


def _pow(base: float, exponent: float) -> float:
    if float(exponent).is_integer():
        n = int(exponent)
        if base == 0.0 and n < 0:
            raise ExprDomainError("zero raised to a negative power")
        return base**n
    if base <= 0.0:
        raise ExprDomainError(f"non-integer power of non-positive base {base!r}")
    return base**exponent


_UNARY_IMPL: dict[str, Callable[[float], float]] = {
    "neg": lambda x: -x,
    "sin": math.sin,
    "cos": math.cos,
    "sinh": math.sinh,
    "cosh": math.cosh,
    "exp": math.exp,
    "ln": _ln,
    "sqrt": _sqrt,
}

_BINARY_IMPL: dict[str, Callable[[float, float], float]] = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
    "div": _div,
    "pow": _pow,
}


def _apply_unary(op: str, x: float) -> float:
    try:
        return _check(_UNARY_IMPL[op](x), f"{op}({x!r})")
    except OverflowError as e:
        raise ExprDomainError(f"{op}({x!r}) overflows") from e


def _apply_binary(op: str, a: float, b: float) -> float:
    try:
        return _check(_BINARY_IMPL[op](a, b), f"{op}({a!r}, {b!r})")
    except (OverflowError, ZeroDivisionError) as e:
        raise ExprDomainError(f"{op}({a!r}, {b!r}): {e}") from e


# --- Simplifying constructors (constant folding, x*1, x+0, x*0 only) ---


def _is_value(e: Expr, value: float) -> bool:
    return isinstance(e, Const) and e.value == value


def _fold_binary(op: str, a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        try:
            return Const(_apply_binary(op, a.value, b.value))
        except ExprDomainError:
            pass  # left for evaluation to report
    return Binary(op, a, b)


def add(a: ExprLike, b: ExprLike) -> Expr:
    a, b = as_expr(a), as_expr(b)
    if _is_value(a, 0.0):
        return b
    if _is_value(b, 0.0):
        return a
    return _fold_binary("add", a, b)


def sub(a: ExprLike, b: ExprLike) -> Expr:
    a, b = as_expr(a), as_expr(b)
    if _is_value(b, 0.0):
        return a
    if _is_value(a, 0.0):
        return neg(b)
    return _fold_binary("sub", a, b)


def mul(a: ExprLike, b: ExprLike) -> Expr:
    a, b = as_expr(a), as_expr(b)
    if _is_value(a, 0.0) or _is_value(b, 0.0):
        return ZERO
    if _is_value(a, 1.0):
        return b
    if _is_value(b, 1.0):
        return a
    return _fold_binary("mul", a, b)


def div(a: ExprLike, b: ExprLike) -> Expr:
    a, b = as_expr(a), as_expr(b)
    if _is_value(b, 1.0):
        return a
    return _fold_binary("div", a, b)


def power(a: ExprLike, b: ExprLike) -> Expr:
    return _fold_binary("pow", as_expr(a), as_expr(b))


def neg(a: ExprLike) -> Expr:
    a = as_expr(a)
    if isinstance(a, Const):
        return Const(-a.value)
    return Unary("neg", a)


def call(name: str, arg: ExprLike) -> Expr:
    """Apply a named function, folding constant arguments."""
    if name not in FUNCTIONS:
        raise ExpressionError(f"Unknown function: {name}")
    arg = as_expr(arg)
    if isinstance(arg, Const):
        try:
            return Const(_apply_unary(name, arg.value))
        except ExprDomainError:
            pass
    return Unary(name, arg)


def exp(a: ExprLike) -> Expr:
    return call("exp", a)


def ln(a: ExprLike) -> Expr:
    return call("ln", a)


def sqrt(a: ExprLike) -> Expr:
    return call("sqrt", a)


def total(terms: Iterable[ExprLike]) -> Expr:
    """Sum of terms (``ZERO`` for none)."""
    result: Expr = ZERO
    for t in terms:
        result = add(result, t)
    return result


# --- Parsing ---

_TOKEN = re.compile(
    r"\s*(?:(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens: list[tuple[str, str, int]] = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        match = _TOKEN.match(text, pos)
        if match is None:
            start = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ExprSyntaxError(f"Unexpected character {text[start]!r}", start, text)
        kind = match.lastgroup or "op"
        tokens.append((kind, match.group(kind), match.start(kind)))
        pos = match.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str) -> None:
        self.text = text
        self.tokens = _tokenize(text)
        self.index = 0

    @property
    def current(self) -> tuple[str, str, int]:
        return self.tokens[self.index]

    def _fail(self, message: str) -> ExprSyntaxError:
        return ExprSyntaxError(message, self.current[2], self.text)

    def _accept(self, symbol: str) -> bool:
        kind, value, _ = self.current
        if kind == "op" and value == symbol:
            self.index += 1
            return True
        return False

    def _expect(self, symbol: str) -> None:
        if not self._accept(symbol):
            found = self.current[1] or "end of input"
            raise self._fail(f"Expected {symbol!r}, found {found!r}")

    def parse(self) -> Expr:
        if self.current[0] == "end":
            raise self._fail("Empty expression")
        node = self.expr()
        if self.current[0] != "end":
            raise self._fail(f"Unexpected token {self.current[1]!r}")
        return node

    def expr(self) -> Expr:
        node = self.term()
        while True:
            if self._accept("+"):
                node = Binary("add", node, self.term())
            elif self._accept("-"):
                node = Binary("sub", node, self.term())
            else:
                return node

    def term(self) -> Expr:
        node = self.factor()
        while True:
            if self._accept("*"):
                node = Binary("mul", node, self.factor())
            elif self._accept("/"):
                node = Binary("div", node, self.factor())
            else:
                return node

    def factor(self) -> Expr:
        if self._accept("-"):
            return Unary("neg", self.factor())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self._accept("^"):
            return Binary("pow", base, self.factor())
        return base

    def atom(self) -> Expr:
        kind, value, _ = self.current
        if kind == "number":
            self.index += 1
            return Const(float(value))
        if kind == "ident":
            self.index += 1
            if self._accept("("):
                if value not in FUNCTIONS:
                    self.index -= 2
                    raise self._fail(f"Unknown function {value!r}")
                arg = self.expr()
                self._expect(")")
                return Unary(value, arg)
            if value in FUNCTIONS:
                self.index -= 1
                raise self._fail(f"Function {value!r} needs an argument")
            return Var(value)
        if self._accept("("):
            node = self.expr()
            self._expect(")")
            return node
        found = value or "end of input"
        raise self._fail(f"Unexpected token {found!r}")


def parse(text: str) -> Expr:
    """Parse text into an (unsimplified) expression tree."""
    return _Parser(text).parse()


# --- Tree walks ---


def free_variables(e: Expr) -> frozenset[str]:
    memo: dict[int, tuple[Expr, frozenset[str]]] = {}

    def walk(node: Expr) -> frozenset[str]:
        hit = memo.get(id(node))
        if hit is not None and hit[0] is node:
            return hit[1]
        if isinstance(node, Var):
            result = frozenset((node.name,))
        elif isinstance(node, Unary):
            result = walk(node.arg)
        elif isinstance(node, Binary):
            result = walk(node.left) | walk(node.right)
        else:
            result = frozenset()
        memo[id(node)] = (node, result)
        return result

    return walk(e)


class Substituter:
    """Simultaneous variable replacement, re-simplifying on the way up.

    One instance may be applied to many expressions; shared subtrees are
    rewritten once.
    """

    def __init__(self, mapping: Mapping[str, ExprLike]) -> None:
        self.replacements = {name: as_expr(value) for name, value in mapping.items()}
        self._memo: dict[int, tuple[Expr, Expr]] = {}

    def __call__(self, node: Expr) -> Expr:
        hit = self._memo.get(id(node))
        if hit is not None and hit[0] is node:
            return hit[1]
        if isinstance(node, Var):
            result = self.replacements.get(node.name, node)
        elif isinstance(node, Unary):
            inner = self(node.arg)
            result = neg(inner) if node.op == "neg" else call(node.op, inner)
        elif isinstance(node, Binary):
            result = _BUILDERS[node.op](self(node.left), self(node.right))
        else:
            result = node
        self._memo[id(node)] = (node, result)
        return result


def substitute(e: Expr, mapping: Mapping[str, ExprLike]) -> Expr:
    return Substituter(mapping)(e)


_BUILDERS: dict[str, Callable[[Expr, Expr], Expr]] = {
    "add": add,
    "sub": sub,
    "mul": mul,
    "div": div,
    "pow": power,
}


def _constant_value(e: Expr) -> float | None:
    if isinstance(e, Const):
        return e.value
    if free_variables(e):
        return None
    try:
        return Evaluator({})(e)
    except ExprDomainError:
        return None


class Differentiator:
    """Partial derivative with respect to one variable, shared across calls."""

    def __init__(self, variable: str) -> None:
        self.variable = variable
        self.memo: dict[int, tuple[Expr, Expr]] = {}

    def __call__(self, node: Expr) -> Expr:
        hit = self.memo.get(id(node))
        if hit is not None and hit[0] is node:
            return hit[1]
        result = self._rule(node)
        self.memo[id(node)] = (node, result)
        return result

    def _rule(self, node: Expr) -> Expr:
        if isinstance(node, Const):
            return ZERO
        if isinstance(node, Var):
            return ONE if node.name == self.variable else ZERO
        if isinstance(node, Unary):
            a = node.arg
            da = self(a)
            if _is_value(da, 0.0):
                return ZERO
            if node.op == "neg":
                return neg(da)
            if node.op == "sin":
                return mul(call("cos", a), da)
            if node.op == "cos":
                return neg(mul(call("sin", a), da))
            if node.op == "sinh":
                return mul(call("cosh", a), da)
            if node.op == "cosh":
                return mul(call("sinh", a), da)
            if node.op == "exp":
                return mul(node, da)
            if node.op == "ln":
                return div(da, a)
            if node.op == "sqrt":
                return div(da, mul(2.0, node))
            raise ExpressionError(f"Unknown unary operator: {node.op}")
        if isinstance(node, Binary):
            a, b = node.left, node.right
            da, db = self(a), self(b)
            if node.op == "add":
                return add(da, db)
            if node.op == "sub":
                return sub(da, db)
            if node.op == "mul":
                return add(mul(da, b), mul(a, db))
            if node.op == "div":
                return sub(div(da, b), div(mul(a, db), mul(b, b)))
            if node.op == "pow":
                n = _constant_value(b)
                if n is not None:
                    return mul(mul(n, power(a, n - 1.0)), da)
                return mul(node, add(mul(db, ln(a)), div(mul(b, da), a)))
            raise ExpressionError(f"Unknown binary operator: {node.op}")
        raise ExpressionError(f"Cannot differentiate {type(node).__name__}")


def differentiate(e: Expr, variable: str) -> Expr:
    """Exact symbolic partial derivative of ``e`` with respect to ``variable``."""
    return Differentiator(variable)(e)


class Evaluator:
    """Evaluates many expressions under one set of bindings.

    Results are memoized per node, so subtrees shared between the expressions
    of one chart point are computed once.
    """

    def __init__(self, bindings: Mapping[str, float]) -> None:
        self.bindings = {k: float(v) for k, v in bindings.items()}
        self._memo: dict[int, tuple[Expr, float]] = {}

    def __call__(self, e: Expr) -> float:
        try:
            return self._eval(e)
        except KeyError:
            missing = free_variables(e) - self.bindings.keys()
            if missing:
                raise UnboundVariableError(missing) from None
            raise

    def _eval(self, node: Expr) -> float:
        if isinstance(node, Const):
            return node.value
        if isinstance(node, Var):
            return self.bindings[node.name]
        hit = self._memo.get(id(node))
        if hit is not None and hit[0] is node:
            return hit[1]
        if isinstance(node, Unary):
            value = _apply_unary(node.op, self._eval(node.arg))
        elif isinstance(node, Binary):
            value = _apply_binary(node.op, self._eval(node.left), self._eval(node.right))
        else:
            raise ExpressionError(f"Cannot evaluate {type(node).__name__}")
        self._memo[id(node)] = (node, value)
        return value


def evaluate(e: Expr, bindings: Mapping[str, float]) -> float:
    """IEEE double value of ``e``; raises on unbound variables or domain errors."""
    return Evaluator(bindings)(e)


def central_difference(
    e: Expr,
    variable: str,
    bindings: Mapping[str, float],
    step: float = 1e-5,
) -> float:
    """Reference derivative by the two-point central difference."""
    at = dict(bindings)
    x = at[variable]
    at[variable] = x + step
    forward = evaluate(e, at)
    at[variable] = x - step
    backward = evaluate(e, at)
    return (forward - backward) / (2.0 * step)


# --- Emission ---


def _wrap(node: Expr) -> str:
    text = to_text(node)
    if isinstance(node, Binary) or (isinstance(node, Unary) and node.op == "neg"):
        return f"({text})"
    if isinstance(node, Const) and node.value < 0:
        return f"({text})"
    return text


def to_text(e: Expr) -> str:
    """Canonical text. Parsed input round-trips to an equal tree; folded negative
    constants come back as negations.
    """
    if isinstance(e, Const):
        return repr(float(e.value))
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Unary):
        if e.op == "neg":
            return "-" + _wrap(e.arg)
        return f"{e.op}({to_text(e.arg)})"
    if isinstance(e, Binary):
        return f"{_wrap(e.left)} {_BINARY_SYMBOLS[e.op]} {_wrap(e.right)}"
    raise ExpressionError(f"Cannot emit {type(e).__name__}")
