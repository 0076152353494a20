"""Activation-function expression trees.

An activation function is a small immutable AST evaluated element-wise over
numpy arrays.  Evaluation never raises on bad numerics: division by (near)
zero and non-finite results are reported through a status code and the
output collapses to ``x * 0.0``, which marks the function as unfit.  If the
tree contains no input leaf at all, the result is multiplied element-wise by
the input so the function always depends on its argument.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Sequence, Union

import numpy as np

OK = "ok"
ZERO_DIVISION = "zero_division"
NON_FINITE = "non_finite"

# |denominator| below this trips the zero-division guard.
DIV_EPS = 1e-12

UNARY_OPS = ("sin", "cos", "tan", "exp", "tanh")
BOUNDED_OPS = ("min", "max")
BINARY_OPS = ("+", "-", "*", "/")


class ExpressionError(ValueError):
    """Raised for malformed expression text or token streams."""

    def __init__(self, message: str, position: int | None = None):
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)
        self.position = position


@dataclass(frozen=True)
class Input:
    """The value flowing into the activation function (printed as ``x``)."""


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Unary:
    op: str
    child: "Expr"

    def __post_init__(self):
        if self.op not in UNARY_OPS:
            raise ExpressionError(f"unknown unary operation {self.op!r}")


@dataclass(frozen=True)
class Bounded:
    """min/max of a subexpression against a numeric bound."""

    op: str
    child: "Expr"
    bound: float

    def __post_init__(self):
        if self.op not in BOUNDED_OPS:
            raise ExpressionError(f"unknown bounded operation {self.op!r}")


@dataclass(frozen=True)
class Pow:
    child: "Expr"
    exponent: float


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"

    def __post_init__(self):
        if self.op not in BINARY_OPS:
            raise ExpressionError(f"unknown binary operator {self.op!r}")


Expr = Union[Input, Const, Unary, Bounded, Pow, Binary]


@dataclass(eq=False)
class EvalOutcome:
    """Element-wise evaluation result plus a guard status."""

    values: np.ndarray
    status: str

    @property
    def ok(self) -> bool:
        return self.status == OK


class _GuardTrip(Exception):
    def __init__(self, status: str):
        self.status = status


def contains_input(expr: Expr) -> bool:
    """True iff an Input leaf occurs anywhere in the tree."""
    if isinstance(expr, Input):
        return True
    if isinstance(expr, (Unary, Bounded, Pow)):
        return contains_input(expr.child)
    if isinstance(expr, Binary):
        return contains_input(expr.left) or contains_input(expr.right)
    return False


def walk(expr: Expr) -> Iterator[Expr]:
    """Yield every node of the tree, parents before children."""
    yield expr
    if isinstance(expr, (Unary, Bounded, Pow)):
        yield from walk(expr.child)
    elif isinstance(expr, Binary):
        yield from walk(expr.left)
        yield from walk(expr.right)


def _checked(a: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(a)):
        raise _GuardTrip(NON_FINITE)
    return a


def _value(expr: Expr, x: np.ndarray) -> np.ndarray:
    if isinstance(expr, Input):
        return _checked(x)
    if isinstance(expr, Const):
        return _checked(np.full_like(x, expr.value))
    if isinstance(expr, Unary):
        u = _value(expr.child, x)
        return _checked(getattr(np, expr.op)(u))
    if isinstance(expr, Bounded):
        u = _value(expr.child, x)
        fn = np.minimum if expr.op == "min" else np.maximum
        return _checked(fn(u, expr.bound))
    if isinstance(expr, Pow):
        u = _value(expr.child, x)
        return _checked(np.power(u, expr.exponent))
    if isinstance(expr, Binary):
        left = _value(expr.left, x)
        right = _value(expr.right, x)
        if expr.op == "+":
            return _checked(left + right)
        if expr.op == "-":
            return _checked(left - right)
        if expr.op == "*":
            return _checked(left * right)
        if np.any(np.abs(right) < DIV_EPS):
            raise _GuardTrip(ZERO_DIVISION)
        return _checked(left / right)
    raise TypeError(f"not an expression node: {expr!r}")


def _dual(expr: Expr, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Forward-mode value/derivative pair with the same guards as _value."""
    if isinstance(expr, Input):
        return _checked(x), np.ones_like(x)
    if isinstance(expr, Const):
        return _checked(np.full_like(x, expr.value)), np.zeros_like(x)
    if isinstance(expr, Unary):
        u, du = _dual(expr.child, x)
        if expr.op == "sin":
            return _checked(np.sin(u)), _checked(np.cos(u) * du)
        if expr.op == "cos":
            return _checked(np.cos(u)), _checked(-np.sin(u) * du)
        if expr.op == "tan":
            t = _checked(np.tan(u))
            return t, _checked((1.0 + t * t) * du)
        if expr.op == "exp":
            e = _checked(np.exp(u))
            return e, _checked(e * du)
        t = _checked(np.tanh(u))
        return t, _checked((1.0 - t * t) * du)
    if isinstance(expr, Bounded):
        u, du = _dual(expr.child, x)
        if expr.op == "min":
            # ties take the subexpression's slope
            return _checked(np.minimum(u, expr.bound)), np.where(u <= expr.bound, du, 0.0)
        return _checked(np.maximum(u, expr.bound)), np.where(u >= expr.bound, du, 0.0)
    if isinstance(expr, Pow):
        u, du = _dual(expr.child, x)
        v = _checked(np.power(u, expr.exponent))
        if expr.exponent == 0.0:
            return v, np.zeros_like(x)
        g = _checked(expr.exponent * np.power(u, expr.exponent - 1.0) * du)
        return v, g
    if isinstance(expr, Binary):
        l, dl = _dual(expr.left, x)
        r, dr = _dual(expr.right, x)
        if expr.op == "+":
            return _checked(l + r), _checked(dl + dr)
        if expr.op == "-":
            return _checked(l - r), _checked(dl - dr)
        if expr.op == "*":
            return _checked(l * r), _checked(dl * r + l * dr)
        den = r * r
        if np.any(np.abs(r) < DIV_EPS) or np.any(np.abs(den) < DIV_EPS):
            raise _GuardTrip(ZERO_DIVISION)
        return _checked(l / r), _checked((dl * r - l * dr) / den)
    raise TypeError(f"not an expression node: {expr!r}")


def evaluate(expr: Expr, x) -> EvalOutcome:
    """Evaluate element-wise over ``x`` (any array shape).

    Guard contract: a division whose denominator has magnitude below
    ``DIV_EPS``, or any non-finite intermediate (tan blow-ups are finite in
    floating point, but exp overflow and fractional powers of negatives are
    not), aborts the evaluation and returns ``x * 0.0`` with the matching
    status.  Trees without an Input leaf get their result multiplied by x.
    """
    x = np.asarray(x, dtype=float)
    with np.errstate(all="ignore"):
        try:
            v = _value(expr, x)
            if not contains_input(expr):
                v = _checked(v * x)
        except _GuardTrip as guard:
            return EvalOutcome(x * 0.0, guard.status)
    return EvalOutcome(v, OK)


def evaluate_with_derivative(expr: Expr, x) -> tuple[np.ndarray, np.ndarray, str]:
    """Return (values, d values / dx, status) in one forward-mode pass.

    Applies the same guards and the same multiply-by-input adjustment as
    :func:`evaluate`; for an input-free tree f the pair is (f*x, f) by the
    product rule.  On a guard trip both arrays are ``x * 0.0``.
    """
    x = np.asarray(x, dtype=float)
    with np.errstate(all="ignore"):
        try:
            v, d = _dual(expr, x)
            if not contains_input(expr):
                v, d = _checked(v * x), v
        except _GuardTrip as guard:
            zero = x * 0.0
            return zero, zero.copy(), guard.status
    return v, d, OK


def derivative(expr: Expr, x) -> EvalOutcome:
    """Element-wise derivative with respect to the input.

    min/max use the convention d min(u,c) = u' where u <= c else 0 and
    d max(u,c) = u' where u >= c else 0 (ties keep the slope); pow uses
    e * u^(e-1) * u'.  Guards and the multiply-by-input adjustment mirror
    :func:`evaluate`.
    """
    _, d, status = evaluate_with_derivative(expr, x)
    return EvalOutcome(d, status)


def sample_curve(expr: Expr, lo: float = -10.0, hi: float = 10.0, n: int = 1000) -> list[tuple[float, float]]:
    """Sample the function on n evenly spaced points including both endpoints.

    Each point is evaluated on its own so a guard trip zeroes only that
    sample, not the whole curve.
    """
    if not lo < hi:
        raise ValueError(f"need lo < hi, got {lo} >= {hi}")
    if n < 2:
        raise ValueError(f"need at least 2 samples, got {n}")
    xs = np.linspace(lo, hi, n)
    points = []
    for xi in xs:
        out = evaluate(expr, np.array([xi]))
        points.append((float(xi), float(out.values[0])))
    return points


# --- text form ------------------------------------------------------------

_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2}

# spellings accepted on input and normalised to the canonical primitives
_NAME_ALIASES = {
    "minimum": "min",
    "maximum": "max",
    "tensor": "x",
}
_OP_ALIASES = {"÷": "/", "×": "*", "−": "-", "+": "+", "-": "-", "*": "*", "/": "/"}


def _fmt(value: float) -> str:
    return repr(float(value))


def to_text(expr: Expr) -> str:
    """Canonical infix text; parse_text(to_text(e)) is structurally e."""
    if isinstance(expr, Input):
        return "x"
    if isinstance(expr, Const):
        return _fmt(expr.value)
    if isinstance(expr, Unary):
        return f"{expr.op}({to_text(expr.child)})"
    if isinstance(expr, Bounded):
        return f"{expr.op}({to_text(expr.child)},{_fmt(expr.bound)})"
    if isinstance(expr, Pow):
        return f"pow({to_text(expr.child)},{_fmt(expr.exponent)})"
    prec = _PRECEDENCE[expr.op]
    left = to_text(expr.left)
    if isinstance(expr.left, Binary) and _PRECEDENCE[expr.left.op] < prec:
        left = f"({left})"
    right = to_text(expr.right)
    # right operand needs brackets at equal precedence to keep left association
    if isinstance(expr.right, Binary) and _PRECEDENCE[expr.right.op] <= prec:
        right = f"({right})"
    return f"{left}{expr.op}{right}"


_TOKEN_RE = re.compile(
    r"(?P<num>\d+\.\d*|\.\d+|\d+)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9.]*)"
    r"|(?P<op>[+\-*/÷×−])"
    r"|(?P<lp>\()"
    r"|(?P<rp>\))"
    r"|(?P<comma>,)"
)


def normalize_token(text: str) -> str:
    """Map alternative spellings (tensor, minimum, ÷, tf.math.*) to canonical tokens."""
    if text in _OP_ALIASES:
        return _OP_ALIASES[text]
    name = text
    if name.startswith("tf.math."):
        name = name[len("tf.math."):]
    return _NAME_ALIASES.get(name, name)


def tokenize(text: str) -> list[tuple[str, int]]:
    """Split expression text into (token, position) pairs."""
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ExpressionError(f"unexpected character {text[pos]!r}", pos)
        tokens.append((normalize_token(m.group()), pos))
        pos = m.end()
    return tokens


class _Parser:
    """Recursive-descent parser over token streams.

    Conventional precedence (* / over + -) and left association, so
    ``a-b-c`` parses as ``(a-b)-c``; explicit brackets group.  In strict
    mode the two arguments of min/max/pow must be comma separated.
    """

    def __init__(self, tokens: list[tuple[str, int]], require_commas: bool = True):
        self.tokens = tokens
        self.i = 0
        self.require_commas = require_commas

    def peek(self) -> str | None:
        return self.tokens[self.i][0] if self.i < len(self.tokens) else None

    def next(self, expected: str | None = None) -> tuple[str, int]:
        if self.i >= len(self.tokens):
            pos = self.tokens[-1][1] + 1 if self.tokens else 0
            raise ExpressionError("unexpected end of expression", pos)
        tok, pos = self.tokens[self.i]
        if expected is not None and tok != expected:
            raise ExpressionError(f"expected {expected!r}, found {tok!r}", pos)
        self.i += 1
        return tok, pos

    def parse(self) -> Expr:
        expr = self.expression()
        if self.i != len(self.tokens):
            tok, pos = self.tokens[self.i]
            raise ExpressionError(f"unexpected trailing {tok!r}", pos)
        return expr

    def expression(self) -> Expr:
        node = self.term()
        while self.peek() in ("+", "-"):
            op, _ = self.next()
            node = Binary(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.factor()
        while self.peek() in ("*", "/"):
            op, _ = self.next()
            node = Binary(op, node, self.factor())
        return node

    def factor(self) -> Expr:
        tok, pos = self.next()
        if _is_number(tok):
            return Const(float(tok))
        if tok == "x":
            return Input()
        if tok == "(":
            node = self.expression()
            self.next(")")
            return node
        if tok in UNARY_OPS:
            self.next("(")
            child = self.expression()
            self.next(")")
            return Unary(tok, child)
        if tok in BOUNDED_OPS or tok == "pow":
            self.next("(")
            child = self.expression()
            bound = self.second_argument(tok)
            self.next(")")
            if tok == "pow":
                return Pow(child, bound)
            return Bounded(tok, child, bound)
        raise ExpressionError(f"unexpected token {tok!r}", pos)

    def second_argument(self, fn: str) -> float:
        if self.peek() == ",":
            self.next()
        elif self.require_commas:
            tok, pos = self.tokens[self.i] if self.i < len(self.tokens) else ("", 0)
            raise ExpressionError(f"expected ',' between {fn} arguments", pos)
        tok, pos = self.next()
        if not _is_number(tok):
            raise ExpressionError(f"second argument of {fn} must be a numeric constant", pos)
        return float(tok)


def _is_number(tok: str) -> bool:
    return bool(re.fullmatch(r"\d+\.\d*|\.\d+|\d+", tok))


def parse_text(text: str) -> Expr:
    """Parse canonical infix text (the inverse of :func:`to_text`)."""
    tokens = tokenize(text)
    if not tokens:
        raise ExpressionError("empty expression", 0)
    return _Parser(tokens, require_commas=True).parse()


def tokens_to_expr(tokens: Sequence[str], require_commas: bool = True) -> Expr:
    """Build a tree from an already-tokenized stream (grammar derivations)."""
    pairs = [(normalize_token(t), i) for i, t in enumerate(tokens)]
    if not pairs:
        raise ExpressionError("empty token stream", 0)
    return _Parser(pairs, require_commas=require_commas).parse()
