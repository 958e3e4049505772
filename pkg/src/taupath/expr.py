"""Propensity expressions: parsing, evaluation, symbolic derivatives.

Expressions are small immutable trees over numbers, names (species or
parameters), the four arithmetic operators, powers and unary negation.
Derivatives are built symbolically and lightly simplified so that the
bytecode handed to the simulation kernels stays short.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping

from .errors import EvaluationError, ModelSyntaxError


class Expr:
    """Base class for expression nodes."""

    precedence = 100

    def names(self) -> set[str]:
        return set()

    def evaluate(self, env: Mapping[str, float]) -> float:
        raise NotImplementedError

    def diff(self, name: str) -> "Expr":
        raise NotImplementedError

    def __str__(self) -> str:
        return self.format()

    def format(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class Num(Expr):
    value: float

    def evaluate(self, env):
        return self.value

    def diff(self, name):
        return ZERO

    def format(self):
        v = self.value
        if v == int(v) and abs(v) < 1e15:
            return str(int(v))
        return repr(v)


@dataclass(frozen=True)
class Name(Expr):
    name: str

    def names(self):
        return {self.name}

    def evaluate(self, env):
        try:
            return float(env[self.name])
        except KeyError:
            raise EvaluationError(f"no value bound for {self.name!r}") from None

    def diff(self, name):
        return ONE if name == self.name else ZERO

    def format(self):
        return self.name


@dataclass(frozen=True)
class Neg(Expr):
    operand: Expr
    precedence = 3

    def names(self):
        return self.operand.names()

    def evaluate(self, env):
        return -self.operand.evaluate(env)

    def diff(self, name):
        return neg(self.operand.diff(name))

    def format(self):
        return "-" + _wrap(self.operand, self.precedence + 1)


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr

    @property
    def precedence(self):
        return _PRECEDENCE[self.op]

    def names(self):
        return self.left.names() | self.right.names()

    def evaluate(self, env):
        a = self.left.evaluate(env)
        b = self.right.evaluate(env)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        if self.op == "/":
            if b == 0.0:
                raise EvaluationError(f"division by zero in {self}")
            return a / b
        return power(a, b)

    def diff(self, name):
        a, b = self.left, self.right
        da, db = a.diff(name), b.diff(name)
        if self.op == "+":
            return add(da, db)
        if self.op == "-":
            return sub(da, db)
        if self.op == "*":
            return add(mul(da, b), mul(a, db))
        if self.op == "/":
            # (a/b)' = a'/b - a b'/b^2
            return sub(div(da, b), div(mul(a, db), pow_(b, Num(2.0))))
        # a^b: exponent part uses a^b ln a with the 0^b -> 0 limit
        base_part = ZERO
        if da != ZERO:
            base_part = mul(mul(b, pow_(a, sub(b, ONE))), da)
        exp_part = ZERO
        if db != ZERO:
            exp_part = mul(PowLog(a, b), db)
        return add(base_part, exp_part)

    def format(self):
        p = self.precedence
        if self.op == "^":
            # right associative
            return f"{_wrap(self.left, p + 1)}^{_wrap(self.right, p)}"
        right_p = p + 1 if self.op in "-/" else p
        return f"{_wrap(self.left, p)} {self.op} {_wrap(self.right, right_p)}"


@dataclass(frozen=True)
class PowLog(Expr):
    """``base**exponent * ln(base)``, taken as 0 at base == 0.

    Only produced by differentiation of a power in its exponent; it has no
    surface syntax in model files.
    """

    base: Expr
    exponent: Expr

    def names(self):
        return self.base.names() | self.exponent.names()

    def evaluate(self, env):
        return powlog(self.base.evaluate(env), self.exponent.evaluate(env))

    def diff(self, name):
        # d[a^b ln a] = a^b ln a * (b' ln a + b a'/a) + a^b a'/a
        if name not in self.names():
            return ZERO
        # only first derivatives are ever needed by the estimators
        raise NotImplementedError("second derivatives through exponents")

    def format(self):
        return f"powlog({self.base}, {self.exponent})"


_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}

ZERO = Num(0.0)
ONE = Num(1.0)


def _wrap(e: Expr, min_prec: int) -> str:
    s = e.format()
    if isinstance(e, Num) and e.value < 0:
        return f"({s})"
    if e.precedence < min_prec:
        return f"({s})"
    return s


def power(a: float, b: float) -> float:
    """``a**b`` with the conventions used for propensities."""
    if a == 0.0:
        if b > 0.0:
            return 0.0
        raise EvaluationError(f"0 raised to non-positive power {b}")
    try:
        r = math.pow(a, b)
    except (ValueError, OverflowError) as exc:
        raise EvaluationError(f"cannot evaluate {a}^{b}: {exc}") from None
    return r


def powlog(a: float, b: float) -> float:
    if a == 0.0:
        if b > 0.0:
            return 0.0
        raise EvaluationError(f"0 raised to non-positive power {b}")
    if a < 0.0:
        raise EvaluationError(f"logarithm of negative base {a}")
    return math.pow(a, b) * math.log(a)


# -- smart constructors (constant folding and trivial identities) ------------

def neg(a: Expr) -> Expr:
    if isinstance(a, Num):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.operand
    return Neg(a)


def add(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value + b.value)
    if a == ZERO:
        return b
    if b == ZERO:
        return a
    if isinstance(b, Neg):
        return sub(a, b.operand)
    return BinOp("+", a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value - b.value)
    if b == ZERO:
        return a
    if a == ZERO:
        return neg(b)
    if a == b:
        return ZERO
    return BinOp("-", a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value * b.value)
    if a == ZERO or b == ZERO:
        return ZERO
    if a == ONE:
        return b
    if b == ONE:
        return a
    if isinstance(a, Neg):
        return neg(mul(a.operand, b))
    if isinstance(b, Neg):
        return neg(mul(a, b.operand))
    return BinOp("*", a, b)


def div(a: Expr, b: Expr) -> Expr:
    if a == ZERO:
        return ZERO
    if b == ONE:
        return a
    if isinstance(a, Num) and isinstance(b, Num) and b.value != 0.0:
        return Num(a.value / b.value)
    return BinOp("/", a, b)


def pow_(a: Expr, b: Expr) -> Expr:
    if b == ONE:
        return a
    if b == ZERO:
        return ONE
    return BinOp("^", a, b)


# -- parsing -----------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>\*\*|[-+*/^()]))"
)


class _Parser:
    def __init__(self, text: str, line: int = 0, col0: int = 0):
        self.text = text
        self.line = line
        self.col0 = col0
        self.tokens = self._tokenize()
        self.i = 0

    def _error(self, msg: str, pos: int):
        raise ModelSyntaxError(msg, self.line, self.col0 + pos + 1)

    def _tokenize(self):
        out = []
        pos = 0
        text = self.text
        while pos < len(text):
            if text[pos:].strip() == "":
                break
            m = _TOKEN.match(text, pos)
            if m is None or m.end() == pos:
                stripped = len(text[pos:]) - len(text[pos:].lstrip())
                self._error(f"unexpected character {text[pos + stripped]!r}", pos + stripped)
            kind = m.lastgroup
            start = m.start(kind)
            val = m.group(kind)
            if val == "**":
                val = "^"
            out.append((kind, val, start))
            pos = m.end()
        out.append(("end", "", len(text)))
        return out

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def parse(self) -> Expr:
        if self.peek()[0] == "end":
            self._error("empty expression", 0)
        e = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            self._error(f"unexpected token {val!r}", pos)
        return e

    def expr(self):
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            e = BinOp(op, e, self.term())
        return e

    def term(self):
        e = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            e = BinOp(op, e, self.unary())
        return e

    def unary(self):
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.take()
            return Neg(self.unary())
        if kind == "op" and val == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        kind, val, pos = self.take()
        if kind == "num":
            return Num(float(val))
        if kind == "name":
            return Name(val)
        if kind == "op" and val == "(":
            e = self.expr()
            k2, v2, p2 = self.take()
            if v2 != ")":
                self._error("expected ')'", p2)
            return e
        if kind == "end":
            self._error("unexpected end of expression", pos)
        self._error(f"unexpected token {val!r}", pos)


def parse_expression(text: str, line: int = 0, col: int = 0) -> Expr:
    """Parse an infix expression; ``line``/``col`` locate it for error messages."""
    return _Parser(text, line, col).parse()


# -- bytecode ----------------------------------------------------------------

OP_CONST, OP_SPECIES, OP_PARAM, OP_ADD, OP_SUB, OP_MUL, OP_DIV, OP_POW, OP_NEG, OP_POWLOG = range(10)
_BINOPS = {"+": OP_ADD, "-": OP_SUB, "*": OP_MUL, "/": OP_DIV, "^": OP_POW}


def emit(e: Expr, species: Mapping[str, int], params: Mapping[str, int],
         code: list, consts: list) -> int:
    """Append postfix code for ``e``; return the stack depth it needs."""
    if isinstance(e, Num):
        code.append((OP_CONST, len(consts)))
        consts.append(e.value)
        return 1
    if isinstance(e, Name):
        if e.name in species:
            code.append((OP_SPECIES, species[e.name]))
        elif e.name in params:
            code.append((OP_PARAM, params[e.name]))
        else:
            raise EvaluationError(f"unresolved name {e.name!r}")
        return 1
    if isinstance(e, Neg):
        d = emit(e.operand, species, params, code, consts)
        code.append((OP_NEG, 0))
        return d
    if isinstance(e, BinOp):
        d1 = emit(e.left, species, params, code, consts)
        d2 = emit(e.right, species, params, code, consts)
        code.append((_BINOPS[e.op], 0))
        return max(d1, d2 + 1)
    if isinstance(e, PowLog):
        d1 = emit(e.base, species, params, code, consts)
        d2 = emit(e.exponent, species, params, code, consts)
        code.append((OP_POWLOG, 0))
        return max(d1, d2 + 1)
    raise TypeError(f"cannot compile {type(e).__name__}")
