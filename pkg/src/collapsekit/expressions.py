"""A small closed expression language for declarative model configs.

Grammar (whitespace-insensitive, identifiers case-sensitive)::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := '-' factor | power
    power  := atom ('^' factor)?
    atom   := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'

``^`` is right-associative and binds tighter than unary minus, so
``-x^2`` means ``-(x^2)``.  The vocabulary is closed: variables are
{x, y, w, w1, w2} and functions are {exp, log, sqrt, abs, normpdf,
normcdf, pow, min, max}.  There are no conditionals and no user
functions; every supported model is expressible without them.

Evaluation broadcasts over numpy arrays.  Printing produces text that
reparses to a structurally identical tree.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import ArityMismatch, ExpressionSyntaxError, UnknownIdentifier

VARIABLES = ("x", "y", "w", "w1", "w2")

_SQRT_2PI = float(np.sqrt(2.0 * np.pi))

FUNCTIONS = {
    "exp": (1, lambda a: np.exp(a)),
    "log": (1, lambda a: np.log(a)),
    "sqrt": (1, lambda a: np.sqrt(a)),
    "abs": (1, lambda a: np.abs(a)),
    "normpdf": (1, lambda a: np.exp(-0.5 * a * a) / _SQRT_2PI),
    "normcdf": (1, lambda a: special.ndtr(a)),
    "pow": (2, lambda a, b: np.power(a, b)),
    "min": (2, lambda a, b: np.minimum(a, b)),
    "max": (2, lambda a, b: np.maximum(a, b)),
}

_PREC_ADD = 1
_PREC_MUL = 2
_PREC_NEG = 3
_PREC_POW = 4
_PREC_ATOM = 5


class Expression:
    """Base class for AST nodes."""

    def evaluate(self, **env):
        raise NotImplementedError

    def variables(self) -> set[str]:
        raise NotImplementedError

    def _prec(self) -> int:
        raise NotImplementedError

    def _render(self) -> str:
        raise NotImplementedError

    def __str__(self) -> str:
        return self._render()

    def _wrap(self, context: int) -> str:
        text = self._render()
        return f"({text})" if self._prec() < context else text


@dataclass(frozen=True)
class Num(Expression):
    value: float

    def evaluate(self, **env):
        return self.value

    def variables(self):
        return set()

    def _prec(self):
        return _PREC_ATOM

    def _render(self):
        return repr(self.value)


@dataclass(frozen=True)
class Var(Expression):
    name: str

    def evaluate(self, **env):
        if self.name not in env:
            raise UnknownIdentifier(f"variable {self.name!r} is not bound")
        return env[self.name]

    def variables(self):
        return {self.name}

    def _prec(self):
        return _PREC_ATOM

    def _render(self):
        return self.name


@dataclass(frozen=True)
class Neg(Expression):
    operand: Expression

    def evaluate(self, **env):
        return -self.operand.evaluate(**env)

    def variables(self):
        return self.operand.variables()

    def _prec(self):
        return _PREC_NEG

    def _render(self):
        return "-" + self.operand._wrap(_PREC_NEG)


@dataclass(frozen=True)
class Bin(Expression):
    op: str
    left: Expression
    right: Expression

    def evaluate(self, **env):
        a = self.left.evaluate(**env)
        b = self.right.evaluate(**env)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            if self.op == "+":
                return a + b
            if self.op == "-":
                return a - b
            if self.op == "*":
                return a * b
            if self.op == "/":
                return a / b
            return np.power(a, b)

    def variables(self):
        return self.left.variables() | self.right.variables()

    def _prec(self):
        if self.op in "+-":
            return _PREC_ADD
        if self.op in "*/":
            return _PREC_MUL
        return _PREC_POW

    def _render(self):
        if self.op == "^":
            return f"{self.left._wrap(_PREC_ATOM)}^{self.right._wrap(_PREC_NEG)}"
        p = self._prec()
        return f"{self.left._wrap(p)} {self.op} {self.right._wrap(p + 1)}"


@dataclass(frozen=True)
class Call(Expression):
    name: str
    args: tuple[Expression, ...]

    def evaluate(self, **env):
        _, fn = FUNCTIONS[self.name]
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return fn(*(a.evaluate(**env) for a in self.args))

    def variables(self):
        out: set[str] = set()
        for a in self.args:
            out |= a.variables()
        return out

    def _prec(self):
        return _PREC_ATOM

    def _render(self):
        inner = ", ".join(a._render() for a in self.args)
        return f"{self.name}({inner})"


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            offset = len(text) - len(stripped)
            raise ExpressionSyntaxError(
                f"unexpected character {stripped[0]!r}", offset
            )
        kind = m.lastgroup
        value = m.group(kind)
        offset = m.end() - len(value)
        if kind == "op" and value == "*" and m.end() < len(text) and text[m.end()] == "*":
            raise ExpressionSyntaxError("'**' is not an operator; use '^'", offset)
        tokens.append((kind, value, offset))
        pos = m.end()
    tokens.append(("eof", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, op: str):
        kind, value, offset = self.peek()
        if kind != "op" or value != op:
            raise ExpressionSyntaxError(f"expected {op!r}", offset)
        return self.advance()

    def parse(self) -> Expression:
        node = self.expr()
        kind, value, offset = self.peek()
        if kind != "eof":
            raise ExpressionSyntaxError(f"unexpected {value!r}", offset)
        return node

    def expr(self) -> Expression:
        node = self.term()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value in "+-":
                self.advance()
                node = Bin(value, node, self.term())
            else:
                return node

    def term(self) -> Expression:
        node = self.factor()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value in "*/":
                self.advance()
                node = Bin(value, node, self.factor())
            else:
                return node

    def factor(self) -> Expression:
        kind, value, _ = self.peek()
        if kind == "op" and value == "-":
            self.advance()
            return Neg(self.factor())
        return self.power()

    def power(self) -> Expression:
        node = self.atom()
        kind, value, _ = self.peek()
        if kind == "op" and value == "^":
            self.advance()
            return Bin("^", node, self.factor())
        return node

    def atom(self) -> Expression:
        kind, value, offset = self.advance()
        if kind == "num":
            return Num(float(value))
        if kind == "ident":
            nk, nv, _ = self.peek()
            if nk == "op" and nv == "(":
                if value not in FUNCTIONS:
                    raise UnknownIdentifier(f"unknown function {value!r}")
                self.advance()
                args = [self.expr()]
                while True:
                    kk, vv, off = self.peek()
                    if kk == "op" and vv == ",":
                        self.advance()
                        args.append(self.expr())
                    elif kk == "op" and vv == ")":
                        self.advance()
                        break
                    else:
                        raise ExpressionSyntaxError("expected ',' or ')'", off)
                want = FUNCTIONS[value][0]
                if len(args) != want:
                    raise ArityMismatch(
                        f"{value} takes {want} argument(s), got {len(args)}"
                    )
                return Call(value, tuple(args))
            if value not in VARIABLES:
                raise UnknownIdentifier(f"unknown identifier {value!r}")
            return Var(value)
        if kind == "op" and value == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        raise ExpressionSyntaxError(
            f"expected a value, got {value!r}" if value else "unexpected end of input",
            offset,
        )


def parse_expression(text: str) -> Expression:
    """Parse ``text`` into an AST; see the module docstring for grammar."""
    return _Parser(text).parse()
