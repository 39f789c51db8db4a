"""Arithmetic expression parser and evaluator for field definitions.

Grammar (precedence from loosest to tightest):

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?          # right-associative exponent
    atom   := NUMBER | VARIABLE | FUNC '(' expr (',' expr)* ')' | '(' expr ')'

Variables are x1..xk for a declared arity k. Functions: abs, exp, log,
sqrt (one argument), min, max (two or more). Evaluation broadcasts over
numpy arrays, so a parsed expression can be tabulated on a grid in one
vectorized call. Parsing is deterministic: the same text always yields
the same tree and therefore bitwise-identical values for the same inputs.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import (
    ArityMismatchError,
    ExpressionSyntaxError,
    UnknownIdentifierError,
)

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)

_FUNCS_1: dict[str, Callable] = {
    "abs": np.abs,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
}
_FUNCS_N = {
    "min": np.minimum,
    "max": np.maximum,
}

_VAR_RE = re.compile(r"^x([0-9]+)$")


@dataclass(frozen=True)
class _Token:
    kind: str  # 'num' | 'ident' | 'op' | 'end'
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            bad_pos = len(text) - len(stripped)
            raise ExpressionSyntaxError(
                f"unexpected character {stripped[0]!r}", bad_pos
            )
        for kind in ("num", "ident", "op"):
            val = m.group(kind)
            if val is not None:
                tokens.append(_Token(kind, val, m.start(kind)))
                break
        pos = m.end()
    tokens.append(_Token("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, arity: int):
        self.text = text
        self.arity = arity
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op: str) -> None:
        tok = self.peek()
        if tok.kind != "op" or tok.text != op:
            raise ExpressionSyntaxError(
                f"expected {op!r}, found {tok.text!r or 'end of input'}", tok.pos
            )
        self.advance()

    def parse(self):
        node = self.expr()
        tok = self.peek()
        if tok.kind != "end":
            raise ExpressionSyntaxError(f"unexpected token {tok.text!r}", tok.pos)
        return node

    def expr(self):
        node = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.advance().text
            rhs = self.term()
            node = ("add" if op == "+" else "sub", node, rhs)
        return node

    def term(self):
        node = self.unary()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.advance().text
            rhs = self.unary()
            node = ("mul" if op == "*" else "div", node, rhs)
        return node

    def unary(self):
        tok = self.peek()
        if tok.kind == "op" and tok.text == "-":
            self.advance()
            return ("neg", self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        tok = self.peek()
        if tok.kind == "op" and tok.text == "^":
            self.advance()
            return ("pow", base, self.unary())
        return base

    def atom(self):
        tok = self.peek()
        if tok.kind == "num":
            self.advance()
            return ("num", float(tok.text))
        if tok.kind == "ident":
            self.advance()
            m = _VAR_RE.match(tok.text)
            if m:
                index = int(m.group(1))
                if index == 0:
                    raise UnknownIdentifierError(tok.text, tok.pos)
                if index > self.arity:
                    raise ArityMismatchError(tok.text, self.arity, tok.pos)
                return ("var", index - 1)
            if tok.text in _FUNCS_1 or tok.text in _FUNCS_N:
                self.expect_op("(")
                args = [self.expr()]
                while self.peek().kind == "op" and self.peek().text == ",":
                    self.advance()
                    args.append(self.expr())
                self.expect_op(")")
                if tok.text in _FUNCS_1 and len(args) != 1:
                    raise ExpressionSyntaxError(
                        f"{tok.text} takes exactly one argument", tok.pos
                    )
                if tok.text in _FUNCS_N and len(args) < 2:
                    raise ExpressionSyntaxError(
                        f"{tok.text} takes at least two arguments", tok.pos
                    )
                return ("call", tok.text, args)
            raise UnknownIdentifierError(tok.text, tok.pos)
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            node = self.expr()
            self.expect_op(")")
            return node
        what = tok.text if tok.kind != "end" else "end of input"
        raise ExpressionSyntaxError(f"expected an operand, found {what!r}", tok.pos)


def _evaluate(node, args):
    kind = node[0]
    if kind == "num":
        return node[1]
    if kind == "var":
        return args[node[1]]
    if kind == "neg":
        return np.negative(_evaluate(node[1], args))
    if kind == "add":
        return np.add(_evaluate(node[1], args), _evaluate(node[2], args))
    if kind == "sub":
        return np.subtract(_evaluate(node[1], args), _evaluate(node[2], args))
    if kind == "mul":
        return np.multiply(_evaluate(node[1], args), _evaluate(node[2], args))
    if kind == "div":
        return np.divide(_evaluate(node[1], args), _evaluate(node[2], args))
    if kind == "pow":
        return np.power(_evaluate(node[1], args), _evaluate(node[2], args))
    if kind == "call":
        name = node[1]
        vals = [_evaluate(a, args) for a in node[2]]
        if name in _FUNCS_1:
            return _FUNCS_1[name](vals[0])
        out = vals[0]
        fn = _FUNCS_N[name]
        for v in vals[1:]:
            out = fn(out, v)
        return out
    raise AssertionError(f"unreachable node kind {kind!r}")


@dataclass(frozen=True)
class Expression:
    """A parsed expression, callable on scalars or numpy arrays.

    Call with one positional argument per variable; all arguments
    broadcast together.
    """

    text: str
    arity: int
    _tree: tuple

    def __call__(self, *args):
        if len(args) != self.arity:
            raise ArityMismatchError(
                f"<call with {len(args)} args>", self.arity, 0
            )
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            out = _evaluate(self._tree, args)
        if np.isscalar(args[0]) or (self.arity and np.ndim(args[0]) == 0):
            return float(out)
        return np.asarray(out, dtype=float)


def parse_expr(text: str, arity: int) -> Expression:
    """Parse `text` into an evaluator over variables x1..x<arity>."""
    if arity < 0:
        raise ValueError("arity must be non-negative")
    tree = _Parser(text, arity).parse()
    return Expression(text=text, arity=arity, _tree=tree)
