"""A tiny arithmetic grammar for forcing terms given on the command line.

Supported: + - * / ^, parentheses, unary minus, the variables x, y, t,
the constant pi, and the functions sin, cos, exp, sqrt.  No attribute
access, no names beyond the whitelist, no eval.
"""

from __future__ import annotations

import math
import re

import numpy as np

from .errors import ConfigError

_TOKEN = re.compile(r"\s*(?:(\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?|([A-Za-z_]\w*)|(.))")

_FUNCTIONS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "sqrt": np.sqrt}
_CONSTANTS = {"pi": math.pi}
_VARIABLES = ("x", "y", "t")


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        mt = _TOKEN.match(text, pos)
        if not mt or mt.end() == pos:
            raise ConfigError(f"cannot tokenize expression at {text[pos:]!r}")
        num, name, sym = mt.groups()
        if num is not None:
            tokens.append(("num", float(mt.group(0))))
        elif name is not None:
            tokens.append(("name", name))
        elif sym.strip():
            if sym not in "+-*/^()":
                raise ConfigError(f"unexpected character {sym!r} in expression")
            tokens.append(("op", sym))
        pos = mt.end()
    tokens.append(("end", ""))
    return tokens


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.i = 0
        self.uses = set()

    def peek(self):
        return self.tokens[self.i]

    def take(self, kind=None, value=None):
        tok = self.tokens[self.i]
        if kind and tok[0] != kind or value and tok[1] != value:
            raise ConfigError(f"unexpected token {tok[1]!r} in expression")
        self.i += 1
        return tok

    @staticmethod
    def _binop(op, a, b):
        fns = {"+": np.add, "-": np.subtract, "*": np.multiply, "/": np.divide}
        f = fns[op]
        return lambda env: f(a(env), b(env))

    def expr(self):
        node = self.term()
        while self.peek() in (("op", "+"), ("op", "-")):
            op = self.take()[1]
            node = self._binop(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek() in (("op", "*"), ("op", "/")):
            op = self.take()[1]
            node = self._binop(op, node, self.factor())
        return node

    def factor(self):
        node = self.unary()
        if self.peek() == ("op", "^"):
            self.take()
            rhs = self.factor()     # right associative
            a, b = node, rhs
            return lambda env: a(env) ** b(env)
        return node

    def unary(self):
        if self.peek() == ("op", "-"):
            self.take()
            inner = self.unary()
            return lambda env: -inner(env)
        return self.atom()

    def atom(self):
        kind, value = self.peek()
        if kind == "num":
            self.take()
            return lambda env, v=value: v
        if kind == "name":
            self.take()
            if value in _FUNCTIONS:
                self.take("op", "(")
                arg = self.expr()
                self.take("op", ")")
                fn = _FUNCTIONS[value]
                return lambda env, f=fn, a=arg: f(a(env))
            if value in _CONSTANTS:
                return lambda env, v=_CONSTANTS[value]: v
            if value in _VARIABLES:
                self.uses.add(value)
                return lambda env, v=value: env[v]
            raise ConfigError(f"unknown name {value!r} in expression")
        if (kind, value) == ("op", "("):
            self.take()
            node = self.expr()
            self.take("op", ")")
            return node
        raise ConfigError(f"unexpected token {value!r} in expression")


def parse_expression(text):
    """Compile the restricted grammar; returns (callable, uses_time).

    The callable takes (x, y) or (t, x, y) depending on whether `t`
    appears in the expression.
    """
    parser = _Parser(_tokenize(text))
    node = parser.expr()
    parser.take("end")
    uses_time = "t" in parser.uses

    if uses_time:
        def fn(t, x, y):
            return node({"t": np.asarray(t, dtype=float),
                         "x": np.asarray(x, dtype=float),
                         "y": np.asarray(y, dtype=float)}) * np.ones_like(np.asarray(x, dtype=float))
    else:
        def fn(x, y):
            return node({"x": np.asarray(x, dtype=float),
                         "y": np.asarray(y, dtype=float),
                         "t": 0.0}) * np.ones_like(np.asarray(x, dtype=float))
    return fn, uses_time
