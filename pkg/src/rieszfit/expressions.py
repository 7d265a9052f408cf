"""Target expressions: a small closed-form grammar with exact derivatives.

Grammar (whitespace ignored)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := ('-' | '+') unary | power
    power   := atom (('^' | '**') unary)?
    atom    := NUMBER | 'y1' .. 'yd' | 'pi' | '|y|^2'
             | ('sin' | 'cos' | 'exp') '(' expr ')' | '(' expr ')'

``|y|^2`` (also ``|y|**2``) is the squared Euclidean norm. Expressions are
turned into sympy trees so derivatives of any order are exact.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import sympy

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?|\d+(?:[eE][-+]?\d+)?)"
    r"|(?P<norm>\|y\|(?:\^|\*\*)2)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>\*\*|[-+*/^()]))"
)
FUNCTIONS = {"sin": sympy.sin, "cos": sympy.cos, "exp": sympy.exp}


class ExpressionError(ValueError):
    """Malformed target expression; ``token`` is the offending token."""

    def __init__(self, message: str, token: str, position: int):
        super().__init__(f"{message}: {token!r} at position {position}")
        self.token = token
        self.position = position


def _tokenize(text: str):
    pos, out = 0, []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            bad = text[pos:].lstrip()[:1]
            raise ExpressionError("unexpected character", bad, pos)
        kind = m.lastgroup
        out.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    out.append(("end", "<end>", len(text)))
    return out


class _Parser:
    def __init__(self, text: str, d: int):
        self.tokens = _tokenize(text)
        self.i = 0
        self.symbols = sympy.symbols(" ".join(f"y{j + 1}" for j in range(d)) + " ,")[:d]

    @property
    def peek(self):
        return self.tokens[self.i]

    def take(self, value=None):
        tok = self.tokens[self.i]
        if value is not None and tok[1] != value:
            raise ExpressionError(f"expected {value!r}", tok[1], tok[2])
        self.i += 1
        return tok

    def parse(self):
        node = self.expr()
        if self.peek[0] != "end":
            raise ExpressionError("unexpected token", self.peek[1], self.peek[2])
        return node

    def expr(self):
        node = self.term()
        while self.peek[1] in ("+", "-"):
            op = self.take()[1]
            rhs = self.term()
            node = node + rhs if op == "+" else node - rhs
        return node

    def term(self):
        node = self.unary()
        while self.peek[1] in ("*", "/"):
            op = self.take()[1]
            rhs = self.unary()
            node = node * rhs if op == "*" else node / rhs
        return node

    def unary(self):
        if self.peek[1] in ("-", "+"):
            op = self.take()[1]
            node = self.unary()
            return -node if op == "-" else node
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek[1] in ("^", "**"):
            self.take()
            return base ** self.unary()
        return base

    def atom(self):
        kind, value, pos = self.take()
        if kind == "num":
            return sympy.nsimplify(value, rational=True)
        if kind == "norm":
            return sum(s**2 for s in self.symbols)
        if kind == "name":
            if value in FUNCTIONS:
                self.take("(")
                arg = self.expr()
                self.take(")")
                return FUNCTIONS[value](arg)
            if value == "pi":
                return sympy.pi
            names = {str(s): s for s in self.symbols}
            if value in names:
                return names[value]
            raise ExpressionError("unknown name", value, pos)
        if value == "(":
            node = self.expr()
            self.take(")")
            return node
        raise ExpressionError("unexpected token", value, pos)


def parse_expression(text: str, d: int):
    """Parse ``text`` into a sympy expression in ``y1..yd``."""
    return _Parser(text, d).parse()


@dataclass(frozen=True)
class TargetSpec:
    """Closed-form target ``f(y1, ..., yd)`` with exact derivatives."""

    expression: str
    d: int
    tree: object = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "tree", parse_expression(self.expression, self.d))

    @property
    def symbols(self):
        return sympy.symbols(" ".join(f"y{j + 1}" for j in range(self.d)) + " ,")[: self.d]

    def derivative_tree(self, orders: tuple[int, ...]):
        return _derivative(self.tree, self.symbols, tuple(orders))

    def evaluate(self, points, orders: tuple[int, ...] | None = None):
        """Value (or ``d^orders`` derivative) at points ``(P, d)``."""
        orders = tuple(orders) if orders is not None else (0,) * self.d
        fn = _compiled(self.tree, self.symbols, orders)
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = fn(*pts.T)
        return np.broadcast_to(np.asarray(out, dtype=float), (len(pts),)).copy()

    def table(self, grid):
        """Values of every derivative counted by ``grid`` (same layout as the potential table)."""
        return np.stack([self.evaluate(grid.points, a.orders) for a in grid.multi_indices])


@lru_cache(maxsize=512)
def _derivative(tree, symbols, orders):
    out = tree
    for sym, k in zip(symbols, orders):
        if k:
            out = sympy.diff(out, sym, k)
    return out


@lru_cache(maxsize=512)
def _compiled(tree, symbols, orders):
    return sympy.lambdify(symbols, _derivative(tree, symbols, orders), "numpy")
