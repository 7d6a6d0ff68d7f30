"""Tiny expression language for weights and operator coefficients.

Grammar (EBNF):

    expr    = term (("+" | "-") term)* ;
    term    = unary (("*" | "/") unary)* ;
    unary   = "-" unary | power ;
    power   = atom ("^" unary)? ;          (right-associative, binds above "-")
    atom    = NUMBER | "t" | FUNC "(" expr ")" | "(" expr ")" ;
    FUNC    = "exp" | "log" | "sin" | "cos" | "sinh" | "cosh" | "sqrt" | "abs" ;
    NUMBER  = decimal literal, optional fraction and exponent part ;

Trees are plain tuples: ("num", v), ("var",), ("neg", x),
("bin", op, left, right), ("call", name, arg).  Tuple equality gives the
structural round-trip property for free.
"""

from __future__ import annotations

import re

import numpy as np

from .errors import EvaluationDomainError, ExpressionSyntaxError

FUNCTIONS = {
    "exp": np.exp,
    "log": np.log,
    "sin": np.sin,
    "cos": np.cos,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "sqrt": np.sqrt,
    "abs": np.abs,
}

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?"
    r"|(?P<name>[A-Za-z_]\w*)"
    r"|(?P<op>[-+*/^()]))"
)


def tokenize(text):
    """Return a list of (kind, value, position) tokens; kind in num/name/op."""
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            raise ExpressionSyntaxError(
                f"unexpected character {stripped[0]!r}",
                len(text) - len(stripped))
        if m.group("num") is not None:
            tokens.append(("num", float(text[m.start("num"):m.end()]),
                           m.start("num")))
        elif m.group("name") is not None:
            tokens.append(("name", m.group("name"), m.start("name")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op):
        kind, val, pos = self.peek()
        if kind != "op" or val != op:
            raise ExpressionSyntaxError(f"expected {op!r}", pos)
        return self.next()

    def expr(self):
        node = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.next()
                node = ("bin", val, node, self.term())
            else:
                return node

    def term(self):
        node = self.unary()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.next()
                node = ("bin", val, node, self.unary())
            else:
                return node

    def unary(self):
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.next()
            return ("neg", self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.next()
            return ("bin", "^", base, self.unary())
        return base

    def atom(self):
        kind, val, pos = self.next()
        if kind == "num":
            return ("num", val)
        if kind == "name":
            if val == "t":
                return ("var",)
            if val in FUNCTIONS:
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                return ("call", val, arg)
            raise ExpressionSyntaxError(f"unknown name {val!r}", pos)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        raise ExpressionSyntaxError(
            "unexpected end of input" if kind == "end" else f"unexpected {val!r}",
            pos)


def parse_expression(text):
    """Parse `text` into an expression tree.

    Raises ExpressionSyntaxError (with offset) on malformed input.
    """
    p = _Parser(tokenize(text))
    node = p.expr()
    kind, val, pos = p.peek()
    if kind != "end":
        raise ExpressionSyntaxError(f"trailing input {val!r}", pos)
    return node


def evaluate(tree, t):
    """Evaluate a tree at scalar or ndarray t; checks domain validity."""
    t = np.asarray(t, dtype=float)
    with np.errstate(all="ignore"):
        out = _eval(tree, t)
    out = np.broadcast_to(out, t.shape) if t.shape else out
    if not np.all(np.isfinite(out)):
        raise EvaluationDomainError("expression not finite on the requested points")
    if t.shape:
        return np.array(out, dtype=float)
    return float(out)


def _eval(tree, t):
    tag = tree[0]
    if tag == "num":
        return np.full_like(t, tree[1]) if t.shape else tree[1]
    if tag == "var":
        return t
    if tag == "neg":
        return -_eval(tree[1], t)
    if tag == "call":
        arg = _eval(tree[2], t)
        if tree[1] == "log" and np.any(np.asarray(arg) <= 0):
            raise EvaluationDomainError("log of non-positive value")
        if tree[1] == "sqrt" and np.any(np.asarray(arg) < 0):
            raise EvaluationDomainError("sqrt of negative value")
        return FUNCTIONS[tree[1]](arg)
    _, op, left, right = tree
    a, b = _eval(left, t), _eval(right, t)
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        if np.any(np.asarray(b) == 0):
            raise EvaluationDomainError("division by zero")
        return a / b
    return np.power(a, b)


# precedence levels for the printer
_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def _prec(tree):
    if tree[0] == "bin":
        return _PREC[tree[1]]
    if tree[0] == "neg":
        return _PREC["neg"]
    return 5


def pretty(tree):
    """Canonical text form; parse_expression(pretty(x)) == x structurally."""
    tag = tree[0]
    if tag == "num":
        return repr(tree[1])
    if tag == "var":
        return "t"
    if tag == "call":
        return f"{tree[1]}({pretty(tree[2])})"
    if tag == "neg":
        inner = pretty(tree[1])
        if _prec(tree[1]) < _PREC["neg"]:
            inner = f"({inner})"
        return f"-{inner}"
    _, op, left, right = tree
    p = _PREC[op]
    ls = pretty(left)
    rs = pretty(right)
    # left operand needs parens below (or at, for non-associative spots) p
    if _prec(left) < p or (op == "^" and _prec(left) <= p):
        ls = f"({ls})"
    # right operand: +,-,*,/ are left-associative; ^ grabs a unary on the right
    if op == "^":
        if _prec(right) < _PREC["neg"]:
            rs = f"({rs})"
    elif _prec(right) <= p:
        rs = f"({rs})"
    return f"{ls} {op} {rs}" if op in "+-" else f"{ls}{op}{rs}"


def _source(tree):
    kind = tree[0]
    if kind == "num":
        return repr(tree[1])
    if kind == "var":
        return "t"
    if kind == "neg":
        return f"(-{_source(tree[1])})"
    if kind == "bin":
        op = "**" if tree[1] == "^" else tree[1]
        return f"({_source(tree[2])} {op} {_source(tree[3])})"
    if kind == "call":
        return f"_{tree[1]}({_source(tree[2])})"
    raise ValueError(f"unknown node {tree!r}")


def compile_callable(tree):
    """Compile a tree into a fast numpy-backed callable t -> value.

    Unlike `evaluate`, the compiled form performs no domain checking
    (invalid inputs propagate as nan/inf); validate once with `evaluate`
    before using this in inner loops.
    """
    ns = {f"_{name}": fn for name, fn in FUNCTIONS.items()}
    return eval(f"lambda t: {_source(tree)}", ns)  # noqa: S307 - own AST only


def constant(value):
    """Tree for a numeric constant."""
    return ("num", float(value))


def scale(tree, factor):
    """Tree for factor * tree, folding the trivial factor 1."""
    if factor == 1.0:
        return tree
    return ("bin", "*", constant(factor), tree)
