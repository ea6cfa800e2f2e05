"""Small recursive-descent parser for payoff expressions.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := '-' factor | base ('^' number)?
    base   := number | var | func '(' args ')' | '(' expr ')'

Variables are ``x1 .. xN``; functions are ``abs``, ``sqrt``, ``exp`` (one
argument) and ``min``, ``max`` (two or more). Evaluation is vectorised over
points stored in the last axis of an array.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

FUNCTIONS = {"abs": (1, 1), "sqrt": (1, 1), "exp": (1, 1), "min": (2, None), "max": (2, None)}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))"
)


class PayoffSyntaxError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class PayoffEvalError(ArithmeticError):
    pass


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 1-based


@dataclass(frozen=True)
class Neg:
    operand: object


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Pow:
    base: object
    exponent: float


@dataclass(frozen=True)
class Call:
    name: str
    args: Tuple[object, ...]


def _tokenize(src: str):
    pos, out = 0, []
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        m = _TOKEN.match(src, pos)
        if m is None or m.end() == pos:
            bad = pos + len(src[pos:]) - len(src[pos:].lstrip())
            raise PayoffSyntaxError(f"unexpected character {src[bad]!r}", bad)
        kind = m.lastgroup
        out.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    out.append(("end", "", len(src)))
    return out


class _Parser:
    def __init__(self, src: str, dim: Optional[int]):
        self.toks = _tokenize(src)
        self.i = 0
        self.dim = dim

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, text, off = self.take()
        if text != value or kind != "op":
            raise PayoffSyntaxError(f"expected {value!r}", off)

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.factor())
        return node

    def factor(self):
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return Neg(self.factor())
        node = self.base()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            kind, text, off = self.take()
            if kind != "num":
                raise PayoffSyntaxError("expected number after '^'", off)
            node = Pow(node, float(text))
        return node

    def base(self):
        kind, text, off = self.take()
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            m = re.fullmatch(r"x([1-9][0-9]*)", text)
            if m:
                idx = int(m.group(1))
                if self.dim is not None and idx > self.dim:
                    raise PayoffSyntaxError(f"variable {text} exceeds dimension {self.dim}", off)
                return Var(idx)
            if text not in FUNCTIONS:
                raise PayoffSyntaxError(f"unknown identifier {text!r}", off)
            self.expect("(")
            args = [self.expr()]
            while self.peek()[:2] == ("op", ","):
                self.take()
                args.append(self.expr())
            lo, hi = FUNCTIONS[text]
            if len(args) < lo or (hi is not None and len(args) > hi):
                raise PayoffSyntaxError(f"wrong number of arguments for {text}", off)
            self.expect(")")
            return Call(text, tuple(args))
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "end":
            raise PayoffSyntaxError("unexpected end of input", off)
        raise PayoffSyntaxError(f"unexpected token {text!r}", off)


@dataclass(frozen=True)
class PayoffExpr:
    source: str
    tree: object

    @property
    def max_variable(self) -> int:
        return _max_var(self.tree)

    def __call__(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 0:
            X = X.reshape(1)
        if self.max_variable > X.shape[-1]:
            raise PayoffEvalError(f"expression uses x{self.max_variable} but points have dimension {X.shape[-1]}")
        with np.errstate(all="ignore"):
            out = _eval(self.tree, X)
        out = np.broadcast_to(np.asarray(out, dtype=float), X.shape[:-1]).copy()
        if not np.all(np.isfinite(out)):
            raise PayoffEvalError(f"{self.source!r} is not finite at some points")
        return out

    def to_source(self) -> str:
        return serialize(self.tree)


def parse_payoff(src: str, dim: Optional[int] = None) -> PayoffExpr:
    """Parse ``src`` into an expression tree; errors carry the byte offset."""
    if not src or not src.strip():
        raise PayoffSyntaxError("empty expression", 0)
    p = _Parser(src, dim)
    tree = p.expr()
    kind, text, off = p.peek()
    if kind != "end":
        raise PayoffSyntaxError(f"unexpected token {text!r}", off)
    return PayoffExpr(src, tree)


def serialize(node) -> str:
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return f"x{node.index}"
    if isinstance(node, Neg):
        return f"-({serialize(node.operand)})"
    if isinstance(node, BinOp):
        return f"({serialize(node.left)} {node.op} {serialize(node.right)})"
    if isinstance(node, Pow):
        return f"({serialize(node.base)})^{node.exponent!r}"
    if isinstance(node, Call):
        return f"{node.name}({', '.join(serialize(a) for a in node.args)})"
    raise TypeError(f"not an expression node: {node!r}")


def _max_var(node) -> int:
    if isinstance(node, Var):
        return node.index
    if isinstance(node, Neg):
        return _max_var(node.operand)
    if isinstance(node, BinOp):
        return max(_max_var(node.left), _max_var(node.right))
    if isinstance(node, Pow):
        return _max_var(node.base)
    if isinstance(node, Call):
        return max(_max_var(a) for a in node.args)
    return 0


def _eval(node, X):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return X[..., node.index - 1]
    if isinstance(node, Neg):
        return -_eval(node.operand, X)
    if isinstance(node, BinOp):
        a, b = _eval(node.left, X), _eval(node.right, X)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if np.any(np.asarray(b) == 0):
            raise PayoffEvalError("division by zero")
        return a / b
    if isinstance(node, Pow):
        base = _eval(node.base, X)
        if not float(node.exponent).is_integer() and np.any(np.asarray(base) < 0):
            raise PayoffEvalError("fractional power of a negative number")
        return np.power(base, node.exponent)
    if isinstance(node, Call):
        args = [_eval(a, X) for a in node.args]
        if node.name == "abs":
            return np.abs(args[0])
        if node.name == "sqrt":
            if np.any(np.asarray(args[0]) < 0):
                raise PayoffEvalError("sqrt of a negative number")
            return np.sqrt(args[0])
        if node.name == "exp":
            return np.exp(args[0])
        red = np.minimum if node.name == "min" else np.maximum
        out = args[0]
        for a in args[1:]:
            out = red(out, a)
        return out
    raise TypeError(f"not an expression node: {node!r}")
