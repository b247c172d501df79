"""Arithmetic expressions for computed measures.

Grammar: `+ - * /`, parentheses, numeric literals, and measure references.
A reference is a bare identifier (`Sales`) or a bracketed name for measures
whose names contain spaces (`[Profit Ratio]`). No functions.
"""

from __future__ import annotations

import re
from dataclasses import dataclass


class ExprError(ValueError):
    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} (at offset {pos})")
        self.pos = pos


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Ref:
    name: str


@dataclass(frozen=True)
class BinOp:
    op: str  # + - * /
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


Expr = Num | Ref | BinOp | Neg

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>\d+(?:\.\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<bracket>\[[^\]]+\])
  | (?P<op>[-+*/()])
""",
    re.VERBOSE,
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ExprError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            value = m.group()
            if kind == "bracket":
                kind, value = "name", value[1:-1].strip()
            tokens.append((kind, value, pos))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, tokens: list[tuple[str, str, int]], length: int):
        self.tokens = tokens
        self.i = 0
        self.length = length

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else ("eof", "", self.length)

    def take(self):
        tok = self.peek()
        self.i += 1
        return tok

    def expr(self) -> Expr:
        node = self.term()
        while self.peek()[:2] in (("op", "+"), ("op", "-")):
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.factor()
        while self.peek()[:2] in (("op", "*"), ("op", "/")):
            op = self.take()[1]
            node = BinOp(op, node, self.factor())
        return node

    def factor(self) -> Expr:
        kind, value, pos = self.take()
        if kind == "num":
            return Num(float(value))
        if kind == "name":
            return Ref(value)
        if (kind, value) == ("op", "-"):
            return Neg(self.factor())
        if (kind, value) == ("op", "("):
            node = self.expr()
            kind, value, pos = self.take()
            if (kind, value) != ("op", ")"):
                raise ExprError("expected ')'", pos)
            return node
        raise ExprError(f"unexpected token {value!r}" if kind != "eof" else "unexpected end of expression", pos)


def parse_expr(text: str) -> Expr:
    parser = _Parser(_tokenize(text), len(text))
    node = parser.expr()
    kind, value, pos = parser.peek()
    if kind != "eof":
        raise ExprError(f"trailing input {value!r}", pos)
    return node


def expr_refs(node: Expr) -> set[str]:
    """Measure names referenced by an expression."""
    if isinstance(node, Ref):
        return {node.name}
    if isinstance(node, BinOp):
        return expr_refs(node.left) | expr_refs(node.right)
    if isinstance(node, Neg):
        return expr_refs(node.operand)
    return set()


def eval_expr(node: Expr, values: dict[str, float | None]) -> float | None:
    """Evaluate against resolved measure values.

    A None operand propagates (missing input -> missing output); division by
    zero yields None so callers can record a warning instead of failing.
    """
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Ref):
        return values[node.name]
    if isinstance(node, Neg):
        v = eval_expr(node.operand, values)
        return None if v is None else -v
    left = eval_expr(node.left, values)
    right = eval_expr(node.right, values)
    if left is None or right is None:
        return None
    if node.op == "+":
        return left + right
    if node.op == "-":
        return left - right
    if node.op == "*":
        return left * right
    if right == 0:
        return None
    return left / right
