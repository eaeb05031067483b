"""Tiny arithmetic expression grammar for user-defined fields.

Supported: operators ``+ - * /``, unary minus, parentheses, numeric
literals, the functions ``ln exp sin cos sqrt``, and the variables
``x1 x2 u v``.  Expressions are parsed once into an AST, evaluated with
numpy broadcasting, and differentiated symbolically so user-supplied
nonlinearities get exact gradients.

Parse errors carry the 1-based character position.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

VARIABLES = ("x1", "x2", "u", "v")
FUNCTIONS = {
    "ln": np.log,
    "exp": np.exp,
    "sin": np.sin,
    "cos": np.cos,
    "sqrt": np.sqrt,
}


class ExpressionError(ValueError):
    """Parse failure with a character position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (position {position})")
        self.position = position


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str  # "neg" or a function name
    arg: object


@dataclass(frozen=True)
class Binary:
    op: str  # + - * /
    left: object
    right: object


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, message: str) -> ExpressionError:
        return ExpressionError(message, self.pos + 1)

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def parse(self):
        node = self.expr()
        self.skip_ws()
        if self.pos != len(self.text):
            raise self.error(f"unexpected {self.text[self.pos]!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek() in ("+", "-"):
            op = self.text[self.pos]
            self.pos += 1
            node = Binary(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek() in ("*", "/"):
            op = self.text[self.pos]
            self.pos += 1
            node = Binary(op, node, self.factor())
        return node

    def factor(self):
        ch = self.peek()
        if ch == "-":
            self.pos += 1
            return Unary("neg", self.factor())
        if ch == "+":
            self.pos += 1
            return self.factor()
        return self.atom()

    def atom(self):
        ch = self.peek()
        if ch == "(":
            self.pos += 1
            node = self.expr()
            if self.peek() != ")":
                raise self.error("expected ')'")
            self.pos += 1
            return node
        if ch.isdigit() or ch == ".":
            return self.number()
        if ch.isalpha():
            return self.name()
        if ch == "":
            raise self.error("unexpected end of expression")
        raise self.error(f"unexpected {ch!r}")

    def number(self):
        start = self.pos
        while self.pos < len(self.text) and (
            self.text[self.pos].isdigit() or self.text[self.pos] in ".eE"
            or (self.text[self.pos] in "+-" and self.text[self.pos - 1] in "eE")
        ):
            self.pos += 1
        token = self.text[start : self.pos]
        try:
            return Num(float(token))
        except ValueError:
            self.pos = start
            raise self.error(f"bad number {token!r}") from None

    def name(self):
        start = self.pos
        while self.pos < len(self.text) and (
            self.text[self.pos].isalnum() or self.text[self.pos] == "_"
        ):
            self.pos += 1
        token = self.text[start : self.pos]
        if token in FUNCTIONS:
            if self.peek() != "(":
                self.pos = start
                raise self.error(f"function {token} needs parentheses")
            self.pos += 1
            arg = self.expr()
            if self.peek() != ")":
                raise self.error("expected ')'")
            self.pos += 1
            return Unary(token, arg)
        if token in VARIABLES:
            return Var(token)
        self.pos = start
        raise self.error(f"unknown name {token!r}")


def parse(text: str):
    """Parse an expression string into an AST."""
    if not isinstance(text, str) or not text.strip():
        raise ExpressionError("empty expression", 1)
    return _Parser(text).parse()


def evaluate(node, env: dict) -> np.ndarray:
    """Evaluate an AST; env maps variable names to scalars or arrays."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Unary):
        val = evaluate(node.arg, env)
        return -val if node.op == "neg" else FUNCTIONS[node.op](val)
    if isinstance(node, Binary):
        a, b = evaluate(node.left, env), evaluate(node.right, env)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        return a / b
    raise TypeError(f"not an AST node: {node!r}")


def differentiate(node, var: str):
    """Symbolic derivative of an AST with respect to one variable."""
    if isinstance(node, Num):
        return Num(0.0)
    if isinstance(node, Var):
        return Num(1.0 if node.name == var else 0.0)
    if isinstance(node, Unary):
        inner = differentiate(node.arg, var)
        if node.op == "neg":
            return Unary("neg", inner)
        if node.op == "ln":
            outer = Binary("/", Num(1.0), node.arg)
        elif node.op == "exp":
            outer = node
        elif node.op == "sin":
            outer = Unary("cos", node.arg)
        elif node.op == "cos":
            outer = Unary("neg", Unary("sin", node.arg))
        elif node.op == "sqrt":
            outer = Binary("/", Num(0.5), node)
        else:
            raise TypeError(f"no derivative rule for {node.op}")
        return Binary("*", outer, inner)
    if isinstance(node, Binary):
        da = differentiate(node.left, var)
        db = differentiate(node.right, var)
        if node.op == "+":
            return Binary("+", da, db)
        if node.op == "-":
            return Binary("-", da, db)
        if node.op == "*":
            return Binary(
                "+", Binary("*", da, node.right), Binary("*", node.left, db)
            )
        # quotient rule
        num = Binary("-", Binary("*", da, node.right), Binary("*", node.left, db))
        return Binary("/", num, Binary("*", node.right, node.right))
    raise TypeError(f"not an AST node: {node!r}")


def free_variables(node) -> set:
    if isinstance(node, Num):
        return set()
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Unary):
        return free_variables(node.arg)
    return free_variables(node.left) | free_variables(node.right)


def constant_fold(node):
    """Collapse constant subtrees; keeps evaluation of derivatives cheap."""
    if isinstance(node, (Num, Var)):
        return node
    if isinstance(node, Unary):
        arg = constant_fold(node.arg)
        if isinstance(arg, Num):
            if node.op == "neg":
                return Num(-arg.value)
            return Num(float(FUNCTIONS[node.op](arg.value)))
        return Unary(node.op, arg)
    left, right = constant_fold(node.left), constant_fold(node.right)
    if isinstance(left, Num) and isinstance(right, Num):
        a, b = left.value, right.value
        if node.op == "+":
            return Num(a + b)
        if node.op == "-":
            return Num(a - b)
        if node.op == "*":
            return Num(a * b)
        if b != 0:
            return Num(a / b)
    if node.op == "*" and (
        (isinstance(left, Num) and left.value == 0.0)
        or (isinstance(right, Num) and right.value == 0.0)
    ):
        return Num(0.0)
    if node.op == "+":
        if isinstance(left, Num) and left.value == 0.0:
            return right
        if isinstance(right, Num) and right.value == 0.0:
            return left
    if node.op == "-" and isinstance(right, Num) and right.value == 0.0:
        return left
    if node.op == "*":
        if isinstance(left, Num) and left.value == 1.0:
            return right
        if isinstance(right, Num) and right.value == 1.0:
            return left
    return Binary(node.op, left, right)


def unparse(node) -> str:
    """Render an AST back to grammar text (for reports)."""
    if isinstance(node, Num):
        return repr(node.value) if node.value >= 0 else f"({node.value!r})"
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Unary):
        if node.op == "neg":
            return f"(-{unparse(node.arg)})"
        return f"{node.op}({unparse(node.arg)})"
    return f"({unparse(node.left)} {node.op} {unparse(node.right)})"


def math_isfinite_probe(node, env: dict) -> bool:
    try:
        val = evaluate(node, env)
    except (ZeroDivisionError, FloatingPointError, ValueError):
        return False
    return bool(np.all(np.isfinite(val))) if np.ndim(val) else math.isfinite(val)
