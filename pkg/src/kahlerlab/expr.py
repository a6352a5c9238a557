"""Expression trees for user-defined profiles: tokenizer, parser, printer.

Grammar::

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := unary ('^' power)?
    unary  := '-' unary | base
    base   := literal | 't' | ident | '(' expr ')' | ('exp'|'log') '(' expr ')'
    power  := '-' power | literal | ident | '(' expr ')'

The exponent of ``^`` must not depend on ``t``; literals and bound
parameters are accepted.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Union

from .errors import ExpressionSyntaxError, InvalidExponent, UnboundParameter
from .jet import Jet

FUNCTIONS = ("exp", "log")


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    pass


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str  # 'neg' | 'exp' | 'log'
    arg: "Node"


@dataclass(frozen=True)
class Binary:
    op: str  # '+' '-' '*' '/' '^'
    left: "Node"
    right: "Node"


Node = Union[Num, Var, Param, Unary, Binary]

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)
_BASE_START = {"literal", "'t'", "identifier", "'('", "'-'", "'exp'", "'log'"}


def _tokenize(source):
    source = source.replace("−", "-")
    pos = 0
    tokens = []
    while pos < len(source):
        if source[pos:].strip() == "":
            break
        m = _TOKEN.match(source, pos)
        if not m or m.end() == pos:
            raise ExpressionSyntaxError(pos, _BASE_START, f"unexpected character {source[pos]!r} at offset {pos}")
        start = m.start(m.lastgroup)
        tokens.append((m.lastgroup, m.group(m.lastgroup), start))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source):
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op):
        kind, text, pos = self.peek()
        if kind != "op" or text != op:
            raise ExpressionSyntaxError(pos, {f"'{op}'"})
        self.take()

    def parse(self):
        node = self.expr()
        kind, _, pos = self.peek()
        if kind != "end":
            raise ExpressionSyntaxError(pos, {"'+'", "'-'", "'*'", "'/'", "'^'", "end of input"})
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            node = Binary(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            node = Binary(op, node, self.factor())
        return node

    def factor(self):
        node = self.unary()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            pos = self.peek()[2]
            exponent = self.power()
            if _depends_on_t(exponent):
                raise InvalidExponent(f"exponent at offset {pos} depends on t")
            node = Binary("^", node, exponent)
        return node

    def unary(self):
        kind, text, _ = self.peek()
        if kind == "op" and text == "-":
            self.take()
            return Unary("neg", self.unary())
        return self.base()

    def power(self):
        kind, text, pos = self.peek()
        if kind == "op" and text == "-":
            self.take()
            return Unary("neg", self.power())
        if kind == "num":
            self.take()
            return Num(float(text))
        if kind == "ident" and text not in FUNCTIONS:
            self.take()
            if text == "t":
                return Var()
            return Param(text)
        if kind == "op" and text == "(":
            self.take()
            node = self.expr()
            self.expect_op(")")
            return node
        raise ExpressionSyntaxError(pos, {"literal", "identifier", "'('", "'-'"})

    def base(self):
        kind, text, pos = self.take()
        if kind == "num":
            return Num(float(text))
        if kind == "ident":
            if text in FUNCTIONS:
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                return Unary(text, arg)
            if text == "t":
                return Var()
            return Param(text)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        raise ExpressionSyntaxError(pos, _BASE_START)


def _depends_on_t(node):
    if isinstance(node, Var):
        return True
    if isinstance(node, Unary):
        return _depends_on_t(node.arg)
    if isinstance(node, Binary):
        return _depends_on_t(node.left) or _depends_on_t(node.right)
    return False


def parse(source: str) -> Node:
    """Parse ``source`` into an expression tree."""
    return _Parser(source).parse()


def params_of(node):
    if isinstance(node, Param):
        return {node.name}
    if isinstance(node, Unary):
        return params_of(node.arg)
    if isinstance(node, Binary):
        return params_of(node.left) | params_of(node.right)
    return set()


def check_bound(node, params: Mapping[str, float]):
    for name in sorted(params_of(node)):
        if name not in params:
            raise UnboundParameter(name)


def to_source(node: Node) -> str:
    """Print a tree; ``parse(to_source(tree)) == tree``."""
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Var):
        return "t"
    if isinstance(node, Param):
        return node.name
    if isinstance(node, Unary):
        if node.op == "neg":
            return f"-({to_source(node.arg)})"
        return f"{node.op}({to_source(node.arg)})"
    if node.op == "^":
        return f"({to_source(node.left)})^({to_source(node.right)})"
    return f"({to_source(node.left)}){node.op}({to_source(node.right)})"


def constant_value(node, params):
    """Evaluate a t-free subtree to a float."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Param):
        return float(params[node.name])
    if isinstance(node, Unary):
        v = constant_value(node.arg, params)
        return {"neg": lambda x: -x, "exp": math.exp, "log": math.log}[node.op](v)
    a = constant_value(node.left, params)
    b = constant_value(node.right, params)
    return {"+": a + b, "-": a - b, "*": a * b, "/": a / b if b else float("inf"), "^": a ** b}[node.op]


def eval_jet(node: Node, t, order: int, params: Mapping[str, float]) -> Jet:
    """Evaluate ``node`` as a jet in the variable t."""
    if isinstance(node, Var):
        return Jet.variable(t, order)
    if isinstance(node, Num):
        return Jet.constant(node.value, order, t)
    if isinstance(node, Param):
        return Jet.constant(float(params[node.name]), order, t)
    if isinstance(node, Unary):
        arg = eval_jet(node.arg, t, order, params)
        if node.op == "neg":
            return -arg
        if node.op == "exp":
            return arg.exp()
        return arg.log()
    if node.op == "^":
        return eval_jet(node.left, t, order, params) ** constant_value(node.right, params)
    left = eval_jet(node.left, t, order, params)
    right = eval_jet(node.right, t, order, params)
    if node.op == "+":
        return left + right
    if node.op == "-":
        return left - right
    if node.op == "*":
        return left * right
    return left / right
