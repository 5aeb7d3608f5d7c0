"""Expression language used in task preconditions and decision arguments.

Grammar (lowest to highest precedence)::

    expr   := or
    or     := and ("or" and)*
    and    := not ("and" not)*
    not    := "not" not | cmp
    cmp    := sum (("==" | "!=" | "<" | "<=" | ">" | ">=") sum)?
    sum    := term (("+" | "-") term)*
    term   := factor (("*" | "/") factor)*
    factor := number | string | identifier | builtin "(" args ")" | "(" expr ")"

``true`` and ``false`` are reserved words parsed as boolean literals.
Builtin functions are recognized only at call position.
"""
from __future__ import annotations

import re
from dataclasses import dataclass


class ExpressionSyntaxError(ValueError):
    """Raised when expression text does not match the grammar."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


BUILTINS = {
    "known": 1,
    "netsupport": 1,
    "is_committed": 2,
    "result_of": 1,
    "abs": 1,
    "min": 2,
    "max": 2,
}

KEYWORDS = {"and", "or", "not", "true", "false"}

COMPARISON_OPS = ("==", "!=", "<=", ">=", "<", ">")
ADDITIVE_OPS = ("+", "-")
MULTIPLICATIVE_OPS = ("*", "/")


@dataclass(frozen=True)
class Expression:
    """Base class for AST nodes."""


@dataclass(frozen=True)
class Literal(Expression):
    value: bool | int | float | str


@dataclass(frozen=True)
class ItemRef(Expression):
    """Reference to a data item (or, inside builtins, a candidate/task name)."""

    name: str


@dataclass(frozen=True)
class Not(Expression):
    operand: Expression


@dataclass(frozen=True)
class BinOp(Expression):
    op: str
    left: Expression
    right: Expression


@dataclass(frozen=True)
class Call(Expression):
    func: str
    args: tuple[Expression, ...]


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>\d+(\.\d+)?)
  | (?P<string>"(\\.|[^"\\])*")
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>==|!=|<=|>=|<|>|\+|-|\*|/|\(|\)|,)
    """,
    re.VERBOSE,
)

_ESCAPES = {'"': '"', "\\": "\\", "n": "\n", "t": "\t"}


def _unescape(raw: str) -> str:
    body = raw[1:-1]
    out: list[str] = []
    i = 0
    while i < len(body):
        ch = body[i]
        if ch == "\\":
            out.append(_ESCAPES.get(body[i + 1], body[i + 1]))
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def _escape(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\t", "\\t") + '"'


def _tokenize(source: str) -> list[tuple[str, str, int]]:
    tokens: list[tuple[str, str, int]] = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ExpressionSyntaxError(f"unexpected character {source[pos]!r}", pos)
        if m.lastgroup != "ws":
            tokens.append((m.lastgroup, m.group(0), pos))
        pos = m.end()
    tokens.append(("eof", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source: str):
        self.tokens = _tokenize(source)
        self.index = 0

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.index]

    def advance(self) -> tuple[str, str, int]:
        token = self.tokens[self.index]
        self.index += 1
        return token

    def expect_op(self, op: str) -> None:
        kind, value, pos = self.peek()
        if kind != "op" or value != op:
            raise ExpressionSyntaxError(f"expected {op!r}", pos)
        self.advance()

    def at_op(self, *ops: str) -> bool:
        kind, value, _ = self.peek()
        return kind == "op" and value in ops

    def at_keyword(self, word: str) -> bool:
        kind, value, _ = self.peek()
        return kind == "ident" and value == word

    def parse(self) -> Expression:
        expr = self.parse_or()
        kind, value, pos = self.peek()
        if kind != "eof":
            raise ExpressionSyntaxError(f"unexpected trailing input {value!r}", pos)
        return expr

    def parse_or(self) -> Expression:
        expr = self.parse_and()
        while self.at_keyword("or"):
            self.advance()
            expr = BinOp("or", expr, self.parse_and())
        return expr

    def parse_and(self) -> Expression:
        expr = self.parse_not()
        while self.at_keyword("and"):
            self.advance()
            expr = BinOp("and", expr, self.parse_not())
        return expr

    def parse_not(self) -> Expression:
        if self.at_keyword("not"):
            self.advance()
            return Not(self.parse_not())
        return self.parse_cmp()

    def parse_cmp(self) -> Expression:
        expr = self.parse_sum()
        if self.at_op(*COMPARISON_OPS):
            _, op, _ = self.advance()
            expr = BinOp(op, expr, self.parse_sum())
        return expr

    def parse_sum(self) -> Expression:
        expr = self.parse_term()
        while self.at_op(*ADDITIVE_OPS):
            _, op, _ = self.advance()
            expr = BinOp(op, expr, self.parse_term())
        return expr

    def parse_term(self) -> Expression:
        expr = self.parse_factor()
        while self.at_op(*MULTIPLICATIVE_OPS):
            _, op, _ = self.advance()
            expr = BinOp(op, expr, self.parse_factor())
        return expr

    def parse_factor(self) -> Expression:
        kind, value, pos = self.peek()
        if kind == "number":
            self.advance()
            return Literal(float(value) if "." in value else int(value))
        if kind == "string":
            self.advance()
            return Literal(_unescape(value))
        if kind == "op" and value == "(":
            self.advance()
            expr = self.parse_or()
            self.expect_op(")")
            return expr
        if kind == "ident":
            if value in ("true", "false"):
                self.advance()
                return Literal(value == "true")
            if value in ("and", "or", "not"):
                raise ExpressionSyntaxError(f"unexpected keyword {value!r}", pos)
            self.advance()
            if self.at_op("("):
                if value not in BUILTINS:
                    raise ExpressionSyntaxError(f"unknown function {value!r}", pos)
                return self.parse_call(value)
            return ItemRef(value)
        raise ExpressionSyntaxError("expected a value", pos)

    def parse_call(self, func: str) -> Expression:
        self.expect_op("(")
        args = [self.parse_or()]
        while self.at_op(","):
            self.advance()
            args.append(self.parse_or())
        kind, _, pos = self.peek()
        self.expect_op(")")
        if len(args) != BUILTINS[func]:
            raise ExpressionSyntaxError(
                f"{func} takes {BUILTINS[func]} argument(s), got {len(args)}", pos
            )
        return Call(func, tuple(args))


def parse_expression(source: str) -> Expression:
    """Parse expression text into an AST.

    Raises ExpressionSyntaxError with the offending position on bad input.
    """
    return _Parser(source).parse()


# Precedence levels used by the printer; higher binds tighter.
_LEVELS = {"or": 1, "and": 2, "cmp": 4, "+": 5, "-": 5, "*": 6, "/": 6}


def _level(expr: Expression) -> int:
    if isinstance(expr, BinOp):
        if expr.op in COMPARISON_OPS:
            return _LEVELS["cmp"]
        return _LEVELS[expr.op]
    if isinstance(expr, Not):
        return 3
    return 7


def _format_literal(value: bool | int | float | str) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return _escape(value)
    return repr(value)


def to_source(expr: Expression) -> str:
    """Render an AST back to grammar-conformant text.

    parse_expression(to_source(e)) reproduces e for any valid AST.
    """
    if isinstance(expr, Literal):
        return _format_literal(expr.value)
    if isinstance(expr, ItemRef):
        return expr.name
    if isinstance(expr, Call):
        return f"{expr.func}({', '.join(to_source(a) for a in expr.args)})"
    if isinstance(expr, Not):
        inner = to_source(expr.operand)
        if _level(expr.operand) < 3:
            inner = f"({inner})"
        return f"not {inner}"
    if isinstance(expr, BinOp):
        own = _level(expr)
        left = to_source(expr.left)
        right = to_source(expr.right)
        # Comparison is non-associative, everything else left-associative:
        # equal-precedence children keep parentheses on the right (and on the
        # left for comparisons) so the printed text reparses to the same tree.
        if _level(expr.left) < own or (own == 4 and _level(expr.left) == 4):
            left = f"({left})"
        if _level(expr.right) <= own:
            right = f"({right})"
        return f"{left} {expr.op} {right}"
    raise TypeError(f"not an expression node: {expr!r}")


def referenced_items(expr: Expression) -> set[str]:
    """Names appearing as plain data-item references (excludes builtin name args)."""
    names: set[str] = set()

    def walk(node: Expression, in_ref_builtin: bool) -> None:
        if isinstance(node, ItemRef):
            if not in_ref_builtin:
                names.add(node.name)
        elif isinstance(node, Not):
            walk(node.operand, False)
        elif isinstance(node, BinOp):
            walk(node.left, False)
            walk(node.right, False)
        elif isinstance(node, Call):
            if node.func == "known":
                # known() names a data item; report it.
                for arg in node.args:
                    walk(arg, False)
            elif node.func in ("netsupport", "is_committed", "result_of"):
                for arg in node.args:
                    walk(arg, True)
            else:
                for arg in node.args:
                    walk(arg, False)

    walk(expr, False)
    return names


def referenced_calls(expr: Expression) -> list[Call]:
    """All builtin call nodes in the tree, in depth-first order."""
    calls: list[Call] = []

    def walk(node: Expression) -> None:
        if isinstance(node, Not):
            walk(node.operand)
        elif isinstance(node, BinOp):
            walk(node.left)
            walk(node.right)
        elif isinstance(node, Call):
            calls.append(node)
            for arg in node.args:
                walk(arg)

    walk(expr)
    return calls
