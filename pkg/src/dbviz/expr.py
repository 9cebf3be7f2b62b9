"""Expression language shared by projections, filters and channel mappings.

Grammar (lowest to highest precedence)::

    expr    := or
    or      := and ("or" and)*
    and     := not ("and" not)*
    not     := "not" not | cmp
    cmp     := add (("==" | "!=" | "<" | "<=" | ">" | ">=") add)?
    add     := mul (("+" | "-") mul)*
    mul     := unary (("*" | "/" | "%") unary)*
    unary   := "-" unary | primary
    primary := NUMBER | STRING | FSTRING | "true" | "false"
             | IDENT "(" expr ")" | IDENT ("." IDENT)? | "(" expr ")"

Format strings are written ``f"{T.id}={S.id}"``; braces hold a single
attribute reference.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from typing import Any, Mapping, Union

INTEGER = "integer"
REAL = "real"
TEXT = "text"
BOOLEAN = "boolean"
NUMERIC = (INTEGER, REAL)

FUNCTIONS = ("ceil", "floor")
ARITH_OPS = ("+", "-", "*", "/", "%")
COMPARE_OPS = ("==", "!=", "<", "<=", ">", ">=")
BOOL_OPS = ("and", "or")
KEYWORDS = ("and", "or", "not", "true", "false")


class ExprSyntaxError(ValueError):
    def __init__(self, message: str, offset: int = 0):
        super().__init__(message)
        self.offset = offset


class ExprTypeError(TypeError):
    pass


class DataError(ValueError):
    """Raised when evaluation fails on a particular row (e.g. division by zero)."""


@dataclass(frozen=True)
class Literal:
    value: Any


@dataclass(frozen=True)
class Attr:
    name: str
    table: str | None = None

    @property
    def qualified(self) -> str:
        return f"{self.table}.{self.name}" if self.table else self.name


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


@dataclass(frozen=True)
class Format:
    parts: tuple  # of str | Attr


Expr = Union[Literal, Attr, Unary, Binary, Call, Format]


# --- tokenizer -------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<fstring>f"(?:[^"\\]|\\.)*")
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<number>\d+\.\d*(?:[eE][+-]?\d+)?|\d+[eE][+-]?\d+|\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>==|!=|<=|>=|[-+*/%<>().])
    """,
    re.VERBOSE,
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


def _parse_format(body: str, offset: int) -> Format:
    try:
        raw = json.loads(body)
    except json.JSONDecodeError as exc:
        raise ExprSyntaxError(f"bad string escape: {exc.msg}", offset) from None
    parts: list = []
    buf = []
    i = 0
    while i < len(raw):
        ch = raw[i]
        if ch == "{" and raw.startswith("{{", i):
            buf.append("{")
            i += 2
        elif ch == "}" and raw.startswith("}}", i):
            buf.append("}")
            i += 2
        elif ch == "{":
            end = raw.find("}", i)
            if end < 0:
                raise ExprSyntaxError("unterminated '{' in format string", offset)
            ref = raw[i + 1:end].strip()
            if not re.fullmatch(r"[A-Za-z_]\w*(\.[A-Za-z_]\w*)?", ref):
                raise ExprSyntaxError(
                    f"format placeholder must be an attribute reference, got {ref!r}", offset)
            if buf:
                parts.append("".join(buf))
                buf = []
            table, _, name = ref.rpartition(".")
            parts.append(Attr(name, table or None))
            i = end + 1
        elif ch == "}":
            raise ExprSyntaxError("single '}' in format string", offset)
        else:
            buf.append(ch)
            i += 1
    if buf:
        parts.append("".join(buf))
    return Format(tuple(parts))


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.i]

    def take(self) -> tuple[str, str, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def accept(self, value: str) -> bool:
        kind, text, _ = self.peek()
        if text == value and kind in ("op", "ident"):
            self.i += 1
            return True
        return False

    def expect(self, value: str) -> None:
        if not self.accept(value):
            kind, text, pos = self.peek()
            raise ExprSyntaxError(f"expected {value!r}, got {text or 'end of input'!r}", pos)

    def parse(self) -> Expr:
        node = self.or_()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {text!r}", pos)
        return node

    def or_(self) -> Expr:
        node = self.and_()
        while self.accept("or"):
            node = Binary("or", node, self.and_())
        return node

    def and_(self) -> Expr:
        node = self.not_()
        while self.accept("and"):
            node = Binary("and", node, self.not_())
        return node

    def not_(self) -> Expr:
        if self.accept("not"):
            return Unary("not", self.not_())
        return self.cmp()

    def cmp(self) -> Expr:
        node = self.add()
        kind, text, _ = self.peek()
        if kind == "op" and text in COMPARE_OPS:
            self.take()
            node = Binary(text, node, self.add())
        return node

    def add(self) -> Expr:
        node = self.mul()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in ("+", "-"):
                self.take()
                node = Binary(text, node, self.mul())
            else:
                return node

    def mul(self) -> Expr:
        node = self.unary()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in ("*", "/", "%"):
                self.take()
                node = Binary(text, node, self.unary())
            else:
                return node

    def unary(self) -> Expr:
        if self.accept("-"):
            operand = self.unary()
            # fold so that negative literals print and re-parse identically
            if isinstance(operand, Literal) and type(operand.value) in (int, float):
                return Literal(-operand.value)
            return Unary("-", operand)
        return self.primary()

    def primary(self) -> Expr:
        kind, text, pos = self.take()
        if kind == "number":
            return Literal(float(text) if any(c in text for c in ".eE") else int(text))
        if kind == "string":
            try:
                return Literal(json.loads(text))
            except json.JSONDecodeError as exc:
                raise ExprSyntaxError(f"bad string escape: {exc.msg}", pos) from None
        if kind == "fstring":
            return _parse_format(text[1:], pos)
        if kind == "ident":
            if text == "true":
                return Literal(True)
            if text == "false":
                return Literal(False)
            if text in KEYWORDS:
                raise ExprSyntaxError(f"unexpected keyword {text!r}", pos)
            if self.accept("("):
                if text not in FUNCTIONS:
                    raise ExprSyntaxError(f"unknown function {text!r}", pos)
                arg = self.or_()
                self.expect(")")
                return Call(text, arg)
            if self.accept("."):
                kind2, name, pos2 = self.take()
                if kind2 != "ident":
                    raise ExprSyntaxError("expected attribute name after '.'", pos2)
                return Attr(name, text)
            return Attr(text)
        if kind == "op" and text == "(":
            node = self.or_()
            self.expect(")")
            return node
        raise ExprSyntaxError(f"unexpected {text or 'end of input'!r}", pos)


def parse_expr(text: str) -> Expr:
    return _Parser(text).parse()


# --- printing --------------------------------------------------------------

def _literal_source(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"non-finite literal {value!r}")
        return repr(value)
    return json.dumps(value, ensure_ascii=False)


def to_source(expr: Expr) -> str:
    """Canonical text of an expression; ``parse_expr(to_source(e)) == e``."""
    if isinstance(expr, Literal):
        return _literal_source(expr.value)
    if isinstance(expr, Attr):
        return expr.qualified
    if isinstance(expr, Unary):
        inner = to_source(expr.operand)
        if not isinstance(expr.operand, (Literal, Attr, Call, Format)):
            inner = f"({inner})"
        return f"not {inner}" if expr.op == "not" else f"-{inner}"
    if isinstance(expr, Binary):
        def side(e: Expr) -> str:
            s = to_source(e)
            return f"({s})" if isinstance(e, (Binary, Unary)) else s
        return f"{side(expr.left)} {expr.op} {side(expr.right)}"
    if isinstance(expr, Call):
        return f"{expr.func}({to_source(expr.arg)})"
    if isinstance(expr, Format):
        body = "".join(
            "{" + p.qualified + "}" if isinstance(p, Attr)
            else p.replace("{", "{{").replace("}", "}}")
            for p in expr.parts
        )
        return "f" + json.dumps(body, ensure_ascii=False)
    raise TypeError(f"not an expression: {expr!r}")


def attributes(expr: Expr) -> list[Attr]:
    """Attribute references in evaluation order (duplicates kept)."""
    if isinstance(expr, Attr):
        return [expr]
    if isinstance(expr, Unary):
        return attributes(expr.operand)
    if isinstance(expr, Binary):
        return attributes(expr.left) + attributes(expr.right)
    if isinstance(expr, Call):
        return attributes(expr.arg)
    if isinstance(expr, Format):
        return [p for p in expr.parts if isinstance(p, Attr)]
    return []


# --- typing ----------------------------------------------------------------

def _literal_type(value: Any) -> str:
    if isinstance(value, bool):
        return BOOLEAN
    if isinstance(value, int):
        return INTEGER
    if isinstance(value, float):
        return REAL
    return TEXT


def infer_type(expr: Expr, types: Mapping[str, str]) -> str:
    """Type of *expr* given attribute kinds keyed by (possibly qualified) name."""
    if isinstance(expr, Literal):
        return _literal_type(expr.value)
    if isinstance(expr, Attr):
        try:
            return types[expr.qualified]
        except KeyError:
            raise ExprTypeError(f"unknown attribute {expr.qualified}") from None
    if isinstance(expr, Format):
        for part in expr.parts:
            if isinstance(part, Attr):
                infer_type(part, types)
        return TEXT
    if isinstance(expr, Call):
        if infer_type(expr.arg, types) not in NUMERIC:
            raise ExprTypeError(f"{expr.func}() needs a numeric argument")
        return INTEGER
    if isinstance(expr, Unary):
        t = infer_type(expr.operand, types)
        if expr.op == "not":
            if t != BOOLEAN:
                raise ExprTypeError("'not' needs a boolean operand")
            return BOOLEAN
        if t not in NUMERIC:
            raise ExprTypeError("unary '-' needs a numeric operand")
        return t
    if isinstance(expr, Binary):
        lt = infer_type(expr.left, types)
        rt = infer_type(expr.right, types)
        op = expr.op
        if op in BOOL_OPS:
            if lt != BOOLEAN or rt != BOOLEAN:
                raise ExprTypeError(f"'{op}' needs boolean operands")
            return BOOLEAN
        if op in COMPARE_OPS:
            same = lt == rt or (lt in NUMERIC and rt in NUMERIC)
            if not same:
                raise ExprTypeError(f"cannot compare {lt} with {rt}")
            if op not in ("==", "!=") and lt not in NUMERIC + (TEXT,):
                raise ExprTypeError(f"'{op}' is not defined on {lt}")
            return BOOLEAN
        if lt not in NUMERIC or rt not in NUMERIC:
            raise ExprTypeError(f"'{op}' needs numeric operands, got {lt} and {rt}")
        if op == "/":
            return REAL
        return INTEGER if lt == rt == INTEGER else REAL
    raise TypeError(f"not an expression: {expr!r}")


# --- evaluation ------------------------------------------------------------

def render_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def evaluate(expr: Expr, env: Mapping[str, Any]) -> Any:
    if isinstance(expr, Literal):
        return expr.value
    if isinstance(expr, Attr):
        return env[expr.qualified]
    if isinstance(expr, Format):
        return "".join(
            render_value(env[p.qualified]) if isinstance(p, Attr) else p for p in expr.parts)
    if isinstance(expr, Call):
        arg = evaluate(expr.arg, env)
        return math.ceil(arg) if expr.func == "ceil" else math.floor(arg)
    if isinstance(expr, Unary):
        v = evaluate(expr.operand, env)
        return (not v) if expr.op == "not" else -v
    if isinstance(expr, Binary):
        op = expr.op
        if op == "and":
            return bool(evaluate(expr.left, env)) and bool(evaluate(expr.right, env))
        if op == "or":
            return bool(evaluate(expr.left, env)) or bool(evaluate(expr.right, env))
        a = evaluate(expr.left, env)
        b = evaluate(expr.right, env)
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op in ("/", "%") and b == 0:
            raise DataError(f"division by zero in {to_source(expr)}")
        if op == "/":
            return a / b
        if op == "%":
            return a % b
        if op == "==":
            return a == b
        if op == "!=":
            return a != b
        if op == "<":
            return a < b
        if op == "<=":
            return a <= b
        if op == ">":
            return a > b
        if op == ">=":
            return a >= b
    raise TypeError(f"not an expression: {expr!r}")


def as_expr(e: Expr | str) -> Expr:
    return parse_expr(e) if isinstance(e, str) else e
