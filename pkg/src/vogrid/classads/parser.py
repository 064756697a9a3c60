# Expression parser for advertisement attributes.
# Precedence (loosest to tightest):
#   ||
#   &&
#   == != < <= > >=
#   + -
#   * /
#   unary ! - +
# Atoms: decimal numerics, "quoted text", true/false/undefined/error,
# bare attribute references, OTHER.attr references, name(arg, ...) calls,
# parenthesized expressions. Keywords and references are case-insensitive.

from __future__ import annotations

import re

from . import values
from .exprs import AttrRef, Binary, Call, Expr, Literal, Scope, Unary


class ParseError(Exception):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<op>\|\||&&|==|!=|<=|>=|[-+*/<>()!,.])
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
    """,
    re.VERBOSE,
)

_KEYWORDS = {"true", "false", "undefined", "error"}
_UNESCAPES = {"\\": "\\", '"': '"', "n": "\n", "t": "\t", "r": "\r"}


def _byte_offset(text: str, pos: int) -> int:
    return len(text[:pos].encode("utf-8"))


def _unescape(body: str, text: str, pos: int) -> str:
    out = []
    i = 0
    while i < len(body):
        c = body[i]
        if c == "\\":
            i += 1
            esc = body[i]
            if esc not in _UNESCAPES:
                raise ParseError(f"bad escape \\{esc}", _byte_offset(text, pos))
            out.append(_UNESCAPES[esc])
        else:
            out.append(c)
        i += 1
    return "".join(out)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"bad character {text[pos]!r}", _byte_offset(text, pos))
        if m.lastgroup != "ws":
            tokens.append((m.lastgroup, m.group(), pos))
        pos = m.end()
    tokens.append(("eof", "", pos))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.i]

    def pop(self) -> tuple[str, str, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op: str) -> None:
        kind, val, pos = self.pop()
        if kind != "op" or val != op:
            raise ParseError(f"expected {op!r}, found {val or 'end of input'!r}",
                             _byte_offset(self.text, pos))

    def fail(self, message: str) -> ParseError:
        _, val, pos = self.peek()
        return ParseError(message, _byte_offset(self.text, pos))

    # -- grammar ------------------------------------------------------------

    def parse(self) -> Expr:
        e = self.or_expr()
        kind, val, pos = self.peek()
        if kind != "eof":
            raise ParseError(f"unexpected trailing {val!r}", _byte_offset(self.text, pos))
        return e

    def or_expr(self) -> Expr:
        e = self.and_expr()
        while self.peek()[:2] == ("op", "||"):
            self.pop()
            e = Binary("||", e, self.and_expr())
        return e

    def and_expr(self) -> Expr:
        e = self.cmp_expr()
        while self.peek()[:2] == ("op", "&&"):
            self.pop()
            e = Binary("&&", e, self.cmp_expr())
        return e

    def cmp_expr(self) -> Expr:
        e = self.add_expr()
        while self.peek()[0] == "op" and self.peek()[1] in ("==", "!=", "<", "<=", ">", ">="):
            op = self.pop()[1]
            e = Binary(op, e, self.add_expr())
        return e

    def add_expr(self) -> Expr:
        e = self.mul_expr()
        while self.peek()[0] == "op" and self.peek()[1] in ("+", "-"):
            op = self.pop()[1]
            e = Binary(op, e, self.mul_expr())
        return e

    def mul_expr(self) -> Expr:
        e = self.unary_expr()
        while self.peek()[0] == "op" and self.peek()[1] in ("*", "/"):
            op = self.pop()[1]
            e = Binary(op, e, self.unary_expr())
        return e

    def unary_expr(self) -> Expr:
        kind, val, _ = self.peek()
        if kind == "op" and val in ("!", "-", "+"):
            self.pop()
            return Unary(val, self.unary_expr())
        return self.atom()

    def atom(self) -> Expr:
        kind, val, pos = self.pop()
        if kind == "number":
            if any(c in val for c in ".eE"):
                return Literal(values.real(float(val)))
            return Literal(values.integer(int(val)))
        if kind == "string":
            return Literal(values.text(_unescape(val[1:-1], self.text, pos)))
        if kind == "op" and val == "(":
            e = self.or_expr()
            self.expect_op(")")
            return e
        if kind == "ident":
            lowered = val.lower()
            if lowered == "true":
                return Literal(values.TRUE)
            if lowered == "false":
                return Literal(values.FALSE)
            if lowered == "undefined":
                return Literal(values.UNDEFINED)
            if lowered == "error":
                return Literal(values.ERROR)
            if lowered == "other" and self.peek()[:2] == ("op", "."):
                self.pop()
                nkind, nval, npos = self.pop()
                if nkind != "ident":
                    raise ParseError("expected attribute name after OTHER.",
                                     _byte_offset(self.text, npos))
                return AttrRef(Scope.OTHER, nval)
            if self.peek()[:2] == ("op", "("):
                self.pop()
                args: list[Expr] = []
                if self.peek()[:2] != ("op", ")"):
                    args.append(self.or_expr())
                    while self.peek()[:2] == ("op", ","):
                        self.pop()
                        args.append(self.or_expr())
                self.expect_op(")")
                return Call(val, tuple(args))
            return AttrRef(Scope.SELF, val)
        raise ParseError(f"unexpected {val or 'end of input'!r}", _byte_offset(self.text, pos))


def parse_expr(text: str) -> Expr:
    """Parse expression source text into an expression tree."""
    return _Parser(text).parse()
