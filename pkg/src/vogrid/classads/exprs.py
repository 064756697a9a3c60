"""Expression trees for advertisements and job descriptions."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Union

from .values import Value, format_value


class Scope(Enum):
    SELF = "self"
    OTHER = "other"


@dataclass(frozen=True)
class Literal:
    value: Value


@dataclass(frozen=True)
class AttrRef:
    scope: Scope
    name: str  # display form; resolution is case-insensitive


@dataclass(frozen=True)
class Unary:
    op: str  # one of ! - +
    operand: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str  # + - * / < <= > >= == != && ||
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    fn_name: str
    args: tuple["Expr", ...]


Expr = Union[Literal, AttrRef, Unary, Binary, Call]

# Binding powers, loosest to tightest. Unary operators bind above all of these.
PRECEDENCE = {
    "||": 10,
    "&&": 20,
    "==": 30, "!=": 30, "<": 30, "<=": 30, ">": 30, ">=": 30,
    "+": 40, "-": 40,
    "*": 50, "/": 50,
}
_UNARY_BP = 60


def _fmt(e: Expr, parent_bp: int) -> str:
    if isinstance(e, Literal):
        return format_value(e.value)
    if isinstance(e, AttrRef):
        return e.name if e.scope is Scope.SELF else f"OTHER.{e.name}"
    if isinstance(e, Call):
        return f"{e.fn_name}({', '.join(_fmt(a, 0) for a in e.args)})"
    if isinstance(e, Unary):
        inner = _fmt(e.operand, _UNARY_BP)
        s = f"{e.op}{inner}"
        return f"({s})" if parent_bp > _UNARY_BP else s
    bp = PRECEDENCE[e.op]
    # Same-precedence right children are parenthesized so a-(b-c) survives.
    s = f"{_fmt(e.left, bp)} {e.op} {_fmt(e.right, bp + 1)}"
    return f"({s})" if parent_bp > bp else s


def format_expr(e: Expr) -> str:
    """Render an expression back to parseable source text."""
    return _fmt(e, 0)
