"""Classified advertisements: named attribute->expression bindings.

Ad file format: one `Name = expression` binding per line, `#` starts a
comment line, blank lines ignored. Attribute names are unique up to case
folding and keep their display spelling. In lenient mode a binding whose
whole right-hand side is a bare identifier that resolves to no attribute of
the same ad is read as a text literal, so `Station_ID = foo` means
`Station_ID = "foo"` unless the ad defines an attribute named foo.
"""

from __future__ import annotations

import re
from enum import Enum
from typing import Iterator, Optional

from . import values
from .evaluator import evaluate
from .exprs import AttrRef, Expr, Literal, Scope, format_expr
from .parser import ParseError, parse_expr
from .registry import EMPTY_REGISTRY, FnRegistry


class AdKind(Enum):
    JOB = "job"
    RESOURCE = "resource"


_BINDING = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.+?)\s*$")


class ClassAd:
    """Immutable set of attribute bindings plus a kind and an identity."""

    def __init__(self, attrs: dict[str, Expr], kind: AdKind, ad_id: str = ""):
        folded: dict[str, str] = {}
        for name in attrs:
            low = name.lower()
            if low in folded:
                raise ValueError(f"duplicate attribute {name!r} (case-insensitive)")
            folded[low] = name
        self._attrs = dict(attrs)
        self._folded = folded
        self.kind = kind
        self.ad_id = ad_id

    def lookup(self, name: str) -> Optional[Expr]:
        display = self._folded.get(name.lower())
        return self._attrs[display] if display is not None else None

    def names(self) -> Iterator[str]:
        return iter(self._attrs)

    def items(self) -> Iterator[tuple[str, Expr]]:
        return iter(self._attrs.items())

    def __contains__(self, name: str) -> bool:
        return name.lower() in self._folded

    def __eq__(self, other) -> bool:
        return (isinstance(other, ClassAd) and self.kind == other.kind
                and self.ad_id == other.ad_id and self._attrs == other._attrs)

    def __repr__(self) -> str:
        return f"ClassAd({self.kind.value} {self.ad_id!r}, {len(self._attrs)} attrs)"


def parse_classad(text: str, kind: AdKind, ad_id: str = "", lenient: bool = False) -> ClassAd:
    attrs: dict[str, Expr] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        m = _BINDING.match(line)
        if not m:
            raise ParseError(f"line {lineno}: expected 'Name = expression'", 0)
        name, rhs = m.group(1), m.group(2)
        if name.lower() in (k.lower() for k in attrs):
            raise ParseError(f"line {lineno}: duplicate attribute {name!r}", 0)
        try:
            attrs[name] = parse_expr(rhs)
        except ParseError as exc:
            raise ParseError(f"line {lineno}: {exc.args[0]}", exc.offset) from None
    if lenient:
        defined = {k.lower() for k in attrs}
        for name, expr in attrs.items():
            if (isinstance(expr, AttrRef) and expr.scope is Scope.SELF
                    and expr.name.lower() not in defined):
                attrs[name] = Literal(values.text(expr.name))
    return ClassAd(attrs, kind, ad_id)


def format_classad(ad: ClassAd) -> str:
    return "".join(f"{name} = {format_expr(expr)}\n" for name, expr in ad.items())


def ad_to_json(ad: ClassAd) -> dict:
    return {
        "id": ad.ad_id,
        "kind": ad.kind.value,
        "attrs": {name: format_expr(expr) for name, expr in ad.items()},
    }


def ad_from_json(obj: dict) -> ClassAd:
    attrs = {name: parse_expr(src) for name, src in obj["attrs"].items()}
    return ClassAd(attrs, AdKind(obj["kind"]), obj.get("id", ""))


_DEFAULT_REQUIREMENTS = Literal(values.TRUE)


def symmetric_match(job: ClassAd, res: ClassAd, reg: FnRegistry = EMPTY_REGISTRY,
                    env=None) -> bool:
    """Two-way Requirements check; a missing Requirements attribute is true.

    Undefined or Error on either side counts as a non-match.
    """
    job_req = job.lookup("Requirements") or _DEFAULT_REQUIREMENTS
    if not evaluate(job_req, job, res, reg, env).is_true():
        return False
    res_req = res.lookup("Requirements") or _DEFAULT_REQUIREMENTS
    return evaluate(res_req, res, job, reg, env).is_true()
