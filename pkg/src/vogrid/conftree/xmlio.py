"""Canonical XML form for configuration trees.

Reading accepts any well-formed element-only XML. Writing is canonical:
UTF-8, single-quoted attributes sorted by name, two-space indent, empty
elements self-closed. read(write(t)) == t for every tree, and
write(read(x)) is the canonical form of x.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET

from .tree import TreeError, TreeNode

HEADER = "<?xml version='1.0'?>"


class MalformedXml(Exception):
    pass


def read_tree(xml_text: str) -> TreeNode:
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        raise MalformedXml(str(exc)) from None
    return _convert(root)


def _convert(el) -> TreeNode:
    if not isinstance(el.tag, str):
        raise MalformedXml("unsupported node kind")
    if el.text and el.text.strip():
        raise MalformedXml(f"element {el.tag!r} carries text content")
    children = []
    for sub in el:
        if sub.tail and sub.tail.strip():
            raise MalformedXml(f"element {el.tag!r} carries text content")
        children.append(_convert(sub))
    try:
        return TreeNode(el.tag, dict(el.attrib), children)
    except TreeError as exc:
        raise MalformedXml(str(exc)) from None


def _escape(value: str) -> str:
    out = []
    for ch in value:
        if ch == "&":
            out.append("&amp;")
        elif ch == "<":
            out.append("&lt;")
        elif ch == ">":
            out.append("&gt;")
        elif ch == "'":
            out.append("&apos;")
        elif ch in ("\n", "\t", "\r"):
            out.append(f"&#{ord(ch)};")
        else:
            out.append(ch)
    return "".join(out)


def write_tree(node: TreeNode) -> str:
    lines = [HEADER]
    _write(node, 0, lines)
    return "\n".join(lines) + "\n"


def _write(node: TreeNode, depth: int, lines: list[str]):
    pad = "  " * depth
    attrs = "".join(f" {k}='{_escape(node.attributes[k])}'"
                    for k in sorted(node.attributes))
    if not node.children:
        lines.append(f"{pad}<{node.element_name}{attrs}/>")
        return
    lines.append(f"{pad}<{node.element_name}{attrs}>")
    for child in node.children:
        _write(child, depth + 1, lines)
    lines.append(f"{pad}</{node.element_name}>")
