"""The built-in meta-schema.

Configuring this schema is how new schemas are designed: the session asks
for element names, how many attributes each element carries (with their raw
directive strings as values), and what nested elements exist, to a fixed
nesting depth. The output of that session is itself a schema the
configurator accepts, so configuring twice takes a design all the way to a
concrete configuration.

The tree below is stable; changing it would invalidate every recorded design
session, so additions must keep existing question order.
"""

from __future__ import annotations

from .tree import TreeNode

MAX_DESIGN_DEPTH = 5


def _attribute_slot() -> TreeNode:
    return TreeNode("attribute", {
        "cardinalityMin": "0",
        "name": "inquire",
        "value": "inquire",
    })


def _element_slot(depth: int) -> TreeNode:
    attrs = {"cardinalityMin": "1", "cardinalityMax": "1"} if depth == 1 \
        else {"cardinalityMin": "0"}
    attrs["elementName"] = "inquire"
    children = [_attribute_slot()]
    if depth < MAX_DESIGN_DEPTH:
        children.append(_element_slot(depth + 1))
    return TreeNode("element", attrs, children)


def meta_schema() -> TreeNode:
    return _element_slot(1)
