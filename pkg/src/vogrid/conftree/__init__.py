"""Schema-driven configuration: one tree type for schemas and configs."""

from .configure import (
    CardinalityViolation,
    DuplicateAttribute,
    UnboundVar,
    configure,
)
from .derive import (
    MissingSection,
    SERVICE_KINDS,
    SUPPORTED_SCHEMA_VERSION,
    UnsupportedSchemaVersion,
    derive_service_config,
)
from .directives import UnknownDirective, parse_directive
from .meta import MAX_DESIGN_DEPTH, meta_schema
from .session import (
    ACCEPT_DEFAULT,
    AnswerExhausted,
    AnswerScript,
    ConfigureError,
    Count,
    InteractiveInput,
    ScriptMismatch,
    parse_answer_file,
)
from .tree import TreeError, TreeNode
from .xmlio import MalformedXml, read_tree, write_tree

__all__ = [
    "ACCEPT_DEFAULT",
    "AnswerExhausted",
    "AnswerScript",
    "CardinalityViolation",
    "ConfigureError",
    "Count",
    "DuplicateAttribute",
    "InteractiveInput",
    "MAX_DESIGN_DEPTH",
    "MalformedXml",
    "MissingSection",
    "SERVICE_KINDS",
    "SUPPORTED_SCHEMA_VERSION",
    "ScriptMismatch",
    "TreeError",
    "TreeNode",
    "UnboundVar",
    "UnknownDirective",
    "UnsupportedSchemaVersion",
    "configure",
    "derive_service_config",
    "meta_schema",
    "parse_answer_file",
    "parse_directive",
    "read_tree",
    "write_tree",
]
