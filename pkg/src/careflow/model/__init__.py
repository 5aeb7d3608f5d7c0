"""Guideline language: definitions, expressions, loading, validation."""

from .definition import (
    Argument,
    Candidate,
    DataItemDefinition,
    GATE_VALUES,
    GuidelineDefinition,
    MetaMap,
    TaskDefinition,
    TaskKind,
    ValueType,
    get_meta,
)
from .expressions import (
    BinOp,
    Call,
    Expression,
    ExpressionSyntaxError,
    ItemRef,
    Literal,
    Not,
    parse_expression,
    to_source,
)
from .loader import (
    GuidelineParseError,
    load_guideline_file,
    parse_guideline,
    serialize_guideline,
)
from .validation import ERROR, WARNING, ValidationIssue, errors_of, validate_guideline

__all__ = [
    "Argument",
    "BinOp",
    "Call",
    "Candidate",
    "DataItemDefinition",
    "ERROR",
    "Expression",
    "ExpressionSyntaxError",
    "GATE_VALUES",
    "GuidelineDefinition",
    "GuidelineParseError",
    "ItemRef",
    "Literal",
    "MetaMap",
    "Not",
    "TaskDefinition",
    "TaskKind",
    "ValidationIssue",
    "ValueType",
    "WARNING",
    "errors_of",
    "get_meta",
    "load_guideline_file",
    "parse_expression",
    "parse_guideline",
    "serialize_guideline",
    "to_source",
    "validate_guideline",
]
