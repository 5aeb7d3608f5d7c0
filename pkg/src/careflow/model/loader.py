"""Reading and writing guideline definition files.

The file format is a UTF-8 JSON document::

    {
      "id": "...", "version": "...", "description": "...",
      "data_items": [{"name", "value_type", "meta"?}, ...],
      "tasks": [{"name", "kind", "components"?, "antecedents"?,
                 "precondition"?, "sources"?, "candidates"?,
                 "procedure"?, "meta"?}, ...],
      "root_plan": "..."
    }

Unknown top-level keys are rejected; unknown meta keys pass through
untouched.  Expressions appear as strings in the grammar of
:mod:`careflow.model.expressions`.
"""
from __future__ import annotations

import json
from pathlib import Path

from .definition import (
    Argument,
    Candidate,
    DataItemDefinition,
    GuidelineDefinition,
    MetaMap,
    TaskDefinition,
    TaskKind,
    ValueType,
)
from .expressions import Expression, ExpressionSyntaxError, parse_expression, to_source


class GuidelineParseError(ValueError):
    """Malformed guideline file: bad JSON, bad shape, or bad identifiers."""


_TOP_LEVEL_KEYS = {"id", "version", "description", "data_items", "tasks", "root_plan"}
_TASK_KEYS = {
    "name",
    "kind",
    "components",
    "antecedents",
    "precondition",
    "sources",
    "candidates",
    "procedure",
    "meta",
}
_ITEM_KEYS = {"name", "value_type", "meta"}
_CANDIDATE_KEYS = {"name", "arguments", "recommend_expr", "meta"}


def _require_str(obj: dict, key: str, where: str) -> str:
    value = obj.get(key)
    if not isinstance(value, str) or not value:
        raise GuidelineParseError(f"{where}: {key!r} must be a non-empty string")
    return value


def _parse_meta(obj: dict, where: str) -> MetaMap:
    raw = obj.get("meta", {})
    if not isinstance(raw, dict):
        raise GuidelineParseError(f"{where}: meta must be an object")
    meta: MetaMap = {}
    for key, value in raw.items():
        if not isinstance(value, str):
            raise GuidelineParseError(f"{where}: meta value for {key!r} must be a string")
        meta[key] = value
    return meta


def _parse_expr(text: object, where: str) -> Expression:
    if not isinstance(text, str):
        raise GuidelineParseError(f"{where}: expression must be a string")
    try:
        return parse_expression(text)
    except ExpressionSyntaxError as exc:
        raise GuidelineParseError(f"{where}: {exc}") from exc


def _parse_name_list(obj: dict, key: str, where: str) -> tuple[str, ...]:
    raw = obj.get(key, [])
    if not isinstance(raw, list) or not all(isinstance(x, str) for x in raw):
        raise GuidelineParseError(f"{where}: {key} must be a list of identifiers")
    return tuple(raw)


def _parse_candidate(raw: object, where: str) -> Candidate:
    if not isinstance(raw, dict):
        raise GuidelineParseError(f"{where}: candidate must be an object")
    unknown = set(raw) - _CANDIDATE_KEYS
    if unknown:
        raise GuidelineParseError(f"{where}: unknown candidate keys {sorted(unknown)}")
    name = _require_str(raw, "name", where)
    args_raw = raw.get("arguments", [])
    if not isinstance(args_raw, list):
        raise GuidelineParseError(f"{where}: arguments must be a list")
    arguments = []
    for i, arg in enumerate(args_raw):
        if not isinstance(arg, dict) or set(arg) != {"condition", "weight"}:
            raise GuidelineParseError(
                f"{where}, argument {i}: expected {{condition, weight}}"
            )
        weight = arg["weight"]
        if not isinstance(weight, int) or isinstance(weight, bool):
            raise GuidelineParseError(f"{where}, argument {i}: weight must be an integer")
        arguments.append(
            Argument(_parse_expr(arg["condition"], f"{where}, argument {i}"), weight)
        )
    recommend = None
    if "recommend_expr" in raw:
        recommend = _parse_expr(raw["recommend_expr"], f"{where} recommend_expr")
    return Candidate(name, tuple(arguments), recommend, _parse_meta(raw, where))


def _parse_task(raw: object) -> TaskDefinition:
    if not isinstance(raw, dict):
        raise GuidelineParseError("task must be an object")
    name = _require_str(raw, "name", "task")
    where = f"task {name!r}"
    unknown = set(raw) - _TASK_KEYS
    if unknown:
        raise GuidelineParseError(f"{where}: unknown task keys {sorted(unknown)}")
    kind_raw = _require_str(raw, "kind", where)
    try:
        kind = TaskKind(kind_raw)
    except ValueError:
        raise GuidelineParseError(f"{where}: unknown task kind {kind_raw!r}") from None
    precondition = None
    if "precondition" in raw:
        precondition = _parse_expr(raw["precondition"], f"{where} precondition")
    candidates_raw = raw.get("candidates", [])
    if not isinstance(candidates_raw, list):
        raise GuidelineParseError(f"{where}: candidates must be a list")
    candidates = []
    seen: set[str] = set()
    for cand_raw in candidates_raw:
        cand = _parse_candidate(cand_raw, f"{where} candidate")
        if cand.name in seen:
            raise GuidelineParseError(f"{where}: duplicate candidate {cand.name!r}")
        seen.add(cand.name)
        candidates.append(cand)
    procedure = raw.get("procedure")
    if procedure is not None and not isinstance(procedure, str):
        raise GuidelineParseError(f"{where}: procedure must be a string")
    return TaskDefinition(
        name=name,
        kind=kind,
        components=_parse_name_list(raw, "components", where),
        antecedents=_parse_name_list(raw, "antecedents", where),
        precondition=precondition,
        sources=_parse_name_list(raw, "sources", where),
        candidates=tuple(candidates),
        procedure=procedure,
        meta=_parse_meta(raw, where),
    )


def _parse_item(raw: object) -> DataItemDefinition:
    if not isinstance(raw, dict):
        raise GuidelineParseError("data item must be an object")
    name = _require_str(raw, "name", "data item")
    where = f"data item {name!r}"
    unknown = set(raw) - _ITEM_KEYS
    if unknown:
        raise GuidelineParseError(f"{where}: unknown keys {sorted(unknown)}")
    type_raw = _require_str(raw, "value_type", where)
    try:
        value_type = ValueType(type_raw)
    except ValueError:
        raise GuidelineParseError(f"{where}: unknown value type {type_raw!r}") from None
    return DataItemDefinition(name, value_type, _parse_meta(raw, where))


def parse_guideline(source_text: str) -> GuidelineDefinition:
    """Parse guideline file text into a definition.

    Structural problems (bad JSON, unknown keys/kinds, duplicate identifiers)
    raise GuidelineParseError; semantic problems are left to
    :func:`careflow.model.validation.validate_guideline`.
    """
    try:
        doc = json.loads(source_text)
    except json.JSONDecodeError as exc:
        raise GuidelineParseError(f"invalid JSON at position {exc.pos}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise GuidelineParseError("top level must be an object")
    unknown = set(doc) - _TOP_LEVEL_KEYS
    if unknown:
        raise GuidelineParseError(f"unknown top-level keys {sorted(unknown)}")
    for key in ("id", "version", "root_plan"):
        if key not in doc:
            raise GuidelineParseError(f"missing top-level key {key!r}")
    tasks_raw = doc.get("tasks", [])
    items_raw = doc.get("data_items", [])
    if not isinstance(tasks_raw, list) or not isinstance(items_raw, list):
        raise GuidelineParseError("tasks and data_items must be lists")

    items = []
    item_names: set[str] = set()
    for raw in items_raw:
        item = _parse_item(raw)
        if item.name in item_names:
            raise GuidelineParseError(f"duplicate identifier {item.name!r}")
        item_names.add(item.name)
        items.append(item)

    tasks = []
    task_names: set[str] = set()
    for raw in tasks_raw:
        task = _parse_task(raw)
        if task.name in task_names or task.name in item_names:
            raise GuidelineParseError(f"duplicate identifier {task.name!r}")
        task_names.add(task.name)
        tasks.append(task)

    description = doc.get("description", "")
    if not isinstance(description, str):
        raise GuidelineParseError("description must be a string")
    return GuidelineDefinition(
        id=_require_str(doc, "id", "guideline"),
        version=_require_str(doc, "version", "guideline"),
        description=description,
        data_items=tuple(items),
        tasks=tuple(tasks),
        root_plan=_require_str(doc, "root_plan", "guideline"),
    )


def _candidate_to_json(cand: Candidate) -> dict:
    out: dict = {
        "name": cand.name,
        "arguments": [
            {"condition": to_source(a.condition), "weight": a.weight}
            for a in cand.arguments
        ],
    }
    if cand.recommend_expr is not None:
        out["recommend_expr"] = to_source(cand.recommend_expr)
    if cand.meta:
        out["meta"] = cand.meta
    return out


def _task_to_json(task: TaskDefinition) -> dict:
    out: dict = {"name": task.name, "kind": task.kind.value}
    if task.components:
        out["components"] = list(task.components)
    if task.antecedents:
        out["antecedents"] = list(task.antecedents)
    if task.precondition is not None:
        out["precondition"] = to_source(task.precondition)
    if task.sources:
        out["sources"] = list(task.sources)
    if task.candidates:
        out["candidates"] = [_candidate_to_json(c) for c in task.candidates]
    if task.procedure is not None:
        out["procedure"] = task.procedure
    if task.meta:
        out["meta"] = task.meta
    return out


def serialize_guideline(definition: GuidelineDefinition) -> str:
    """Render a definition back to file text; reparsing yields an equivalent tree."""
    doc = {
        "id": definition.id,
        "version": definition.version,
        "description": definition.description,
        "data_items": [
            {"name": d.name, "value_type": d.value_type.value, **({"meta": d.meta} if d.meta else {})}
            for d in definition.data_items
        ],
        "tasks": [_task_to_json(t) for t in definition.tasks],
        "root_plan": definition.root_plan,
    }
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def load_guideline_file(path: str | Path) -> GuidelineDefinition:
    return parse_guideline(Path(path).read_text(encoding="utf-8"))
