"""Static checks run on a parsed guideline before it may be enacted.

Issues are data, not exceptions: callers decide whether warnings matter.
A definition with zero error-severity issues satisfies every structural
invariant the enactment engine relies on.
"""
from __future__ import annotations

from dataclasses import dataclass

from .definition import (
    GATE_VALUES,
    GuidelineDefinition,
    TaskDefinition,
    TaskKind,
)
from .expressions import Call, Expression, referenced_calls, referenced_items

ERROR = "error"
WARNING = "warning"


@dataclass(frozen=True)
class ValidationIssue:
    severity: str
    location: str
    message: str

    def __str__(self) -> str:  # pragma: no cover - debugging aid
        return f"{self.severity}: {self.location}: {self.message}"


def _check_expression(
    expr: Expression,
    definition: GuidelineDefinition,
    location: str,
    issues: list[ValidationIssue],
) -> None:
    for name in referenced_items(expr):
        if name not in definition.item_map:
            issues.append(
                ValidationIssue(ERROR, location, f"unknown data item {name!r}")
            )
    for call in referenced_calls(expr):
        _check_call(call, definition, location, issues)


def _ref_name(call: Call, index: int) -> str | None:
    from .expressions import ItemRef

    arg = call.args[index]
    return arg.name if isinstance(arg, ItemRef) else None


def _check_call(
    call: Call,
    definition: GuidelineDefinition,
    location: str,
    issues: list[ValidationIssue],
) -> None:
    if call.func == "netsupport":
        name = _ref_name(call, 0)
        if name is None:
            issues.append(ValidationIssue(ERROR, location, "netsupport expects a candidate name"))
        elif name not in definition.candidate_index:
            issues.append(ValidationIssue(ERROR, location, f"unknown candidate {name!r}"))
    elif call.func == "is_committed":
        decision = _ref_name(call, 0)
        candidate = _ref_name(call, 1)
        if decision is None or candidate is None:
            issues.append(
                ValidationIssue(ERROR, location, "is_committed expects decision and candidate names")
            )
            return
        task = definition.task_map.get(decision)
        if task is None or task.kind is not TaskKind.DECISION:
            issues.append(ValidationIssue(ERROR, location, f"unknown decision {decision!r}"))
        elif candidate not in {c.name for c in task.candidates}:
            issues.append(
                ValidationIssue(ERROR, location, f"decision {decision!r} has no candidate {candidate!r}")
            )
    elif call.func == "result_of":
        name = _ref_name(call, 0)
        if name is None:
            issues.append(ValidationIssue(ERROR, location, "result_of expects a task name"))
        elif name not in definition.task_map:
            issues.append(ValidationIssue(ERROR, location, f"unknown task {name!r}"))


def _stateful_refs(expr: Expression) -> set[str]:
    """Tasks whose runtime state the expression depends on."""
    names: set[str] = set()
    for call in referenced_calls(expr):
        if call.func in ("is_committed", "result_of"):
            from .expressions import ItemRef

            arg = call.args[0]
            if isinstance(arg, ItemRef):
                names.add(arg.name)
    return names


def _check_task_shape(
    task: TaskDefinition, issues: list[ValidationIssue]
) -> None:
    loc = f"task {task.name}"
    if task.kind is TaskKind.PLAN:
        if not task.components:
            issues.append(ValidationIssue(ERROR, loc, "plan must list components"))
    elif task.components:
        issues.append(ValidationIssue(ERROR, loc, f"{task.kind.value} must not list components"))
    if task.kind is TaskKind.ENQUIRY:
        if not task.sources:
            issues.append(ValidationIssue(ERROR, loc, "enquiry must list sources"))
    elif task.sources:
        issues.append(ValidationIssue(ERROR, loc, f"{task.kind.value} must not list sources"))
    if task.kind is TaskKind.DECISION:
        if not task.candidates:
            issues.append(ValidationIssue(ERROR, loc, "decision must list candidates"))
    elif task.candidates:
        issues.append(ValidationIssue(ERROR, loc, f"{task.kind.value} must not list candidates"))
    if task.procedure is not None and task.kind is not TaskKind.ACTION:
        issues.append(ValidationIssue(ERROR, loc, "procedure is only valid on actions"))
    gate = task.meta.get("gate")
    if gate is not None and gate not in GATE_VALUES:
        issues.append(ValidationIssue(ERROR, loc, "gate must be AND|OR|XOR"))


def _check_component_tree(
    definition: GuidelineDefinition, issues: list[ValidationIssue]
) -> None:
    seen_child: dict[str, str] = {}
    for task in definition.tasks:
        for child in task.components:
            if child not in definition.task_map:
                issues.append(
                    ValidationIssue(ERROR, f"task {task.name}", f"unknown component {child!r}")
                )
                continue
            if child in seen_child:
                issues.append(
                    ValidationIssue(
                        ERROR,
                        f"task {child}",
                        f"component of both {seen_child[child]!r} and {task.name!r}",
                    )
                )
            else:
                seen_child[child] = task.name
            if child == task.name:
                issues.append(ValidationIssue(ERROR, f"task {task.name}", "plan contains itself"))

    root = definition.root_plan
    if root in seen_child:
        issues.append(
            ValidationIssue(ERROR, f"task {root}", "root plan may not be a component")
        )

    # Reachability from the root, guarding against component cycles.
    if root not in definition.task_map:
        return
    reachable: set[str] = set()
    stack = [root]
    while stack:
        name = stack.pop()
        if name in reachable:
            continue
        reachable.add(name)
        task = definition.task_map.get(name)
        if task is not None:
            stack.extend(c for c in task.components if c in definition.task_map)
    for task in definition.tasks:
        if task.name not in reachable:
            issues.append(
                ValidationIssue(
                    ERROR, f"task {task.name}", "not reachable from the root plan"
                )
            )


def _check_antecedents(
    definition: GuidelineDefinition, issues: list[ValidationIssue]
) -> None:
    parent_of = definition.parent_of
    for task in definition.tasks:
        loc = f"task {task.name}"
        for ref in task.antecedents:
            if ref not in definition.task_map:
                issues.append(ValidationIssue(ERROR, loc, f"unknown antecedent {ref!r}"))
            elif parent_of.get(ref) != parent_of.get(task.name) or task.name == definition.root_plan:
                issues.append(ValidationIssue(ERROR, loc, f"cross-plan antecedent {ref!r}"))

    # Cycle detection over the antecedent edges (ref -> task).
    color: dict[str, int] = {}

    def visit(name: str) -> bool:
        color[name] = 1
        task = definition.task_map[name]
        for ref in task.antecedents:
            if ref not in definition.task_map:
                continue
            state = color.get(ref, 0)
            if state == 1:
                return True
            if state == 0 and visit(ref):
                return True
        color[name] = 2
        return False

    for task in definition.tasks:
        if color.get(task.name, 0) == 0 and visit(task.name):
            issues.append(
                ValidationIssue(ERROR, f"task {task.name}", "antecedent cycle")
            )
            break


def validate_guideline(definition: GuidelineDefinition) -> list[ValidationIssue]:
    """Check every structural invariant; empty result means enactable."""
    issues: list[ValidationIssue] = []

    root = definition.task_map.get(definition.root_plan)
    if root is None:
        issues.append(
            ValidationIssue(
                ERROR, "guideline", f"missing root_plan task {definition.root_plan!r}"
            )
        )
    elif root.kind is not TaskKind.PLAN:
        issues.append(
            ValidationIssue(ERROR, "guideline", "root_plan must name a plan task")
        )

    for task in definition.tasks:
        loc = f"task {task.name}"
        _check_task_shape(task, issues)
        for source in task.sources:
            if source not in definition.item_map:
                issues.append(ValidationIssue(ERROR, loc, f"unknown source item {source!r}"))
        if task.precondition is not None:
            _check_expression(task.precondition, definition, f"{loc} precondition", issues)
            unstable = _stateful_refs(task.precondition) - set(task.antecedents)
            if unstable:
                issues.append(
                    ValidationIssue(
                        WARNING,
                        loc,
                        "precondition reads state of non-antecedent task(s) "
                        f"{sorted(unstable)}; the value may not be settled",
                    )
                )
        for cand in task.candidates:
            cloc = f"{loc}, candidate {cand.name}"
            for i, arg in enumerate(cand.arguments):
                if arg.weight == 0:
                    issues.append(
                        ValidationIssue(ERROR, f"{cloc}, argument {i}", "weight must be nonzero")
                    )
                _check_expression(arg.condition, definition, f"{cloc}, argument {i}", issues)
            if cand.recommend_expr is not None:
                _check_expression(cand.recommend_expr, definition, cloc, issues)

    _check_component_tree(definition, issues)
    _check_antecedents(definition, issues)
    return issues


def errors_of(issues: list[ValidationIssue]) -> list[ValidationIssue]:
    return [i for i in issues if i.severity == ERROR]
