"""Enactment operations: scheduling rules and the caller-facing surface.

``advance`` applies these rules until none fires:

(a) a dormant task whose plan is in progress and whose antecedents have all
    completed evaluates its precondition: true starts it, false discards it,
    unknown leaves it dormant for later data;
(b) a dormant task that can no longer run (an antecedent discarded, or its
    plan already closed) is discarded;
(c) an in-progress enquiry completes once every source item is bound;
(d) an in-progress decision in automatic mode commits its recommended
    candidates and completes, waiting while any recommendation is unknown;
(e) an in-progress plan completes once every child is terminal.

Actions never complete on their own: they are the engine's recommendations,
finished (or dropped) by whoever performs them.

Because preconditions may reference only data items and the state of
antecedent tasks (the validator warns otherwise), the fixpoint is the same
whatever order the rules fire in, and each task moves at most twice, so a
round of ``advance`` performs at most ``2 * len(tasks)`` transitions.
"""
from __future__ import annotations

import itertools
import logging
from typing import Iterable

from ..model.definition import Candidate, GuidelineDefinition, TaskKind
from ..model.validation import errors_of, validate_guideline
from .evaluator import EvaluationError, evaluate, netsupport, recommendation_of
from .instance import (
    CompletionReport,
    DataValueBinding,
    EngineInstance,
    GateViolationError,
    InvalidDefinitionError,
    TaskState,
    TaskStateError,
    TransitionCause,
    TransitionRecord,
    UnknownItemError,
    check_binding_type,
    report_of,
)
from .tristate import UNKNOWN

logger = logging.getLogger(__name__)

_instance_counter = itertools.count(1)


def enact(
    definition: GuidelineDefinition,
    patient_id: str,
    initial_bindings: Iterable[DataValueBinding] = (),
    *,
    instance_id: str | None = None,
    decision_mode: str = "automatic",
    clock=None,
    validated: bool = False,
) -> EngineInstance:
    """Create an instance with the root plan active and everything else dormant.

    Pass ``validated=True`` when the definition already went through
    validation at load time to skip re-checking per enactment.
    """
    if not validated:
        issues = errors_of(validate_guideline(definition))
        if issues:
            raise InvalidDefinitionError(issues)
    inst = EngineInstance(
        instance_id=instance_id or f"inst-{next(_instance_counter)}",
        definition=definition,
        patient_id=patient_id,
        clock=clock,
        decision_mode=decision_mode,
    )
    inst.op_log.append(("enact", inst.clock(), patient_id, decision_mode))
    inst._transition(
        definition.root_plan, TaskState.IN_PROGRESS, TransitionCause.ANTECEDENTS_MET
    )
    if initial_bindings:
        set_data_values(inst, initial_bindings)
    return inst


def set_data_values(
    inst: EngineInstance, values: Iterable[DataValueBinding]
) -> set[str]:
    """Bind data items; returns the names whose value actually changed.

    Never transitions tasks: callers drive scheduling with ``advance``.
    """
    inst._require_mutable()
    changed: set[str] = set()
    applied: list[tuple] = []
    for binding in values:
        item = inst.definition.item_map.get(binding.item)
        if item is None:
            raise UnknownItemError(f"unknown data item {binding.item!r}")
        value = check_binding_type(item.value_type, binding.value)
        current = inst.bindings.get(binding.item)
        if current is not None and current.value == value and type(current.value) is type(value):
            continue
        inst.bindings[binding.item] = DataValueBinding(
            item=binding.item,
            value=value,
            set_at=inst.clock(),
            origin=binding.origin,
        )
        applied.append((binding.item, value, binding.origin))
        changed.add(binding.item)
    inst.op_log.append(("set", inst.clock(), tuple(applied)))
    return changed


def _parent_state(inst: EngineInstance, task_name: str) -> TaskState:
    parent = inst.definition.parent_of.get(task_name)
    if parent is None:
        return TaskState.IN_PROGRESS  # the root has no plan above it
    return inst.state_of(parent)


def _auto_commits(
    inst: EngineInstance, decision_name: str, close_world: bool = False
) -> tuple[str, ...] | None:
    """Commit set for an automatic decision, or None while data is pending.

    With ``close_world`` unknown recommendations count as not recommended,
    which is how run-to-completion settles decisions whose data never came.
    """
    task = inst.definition.task(decision_name)
    recommended: list[Candidate] = []
    for candidate in task.candidates:
        verdict = recommendation_of(inst, decision_name, candidate)
        if verdict is UNKNOWN:
            if not close_world:
                return None
            continue
        if verdict:
            recommended.append(candidate)
    if task.meta.get("gate") == "XOR" and len(recommended) > 1:
        # Exactly one may be committed: highest net support, declaration
        # order breaking ties.
        recommended = [
            max(recommended, key=lambda c: netsupport(inst, c.name))
        ]
    return tuple(c.name for c in recommended)


def _precondition_verdict(inst: EngineInstance, task):
    if task.precondition is None:
        return True
    verdict = evaluate(task.precondition, inst)
    if verdict is not True and verdict is not False and verdict is not UNKNOWN:
        raise EvaluationError(
            f"precondition of {task.name!r} is not boolean: {verdict!r}"
        )
    return verdict


def _advance_pass(inst: EngineInstance, out: list[TransitionRecord]) -> bool:
    fired = False
    for task in inst.definition.tasks:
        state = inst.state_of(task.name)
        if state is TaskState.DORMANT:
            parent_state = _parent_state(inst, task.name)
            if parent_state in (TaskState.COMPLETED, TaskState.DISCARDED):
                out.append(
                    inst._transition(task.name, TaskState.DISCARDED, TransitionCause.PLAN_CLOSURE)
                )
                fired = True
                continue
            if parent_state is not TaskState.IN_PROGRESS:
                continue
            antecedent_states = [inst.state_of(a) for a in task.antecedents]
            if any(s is TaskState.DISCARDED for s in antecedent_states):
                out.append(
                    inst._transition(task.name, TaskState.DISCARDED, TransitionCause.PLAN_CLOSURE)
                )
                fired = True
                continue
            if not all(s is TaskState.COMPLETED for s in antecedent_states):
                continue
            verdict = _precondition_verdict(inst, task)
            if verdict is True:
                out.append(
                    inst._transition(task.name, TaskState.IN_PROGRESS, TransitionCause.ANTECEDENTS_MET)
                )
                fired = True
            elif verdict is False:
                out.append(
                    inst._transition(task.name, TaskState.DISCARDED, TransitionCause.PRECONDITION_FALSE)
                )
                fired = True
            # unknown: stay dormant until data arrives
        elif state is TaskState.IN_PROGRESS:
            if task.kind is TaskKind.ENQUIRY:
                if all(inst.value_of(s) is not UNKNOWN for s in task.sources):
                    out.append(
                        inst._transition(task.name, TaskState.COMPLETED, TransitionCause.EXTERNAL_COMPLETE)
                    )
                    fired = True
            elif task.kind is TaskKind.DECISION and inst.decision_mode == "automatic":
                commits = _auto_commits(inst, task.name)
                if commits is not None:
                    inst.decision_records[task.name] = commits
                    out.append(
                        inst._transition(task.name, TaskState.COMPLETED, TransitionCause.CANDIDATE_COMMIT)
                    )
                    fired = True
            elif task.kind is TaskKind.PLAN:
                children = [inst.state_of(c) for c in task.components]
                if all(s in (TaskState.COMPLETED, TaskState.DISCARDED) for s in children):
                    out.append(
                        inst._transition(task.name, TaskState.COMPLETED, TransitionCause.PLAN_CLOSURE)
                    )
                    fired = True
    return fired


def advance(inst: EngineInstance) -> list[TransitionRecord]:
    """Apply scheduling rules to fixpoint; returns the transitions performed."""
    inst._require_mutable()
    inst.op_log.append(("advance", inst.clock()))
    records: list[TransitionRecord] = []
    while _advance_pass(inst, records):
        pass
    return records


def _advance_only(inst: EngineInstance) -> list[TransitionRecord]:
    # Fixpoint loop without op recording, used inside composite operations.
    records: list[TransitionRecord] = []
    while _advance_pass(inst, records):
        pass
    return records


def _finalize_pass(inst: EngineInstance, out: list[TransitionRecord]) -> bool:
    """Close-world wrap-up of tasks the scheduler left waiting for data."""
    fired = False
    for task in inst.definition.tasks:
        state = inst.state_of(task.name)
        if state is TaskState.DORMANT:
            if _parent_state(inst, task.name) is not TaskState.IN_PROGRESS:
                continue
            if not all(
                inst.state_of(a) is TaskState.COMPLETED for a in task.antecedents
            ):
                continue
            # Scheduling already handled true/false; reaching here dormant
            # means the precondition is stuck at unknown.
            out.append(
                inst._transition(task.name, TaskState.DISCARDED, TransitionCause.FINALIZATION)
            )
            fired = True
        elif state is TaskState.IN_PROGRESS:
            if task.kind is TaskKind.ENQUIRY or task.kind is TaskKind.ACTION:
                out.append(
                    inst._transition(task.name, TaskState.DISCARDED, TransitionCause.FINALIZATION)
                )
                fired = True
            elif task.kind is TaskKind.DECISION:
                commits = _auto_commits(inst, task.name, close_world=True)
                if inst.decision_mode == "manual":
                    commits = inst.committed(task.name)
                inst.decision_records[task.name] = tuple(commits or ())
                out.append(
                    inst._transition(task.name, TaskState.COMPLETED, TransitionCause.FINALIZATION)
                )
                fired = True
    return fired


def run_to_completion(inst: EngineInstance) -> CompletionReport:
    """Drive the instance to a terminal state under close-world finalization.

    Idempotent on a terminal instance: the report is recomputed from the
    transition log.
    """
    if inst.terminated or inst.is_terminal():
        return report_of(inst)
    inst.op_log.append(("run_to_completion", inst.clock()))
    records: list[TransitionRecord] = []
    _advance_only(inst)
    guard = 4 * len(inst.definition.tasks) + 4
    while not inst.is_terminal():
        guard -= 1
        if guard < 0:  # pragma: no cover - structural bug trap
            raise TaskStateError(
                f"instance {inst.instance_id} failed to finalize; stuck states: "
                + ", ".join(
                    f"{n}={ti.state.value}"
                    for n, ti in inst.task_states.items()
                    if ti.state not in (TaskState.COMPLETED, TaskState.DISCARDED)
                )
            )
        _finalize_pass(inst, records)
        _advance_only(inst)
    return report_of(inst)


def active_tasks(inst: EngineInstance, kinds: set[TaskKind]):
    """In-progress tasks of the requested kinds, in definition order."""
    return [
        task
        for task in inst.definition.tasks
        if task.kind in kinds and inst.state_of(task.name) is TaskState.IN_PROGRESS
    ]


def complete_action(
    inst: EngineInstance, task_name: str, result: str | None = None
) -> TransitionRecord:
    inst._require_mutable()
    task = inst.definition.task_map.get(task_name)
    if task is None:
        raise UnknownItemError(f"unknown task {task_name!r}")
    if task.kind is not TaskKind.ACTION:
        raise TaskStateError(f"task {task_name!r} is a {task.kind.value}, not an action")
    if inst.state_of(task_name) is not TaskState.IN_PROGRESS:
        raise TaskStateError(f"action {task_name!r} is not in progress")
    if result is not None:
        inst.action_results[task_name] = result
    record = inst._transition(
        task_name, TaskState.COMPLETED, TransitionCause.EXTERNAL_COMPLETE, result=result
    )
    inst.op_log.append(("complete_action", inst.clock(), task_name, result))
    return record


def discard_task(inst: EngineInstance, task_name: str) -> TransitionRecord:
    """Drop an in-progress task a caller cannot carry out (bad meta, failed handler)."""
    inst._require_mutable()
    if inst.state_of(task_name) is not TaskState.IN_PROGRESS:
        raise TaskStateError(f"task {task_name!r} is not in progress")
    record = inst._transition(task_name, TaskState.DISCARDED, TransitionCause.FINALIZATION)
    inst.op_log.append(("discard_task", inst.clock(), task_name))
    return record


def decision_state(inst: EngineInstance, decision_name: str):
    """Per-candidate (name, netsupport, recommended, committed) snapshot."""
    task = inst.definition.task_map.get(decision_name)
    if task is None or task.kind is not TaskKind.DECISION:
        raise UnknownItemError(f"unknown decision {decision_name!r}")
    committed = inst.committed(decision_name)
    return [
        (
            candidate.name,
            netsupport(inst, candidate.name),
            recommendation_of(inst, decision_name, candidate),
            candidate.name in committed,
        )
        for candidate in task.candidates
    ]


def commit_candidate(
    inst: EngineInstance, decision_name: str, candidate_name: str
) -> TransitionRecord | None:
    """Record a commit; in automatic mode this also closes the decision.

    In manual mode the decision stays open for further commits (gate
    permitting) until :func:`close_decision`; the return value is then None.
    """
    inst._require_mutable()
    task = inst.definition.task_map.get(decision_name)
    if task is None or task.kind is not TaskKind.DECISION:
        raise UnknownItemError(f"unknown decision {decision_name!r}")
    if inst.state_of(decision_name) is not TaskState.IN_PROGRESS:
        raise TaskStateError(f"decision {decision_name!r} is not in progress")
    if candidate_name not in {c.name for c in task.candidates}:
        raise UnknownItemError(
            f"decision {decision_name!r} has no candidate {candidate_name!r}"
        )
    commits = inst._open_commits.setdefault(decision_name, [])
    if candidate_name in commits:
        raise GateViolationError(f"candidate {candidate_name!r} already committed")
    if task.meta.get("gate") == "XOR" and commits:
        raise GateViolationError(
            f"decision {decision_name!r} allows exactly one commit"
        )
    commits.append(candidate_name)
    inst.op_log.append(("commit_candidate", inst.clock(), decision_name, candidate_name))
    if inst.decision_mode == "automatic":
        return close_decision(inst, decision_name)
    return None


def close_decision(inst: EngineInstance, decision_name: str) -> TransitionRecord:
    """Complete a decision from its accumulated commits (at least one required)."""
    inst._require_mutable()
    if inst.state_of(decision_name) is not TaskState.IN_PROGRESS:
        raise TaskStateError(f"decision {decision_name!r} is not in progress")
    commits = inst._open_commits.pop(decision_name, [])
    if not commits:
        raise TaskStateError(f"decision {decision_name!r} has no commits to close")
    inst.decision_records[decision_name] = tuple(commits)
    inst.op_log.append(("close_decision", inst.clock(), decision_name))
    return inst._transition(
        decision_name, TaskState.COMPLETED, TransitionCause.CANDIDATE_COMMIT
    )


def terminate(inst: EngineInstance) -> CompletionReport:
    """Force the instance terminal and freeze it. Idempotent.

    Non-plan tasks and dormant plans are discarded; plans whose children are
    then all terminal close normally, so a healthy root plan ends completed.
    """
    if inst.terminated:
        return report_of(inst)
    inst.op_log.append(("terminate", inst.clock()))
    guard = 4 * len(inst.definition.tasks) + 4
    while not inst.is_terminal():
        guard -= 1
        if guard < 0:  # pragma: no cover - structural bug trap
            raise TaskStateError(f"instance {inst.instance_id} failed to terminate")
        for task in inst.definition.tasks:
            state = inst.state_of(task.name)
            if state is TaskState.DORMANT:
                inst._transition(task.name, TaskState.DISCARDED, TransitionCause.FINALIZATION)
            elif state is TaskState.IN_PROGRESS and task.kind is not TaskKind.PLAN:
                inst._transition(task.name, TaskState.DISCARDED, TransitionCause.FINALIZATION)
        _advance_only(inst)
    inst.terminated = True
    return report_of(inst)
