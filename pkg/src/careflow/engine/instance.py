"""Runtime state of one enacted guideline instance.

Task lifecycle::

    dormant ──> in_progress ──> completed
       │              └───────> discarded
       └──────────────────────> discarded

Transition causes:

* ``antecedents_met`` — task started: plan active, antecedents completed,
  precondition true.
* ``precondition_false`` — task discarded because its precondition was
  decidably false when its turn came.
* ``plan_closure`` — structural closure: a plan completed because every
  child is terminal, or a task was discarded because the surrounding flow
  can no longer reach it (an antecedent or its plan was discarded).
* ``external_complete`` — completion driven from outside the scheduler: an
  enquiry whose sources were all supplied, or an action completed by a
  caller.
* ``candidate_commit`` — a decision completed through candidate commits.
* ``finalization`` — close-world wrap-up: run-to-completion or terminate
  resolved a task that normal scheduling left open.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

from ..model.definition import GuidelineDefinition, ValueType
from .tristate import UNKNOWN


class TaskState(str, Enum):
    DORMANT = "dormant"
    IN_PROGRESS = "in_progress"
    COMPLETED = "completed"
    DISCARDED = "discarded"


TERMINAL_STATES = (TaskState.COMPLETED, TaskState.DISCARDED)

LEGAL_TRANSITIONS = {
    (TaskState.DORMANT, TaskState.IN_PROGRESS),
    (TaskState.DORMANT, TaskState.DISCARDED),
    (TaskState.IN_PROGRESS, TaskState.COMPLETED),
    (TaskState.IN_PROGRESS, TaskState.DISCARDED),
}


class TransitionCause(str, Enum):
    ANTECEDENTS_MET = "antecedents_met"
    PRECONDITION_FALSE = "precondition_false"
    FINALIZATION = "finalization"
    EXTERNAL_COMPLETE = "external_complete"
    CANDIDATE_COMMIT = "candidate_commit"
    PLAN_CLOSURE = "plan_closure"


class EngineError(Exception):
    """Base class for enactment failures."""


class InvalidDefinitionError(EngineError):
    def __init__(self, issues):
        super().__init__("; ".join(str(i) for i in issues))
        self.issues = issues


class UnknownItemError(EngineError):
    pass


class BindingTypeError(EngineError):
    pass


class TaskStateError(EngineError):
    """Operation applied to a task in the wrong state or of the wrong kind."""


class InstanceFrozenError(EngineError):
    """Mutation attempted on a terminated instance."""


class GateViolationError(EngineError):
    """Commit would exceed what the decision's gate allows."""


@dataclass
class TaskInstance:
    task: str
    state: TaskState = TaskState.DORMANT
    entered_at: int = 0


@dataclass(frozen=True)
class DataValueBinding:
    item: str
    value: object  # typed value or UNKNOWN
    set_at: int = 0
    origin: str = "external"  # external | enquiry | engine


@dataclass(frozen=True)
class TransitionRecord:
    seq: int
    task: str
    from_state: TaskState
    to_state: TaskState
    cause: TransitionCause
    at: int
    result: str | None = None  # action result text, when supplied


@dataclass(frozen=True)
class ReportedAction:
    name: str
    meta: dict[str, str]


@dataclass(frozen=True)
class CompletionReport:
    instance_id: str
    recommended: tuple[ReportedAction, ...]
    final_states: dict[str, TaskState]


def check_binding_type(value_type: ValueType, value: object) -> object:
    """Coerce/verify a binding value against its declared type."""
    if value is UNKNOWN or value is None:
        return UNKNOWN
    if value_type is ValueType.BOOLEAN:
        if isinstance(value, bool):
            return value
    elif value_type is ValueType.INTEGER:
        if isinstance(value, int) and not isinstance(value, bool):
            return value
    elif value_type is ValueType.REAL:
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
    elif value_type in (ValueType.TEXT, ValueType.CODE):
        if isinstance(value, str):
            return value
    raise BindingTypeError(
        f"value {value!r} does not match declared type {value_type.value}"
    )


class EngineInstance:
    """Single-writer state machine for one guideline instance.

    All mutation goes through the operations in :mod:`careflow.engine.runtime`;
    callers must serialize mutations per instance. Reads of a terminal
    instance are safe from anywhere.
    """

    def __init__(
        self,
        instance_id: str,
        definition: GuidelineDefinition,
        patient_id: str,
        clock: Callable[[], int] | None = None,
        decision_mode: str = "automatic",
    ):
        if decision_mode not in ("automatic", "manual"):
            raise ValueError(f"bad decision mode {decision_mode!r}")
        self.instance_id = instance_id
        self.definition = definition
        self.patient_id = patient_id
        self.clock = clock or (lambda: 0)
        self.decision_mode = decision_mode
        self.task_states: dict[str, TaskInstance] = {
            t.name: TaskInstance(t.name) for t in definition.tasks
        }
        self.bindings: dict[str, DataValueBinding] = {}
        self.decision_records: dict[str, tuple[str, ...]] = {}
        self.transition_log: list[TransitionRecord] = []
        self.action_results: dict[str, str] = {}
        self.terminated = False
        self._open_commits: dict[str, list[str]] = {}
        # Successful operations in call order, for replay (e.g. re-running the
        # same sequence against a meta-stripped definition).
        self.op_log: list[tuple] = []

    # -- reads ------------------------------------------------------------

    def state_of(self, task: str) -> TaskState:
        return self.task_states[task].state

    def value_of(self, item: str) -> object:
        binding = self.bindings.get(item)
        return binding.value if binding is not None else UNKNOWN

    def committed(self, decision: str) -> tuple[str, ...]:
        closed = self.decision_records.get(decision)
        if closed is not None:
            return closed
        return tuple(self._open_commits.get(decision, ()))

    def result_of(self, task: str) -> object:
        return self.action_results.get(task, UNKNOWN)

    def is_terminal(self) -> bool:
        return all(
            ti.state in TERMINAL_STATES for ti in self.task_states.values()
        )

    def ever_in_progress(self) -> set[str]:
        return {
            r.task
            for r in self.transition_log
            if r.to_state in (TaskState.IN_PROGRESS, TaskState.COMPLETED)
        }

    # -- internal mutation ------------------------------------------------

    def _require_mutable(self) -> None:
        if self.terminated:
            raise InstanceFrozenError(f"instance {self.instance_id} is terminated")

    def _transition(
        self,
        task: str,
        to_state: TaskState,
        cause: TransitionCause,
        result: str | None = None,
    ) -> TransitionRecord:
        entry = self.task_states[task]
        if (entry.state, to_state) not in LEGAL_TRANSITIONS:
            raise TaskStateError(
                f"illegal transition {entry.state.value} -> {to_state.value} for task {task!r}"
            )
        now = self.clock()
        record = TransitionRecord(
            seq=len(self.transition_log) + 1,
            task=task,
            from_state=entry.state,
            to_state=to_state,
            cause=cause,
            at=now,
            result=result,
        )
        entry.state = to_state
        entry.entered_at = now
        self.transition_log.append(record)
        return record


def export_transition_dict(instance_id: str, record: TransitionRecord) -> dict:
    """Transition as a dict in the stable export field order."""
    return {
        "instance_id": instance_id,
        "seq": record.seq,
        "task": record.task,
        "from": record.from_state.value,
        "to": record.to_state.value,
        "cause": record.cause.value,
        "at": record.at,
    }


def export_transition_line(instance_id: str, record: TransitionRecord) -> str:
    """One transition as a stable-field-order journal/report line."""
    import json

    return json.dumps(export_transition_dict(instance_id, record), separators=(", ", ": "))


def report_of(inst: EngineInstance) -> CompletionReport:
    """Recommended actions (ever activated) plus final task states."""
    activated = inst.ever_in_progress()
    recommended = tuple(
        ReportedAction(t.name, dict(t.meta))
        for t in inst.definition.tasks
        if t.kind.value == "action" and t.name in activated
    )
    return CompletionReport(
        instance_id=inst.instance_id,
        recommended=recommended,
        final_states={name: ti.state for name, ti in inst.task_states.items()},
    )
